#pragma once

#include <cstddef>
#include <vector>

#include "sgg/box.hpp"
#include "sgg/num/tensor.hpp"

namespace sgg::num {

// ---- linear algebra ------------------------------------------------------

// [m x k] x [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// W [out x in] applied to x [in], plus b [out].
Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b);
// Row-wise affine map: X [k x in] -> [k x out] with W [out x in], b [out].
Tensor affine_rows(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
// x * s where s holds exactly one element.
Tensor scale_by(const Tensor& x, const Tensor& s);

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);
// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
Tensor smooth_l1(const Tensor& x);

enum class Elementwise { kTanh, kRelu, kSigmoid, kAbs, kMul, kAdd, kSub };
// Dispatcher over the unary/binary kinds; `b` is ignored for unary kinds.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b = Tensor());

// ---- structure -------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);
// Same value, cut from the tape.
Tensor detach(const Tensor& x);
// x [n] -> [k x n], each row a copy of x.
Tensor repeat_rows(const Tensor& x, std::size_t k);
// Row-wise broadcast add: x [m x n] + b [n].
Tensor add_row_broadcast(const Tensor& x, const Tensor& b);
// Stack equal-shape tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

// ---- spatial ---------------------------------------------------------------

// Cross-correlation. input [C x H x W], kernel [O x C x kh x kw] -> [O x H' x W'],
// H' = (H + 2 pad - kh) / stride + 1, which must be integral and positive.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride = 1,
              std::size_t pad = 0);
// x [C x H x W] + b [C] per channel.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);
// [C x H x W] -> [C x 2H x 2W], each cell copied into a 2x2 block.
Tensor upsample_nearest(const Tensor& x);
// Mean over non-overlapping factor x factor windows.
Tensor avg_pool(const Tensor& x, std::size_t factor);
// [C x H x W] -> [C], mean over positions.
Tensor spatial_mean(const Tensor& x);
// [C] -> [C x H x W], constant over positions.
Tensor broadcast_spatial(const Tensor& x, std::size_t h, std::size_t w);
// Stretches embedding [D x gh x gw] into `box` on an out_h x out_w canvas.
// Output pixel centres inside the box are sampled bilinearly (edge-clamped)
// at box-normalized coordinates; everything outside the box is zero.
Tensor bilinear_warp(const Tensor& embedding, const Box& box, std::size_t out_h,
                     std::size_t out_w);

}  // namespace sgg::num
