#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sgg/nn.hpp"
#include "sgg/scene.hpp"

namespace sgg::imggen {

struct GanConfig {
  std::size_t image_size = 64;       // output side; 16 for desk-scale runs
  std::size_t start_resolution = 4;  // first refinement module's resolution
  std::size_t object_dim = 32;       // width of incoming object vectors
  std::size_t layout_dim = 8;        // per-object layout embedding width
  std::size_t gen_channels = 16;
  std::size_t noise_channels = 4;
  std::size_t disc_channels = 16;
  std::size_t grid = 8;  // object embeddings are tiled to grid x grid before warping
  double leaky_slope = 0.2;
  double lambda_pixel = 1.0;  // lambda_p
};

// log2(image_size / start_resolution); throws std::invalid_argument unless
// both are powers of two with image_size > start_resolution.
std::size_t stage_count(const GanConfig& cfg);

struct RefinementStage {
  nn::Conv2d first;
  nn::Conv2d second;
};

struct GanParams {
  GanConfig cfg;
  nn::Linear project;  // object vector -> layout embedding
  std::vector<RefinementStage> stages;
  nn::Conv2d final_a;
  nn::Conv2d final_b;  // -> 3 channels
  std::vector<nn::Conv2d> disc_convs;
  nn::Linear disc_out;

  // Generator-side tensors are registered under "<gen_prefix>.", the
  // discriminator under "<disc_prefix>.".
  static GanParams create(nn::ParamStore& store, const std::string& gen_prefix, const std::string& disc_prefix,
                          const GanConfig& cfg, Rng& rng);
};

struct SceneLayout {
  num::Tensor grid;                         // [E x H x W]
  std::vector<num::Tensor> object_layouts;  // each [E x H x W]
};

// Each embedding [E] is tiled to E x g x g, bilinearly warped into its box
// on an h x w canvas, and the per-object layouts are summed.
SceneLayout compose_layout(const std::vector<std::pair<num::Tensor, Box>>& objects, std::size_t grid,
                           std::size_t h, std::size_t w);

// Projects object vectors and composes the layout on the generator canvas;
// boxes are given in scene pixel coordinates of a scene_w x scene_h image.
SceneLayout layout_from_objects(const std::vector<num::Tensor>& objects, const std::vector<Box>& boxes,
                                double scene_w, double scene_h, const GanParams& params);

num::Tensor noise_for(std::uint64_t seed, const GanConfig& cfg);

// Cascaded refinement: noise at the start resolution, then per stage
// concat(previous, avg-pooled layout) -> two 3x3 convs (leaky ReLU) ->
// nearest 2x upsample; two final convs and tanh give [3 x S x S].
num::Tensor generate_image(const SceneLayout& layout, std::uint64_t noise_seed, const GanParams& params);
num::Tensor generate_image(const SceneLayout& layout, const num::Tensor& noise, const GanParams& params);

// Conditional discriminator: image and layout are concatenated channel-wise,
// four stride-2 4x4 convs (pad 1, exact halving), a linear layer and a sigmoid;
// returns [1].
num::Tensor discriminate(const num::Tensor& image, const num::Tensor& layout, const GanParams& params);

// Mean absolute error between images.
num::Tensor pixel_loss(const num::Tensor& real, const num::Tensor& fake);

struct GanLosses {
  num::Tensor d_value;      // log D(real) + log(1 - D(fake)), ascended by D
  num::Tensor g_value;      // log D(fake) - lambda_p * L_pixel, ascended by G
  num::Tensor pixel;        // L_pixel
  num::Tensor d_objective;  // -d_value, descended; gradients reach only D
  num::Tensor g_objective;  // -log D(fake) + lambda_p * L_pixel, descended
};

inline constexpr double kProbEpsilon = 1e-7;

// D outputs are clamped to [1e-7, 1 - 1e-7] before taking logs.
GanLosses gan_losses(const num::Tensor& real, const num::Tensor& fake, const num::Tensor& layout,
                     const GanParams& params);
// Same objectives from precomputed discriminator outputs.
GanLosses gan_losses_from_scores(const num::Tensor& d_real, const num::Tensor& d_fake_detached,
                                 const num::Tensor& d_fake, const num::Tensor& pixel, double lambda_pixel);

// Procedural ground-truth image: flat class colours on a grey background.
num::Tensor render_scene(const Scene& scene);
// Resizes a [3 x H x W] image by average pooling to size x size.
num::Tensor resize_to(const num::Tensor& image, std::size_t size);

// Binary PPM (P6); [-1, 1] maps linearly onto [0, 255].
void write_ppm(const std::filesystem::path& path, const num::Tensor& image);
num::Tensor read_ppm(const std::filesystem::path& path);

}  // namespace sgg::imggen
