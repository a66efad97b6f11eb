#include "sgg/imggen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "sgg/error.hpp"
#include "sgg/num/ops.hpp"
#include "sgg/rng.hpp"

namespace sgg::imggen {

using num::Tensor;

std::size_t stage_count(const GanConfig& cfg) {
  if (!std::has_single_bit(cfg.image_size) || !std::has_single_bit(cfg.start_resolution) ||
      cfg.image_size <= cfg.start_resolution)
    throw std::invalid_argument("GanConfig: image_size and start_resolution must be powers of two, image > start");
  return static_cast<std::size_t>(std::countr_zero(cfg.image_size / cfg.start_resolution));
}

GanParams GanParams::create(nn::ParamStore& store, const std::string& gp, const std::string& dp, const GanConfig& cfg,
                            Rng& rng) {
  if (cfg.image_size < 16 || cfg.image_size % 16 != 0)
    throw std::invalid_argument("GanConfig: image_size must be a multiple of 16 for the discriminator");
  GanParams p;
  p.cfg = cfg;
  const std::size_t E = cfg.layout_dim, C = cfg.gen_channels;
  p.project = nn::Linear::create(store, gp + ".project", cfg.object_dim, E, rng);
  const std::size_t n = stage_count(cfg);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t in = (s == 0 ? cfg.noise_channels : C) + E;
    const std::string pre = gp + ".stage" + std::to_string(s);
    p.stages.push_back({nn::Conv2d::create(store, pre + ".conv1", in, C, 3, 1, 1, rng),
                        nn::Conv2d::create(store, pre + ".conv2", C, C, 3, 1, 1, rng)});
  }
  p.final_a = nn::Conv2d::create(store, gp + ".final1", C, C, 3, 1, 1, rng);
  p.final_b = nn::Conv2d::create(store, gp + ".final2", C, 3, 3, 1, 1, rng);

  std::size_t in = 3 + E;
  for (std::size_t s = 0; s < 4; ++s) {
    p.disc_convs.push_back(
        nn::Conv2d::create(store, dp + ".conv" + std::to_string(s), in, cfg.disc_channels, 4, 2, 1, rng));
    in = cfg.disc_channels;
  }
  const std::size_t side = cfg.image_size / 16;
  p.disc_out = nn::Linear::create(store, dp + ".out", cfg.disc_channels * side * side, 1, rng);
  return p;
}

SceneLayout compose_layout(const std::vector<std::pair<Tensor, Box>>& objects, std::size_t grid, std::size_t h,
                           std::size_t w) {
  if (objects.empty()) throw std::invalid_argument("compose_layout: empty object list");
  SceneLayout out;
  for (const auto& [embedding, box] : objects) {
    Tensor tiled = num::broadcast_spatial(embedding, grid, grid);
    out.object_layouts.push_back(num::bilinear_warp(tiled, box, h, w));
  }
  out.grid = out.object_layouts[0];
  for (std::size_t i = 1; i < out.object_layouts.size(); ++i) out.grid = num::add(out.grid, out.object_layouts[i]);
  return out;
}

SceneLayout layout_from_objects(const std::vector<Tensor>& objects, const std::vector<Box>& boxes, double scene_w,
                                double scene_h, const GanParams& params) {
  if (objects.size() != boxes.size()) throw std::invalid_argument("layout_from_objects: objects/boxes size mismatch");
  const double S = static_cast<double>(params.cfg.image_size);
  std::vector<std::pair<Tensor, Box>> items;
  for (std::size_t i = 0; i < objects.size(); ++i)
    items.emplace_back(params.project(objects[i]), scale_box(boxes[i], S / scene_w, S / scene_h));
  return compose_layout(items, params.cfg.grid, params.cfg.image_size, params.cfg.image_size);
}

Tensor noise_for(std::uint64_t seed, const GanConfig& cfg) {
  Rng rng(seed);
  const std::size_t r = cfg.start_resolution;
  std::vector<double> z(cfg.noise_channels * r * r);
  for (auto& v : z) v = rng.normal();
  return Tensor::from({cfg.noise_channels, r, r}, std::move(z));
}

Tensor generate_image(const SceneLayout& layout, std::uint64_t noise_seed, const GanParams& params) {
  return generate_image(layout, noise_for(noise_seed, params.cfg), params);
}

Tensor generate_image(const SceneLayout& layout, const Tensor& noise, const GanParams& params) {
  const GanConfig& cfg = params.cfg;
  const num::Shape want{cfg.layout_dim, cfg.image_size, cfg.image_size};
  if (layout.grid.shape() != want)
    throw DimensionError("generate_image: layout " + num::shape_string(layout.grid.shape()) + ", expected " +
                         num::shape_string(want));
  Tensor x = noise;
  std::size_t res = cfg.start_resolution;
  for (const auto& stage : params.stages) {
    Tensor cond = num::avg_pool(layout.grid, cfg.image_size / res);
    x = num::concat({x, cond}, 0);
    x = num::leaky_relu(stage.first(x), cfg.leaky_slope);
    x = num::leaky_relu(stage.second(x), cfg.leaky_slope);
    x = num::upsample_nearest(x);
    res *= 2;
  }
  x = num::leaky_relu(params.final_a(x), cfg.leaky_slope);
  return num::tanh(params.final_b(x));
}

Tensor discriminate(const Tensor& image, const Tensor& layout, const GanParams& params) {
  Tensor x = num::concat({image, layout}, 0);
  for (const auto& c : params.disc_convs) x = num::leaky_relu(c(x), params.cfg.leaky_slope);
  return num::sigmoid(params.disc_out(num::reshape(x, {x.size()})));
}

Tensor pixel_loss(const Tensor& real, const Tensor& fake) { return num::mean(num::abs(num::sub(real, fake))); }

GanLosses gan_losses_from_scores(const Tensor& d_real, const Tensor& d_fake_detached, const Tensor& d_fake,
                                 const Tensor& pixel, double lambda_pixel) {
  auto safe_log = [](const Tensor& p) { return num::log(num::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon)); };
  auto safe_log1m = [](const Tensor& p) {
    return num::log(num::add_scalar(num::scale(num::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon), -1.0), 1.0));
  };
  GanLosses out;
  out.pixel = pixel;
  out.d_value = num::add(safe_log(d_real), safe_log1m(d_fake_detached));
  out.d_objective = num::scale(out.d_value, -1.0);
  Tensor log_d_fake = safe_log(d_fake);
  out.g_value = num::sub(log_d_fake, num::scale(pixel, lambda_pixel));
  out.g_objective = num::scale(out.g_value, -1.0);
  return out;
}

GanLosses gan_losses(const Tensor& real, const Tensor& fake, const Tensor& layout, const GanParams& params) {
  if (real.shape() != fake.shape())
    throw DimensionError("gan_losses: real " + num::shape_string(real.shape()) + " vs fake " +
                         num::shape_string(fake.shape()));
  Tensor layout_c = num::detach(layout);
  Tensor d_real = discriminate(real, layout_c, params);
  Tensor d_fake_detached = discriminate(num::detach(fake), layout_c, params);
  Tensor d_fake = discriminate(fake, layout, params);
  return gan_losses_from_scores(d_real, d_fake_detached, d_fake, pixel_loss(real, fake), params.cfg.lambda_pixel);
}

namespace {

constexpr double kPalette[][3] = {
    {0.90, 0.20, 0.20}, {0.20, 0.70, 0.25}, {0.20, 0.35, 0.90}, {0.95, 0.80, 0.15}, {0.70, 0.25, 0.80},
    {0.15, 0.80, 0.80}, {0.95, 0.55, 0.10}, {0.55, 0.35, 0.20}, {0.95, 0.95, 0.95}, {0.10, 0.10, 0.10},
};
constexpr double kBackground = 0.4;

}  // namespace

Tensor render_scene(const Scene& scene) {
  const auto W = static_cast<std::size_t>(scene.width), H = static_cast<std::size_t>(scene.height);
  std::vector<double> img(3 * H * W, 0.0);
  for (std::size_t c = 0; c < 3; ++c) std::fill_n(&img[c * H * W], H * W, 2.0 * kBackground - 1.0);
  for (const auto& o : scene.objects) {
    const auto* col = kPalette[static_cast<std::size_t>(o.label - 1) % std::size(kPalette)];
    for (std::size_t y = 0; y < H; ++y) {
      const double cy = static_cast<double>(y) + 0.5;
      if (cy < o.box.y || cy >= o.box.bottom()) continue;
      for (std::size_t x = 0; x < W; ++x) {
        const double cx = static_cast<double>(x) + 0.5;
        if (cx < o.box.x || cx >= o.box.right()) continue;
        for (std::size_t c = 0; c < 3; ++c) img[(c * H + y) * W + x] = 2.0 * col[c] - 1.0;
      }
    }
  }
  return Tensor::from({3, H, W}, std::move(img));
}

Tensor resize_to(const Tensor& image, std::size_t size) {
  if (image.rank() != 3 || image.dim(1) != image.dim(2) || image.dim(1) % size != 0)
    throw DimensionError("resize_to: cannot pool " + num::shape_string(image.shape()) + " to " + std::to_string(size));
  return num::avg_pool(image, image.dim(1) / size);
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw DimensionError("write_ppm: expected [3 x H x W]");
  const std::size_t H = image.dim(1), W = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << W << " " << H << "\n255\n";
  std::string row(3 * W, '\0');
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image[(c * H + y) * W + x], -1.0, 1.0);
        row[3 * x + c] = static_cast<char>(static_cast<unsigned char>(std::lround((v + 1.0) * 127.5)));
      }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (next_token() != "P6") throw DataError(path.string() + ": not a binary PPM (P6)");
  std::size_t W = 0, H = 0, maxv = 0;
  try {
    W = std::stoul(next_token());
    H = std::stoul(next_token());
    maxv = std::stoul(next_token());
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PPM header");
  }
  if (W == 0 || H == 0 || maxv != 255) throw DataError(path.string() + ": unsupported PPM geometry or depth");
  std::vector<unsigned char> raw(3 * W * H);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw DataError(path.string() + ": truncated PPM data");
  std::vector<double> img(3 * H * W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) img[(c * H + y) * W + x] = raw[3 * (y * W + x) + c] / 127.5 - 1.0;
  return Tensor::from({3, H, W}, std::move(img));
}

}  // namespace sgg::imggen
