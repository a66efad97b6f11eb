#include "sgg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sgg/error.hpp"
#include "sgg/num/ops.hpp"

namespace sgg::train {

using num::Tensor;

double learning_rate(double base, double decay, const std::vector<std::size_t>& milestones, std::size_t step) {
  double lr = base;
  for (auto m : milestones)
    if (step >= m) lr *= decay;
  return lr;
}

void sgd_update(const std::vector<nn::NamedTensor>& params, double lr, double weight_decay) {
  for (const auto& e : params) {
    Tensor t = e.tensor;
    const auto g = t.grad();
    auto p = t.mutable_data();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (g[i] + weight_decay * p[i]);
  }
}

std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch, std::uint64_t seed, std::uint64_t phase,
                                       std::size_t step) {
  if (n == 0) throw DataError("empty dataset");
  std::vector<std::size_t> out;
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm(n);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t pos = step * batch + b;
    const std::size_t epoch = pos / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng(derive_seed({seed, phase, epoch, 0xba7c}));
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % n]);
  }
  return out;
}

namespace {

kb::TripleStore load_store(const RunConfig& cfg) { return kb::TripleStore::ingest(cfg.triples_path()); }

void check_finite(double v, const char* what, int phase, std::size_t step) {
  if (!std::isfinite(v))
    throw NumericError(std::string("non-finite ") + what + " at phase " + std::to_string(phase) + " step " +
                       std::to_string(step));
}

void check_grads(const std::vector<nn::NamedTensor>& params, int phase, std::size_t step) {
  for (const auto& e : params) {
    if (!e.tensor.has_grad()) continue;
    for (double g : e.tensor.grad())
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in " + e.name + " at phase " + std::to_string(phase) + " step " +
                           std::to_string(step));
  }
}

void zero(const std::vector<nn::NamedTensor>& params) {
  for (auto e : params) e.tensor.zero_grad();
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg, Dataset data) : Trainer(cfg, std::move(data), load_store(cfg)) {}

Trainer::Trainer(const RunConfig& cfg, Dataset data, kb::TripleStore store)
    : cfg_(cfg), data_(std::move(data)), model_(cfg.model, data_.labels, std::move(store)) {
  if (data_.scenes.empty()) throw DataError("dataset " + data_.root.string() + " has no scenes");
  state_.seed = cfg_.train.seed;
  if (!cfg_.kb.word_vectors.empty()) {
    const auto p = cfg_.kb.word_vectors.is_absolute() ? cfg_.kb.word_vectors : cfg_.data_dir() / cfg_.kb.word_vectors;
    kb::load_word_vectors(p, model_.vocab(), model_.encoder_params().embedding);
  }
  if (cfg_.train.use_gan) load_images();
}

void Trainer::load_images() {
  const std::size_t S = cfg_.model.gan.image_size;
  for (const auto& scene : data_.scenes) {
    Tensor img;
    if (scene.image.empty()) {
      img = imggen::render_scene(scene);
    } else {
      img = imggen::read_ppm(data_.root / scene.image);
      if (img.dim(1) != static_cast<std::size_t>(scene.height) || img.dim(2) != static_cast<std::size_t>(scene.width))
        throw DataError("image " + scene.image + " does not match the scene size");
    }
    images_.push_back(img.dim(1) == S ? img : imggen::resize_to(img, S));
  }
}

const Tensor& Trainer::real_image(std::size_t scene) const { return images_.at(scene); }

std::vector<nn::NamedTensor> Trainer::active_params() const {
  std::vector<nn::NamedTensor> out;
  for (const auto& e : model_.params().entries()) {
    const ParamGroup g = group_of(e.name);
    if (g == ParamGroup::kKb && !cfg_.train.use_kb) continue;
    if ((g == ParamGroup::kGen || g == ParamGroup::kDisc) && !cfg_.train.use_gan) continue;
    out.push_back(e);
  }
  return out;
}

StepReport Trainer::pretrain_step() {
  const auto& t = cfg_.train;
  const std::size_t step = state_.pretrain_done;
  const auto& gan = model_.gan_params();
  const auto gen = model_.params_in(ParamGroup::kGen);
  const auto disc = model_.params_in(ParamGroup::kDisc);
  const auto idx = batch_indices(data_.scenes.size(), t.batch_pretrain, t.seed, 1, step);
  const double inv = 1.0 / static_cast<double>(idx.size());
  StepReport rep;
  rep.phase = 1;
  rep.step = step;

  model_.params().zero_grad();
  for (auto i : idx) {
    const Scene& scene = data_.scenes[i];
    auto layout = model_.ground_truth_layout(scene);
    Tensor fake = imggen::generate_image(layout, derive_seed({t.seed, 1, step, i}), gan);
    auto gl = imggen::gan_losses(real_image(i), fake, layout.grid, gan);
    num::backward(num::scale(gl.g_objective, inv));
    rep.l_g += gl.g_objective.item() * inv;
    rep.l_pixel += gl.pixel.item() * inv;
  }
  check_finite(rep.l_g, "generator loss", 1, step);
  check_grads(gen, 1, step);
  sgd_update(gen, t.lr_pretrain, t.weight_decay);

  model_.params().zero_grad();
  for (auto i : idx) {
    const Scene& scene = data_.scenes[i];
    auto layout = model_.ground_truth_layout(scene);
    Tensor fake = imggen::generate_image(layout, derive_seed({t.seed, 1, step, i}), gan);
    auto gl = imggen::gan_losses(real_image(i), fake, layout.grid, gan);
    num::backward(num::scale(gl.d_objective, inv));
    rep.l_d += gl.d_objective.item() * inv;
  }
  check_finite(rep.l_d, "discriminator loss", 1, step);
  check_grads(disc, 1, step);
  sgd_update(disc, t.lr_pretrain, t.weight_decay);
  model_.params().zero_grad();

  rep.total = rep.l_g;
  ++state_.pretrain_done;
  return rep;
}

StepReport Trainer::phase_two_gradients(std::size_t step) {
  const auto& t = cfg_.train;
  const auto& gan = model_.gan_params();
  const auto idx = batch_indices(data_.scenes.size(), t.batch, t.seed, 2, step);
  const double inv = 1.0 / static_cast<double>(idx.size());
  StepReport rep;
  rep.phase = 2;
  rep.step = step;

  model_.params().zero_grad();
  std::vector<Tensor> d_objectives;
  for (auto i : idx) {
    const Scene& scene = data_.scenes[i];
    Rng drop_rng(derive_seed({t.seed, 2, step, i, 1}));
    graph::Dropout drop{t.dropout, &drop_rng};
    ScenePass pass = model_.forward(scene, t.use_kb, drop);
    auto gt = graph::assign_ground_truth(pass.proposal_boxes, pass.subgraphs.candidates, scene);
    auto loss = graph::scene_graph_loss(pass.predictions, gt, t.weights);
    Tensor objective = loss.total;
    rep.l_pred += loss.pred.item() * inv;
    rep.l_obj += loss.obj.item() * inv;
    rep.l_reg += loss.reg.item() * inv;
    if (t.use_gan) {
      auto layout = model_.layout(pass.refined.objects, pass.proposal_boxes, scene);
      Tensor fake = imggen::generate_image(layout, derive_seed({t.seed, 2, step, i, 2}), gan);
      auto gl = imggen::gan_losses(real_image(i), fake, layout.grid, gan);
      objective = num::add(objective, num::scale(gl.g_objective, t.gan_weight));
      d_objectives.push_back(gl.d_objective);
      rep.l_g += gl.g_objective.item() * inv;
      rep.l_d += gl.d_objective.item() * inv;
      rep.l_pixel += gl.pixel.item() * inv;
    }
    rep.total += objective.item() * inv;
    num::backward(num::scale(objective, inv));
  }
  if (t.use_gan) {
    // The discriminator ascends its own objective only.
    zero(model_.params_in(ParamGroup::kDisc));
    for (const auto& d : d_objectives) num::backward(num::scale(d, inv));
  }
  check_finite(rep.total, "training loss", 2, step);
  check_finite(rep.l_d, "discriminator loss", 2, step);
  return rep;
}

StepReport Trainer::train_step() {
  const auto& t = cfg_.train;
  const std::size_t step = state_.train_done;
  StepReport rep = phase_two_gradients(step);
  const auto params = active_params();
  check_grads(params, 2, step);
  sgd_update(params, learning_rate(t.lr_main, t.lr_decay, t.decay_steps, step), t.weight_decay);
  model_.params().zero_grad();
  ++state_.train_done;
  return rep;
}

void run(Trainer& trainer, const std::function<void(const StepReport&)>& on_step) {
  const auto& t = trainer.config().train;
  // RPN pretraining is a no-op: proposals come from the stub.
  if (t.use_gan)
    while (trainer.state().pretrain_done < t.pretrain_steps) {
      auto r = trainer.pretrain_step();
      if (on_step) on_step(r);
    }
  while (trainer.state().train_done < t.steps) {
    auto r = trainer.train_step();
    if (on_step) on_step(r);
  }
}

imggen::GanParams pretrain_generator(Trainer& trainer) {
  const auto& t = trainer.config().train;
  while (trainer.state().pretrain_done < t.pretrain_steps) trainer.pretrain_step();
  return trainer.model().gan_params();
}

std::string loss_row(const StepReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.step, r.l_pred, r.l_obj, r.l_reg, r.l_g,
                r.l_d, r.l_pixel);
  return buf;
}

}  // namespace sgg::train
