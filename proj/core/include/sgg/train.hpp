#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgg/checkpoint.hpp"
#include "sgg/config.hpp"
#include "sgg/model.hpp"

namespace sgg::train {

// base * decay^(number of milestones <= step).
double learning_rate(double base, double decay, const std::vector<std::size_t>& milestones, std::size_t step);

// p <- p - lr * (g + weight_decay * p) for every tensor in the list.
void sgd_update(const std::vector<nn::NamedTensor>& params, double lr, double weight_decay);

// Scene indices for one step: each epoch walks a seeded permutation of the
// dataset, so batches depend only on (seed, phase, step).
std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch, std::uint64_t seed, std::uint64_t phase,
                                       std::size_t step);

struct StepReport {
  int phase = 2;
  std::size_t step = 0;
  double l_pred = 0, l_obj = 0, l_reg = 0;
  double l_g = 0, l_d = 0, l_pixel = 0;  // descended objectives, batch means
  double total = 0;                      // scene-graph loss + gan_weight * L_G
};

class Trainer {
 public:
  // Loads the KB named by the config (plus optional word vectors) and, when
  // the image branch is on, every scene's real image.
  Trainer(const RunConfig& cfg, Dataset data);
  Trainer(const RunConfig& cfg, Dataset data, kb::TripleStore store);

  const RunConfig& config() const { return cfg_; }
  const Dataset& dataset() const { return data_; }
  Model& model() { return model_; }
  const Model& model() const { return model_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }

  // Phase one: G step then D step on ground-truth objects. Touches only
  // "gen." and "disc." parameters.
  StepReport pretrain_step();
  // Phase two: one composite update of every active parameter group.
  StepReport train_step();

  // Phase-two gradients for `step` without applying them (grads are left on
  // the parameters).
  StepReport phase_two_gradients(std::size_t step);

  const num::Tensor& real_image(std::size_t scene) const;

 private:
  void load_images();
  std::vector<nn::NamedTensor> active_params() const;

  RunConfig cfg_;
  Dataset data_;
  Model model_;
  TrainState state_;
  std::vector<num::Tensor> images_;
};

// Phase one until pretrain_steps (skipped without the image branch),
// then phase two until steps. Resumes from trainer.state().
void run(Trainer& trainer, const std::function<void(const StepReport&)>& on_step = {});

// Runs only phase one and returns the resulting generator/discriminator.
imggen::GanParams pretrain_generator(Trainer& trainer);

inline constexpr const char* kLossColumns = "step,L_pred,L_obj,L_reg,L_G,L_D,L_pixel";
std::string loss_row(const StepReport& r);

}  // namespace sgg::train
