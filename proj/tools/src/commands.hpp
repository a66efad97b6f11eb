#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sgg/eval.hpp"
#include "sgg/gradcheck.hpp"
#include "sgg/synth.hpp"

namespace sgg::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kNumericError = 4 };

// Maps the in-flight exception to an exit code and prints "error: ..." to err.
int report_exception(std::ostream& err);

struct SynthOptions {
  std::filesystem::path out;
  synth::SynthConfig synth;
  bool write_config = true;
};
void cmd_synth(const SynthOptions& opts, std::ostream& log);

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path out;  // default: <config dir>/run
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;  // caps both phases
  bool no_gan = false;
  bool no_kb = false;
  std::filesystem::path resume;  // checkpoint to continue from
  bool quiet = false;
};

struct TrainOutputs {
  std::filesystem::path dir;
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path loss_csv;
  std::filesystem::path pretrain_csv;
  std::filesystem::path config;
};
TrainOutputs cmd_train(const TrainOptions& opts, std::ostream& log);

struct EvalCommandOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path config;  // default: config.toml beside the checkpoint
  std::vector<std::size_t> ks{50, 100};
  std::filesystem::path out;  // optional: report.txt, metrics.csv, predictions.jsonl
  bool no_kb = false;
  bool greedy = false;
  bool micro = false;
  bool top1 = false;
};
eval::EvalResult cmd_eval(const EvalCommandOptions& opts, std::ostream& log);

struct ScoreOptions {
  std::filesystem::path predictions;
  std::filesystem::path ground_truth;  // graph JSONL
  std::filesystem::path labels;        // meta.json
  std::vector<std::size_t> ks{50, 100};
  bool greedy = false;
  bool micro = false;
};
eval::EvalResult cmd_score(const ScoreOptions& opts, std::ostream& log);

// Returns true when every row passes.
bool cmd_gradcheck(const std::string& scope, std::uint64_t seed, std::ostream& log);

struct RenderOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path config;
  std::size_t scene = 0;
  bool ground_truth = false;  // layout from ground-truth objects instead of refined proposals
  std::filesystem::path out;
  std::uint64_t seed = 0;
};
void cmd_render(const RenderOptions& opts, std::ostream& log);

}  // namespace sgg::cli
