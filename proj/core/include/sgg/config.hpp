#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "sgg/graphgen.hpp"
#include "sgg/imggen.hpp"
#include "sgg/proposals.hpp"
#include "sgg/refine.hpp"

namespace sgg {

// Minimal TOML subset: [section] headers, key = value with numbers,
// booleans, "strings" and flat [arrays] of numbers; '#' comments.
using ConfigValue = std::variant<bool, double, std::string, std::vector<double>>;

class ConfigTable {
 public:
  // Throws ConfigError with "<source>:<line>: ..." on malformed input.
  static ConfigTable parse(const std::string& text, const std::string& source = "<config>");
  static ConfigTable load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  const ConfigValue* find(const std::string& section, const std::string& key) const;
  std::size_t line_of(const std::string& section, const std::string& key) const;
  const std::string& source() const { return source_; }

  // Keys in file order as "section.key".
  std::vector<std::string> keys() const;

 private:
  struct Entry {
    ConfigValue value;
    std::size_t line = 0;
  };
  std::string source_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

struct ModelConfig {
  proposals::FeatureConfig features;
  proposals::ProposalConfig proposals;
  double nms_thresh = 0.5;
  std::size_t ks = 5;
  refine::RefineConfig refine;
  std::size_t rel_bottleneck = 16;
  std::size_t embed_dim = 30;    // De
  std::size_t fact_hidden = 30;  // Hf
  std::size_t top_k = 8;
  imggen::GanConfig gan;
  std::uint64_t init_seed = 1;
};

struct TrainConfig {
  double lr_pretrain = 1e-4;
  std::size_t batch_pretrain = 4;
  std::size_t pretrain_steps = 0;
  double lr_main = 0.01;
  double lr_decay = 0.1;
  std::vector<std::size_t> decay_steps;
  std::size_t steps = 100;  // T_s
  std::size_t batch = 1;
  graph::LossWeights weights;
  double weight_decay = 1e-4;
  double dropout = 0.5;
  double gan_weight = 1.0;  // weight of the generator objective in the joint update
  bool use_gan = true;
  bool use_kb = true;
  std::uint64_t seed = 0;
  std::size_t log_every = 1;
};

struct DataConfig {
  std::filesystem::path dir = ".";
};

struct KbConfig {
  std::filesystem::path triples = "kb.tsv";
  std::filesystem::path word_vectors;  // optional
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  KbConfig kb;
  std::filesystem::path base_dir = ".";  // relative paths resolve against this

  std::filesystem::path data_dir() const;
  std::filesystem::path triples_path() const;
};

// Fills a RunConfig from the table; unknown keys and wrong types raise
// ConfigError naming the line. Validates rates and schedules.
RunConfig run_config_from(const ConfigTable& table, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
void validate(const RunConfig& cfg);

// Canonical key = value rendering of every setting; used for manifests.
std::string to_toml(const RunConfig& cfg);

graph::HeadConfig head_config(const ModelConfig& m, std::size_t num_classes, std::size_t num_predicates);

}  // namespace sgg
