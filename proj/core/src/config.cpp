#include "sgg/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "sgg/error.hpp"

namespace sgg {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ConfigError(where + ": expected a number, got '" + s + "'");
  return v;
}

ConfigValue parse_value(const std::string& raw, const std::string& where) {
  if (raw.empty()) throw ConfigError(where + ": missing value");
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw ConfigError(where + ": unterminated string");
    std::string body = raw.substr(1, raw.size() - 2);
    if (body.find('"') != std::string::npos) throw ConfigError(where + ": stray quote in string");
    return body;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError(where + ": unterminated array");
    std::vector<double> out;
    std::string body = trim(std::string_view(raw).substr(1, raw.size() - 2));
    if (body.empty()) return out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(trim(item), where));
    return out;
  }
  return parse_number(raw, where);
}

}  // namespace

ConfigTable ConfigTable::parse(const std::string& text, const std::string& source) {
  ConfigTable t;
  t.source_ = source;
  std::istringstream in(text);
  std::string line, section;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string where = source + ":" + std::to_string(no);
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!valid_key(section)) throw ConfigError(where + ": invalid section name '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(std::string_view(s).substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside of any section");
    const std::string full = section + "." + key;
    if (t.entries_.count(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
    t.entries_[full] = Entry{parse_value(trim(std::string_view(s).substr(eq + 1)), where), no};
    t.order_.push_back(full);
  }
  return t;
}

ConfigTable ConfigTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

bool ConfigTable::has(const std::string& section, const std::string& key) const {
  return entries_.count(section + "." + key) != 0;
}

const ConfigValue* ConfigTable::find(const std::string& section, const std::string& key) const {
  auto it = entries_.find(section + "." + key);
  return it == entries_.end() ? nullptr : &it->second.value;
}

std::size_t ConfigTable::line_of(const std::string& section, const std::string& key) const {
  auto it = entries_.find(section + "." + key);
  return it == entries_.end() ? 0 : it->second.line;
}

std::vector<std::string> ConfigTable::keys() const { return order_; }

std::filesystem::path RunConfig::data_dir() const {
  return data.dir.is_absolute() ? data.dir : base_dir / data.dir;
}

std::filesystem::path RunConfig::triples_path() const {
  return kb.triples.is_absolute() ? kb.triples : data_dir() / kb.triples;
}

namespace {

struct Binder {
  const ConfigTable& table;
  std::map<std::string, std::function<void(const ConfigValue&, const std::string&)>> setters;

  std::string where(const std::string& full) const {
    const auto dot = full.find('.');
    return table.source() + ":" + std::to_string(table.line_of(full.substr(0, dot), full.substr(dot + 1)));
  }

  void real(const std::string& key, double& out) {
    setters[key] = [&out](const ConfigValue& v, const std::string& w) {
      if (!std::holds_alternative<double>(v)) throw ConfigError(w + ": expected a number");
      out = std::get<double>(v);
    };
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    setters[key] = [&out](const ConfigValue& v, const std::string& w) {
      if (!std::holds_alternative<double>(v)) throw ConfigError(w + ": expected an integer");
      const double d = std::get<double>(v);
      if (d < 0 || d != std::floor(d) || d > 9.0e15) throw ConfigError(w + ": expected a non-negative integer");
      out = static_cast<Int>(d);
    };
  }
  void flag(const std::string& key, bool& out) {
    setters[key] = [&out](const ConfigValue& v, const std::string& w) {
      if (!std::holds_alternative<bool>(v)) throw ConfigError(w + ": expected true or false");
      out = std::get<bool>(v);
    };
  }
  void path(const std::string& key, std::filesystem::path& out) {
    setters[key] = [&out](const ConfigValue& v, const std::string& w) {
      if (!std::holds_alternative<std::string>(v)) throw ConfigError(w + ": expected a string");
      out = std::get<std::string>(v);
    };
  }
  void steps(const std::string& key, std::vector<std::size_t>& out) {
    setters[key] = [&out](const ConfigValue& v, const std::string& w) {
      if (!std::holds_alternative<std::vector<double>>(v)) throw ConfigError(w + ": expected an array");
      out.clear();
      for (double d : std::get<std::vector<double>>(v)) {
        if (d < 0 || d != std::floor(d)) throw ConfigError(w + ": schedule entries must be non-negative integers");
        out.push_back(static_cast<std::size_t>(d));
      }
    };
  }

  void apply() {
    for (const auto& full : table.keys()) {
      auto it = setters.find(full);
      if (it == setters.end()) throw ConfigError(where(full) + ": unknown key '" + full + "'");
      const auto dot = full.find('.');
      it->second(*table.find(full.substr(0, dot), full.substr(dot + 1)), where(full));
    }
  }
};

}  // namespace

RunConfig run_config_from(const ConfigTable& table, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  auto& m = c.model;
  auto& t = c.train;
  Binder b{table, {}};
  b.integer("model.dim", m.features.dim);
  b.real("model.canvas_w", m.features.canvas_w);
  b.real("model.canvas_h", m.features.canvas_h);
  b.integer("model.feature_seed", m.features.seed);
  b.integer("model.proposals", m.proposals.count);
  b.real("model.jitter", m.proposals.jitter);
  b.integer("model.proposal_seed", m.proposals.seed);
  b.real("model.nms_thresh", m.nms_thresh);
  b.integer("model.ks", m.ks);
  b.integer("model.memory_dim", m.refine.memory_dim);
  b.integer("model.attention_hidden", m.refine.attention_hidden);
  b.integer("model.passes", m.refine.passes);
  b.integer("model.iterations", m.refine.iterations);
  b.integer("model.rel_bottleneck", m.rel_bottleneck);
  b.integer("model.image_size", m.gan.image_size);
  b.integer("model.start_resolution", m.gan.start_resolution);
  b.integer("model.layout_dim", m.gan.layout_dim);
  b.integer("model.layout_grid", m.gan.grid);
  b.integer("model.gen_channels", m.gan.gen_channels);
  b.integer("model.noise_channels", m.gan.noise_channels);
  b.integer("model.disc_channels", m.gan.disc_channels);
  b.real("model.leaky_slope", m.gan.leaky_slope);
  b.real("model.lambda_pixel", m.gan.lambda_pixel);
  b.integer("model.init_seed", m.init_seed);

  b.real("train.lr_pretrain", t.lr_pretrain);
  b.integer("train.batch_pretrain", t.batch_pretrain);
  b.integer("train.pretrain_steps", t.pretrain_steps);
  b.real("train.lr_main", t.lr_main);
  b.real("train.lr_decay", t.lr_decay);
  b.steps("train.decay_steps", t.decay_steps);
  b.integer("train.steps", t.steps);
  b.integer("train.batch", t.batch);
  b.real("train.lambda_pred", t.weights.pred);
  b.real("train.lambda_obj", t.weights.obj);
  b.real("train.lambda_reg", t.weights.reg);
  b.real("train.weight_decay", t.weight_decay);
  b.real("train.dropout", t.dropout);
  b.real("train.gan_weight", t.gan_weight);
  b.flag("train.use_gan", t.use_gan);
  b.flag("train.use_kb", t.use_kb);
  b.integer("train.seed", t.seed);
  b.integer("train.log_every", t.log_every);

  b.path("data.dir", c.data.dir);

  b.path("kb.triples", c.kb.triples);
  b.path("kb.word_vectors", c.kb.word_vectors);
  b.integer("kb.top_k", m.top_k);
  b.integer("kb.embed_dim", m.embed_dim);
  b.integer("kb.hidden", m.fact_hidden);
  b.apply();

  m.refine.feature_dim = m.features.dim;
  m.refine.fact_dim = 2 * m.fact_hidden;
  m.gan.object_dim = m.features.dim;
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  auto table = ConfigTable::load(path);
  return run_config_from(table, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

void validate(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid configuration: " + what);
  };
  require(m.features.dim > 0, "model.dim must be positive");
  require(m.features.canvas_w > 0 && m.features.canvas_h > 0, "canvas size must be positive");
  require(m.proposals.count != 1, "model.proposals must be 0 or at least 2");
  require(m.proposals.jitter >= 0, "model.jitter must be non-negative");
  require(m.nms_thresh > 0 && m.nms_thresh <= 1, "model.nms_thresh must lie in (0, 1]");
  require(m.ks > 0, "model.ks must be positive");
  require(m.refine.memory_dim > 0 && m.refine.attention_hidden > 0, "memory/attention widths must be positive");
  require(m.refine.passes >= 1, "model.passes (T_m) must be >= 1");
  require(m.refine.iterations >= 1, "model.iterations (T_r) must be >= 1");
  require(m.rel_bottleneck > 0, "model.rel_bottleneck must be positive");
  require(m.embed_dim > 0 && m.fact_hidden > 0, "kb.embed_dim and kb.hidden must be positive");
  require(m.top_k >= 1, "kb.top_k must be >= 1");
  try {
    imggen::stage_count(m.gan);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  require(m.gan.image_size % 16 == 0, "model.image_size must be a multiple of 16");
  require(m.gan.layout_dim > 0 && m.gan.grid > 0 && m.gan.gen_channels > 0 && m.gan.noise_channels > 0 &&
              m.gan.disc_channels > 0,
          "generator widths must be positive");
  require(m.gan.lambda_pixel >= 0, "model.lambda_pixel must be non-negative");
  require(t.lr_pretrain > 0 && t.lr_main > 0 && t.lr_decay > 0, "learning rates and decay must be positive");
  require(t.batch_pretrain >= 1 && t.batch >= 1, "batch sizes must be >= 1");
  for (std::size_t i = 1; i < t.decay_steps.size(); ++i)
    require(t.decay_steps[i] > t.decay_steps[i - 1], "train.decay_steps must be strictly increasing");
  require(t.weights.pred >= 0 && t.weights.obj >= 0 && t.weights.reg >= 0, "loss weights must be non-negative");
  require(t.weight_decay >= 0, "train.weight_decay must be non-negative");
  require(t.dropout >= 0 && t.dropout < 1, "train.dropout must lie in [0, 1)");
  require(t.gan_weight >= 0, "train.gan_weight must be non-negative");
  require(t.log_every >= 1, "train.log_every must be >= 1");
}

std::string to_toml(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  std::ostringstream o;
  o.precision(17);
  auto kv = [&](const char* k, auto v) { o << k << " = " << v << "\n"; };
  auto str = [&](const char* k, const std::filesystem::path& p) { o << k << " = \"" << p.generic_string() << "\"\n"; };
  auto flag = [&](const char* k, bool v) { o << k << " = " << (v ? "true" : "false") << "\n"; };
  o << "[model]\n";
  kv("dim", m.features.dim);
  kv("canvas_w", m.features.canvas_w);
  kv("canvas_h", m.features.canvas_h);
  kv("feature_seed", m.features.seed);
  kv("proposals", m.proposals.count);
  kv("jitter", m.proposals.jitter);
  kv("proposal_seed", m.proposals.seed);
  kv("nms_thresh", m.nms_thresh);
  kv("ks", m.ks);
  kv("memory_dim", m.refine.memory_dim);
  kv("attention_hidden", m.refine.attention_hidden);
  kv("passes", m.refine.passes);
  kv("iterations", m.refine.iterations);
  kv("rel_bottleneck", m.rel_bottleneck);
  kv("image_size", m.gan.image_size);
  kv("start_resolution", m.gan.start_resolution);
  kv("layout_dim", m.gan.layout_dim);
  kv("layout_grid", m.gan.grid);
  kv("gen_channels", m.gan.gen_channels);
  kv("noise_channels", m.gan.noise_channels);
  kv("disc_channels", m.gan.disc_channels);
  kv("leaky_slope", m.gan.leaky_slope);
  kv("lambda_pixel", m.gan.lambda_pixel);
  kv("init_seed", m.init_seed);
  o << "\n[train]\n";
  kv("lr_pretrain", t.lr_pretrain);
  kv("batch_pretrain", t.batch_pretrain);
  kv("pretrain_steps", t.pretrain_steps);
  kv("lr_main", t.lr_main);
  kv("lr_decay", t.lr_decay);
  o << "decay_steps = [";
  for (std::size_t i = 0; i < t.decay_steps.size(); ++i) o << (i ? ", " : "") << t.decay_steps[i];
  o << "]\n";
  kv("steps", t.steps);
  kv("batch", t.batch);
  kv("lambda_pred", t.weights.pred);
  kv("lambda_obj", t.weights.obj);
  kv("lambda_reg", t.weights.reg);
  kv("weight_decay", t.weight_decay);
  kv("dropout", t.dropout);
  kv("gan_weight", t.gan_weight);
  flag("use_gan", t.use_gan);
  flag("use_kb", t.use_kb);
  kv("seed", t.seed);
  kv("log_every", t.log_every);
  o << "\n[data]\n";
  str("dir", c.data.dir);
  o << "\n[kb]\n";
  str("triples", c.kb.triples);
  if (!c.kb.word_vectors.empty()) str("word_vectors", c.kb.word_vectors);
  kv("top_k", m.top_k);
  kv("embed_dim", m.embed_dim);
  kv("hidden", m.fact_hidden);
  return o.str();
}

graph::HeadConfig head_config(const ModelConfig& m, std::size_t num_classes, std::size_t num_predicates) {
  graph::HeadConfig h;
  h.feature_dim = m.features.dim;
  h.ks = m.ks;
  h.num_classes = num_classes;
  h.num_predicates = num_predicates;
  h.bottleneck = m.rel_bottleneck;
  return h;
}

}  // namespace sgg
