#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sgg/checkpoint.hpp"
#include "sgg/config.hpp"
#include "sgg/error.hpp"
#include "sgg/train.hpp"

namespace sgg::cli {
namespace fs = std::filesystem;

int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("write failed: " + p.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

std::string desk_config_text() {
  RunConfig c;
  c.model.features.dim = 32;
  c.model.gan.image_size = 16;
  c.model.gan.start_resolution = 4;
  c.train.pretrain_steps = 50;
  c.train.batch_pretrain = 4;
  c.train.steps = 600;
  c.train.lr_main = 0.01;
  c.train.decay_steps = {400};
  c.train.dropout = 0.0;
  c.train.weight_decay = 1e-4;
  c.train.gan_weight = 0.1;
  c.data.dir = ".";
  return to_toml(c);
}

RunConfig effective_config(const TrainOptions& o) {
  RunConfig c = load_run_config(o.config);
  if (o.seed) {
    c.train.seed = *o.seed;
    c.model.init_seed = *o.seed;
  }
  if (o.steps) {
    c.train.steps = *o.steps;
    c.train.pretrain_steps = std::min(c.train.pretrain_steps, *o.steps);
  }
  if (o.no_gan) c.train.use_gan = false;
  if (o.no_kb) c.train.use_kb = false;
  validate(c);
  return c;
}

// Config copy whose data/kb paths stay valid from another directory.
RunConfig portable(RunConfig c) {
  c.data.dir = fs::absolute(c.data_dir()).lexically_normal();
  c.kb.triples = fs::absolute(c.triples_path()).lexically_normal();
  if (!c.kb.word_vectors.empty() && c.kb.word_vectors.is_relative())
    c.kb.word_vectors = fs::absolute(c.data_dir() / c.kb.word_vectors).lexically_normal();
  return c;
}

std::string input_hash(const RunConfig& c) {
  std::string blob = read_file(c.data_dir() / "meta.json") + read_file(c.data_dir() / "scenes.jsonl") +
                     read_file(c.triples_path());
  return hex64(fnv1a64(blob));
}

}  // namespace

void cmd_synth(const SynthOptions& opts, std::ostream& log) {
  if (opts.out.empty()) throw ConfigError("synth: --out is required");
  auto corpus = synth::make_corpus(opts.synth);
  ensure_dir(opts.out);
  synth::write_corpus(opts.out, corpus, opts.write_config ? desk_config_text() : std::string());
  std::size_t rels = 0;
  for (const auto& s : corpus.scenes) rels += s.relations.size();
  log << "wrote " << corpus.scenes.size() << " scenes (" << rels << " relations), " << corpus.triples.size()
      << " KB triples to " << opts.out.string() << "\n";
}

TrainOutputs cmd_train(const TrainOptions& opts, std::ostream& log) {
  if (opts.config.empty()) throw ConfigError("train: --config is required");
  const RunConfig cfg = effective_config(opts);
  TrainOutputs out;
  out.dir = opts.out.empty() ? cfg.base_dir / "run" : opts.out;
  ensure_dir(out.dir);
  out.checkpoint = out.dir / "checkpoint.bin";
  out.manifest = out.dir / "manifest.txt";
  out.loss_csv = out.dir / "loss.csv";
  out.pretrain_csv = out.dir / "pretrain_loss.csv";
  out.config = out.dir / "config.toml";

  const std::string config_text = to_toml(cfg);
  train::Trainer trainer(cfg, load_dataset(cfg.data_dir()));
  trainer.state().config_hash = hex64(fnv1a64(config_text));
  if (!opts.resume.empty()) {
    auto ckpt = load_checkpoint(opts.resume);
    restore_params(ckpt, trainer.model().params());
    if (ckpt.state.seed != cfg.train.seed)
      throw ConfigError("resume: checkpoint seed " + std::to_string(ckpt.state.seed) + " differs from run seed " +
                        std::to_string(cfg.train.seed));
    trainer.state().pretrain_done = ckpt.state.pretrain_done;
    trainer.state().train_done = ckpt.state.train_done;
    log << "resuming at pretrain step " << ckpt.state.pretrain_done << ", train step " << ckpt.state.train_done
        << "\n";
  }

  std::ofstream loss(out.loss_csv, std::ios::binary), pre(out.pretrain_csv, std::ios::binary);
  if (!loss || !pre) throw DataError("cannot write logs in " + out.dir.string());
  loss << train::kLossColumns << "\n";
  pre << train::kLossColumns << "\n";
  const std::size_t every = std::max<std::size_t>(1, cfg.train.steps / 10);
  train::run(trainer, [&](const train::StepReport& r) {
    if (r.step % cfg.train.log_every == 0) (r.phase == 1 ? pre : loss) << train::loss_row(r) << "\n";
    if (!opts.quiet && r.phase == 2 && (r.step % every == 0 || r.step + 1 == cfg.train.steps)) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "step %zu  total %.5f  L_pred %.5f  L_obj %.5f  L_reg %.5f  L_G %.4f  L_D %.4f\n",
                    r.step, r.total, r.l_pred, r.l_obj, r.l_reg, r.l_g, r.l_d);
      log << buf;
    }
  });
  loss.close();
  pre.close();

  save_checkpoint(out.checkpoint, trainer.model().params(), trainer.state());
  write_file(out.config, to_toml(portable(cfg)));
  std::ostringstream m;
  m << "command: train\n";
  m << "config_source: " << opts.config.string() << "\n";
  m << "config_hash: " << trainer.state().config_hash << "\n";
  m << "input_hash: " << input_hash(cfg) << "\n";
  m << "seed: " << cfg.train.seed << "\n";
  m << "init_seed: " << cfg.model.init_seed << "\n";
  m << "use_gan: " << (cfg.train.use_gan ? "true" : "false") << "\n";
  m << "use_kb: " << (cfg.train.use_kb ? "true" : "false") << "\n";
  m << "resumed_from: " << (opts.resume.empty() ? "-" : opts.resume.string()) << "\n";
  m << "outputs: " << out.checkpoint.filename().string() << " " << out.loss_csv.filename().string() << " "
    << out.pretrain_csv.filename().string() << " " << out.config.filename().string() << "\n\n";
  m << checkpoint_manifest(trainer.model().params(), trainer.state());
  m << "\n" << config_text;
  write_file(out.manifest, m.str());
  log << "checkpoint: " << out.checkpoint.string() << "\n";
  return out;
}

eval::EvalResult cmd_eval(const EvalCommandOptions& opts, std::ostream& log) {
  if (opts.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
  const fs::path config = opts.config.empty() ? opts.checkpoint.parent_path() / "config.toml" : opts.config;
  RunConfig cfg = load_run_config(config);
  if (opts.no_kb) cfg.train.use_kb = false;
  const Dataset data = load_dataset(cfg.data_dir());
  Model model(cfg.model, data.labels, kb::TripleStore::ingest(cfg.triples_path()));
  restore_params(load_checkpoint(opts.checkpoint), model.params());

  // Inference only: the image branch is not run.
  std::vector<graph::GraphRecord> preds, gts;
  for (const auto& scene : data.scenes) {
    preds.push_back(graph::make_record(scene.id, model.infer(scene, cfg.train.use_kb), opts.top1));
    gts.push_back(graph::make_record(scene));
  }
  eval::EvalOptions eo;
  eo.ks = opts.ks;
  eo.matching = opts.greedy ? eval::Matching::kGreedy : eval::Matching::kOptimal;
  eo.macro = !opts.micro;
  auto result = eval::evaluate(preds, gts, eo);
  const std::string report = eval::format_report(result, eo);
  if (result.empty_gt_images > 0)
    log << "warning: " << result.empty_gt_images << " image(s) without ground-truth relations count as recall 1\n";
  log << report;
  if (!opts.out.empty()) {
    ensure_dir(opts.out);
    write_file(opts.out / "report.txt", report);
    write_file(opts.out / "metrics.csv", eval::format_csv(result));
    graph::write_records(opts.out / "predictions.jsonl", preds, data.labels);
    graph::write_records(opts.out / "ground_truth.jsonl", gts, data.labels);
  }
  return result;
}

eval::EvalResult cmd_score(const ScoreOptions& opts, std::ostream& log) {
  if (opts.predictions.empty() || opts.ground_truth.empty() || opts.labels.empty())
    throw ConfigError("score: --pred, --gt and --labels are required");
  const LabelSet labels = read_labels(opts.labels);
  eval::EvalOptions eo;
  eo.ks = opts.ks;
  eo.matching = opts.greedy ? eval::Matching::kGreedy : eval::Matching::kOptimal;
  eo.macro = !opts.micro;
  auto result =
      eval::evaluate(graph::read_records(opts.predictions, labels), graph::read_records(opts.ground_truth, labels), eo);
  if (result.empty_gt_images > 0)
    log << "warning: " << result.empty_gt_images << " image(s) without ground-truth relations count as recall 1\n";
  log << eval::format_report(result, eo);
  return result;
}

bool cmd_gradcheck(const std::string& scope, std::uint64_t seed, std::ostream& log) {
  std::vector<gradcheck::Report> reports;
  if (scope == "op" || scope == "all") reports.push_back(gradcheck::check_ops(seed));
  if (scope == "module" || scope == "all") reports.push_back(gradcheck::check_modules(seed));
  if (scope == "end2end" || scope == "all") reports.push_back(gradcheck::check_end2end(seed));
  if (reports.empty()) throw ConfigError("gradcheck: unknown scope '" + scope + "' (op, module, end2end, all)");
  bool ok = true;
  for (const auto& r : reports) {
    log << gradcheck::format_table(r);
    ok = ok && r.pass();
  }
  return ok;
}

void cmd_render(const RenderOptions& opts, std::ostream& log) {
  if (opts.checkpoint.empty() || opts.out.empty()) throw ConfigError("render: --checkpoint and --out are required");
  const fs::path config = opts.config.empty() ? opts.checkpoint.parent_path() / "config.toml" : opts.config;
  RunConfig cfg = load_run_config(config);
  const Dataset data = load_dataset(cfg.data_dir());
  if (opts.scene >= data.scenes.size())
    throw DataError("scene index " + std::to_string(opts.scene) + " out of range (" +
                    std::to_string(data.scenes.size()) + " scenes)");
  Model model(cfg.model, data.labels, kb::TripleStore::ingest(cfg.triples_path()));
  restore_params(load_checkpoint(opts.checkpoint), model.params());
  const Scene& scene = data.scenes[opts.scene];
  imggen::SceneLayout layout;
  if (opts.ground_truth) {
    layout = model.ground_truth_layout(scene);
  } else {
    ScenePass pass = model.forward(scene, cfg.train.use_kb);
    layout = model.layout(pass.refined.objects, pass.proposal_boxes, scene);
  }
  imggen::write_ppm(opts.out, imggen::generate_image(layout, derive_seed({opts.seed, 0x7e}), model.gan_params()));
  log << "wrote " << opts.out.string() << " for scene " << scene.id << "\n";
}

}  // namespace sgg::cli
