#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "commands.hpp"
#include "fixture.hpp"
#include "sgg/checkpoint.hpp"
#include "sgg/error.hpp"
#include "sgg/model.hpp"

using namespace sgg;
using namespace sgg::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Synthetic corpus plus a small config in a fresh directory.
fs::path workspace(const std::string& name, const std::string& extra = "") {
  const auto dir = fs::temp_directory_path() / "sgg_test_cli" / name;
  fs::remove_all(dir);
  SynthOptions so;
  so.out = dir;
  so.synth.images = 3;
  so.synth.width = so.synth.height = 32;
  std::ostringstream log;
  cmd_synth(so, log);
  std::ofstream(dir / "small.toml") << fixture::small_config_text() << extra;
  return dir;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SGG_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TrainOptions quiet(const fs::path& config, const fs::path& out) {
  TrainOptions o;
  o.config = config;
  o.out = out;
  o.quiet = true;
  return o;
}

}  // namespace

TEST_CASE("synth writes the requested number of scenes and images") {
  const auto dir = workspace("synth");
  CHECK(load_dataset(dir).scenes.size() == 3);
  std::size_t images = 0;
  for (const auto& e : fs::directory_iterator(dir / "images")) images += e.path().extension() == ".ppm";
  CHECK(images == 3);
  CHECK(fs::exists(dir / "kb.tsv"));
  CHECK(load_run_config(dir / "config.toml").data_dir() == dir / ".");
}

TEST_CASE("zero steps write the initialization") {
  const auto dir = workspace("zero");
  auto o = quiet(dir / "small.toml", dir / "run");
  o.steps = 0;
  std::ostringstream log;
  auto out = cmd_train(o, log);
  auto ck = load_checkpoint(out.checkpoint);
  CHECK(ck.state.train_done == 0);
  CHECK(ck.state.pretrain_done == 0);
  const auto cfg = load_run_config(dir / "small.toml");
  const auto data = load_dataset(dir);
  Model fresh(cfg.model, data.labels, kb::TripleStore::ingest(dir / "kb.tsv"));
  CHECK(fixture::snapshot(ck.tensors) == fixture::snapshot(fresh.params().entries()));
}

TEST_CASE("training logs carry the loss columns and a manifest") {
  const auto dir = workspace("logs");
  std::ostringstream log;
  auto out = cmd_train(quiet(dir / "small.toml", dir / "run"), log);
  const auto csv = slurp(out.loss_csv);
  CHECK(csv.rfind("step,L_pred,L_obj,L_reg,L_G,L_D,L_pixel\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  const auto pre = slurp(out.pretrain_csv);
  CHECK(std::count(pre.begin(), pre.end(), '\n') == 4);
  const auto manifest = slurp(out.manifest);
  for (const char* key : {"config_hash: ", "input_hash: ", "seed: 5\n", "use_gan: true\n", "use_kb: true\n"})
    CHECK(manifest.find(key) != std::string::npos);
  CHECK(load_run_config(out.config).train.steps == 6);
}

TEST_CASE("two identical training runs are byte-identical") {
  const auto dir = workspace("repro");
  std::ostringstream log;
  auto a = cmd_train(quiet(dir / "small.toml", dir / "a"), log);
  auto b = cmd_train(quiet(dir / "small.toml", dir / "b"), log);
  CHECK(slurp(a.checkpoint) == slurp(b.checkpoint));
  CHECK(slurp(a.loss_csv) == slurp(b.loss_csv));
  CHECK(slurp(a.pretrain_csv) == slurp(b.pretrain_csv));

  auto o = quiet(dir / "small.toml", dir / "c");
  o.seed = 99;
  auto c = cmd_train(o, log);
  CHECK(slurp(a.checkpoint) != slurp(c.checkpoint));
}

TEST_CASE("a resumed run matches the uninterrupted one") {
  const auto dir = workspace("resume");
  std::ostringstream log;
  auto full = cmd_train(quiet(dir / "small.toml", dir / "full"), log);

  auto first = quiet(dir / "small.toml", dir / "first");
  first.steps = 3;
  auto part = cmd_train(first, log);
  auto second = quiet(dir / "small.toml", dir / "second");
  second.resume = part.checkpoint;
  auto done = cmd_train(second, log);

  auto a = load_checkpoint(full.checkpoint), b = load_checkpoint(done.checkpoint);
  CHECK(b.state.train_done == 6);
  CHECK(fixture::snapshot(a.tensors) == fixture::snapshot(b.tensors));
  // Rows after the interruption continue the same trajectory.
  const auto tail = slurp(done.loss_csv);
  const auto all = slurp(full.loss_csv);
  CHECK(all.size() > tail.size());
  const std::size_t header = std::string(train::kLossColumns).size() + 1;
  CHECK(all.substr(all.size() - (tail.size() - header)) == tail.substr(header));

  auto wrong = quiet(dir / "small.toml", dir / "wrong");
  wrong.resume = part.checkpoint;
  wrong.seed = 7;
  CHECK_THROWS_AS(cmd_train(wrong, log), ConfigError);
}

TEST_CASE("evaluation is deterministic and skips the image branch") {
  const auto dir = workspace("eval");
  std::ostringstream log;
  auto out = cmd_train(quiet(dir / "small.toml", dir / "run"), log);
  EvalCommandOptions eo;
  eo.checkpoint = out.checkpoint;
  eo.out = dir / "eval1";
  std::ostringstream l1, l2;
  auto r1 = cmd_eval(eo, l1);
  eo.out = dir / "eval2";
  auto r2 = cmd_eval(eo, l2);
  CHECK(l1.str() == l2.str());
  CHECK(slurp(dir / "eval1" / "report.txt") == slurp(dir / "eval2" / "report.txt"));
  CHECK(slurp(dir / "eval1" / "predictions.jsonl") == slurp(dir / "eval2" / "predictions.jsonl"));
  for (auto mode : {eval::Mode::kPhrDet, eval::Mode::kSgGen}) {
    CHECK(r1.recall[mode].count(50) == 1);
    CHECK(r1.recall[mode].count(100) == 1);
  }

  // The scored prediction files reproduce the in-process numbers.
  ScoreOptions so;
  so.predictions = dir / "eval1" / "predictions.jsonl";
  so.ground_truth = dir / "eval1" / "ground_truth.jsonl";
  so.labels = dir / "meta.json";
  std::ostringstream l3;
  auto r3 = cmd_score(so, l3);
  CHECK(r3.recall == r1.recall);

  // Zeroing the generator leaves inference unchanged.
  auto ck = load_checkpoint(out.checkpoint);
  for (auto& e : ck.tensors)
    if (group_of(e.name) == ParamGroup::kGen || group_of(e.name) == ParamGroup::kDisc)
      for (auto& v : e.tensor.mutable_data()) v = 0.0;
  const auto cfg = load_run_config(dir / "run" / "config.toml");
  const auto data = load_dataset(dir);
  Model m(cfg.model, data.labels, kb::TripleStore::ingest(dir / "kb.tsv"));
  restore_params(ck, m.params());
  save_checkpoint(dir / "run" / "nogen.bin", m.params(), ck.state);
  eo.checkpoint = dir / "run" / "nogen.bin";
  eo.out.clear();
  std::ostringstream l4;
  CHECK(cmd_eval(eo, l4).recall == r1.recall);
}

TEST_CASE("evaluating against a different model shape fails") {
  const auto dir = workspace("shape", "");
  std::ostringstream log;
  auto o = quiet(dir / "small.toml", dir / "run");
  o.steps = 0;
  auto out = cmd_train(o, log);
  EvalCommandOptions eo;
  eo.checkpoint = out.checkpoint;
  eo.config = dir / "config.toml";
  CHECK_THROWS_AS(cmd_eval(eo, log), DataError);
}

TEST_CASE("gradcheck op scope passes") {
  std::ostringstream log;
  CHECK(cmd_gradcheck("op", 1, log));
  CHECK(log.str().find("max_rel_err") != std::string::npos);
  CHECK_THROWS_AS(cmd_gradcheck("nope", 1, log), ConfigError);
}

TEST_CASE("exit codes") {
  const auto dir = workspace("exit");
  const std::string d = dir.string();
  CHECK(run_binary("synth --out " + d + "/again --images 2") == kOk);
  CHECK(run_binary("train --config " + d + "/small.toml --out " + d + "/run --steps 1 --quiet") == kOk);
  CHECK(run_binary("eval --checkpoint " + d + "/run/checkpoint.bin") == kOk);

  std::ofstream(dir / "bad.toml") << "[train]\nsteps = many\n";
  CHECK(run_binary("train --config " + d + "/bad.toml --quiet") == kConfigError);
  CHECK(run_binary("train --config " + d + "/missing.toml --quiet") == kConfigError);
  CHECK(run_binary("train --bogus-flag") == kConfigError);

  std::ofstream(dir / "nodata.toml") << fixture::small_config_text() << "[data]\ndir = \"nowhere\"\n";
  CHECK(run_binary("train --config " + d + "/nodata.toml --quiet") == kDataError);
  CHECK(run_binary("eval --checkpoint " + d + "/run/missing.bin --config " + d + "/small.toml") == kDataError);

  std::ofstream(dir / "diverge.toml") << fixture::small_config_text() << "[data]\ndir = \".\"\n";
  {
    std::string text = slurp(dir / "diverge.toml");
    text.replace(text.find("lr_main = 0.01"), 14, "lr_main = 1e200");
    std::ofstream(dir / "diverge.toml") << text;
  }
  CHECK(run_binary("train --config " + d + "/diverge.toml --out " + d + "/div --quiet") == kNumericError);
}
