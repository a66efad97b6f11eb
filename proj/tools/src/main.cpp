#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace sgg::cli;
  CLI::App app{"Knowledge-refined scene graph generation on synthetic scenes"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic corpus: scenes, images, KB triples, config");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--images", synth.synth.images, "Number of scenes");
  s->add_option("--classes", synth.synth.classes, "Object classes (<= 20)");
  s->add_option("--predicates", synth.synth.predicates, "Predicates (<= 10)");
  s->add_option("--min-objects", synth.synth.min_objects);
  s->add_option("--max-objects", synth.synth.max_objects);
  s->add_option("--size", synth.synth.width, "Canvas side in pixels")->each([&](const std::string&) {
    synth.synth.height = synth.synth.width;
  });
  s->add_option("--seed", synth.synth.seed);

  TrainOptions train;
  std::uint64_t train_seed = 0;
  std::size_t train_steps = 0;
  auto* t = app.add_subcommand("train", "Pretrain the image branch, then train jointly");
  t->add_option("--config", train.config, "Config file")->required();
  auto* t_seed = t->add_option("--seed", train_seed, "Master seed (overrides train.seed and model.init_seed)");
  t->add_option("--out", train.out, "Output directory (default: <config dir>/run)");
  auto* t_steps = t->add_option("--steps", train_steps, "Training steps; also caps pretraining steps");
  t->add_flag("--no-gan", train.no_gan, "Disable the object-to-image branch");
  t->add_flag("--no-kb", train.no_kb, "Disable knowledge refinement");
  t->add_option("--resume", train.resume, "Continue from a checkpoint");
  t->add_flag("--quiet", train.quiet);

  EvalCommandOptions ev;
  auto* e = app.add_subcommand("eval", "PhrDet / SGGen Recall@K of a checkpoint on its dataset");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--config", ev.config, "Config (default: config.toml beside the checkpoint)");
  auto* e_k = e->add_option("--k", ev.ks, "Recall cut-off; repeatable")->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  e->add_option("--out", ev.out, "Directory for report.txt, metrics.csv and graph JSONL");
  e->add_flag("--no-kb", ev.no_kb);
  e->add_flag("--greedy", ev.greedy, "Greedy instead of optimal one-to-one matching");
  e->add_flag("--micro", ev.micro, "Pool hits over all images instead of per-image averaging");
  e->add_flag("--top1", ev.top1, "One predicate per edge instead of all predicates");

  ScoreOptions sc;
  auto* r = app.add_subcommand("score", "Recall@K of prediction JSONL against ground-truth JSONL");
  r->add_option("--pred", sc.predictions)->required();
  r->add_option("--gt", sc.ground_truth)->required();
  r->add_option("--labels", sc.labels, "meta.json of the dataset")->required();
  auto* r_k = r->add_option("--k", sc.ks)->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  r->add_flag("--greedy", sc.greedy);
  r->add_flag("--micro", sc.micro);

  std::string scope = "all";
  std::uint64_t gc_seed = 0;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  g->add_option("--scope", scope, "op, module, end2end or all")->check(CLI::IsMember({"op", "module", "end2end", "all"}));
  g->add_option("--seed", gc_seed);

  RenderOptions rd;
  auto* d = app.add_subcommand("render", "Generate an image for one scene from a checkpoint");
  d->add_option("--checkpoint", rd.checkpoint)->required();
  d->add_option("--config", rd.config);
  d->add_option("--scene", rd.scene, "Scene index");
  d->add_option("--out", rd.out, "Output PPM")->required();
  d->add_flag("--gt", rd.ground_truth, "Use ground-truth objects for the layout");
  d->add_option("--seed", rd.seed, "Noise seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*s) cmd_synth(synth, std::cout);
    if (*t) {
      if (*t_seed) train.seed = train_seed;
      if (*t_steps) train.steps = train_steps;
      cmd_train(train, std::cout);
    }
    if (*e) {
      if (!*e_k) ev.ks = {50, 100};
      cmd_eval(ev, std::cout);
    }
    if (*r) {
      if (!*r_k) sc.ks = {50, 100};
      cmd_score(sc, std::cout);
    }
    if (*g && !cmd_gradcheck(scope, gc_seed, std::cout)) return kNumericError;
    if (*d) cmd_render(rd, std::cout);
  } catch (...) {
    return report_exception(std::cerr);
  }
  return kOk;
}
