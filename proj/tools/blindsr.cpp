#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blindsr/cli/commands.hpp"

namespace {

using namespace blindsr;
using namespace blindsr::cli;

// Options shared by commands that build a RunConfig: a JSON file plus
// command-line overrides.
struct ConfigFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<int> batch;
  std::optional<int> pool;
  std::optional<int> sampler_steps;
  std::string profile;
  bool no_nca = false;
  bool no_degrade = false;
  bool no_clip = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Run config JSON (missing keys keep defaults)")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Override the run seed");
    app->add_option("--steps", steps, "Override the number of training steps");
    app->add_option("--batch-size", batch, "Override the training batch size");
    app->add_option("--pool-size", pool, "Override the training pair pool size");
    app->add_option("--sampler-steps", sampler_steps, "Override the number of sampler steps");
    app->add_option("--profile", profile, "Scale profile: desk, paper or mini");
    app->add_flag("--no-nca", no_nca, "Disable noise-conditioning augmentation");
    app->add_flag("--no-degrade", no_degrade, "Train on bicubic downsampling only");
    app->add_flag("--no-clip", no_clip, "Do not clamp x_hat to [0,1] at sampler steps");
  }

  RunConfig build() const {
    RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) c.seed = *seed;
    if (steps) c.train.steps = *steps;
    if (batch) c.train.batch_size = *batch;
    if (pool) c.train_pool_size = *pool;
    if (sampler_steps) c.sampler.num_steps = *sampler_steps;
    if (!profile.empty()) c.profile = data::profile_by_name(profile);
    if (no_nca) c.use_nca = false;
    if (no_degrade) c.use_degradations = false;
    if (no_clip) c.clip_prediction = false;
    c.validate();
    return c;
  }
};

struct EvalFlags {
  std::string checkpoint;
  std::string eval_set;
  std::string oracle;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> limit;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Trained checkpoint");
    app->add_option("--eval-set", eval_set, "Eval-set directory from make-eval-set")->required();
    app->add_option("--oracle", oracle, "Score a fixed model instead: hr or bicubic");
    app->add_option("--steps", steps, "Sampler steps (default: from the checkpoint config)");
    app->add_option("--seed", seed, "Sampling seed (default: the run seed)");
    app->add_option("--limit", limit, "Use only the first N pairs");
  }

  cli::EvalOptions build() const {
    cli::EvalOptions o;
    if (!checkpoint.empty()) o.checkpoint = checkpoint;
    o.eval_set = eval_set;
    o.oracle = oracle_from_string(oracle);
    o.steps = steps;
    o.seed = seed;
    o.limit = limit;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind 4x super-resolution with conditional diffusion models"};
  app.require_subcommand(1);

  SynthOptions synth;
  int synth_size = 128;
  auto* c_synth = app.add_subcommand("synth", "Generate a procedural texture corpus");
  c_synth->add_option("--output", synth.output, "Output directory")->required();
  c_synth->add_option("--count", synth.count, "Number of images");
  c_synth->add_option("--size", synth_size, "Square image side");
  c_synth->add_option("--channels", synth.channels, "1 or 3");
  c_synth->add_option("--seed", synth.seed, "Seed");

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Scan an image directory and write a manifest");
  c_ingest->add_option("--input", ingest.input, "Image directory")->required();
  c_ingest->add_option("--output", ingest.output, "Manifest JSON path")->required();
  c_ingest->add_option("--profile", ingest.profile, "Scale profile");
  c_ingest->add_option("--split", ingest.split, "train or eval");

  DegradeOptions deg;
  std::string trace_out, trace_in;
  auto* c_degrade = app.add_subcommand("degrade", "Apply the randomized degradation pipeline to a directory");
  c_degrade->add_option("--input", deg.input, "HR image directory")->required();
  c_degrade->add_option("--output", deg.output, "Output directory")->required();
  c_degrade->add_option("--seed", deg.seed, "Seed");
  c_degrade->add_option("--profile", deg.profile, "Scale profile");
  c_degrade->add_option("--trace-out", trace_out, "Write all traces to one JSON file");
  c_degrade->add_option("--trace-in", trace_in, "Replay traces from a JSON file")->check(CLI::ExistingFile);

  EvalSetOptions evset;
  bool evset_plain = false;
  auto* c_evset = app.add_subcommand("make-eval-set", "Cut aligned LR/HR evaluation crops");
  c_evset->add_option("--input", evset.input, "HR or paired (hr/, lr/) directory")->required();
  c_evset->add_option("--output", evset.output, "Eval-set directory")->required();
  c_evset->add_option("--profile", evset.profile, "Scale profile");
  c_evset->add_option("--crops", evset.crops_per_image, "Crops per image");
  c_evset->add_option("--seed", evset.seed, "Seed");
  c_evset->add_flag("--no-degradations", evset_plain, "Bicubic LR instead of the degradation pipeline");

  ConfigFlags train_cfg;
  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train a denoiser from scratch");
  train_cfg.add(c_train);
  c_train->add_option("--data", train.data, "Training image directory")->required();
  c_train->add_option("--checkpoint-out", train.checkpoint_out, "Checkpoint path")->required();
  c_train->add_option("--sample-every", train.sample_every, "Steps between preview grids (0 disables)");
  c_train->add_option("--log-every", train.log_every, "Steps between log lines");

  SampleOptions sample;
  std::optional<double> sample_t;
  std::optional<int> sample_steps;
  std::optional<std::uint64_t> sample_seed;
  auto* c_sample = app.add_subcommand("sample", "Super-resolve one low-resolution image");
  c_sample->add_option("--checkpoint", sample.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--input", sample.input, "LR image")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--output", sample.output, "Output image")->required();
  c_sample->add_option("--t-eval", sample_t, "Conditioning noise level");
  c_sample->add_option("--steps", sample_steps, "Sampler steps");
  c_sample->add_option("--seed", sample_seed, "Sampling seed");

  EvalFlags eval_flags;
  std::optional<double> eval_t;
  std::string eval_out;
  auto* c_eval = app.add_subcommand("eval", "PSNR, SSIM and Frechet distance on an eval set");
  eval_flags.add(c_eval);
  c_eval->add_option("--t-eval", eval_t, "Conditioning noise level");
  c_eval->add_option("--output", eval_out, "Report path (.json; a .csv is written next to it)")->required();

  EvalFlags sweep_flags;
  std::string grid = "0:0.4:0.05", sweep_out;
  auto* c_sweep = app.add_subcommand("sweep", "Evaluate over a grid of t_eval values");
  sweep_flags.add(c_sweep);
  c_sweep->add_option("--t-eval-grid", grid, "lo:hi:step");
  c_sweep->add_option("--output", sweep_out, "Output directory")->required();

  ConfigFlags abl_cfg;
  AblateOptions abl;
  std::string abl_grid;
  std::optional<int> abl_limit;
  auto* c_abl = app.add_subcommand("ablate", "Train and evaluate the four ablation arms per seed");
  abl_cfg.add(c_abl);
  c_abl->add_option("--data", abl.data, "Training image directory")->required();
  c_abl->add_option("--eval-set", abl.eval_set, "Eval-set directory")->required();
  c_abl->add_option("--output", abl.output, "Output directory")->required();
  c_abl->add_option("--seeds", abl.seeds, "Seeds")->delimiter(',');
  c_abl->add_option("--limit", abl_limit, "Use only the first N eval pairs");
  c_abl->add_option("--sweep", abl_grid, "Also sweep t_eval (lo:hi:step) for the full arm");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUserError;
  }

  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  return guarded(err, [&]() -> int {
    if (*c_synth) {
      synth.height = synth.width = synth_size;
      return cmd_synth(synth, out);
    }
    if (*c_ingest) return cmd_ingest(ingest, out, err);
    if (*c_degrade) {
      if (!trace_out.empty()) deg.trace_out = trace_out;
      if (!trace_in.empty()) deg.trace_in = trace_in;
      return cmd_degrade(deg, out, err);
    }
    if (*c_evset) {
      evset.use_degradations = !evset_plain;
      return cmd_make_eval_set(evset, out, err);
    }
    if (*c_train) {
      train.config = train_cfg.build();
      return cmd_train(train, out);
    }
    if (*c_sample) {
      sample.t_eval = sample_t;
      sample.steps = sample_steps;
      sample.seed = sample_seed;
      return cmd_sample(sample, out);
    }
    if (*c_eval) return cmd_eval(eval_flags.build(), eval_t, eval_out, out);
    if (*c_sweep) return cmd_sweep(sweep_flags.build(), grid, sweep_out, out);
    if (*c_abl) {
      abl.config = abl_cfg.build();
      abl.eval_limit = abl_limit;
      if (!abl_grid.empty()) abl.sweep_grid = abl_grid;
      return cmd_ablate(abl, out);
    }
    return kUserError;
  });
}
