#pragma once

// Command implementations behind the `blindsr` executable. Each command takes
// a plain options struct, writes its artifacts, and returns an exit code:
// 0 success, 2 user/input error, 3 numerical divergence.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/cli/config.hpp"
#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/image_io.hpp"
#include "blindsr/core/parallel.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/core/tensor_file.hpp"
#include "blindsr/data/corpus.hpp"
#include "blindsr/data/pairs.hpp"
#include "blindsr/data/textures.hpp"
#include "blindsr/degrade/pipeline.hpp"
#include "blindsr/denoiser/checkpoint.hpp"
#include "blindsr/denoiser/train.hpp"
#include "blindsr/denoiser/unet.hpp"
#include "blindsr/diffusion/process.hpp"
#include "blindsr/diffusion/sampler.hpp"
#include "blindsr/metrics/evaluate.hpp"

namespace blindsr::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kUserError = 2, kDiverged = 3 };

/// Runs `body`, mapping exceptions to exit codes and printing them to `err`.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const ParseError& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return kUserError;
  } catch (const EmptyCorpusError& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const SingularScheduleError& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: bad JSON: " << e.what() << "\n";
    return kUserError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

namespace detail {

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  blindsr::detail::write_file_bytes(path, j.dump(2) + "\n");
}

inline void write_text(const fs::path& path, const std::string& s) { blindsr::detail::write_file_bytes(path, s); }

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// Horizontal strip of equally sized images separated by 1 px gaps.
inline ImageTensor tile_row(const std::vector<ImageTensor>& imgs) {
  const int h = imgs.at(0).height(), w = imgs[0].width(), c = imgs[0].channels();
  const int n = static_cast<int>(imgs.size());
  ImageTensor out(h, n * w + (n - 1), c, Domain::unit);
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int k = 0; k < c; ++k) out.at(y, i * (w + 1) + x, k) = std::clamp(imgs[static_cast<std::size_t>(i)].at(y, x, k), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

inline ImageTensor stack_rows(const std::vector<ImageTensor>& rows) {
  const int w = rows.at(0).width(), c = rows[0].channels();
  int h = 0;
  for (const auto& r : rows) h += r.height() + 1;
  ImageTensor out(h - 1, w, c, Domain::unit);
  int y0 = 0;
  for (const auto& r : rows) {
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < w; ++x) {
        for (int k = 0; k < c; ++k) out.at(y0 + y, x, k) = r.at(y, x, k);
      }
    }
    y0 += r.height() + 1;
  }
  return out;
}

inline std::vector<ImageTensor> load_corpus_images(const data::DatasetManifest& m) {
  std::vector<ImageTensor> imgs(m.entries.size());
  parallel_for(imgs.size(), [&](std::size_t i) { imgs[i] = data::load_entry(m, m.entries[i]); });
  return imgs;
}

// Largest top-left crop whose sides are multiples of m.
inline ImageTensor crop_to_multiple(const ImageTensor& img, int m) {
  const int h = img.height() / m * m, w = img.width() / m * m;
  if (h == img.height() && w == img.width()) return img;
  return img.crop(0, 0, h, w);
}

// Stream ids keep the different consumers of the run seed independent.
enum Stream : std::uint64_t { kInit = 1, kPool = 2, kSample = 5 };

}  // namespace detail

// ------------------------------------------------------------------ synth

struct SynthOptions {
  fs::path output;
  int count = 16;
  int height = 128;
  int width = 128;
  int channels = 3;
  std::uint64_t seed = 0;
};

/// Writes `count` procedural textures as tex_NNNN.png.
inline int cmd_synth(const SynthOptions& o, std::ostream& out) {
  if (o.count <= 0 || o.height <= 0 || o.width <= 0) throw InvalidArgument("synth: count and size must be positive");
  fs::create_directories(o.output);
  const Prng root(o.seed, 0x73796e74ULL);
  parallel_for(static_cast<std::size_t>(o.count), [&](std::size_t i) {
    Prng p = root.split(i);
    const ImageTensor img = data::synth_texture(p, o.height, o.width, o.channels);
    char name[32];
    std::snprintf(name, sizeof name, "tex_%04zu.png", i);
    write_image(o.output / name, img);
  });
  detail::write_json(o.output / "synth.json", {{"command", "synth"},
                                               {"count", o.count},
                                               {"height", o.height},
                                               {"width", o.width},
                                               {"channels", o.channels},
                                               {"seed", o.seed}});
  out << "wrote " << o.count << " textures to " << o.output.string() << "\n";
  return kOk;
}

// ----------------------------------------------------------------- ingest

struct IngestOptions {
  fs::path input;
  fs::path output;  // manifest JSON
  std::string profile = "desk";
  std::string split = "train";
};

inline int cmd_ingest(const IngestOptions& o, std::ostream& out, std::ostream& err) {
  if (o.split != "train" && o.split != "eval") throw InvalidArgument("--split must be train or eval");
  const data::DatasetManifest m =
      data::ingest(o.input, data::profile_by_name(o.profile), o.split == "train" ? data::Split::train : data::Split::eval);
  detail::write_json(o.output, m);
  for (const auto& e : m.errors) err << "warning: " << e.path << ": " << e.message << "\n";
  out << m.entries.size() << " entries, " << m.errors.size() << " errors, " << m.skipped_small
      << " skipped (too small)\n";
  return kOk;
}

// ---------------------------------------------------------------- degrade

struct DegradeOptions {
  fs::path input;
  fs::path output;
  std::uint64_t seed = 0;
  std::string profile = "desk";
  std::optional<fs::path> trace_out;
  std::optional<fs::path> trace_in;
};

/// Degrades every image of a corpus (cropped to multiples of 4) to 1/4 size.
/// Image i draws from Prng(seed).split(i); with --trace-in the recorded
/// traces are replayed instead of sampled.
inline int cmd_degrade(const DegradeOptions& o, std::ostream& out, std::ostream& err) {
  const data::ScaleProfile profile = data::profile_by_name(o.profile);
  if (!fs::is_directory(o.input)) throw InvalidArgument("--input is not a directory: " + o.input.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.input)) {
    if (e.is_regular_file() && is_image_path(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyCorpusError("no images in " + o.input.string());

  nlohmann::json replay;
  if (o.trace_in) replay = nlohmann::json::parse(blindsr::detail::read_file_bytes(*o.trace_in));
  fs::create_directories(o.output);

  const Prng root(o.seed, 0x64656772ULL);
  std::vector<std::string> errors(files.size());
  std::vector<nlohmann::json> traces(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const std::string name = files[i].filename().string();
    try {
      const ImageTensor hr = detail::crop_to_multiple(read_image(files[i]), profile.kMagnification);
      degrade::DegradationTrace tr;
      if (o.trace_in) {
        if (!replay.contains(name)) throw InvalidArgument("no trace for " + name);
        tr = replay.at(name).get<degrade::DegradationTrace>();
      } else {
        Prng p = root.split(i);
        tr = degrade::sample_trace(p, hr.height(), hr.width());
      }
      const ImageTensor lr = degrade::apply_trace(hr, tr);
      const fs::path stem = o.output / files[i].stem();
      write_image(stem.string() + ".png", lr);
      traces[i] = tr;
      detail::write_json(stem.string() + ".trace.json", traces[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  nlohmann::json all = nlohmann::json::object();
  int failed = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      err << "error: " << files[i].filename().string() << ": " << errors[i] << "\n";
    } else {
      all[files[i].filename().string()] = traces[i];
    }
  }
  if (o.trace_out) detail::write_json(*o.trace_out, all);
  detail::write_json(o.output / "degrade.json", {{"command", "degrade"},
                                                 {"seed", o.seed},
                                                 {"profile", profile},
                                                 {"replay", o.trace_in.has_value()}});
  out << (files.size() - static_cast<std::size_t>(failed)) << " degraded, " << failed << " failed\n";
  return failed == 0 ? kOk : kUserError;
}

// ---------------------------------------------------------- make-eval-set

struct EvalSetOptions {
  fs::path input;
  fs::path output;
  std::string profile = "desk";
  int crops_per_image = 25;
  std::uint64_t seed = 0;
  bool use_degradations = true;
};

inline int cmd_make_eval_set(const EvalSetOptions& o, std::ostream& out, std::ostream& err) {
  const data::DatasetManifest m = data::ingest(o.input, data::profile_by_name(o.profile), data::Split::eval);
  for (const auto& e : m.errors) err << "warning: " << e.path << ": " << e.message << "\n";
  data::PairOptions po;
  po.use_degradations = o.use_degradations;
  const std::vector<data::EvalPair> pairs = data::build_eval_set(m, Prng(o.seed, 0x65736574ULL), o.crops_per_image, po);
  nlohmann::json meta = {{"profile", m.profile},
                         {"seed", o.seed},
                         {"crops_per_image", o.crops_per_image},
                         {"use_degradations", o.use_degradations},
                         {"paired", m.paired},
                         {"manifest", m}};
  data::save_eval_set(o.output, pairs, meta);
  out << "wrote " << pairs.size() << " eval pairs to " << o.output.string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------ train

struct TrainOptions {
  RunConfig config;
  fs::path data;
  fs::path checkpoint_out;
  int sample_every = 0;   // steps between preview grids; 0 disables
  int log_every = 100;
  int preview_steps = 32; // sampler steps for previews
};

struct TrainOutcome {
  denoiser::Checkpoint checkpoint;
  denoiser::LossCurve curve;
};

inline fs::path sibling(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

/// Trains from scratch and writes: the checkpoint, <stem>.loss.csv,
/// <stem>.config.json and optional preview grids in <stem>.samples/.
inline TrainOutcome run_training(const TrainOptions& o, std::ostream& out) {
  const RunConfig& cfg = o.config;
  cfg.validate();
  const data::DatasetManifest m = data::ingest(o.data, cfg.profile, data::Split::train);
  const std::vector<ImageTensor> images = detail::load_corpus_images(m);
  const Prng root(cfg.seed);
  const std::vector<denoiser::TrainPair> pool = data::make_training_pool(
      images, static_cast<std::size_t>(cfg.train_pool_size), root.split(detail::kPool), cfg.profile, cfg.pair_options());

  const denoiser::TrainConfig tc = cfg.effective_train();
  Prng init = root.split(detail::kInit);
  denoiser::TrainState st{denoiser::init_params<float>(init, cfg.unet), nn::Adam<float>(tc.adam()), 0};
  out << "training " << st.params.parameter_count() << " parameters for " << tc.steps << " steps ("
      << (cfg.use_degradations ? "degradations" : "bicubic") << ", " << (cfg.use_nca ? "NCA" : "no NCA") << ")\n";

  const fs::path samples_dir = sibling(o.checkpoint_out, ".samples");
  auto on_step = [&](const denoiser::TrainState& s, const denoiser::StepStats& stats) {
    if (o.log_every > 0 && s.step % o.log_every == 0) {
      out << "step " << s.step << " loss " << detail::fmt(stats.loss) << " lr " << detail::fmt(stats.lr)
          << " grad_norm " << detail::fmt(stats.grad_norm) << "\n";
    }
    if (o.sample_every > 0 && s.step % o.sample_every == 0) {
      const std::size_t n = std::min<std::size_t>(4, pool.size());
      std::vector<ImageTensor> cond, hr;
      for (std::size_t i = 0; i < n; ++i) {
        cond.push_back(pool[i].c);
        hr.push_back(pool[i].x);
      }
      diffusion::DiffusionStepPlan plan;
      plan.num_steps = o.preview_steps;
      metrics::EvalOptions eo;
      eo.t_eval = cfg.default_t_eval();
      eo.sched = cfg.schedule;
      eo.seed = cfg.seed;
      std::vector<ImageTensor> outs;
      if (n >= 2) {
        metrics::evaluate(metrics::diffusion_resolver(denoiser::make_denoiser(s.params, cfg.unet), plan, cfg.schedule,
                                                      cfg.sampler_options()),
                          cond, hr, eo, &outs);
        char name[40];
        std::snprintf(name, sizeof name, "step_%07lld.png", static_cast<long long>(s.step));
        fs::create_directories(samples_dir);
        write_image(samples_dir / name, detail::stack_rows({detail::tile_row(cond), detail::tile_row(outs),
                                                            detail::tile_row(hr)}));
      }
    }
  };
  denoiser::LossCurve curve =
      denoiser::train(st, cfg.unet, tc, denoiser::pool_source(pool), cfg.schedule, cfg.seed, on_step);

  denoiser::Checkpoint ck;
  ck.unet = cfg.unet;
  ck.config = to_json_value(cfg);
  ck.state = std::move(st);
  denoiser::save_checkpoint(o.checkpoint_out, ck);

  std::ostringstream csv;
  csv << "step,loss,smoothed\n" << std::setprecision(9);
  for (std::size_t i = 0; i < curve.raw.size(); ++i) csv << i << ',' << curve.raw[i] << ',' << curve.smoothed[i] << '\n';
  detail::write_text(sibling(o.checkpoint_out, ".loss.csv"), csv.str());
  write_run_config(sibling(o.checkpoint_out, ".config.json"), cfg);
  out << "saved " << o.checkpoint_out.string() << " (config " << config_hash(cfg).substr(0, 12) << ")\n";
  return {std::move(ck), std::move(curve)};
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  run_training(o, out);
  return kOk;
}

// ----------------------------------------------------------------- sample

struct SampleOptions {
  fs::path checkpoint;
  fs::path input;
  fs::path output;
  std::optional<double> t_eval;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
};

/// 4x super-resolution of one LR image: bicubic upsampling, NCA at t_eval,
/// ancestral sampling.
inline int cmd_sample(const SampleOptions& o, std::ostream& out) {
  const denoiser::Checkpoint ck = denoiser::load_checkpoint(o.checkpoint);
  const RunConfig cfg = ck.config.get<RunConfig>();
  const ImageTensor lr = read_image(o.input);
  const int m = data::ScaleProfile::kMagnification;
  if (lr.channels() != cfg.unet.image_channels) {
    throw InvalidArgument("input has " + std::to_string(lr.channels()) + " channels, model expects " +
                          std::to_string(cfg.unet.image_channels));
  }
  const int d = cfg.unet.divisor();
  if ((m * lr.height()) % d != 0 || (m * lr.width()) % d != 0) {
    throw InvalidArgument("input " + std::to_string(lr.height()) + "x" + std::to_string(lr.width()) +
                          ": 4x output dims must be divisible by " + std::to_string(d) +
                          " (2^(levels-1) of the UNet)");
  }
  const double t_eval = o.t_eval.value_or(cfg.default_t_eval());
  diffusion::DiffusionStepPlan plan = cfg.sampler;
  if (o.steps) plan.num_steps = *o.steps;
  const Prng root(o.seed.value_or(cfg.seed), detail::kSample);
  Prng aug_prng = root.split(0);
  std::vector<Prng> chain{root.split(1)};
  const ImageTensor c = degrade::bicubic_upsample(lr, m);
  const ImageTensor c_aug = diffusion::noise_augment(c, t_eval, aug_prng, cfg.schedule);
  const std::vector<ImageTensor> res = diffusion::ancestral_sample_batch(
      denoiser::make_denoiser(ck.state.params, cfg.unet), std::span<const ImageTensor>(&c_aug, 1), t_eval, plan, chain,
      cfg.schedule, {}, cfg.sampler_options());
  write_image(o.output, res[0]);
  out << "wrote " << res[0].height() << "x" << res[0].width() << " output to " << o.output.string() << "\n";
  return kOk;
}

// ------------------------------------------------------------ eval / sweep

enum class OracleKind { none, hr, bicubic };

inline OracleKind oracle_from_string(const std::string& s) {
  if (s.empty() || s == "none") return OracleKind::none;
  if (s == "hr") return OracleKind::hr;
  if (s == "bicubic") return OracleKind::bicubic;
  throw InvalidArgument("unknown oracle '" + s + "' (expected hr or bicubic)");
}

struct EvalOptions {
  std::optional<fs::path> checkpoint;
  fs::path eval_set;
  OracleKind oracle = OracleKind::none;  // replaces the checkpoint with a fixed model
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> limit;  // first N pairs only
};

struct EvalContext {
  RunConfig config;
  std::string config_hash;
  std::vector<ImageTensor> cond;
  std::vector<ImageTensor> hr;
  std::shared_ptr<const denoiser::Checkpoint> checkpoint;
  metrics::SuperResolver model;
  int steps = 0;
  std::uint64_t seed = 0;
};

inline EvalContext make_eval_context(const EvalOptions& o) {
  if (!fs::is_directory(o.eval_set)) throw InvalidArgument("missing eval set: " + o.eval_set.string());
  EvalContext ctx;
  std::vector<data::EvalPair> pairs = data::load_eval_set(o.eval_set);
  if (o.limit) {
    if (*o.limit < 2) throw InvalidArgument("--limit must be >= 2");
    if (static_cast<std::size_t>(*o.limit) < pairs.size()) pairs.resize(static_cast<std::size_t>(*o.limit));
  }
  ctx.cond = data::upsampled_conditioning(pairs);
  ctx.hr = data::hr_images(pairs);
  if (o.oracle == OracleKind::none) {
    if (!o.checkpoint) throw InvalidArgument("--checkpoint is required unless --oracle is given");
    ctx.checkpoint = std::make_shared<const denoiser::Checkpoint>(denoiser::load_checkpoint(*o.checkpoint));
    ctx.config = ctx.checkpoint->config.get<RunConfig>();
  }
  ctx.config_hash = config_hash(ctx.config);
  ctx.steps = o.steps.value_or(ctx.config.sampler.num_steps);
  ctx.seed = o.seed.value_or(ctx.config.seed);
  switch (o.oracle) {
    case OracleKind::hr:
      ctx.model = [hr = ctx.hr](const metrics::SampleRequest& r) {
        std::vector<ImageTensor> res;
        for (auto i : r.ids) res.push_back(hr.at(i));
        return res;
      };
      break;
    case OracleKind::bicubic:
      ctx.model = [cond = ctx.cond](const metrics::SampleRequest& r) {
        std::vector<ImageTensor> res;
        for (auto i : r.ids) res.push_back(cond.at(i));
        return res;
      };
      break;
    case OracleKind::none: {
      diffusion::DiffusionStepPlan plan;
      plan.num_steps = ctx.steps;
      // The denoiser refers to the parameters, so the resolver keeps the checkpoint alive.
      auto resolver = metrics::diffusion_resolver(
          denoiser::make_denoiser(ctx.checkpoint->state.params, ctx.config.unet,
                                  static_cast<std::size_t>(ctx.config.eval_batch)),
          plan, ctx.config.schedule, ctx.config.sampler_options());
      ctx.model = [ck = ctx.checkpoint, resolver](const metrics::SampleRequest& r) { return resolver(r); };
      break;
    }
  }
  return ctx;
}

inline metrics::MetricsReport run_eval(const EvalContext& ctx, double t_eval) {
  metrics::EvalOptions eo;
  eo.t_eval = t_eval;
  eo.sched = ctx.config.schedule;
  eo.features = ctx.config.features;
  eo.seed = ctx.seed;
  eo.chunk = static_cast<std::size_t>(ctx.config.eval_batch);
  return metrics::evaluate(ctx.model, ctx.cond, ctx.hr, eo);
}

inline nlohmann::json report_json(const EvalContext& ctx, const metrics::MetricsReport& r) {
  return {{"report", r}, {"config_hash", ctx.config_hash}, {"sampler_steps", ctx.steps}, {"seed", ctx.seed}};
}

inline void print_table(std::ostream& out, const std::vector<metrics::MetricsReport>& rows) {
  out << std::left << std::setw(8) << "t_eval" << std::setw(8) << "pairs" << std::setw(12) << "PSNR" << std::setw(11)
      << "SSIM" << "Frechet\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << detail::fmt(r.t_eval, 3) << std::setw(8) << r.n_pairs << std::setw(12)
        << detail::fmt(r.psnr_mean, 5) << std::setw(11) << detail::fmt(r.ssim_mean, 5) << detail::fmt(r.frechet, 6)
        << "\n";
  }
}

inline std::string csv_with_hash(const std::vector<metrics::MetricsReport>& rows, const std::string& hash) {
  std::string s = metrics::csv_header() + ",config_hash\n";
  for (const auto& r : rows) s += metrics::csv_row(r) + "," + hash + "\n";
  return s;
}

/// Writes <output>.json (report) and <output>.csv (one row).
inline int cmd_eval(const EvalOptions& o, std::optional<double> t_eval, const fs::path& output, std::ostream& out) {
  const EvalContext ctx = make_eval_context(o);
  const metrics::MetricsReport r = run_eval(ctx, t_eval.value_or(ctx.config.default_t_eval()));
  print_table(out, {r});
  fs::path json_path = output;
  if (json_path.extension() != ".json") json_path += ".json";
  detail::write_json(json_path, report_json(ctx, r));
  detail::write_text(sibling(json_path, ".csv"), csv_with_hash({r}, ctx.config_hash));
  write_run_config(sibling(json_path, ".config.json"), ctx.config);
  return kOk;
}

/// Parses "lo:hi:step" into lo, lo + step, ..., hi (inclusive, rounded to the
/// nearest whole number of steps).
inline std::vector<double> parse_grid(const std::string& spec) {
  double lo = 0, hi = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(spec);
  if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !is.eof()) {
    throw InvalidArgument("grid must look like lo:hi:step, got '" + spec + "'");
  }
  if (!(step > 0.0) || hi < lo) throw InvalidArgument("grid needs step > 0 and hi >= lo");
  const long n = std::lround((hi - lo) / step);
  std::vector<double> out;
  for (long k = 0; k <= n; ++k) out.push_back(std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9);
  return out;
}

/// t_eval sweep: report_<t>.json per row plus sweep.csv and sweep.dat
/// ("t_eval frechet" per line) in the output directory.
inline std::vector<metrics::MetricsReport> run_sweep(const EvalContext& ctx, const std::vector<double>& grid,
                                                     const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<metrics::MetricsReport> rows;
  std::string dat = "# t_eval frechet\n";
  for (double t : grid) {
    rows.push_back(run_eval(ctx, t));
    char name[40];
    std::snprintf(name, sizeof name, "report_t%.3f.json", t);
    detail::write_json(dir / name, report_json(ctx, rows.back()));
    dat += detail::fmt(t, 6) + " " + detail::fmt(rows.back().frechet, 10) + "\n";
  }
  detail::write_text(dir / "sweep.csv", csv_with_hash(rows, ctx.config_hash));
  detail::write_text(dir / "sweep.dat", dat);
  write_run_config(dir / "config.json", ctx.config);
  return rows;
}

inline int cmd_sweep(const EvalOptions& o, const std::string& grid, const fs::path& output, std::ostream& out) {
  const std::vector<double> ts = parse_grid(grid);
  const EvalContext ctx = make_eval_context(o);
  print_table(out, run_sweep(ctx, ts, output));
  return kOk;
}

// ----------------------------------------------------------------- ablate

struct AblateOptions {
  RunConfig config;
  fs::path data;
  fs::path eval_set;
  fs::path output;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::optional<int> eval_limit;
  std::optional<std::string> sweep_grid;  // t_eval sweep of the full arm
};

struct AblationRow {
  std::uint64_t seed = 0;
  std::string arm;
  std::string config_hash;
  metrics::MetricsReport report;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::pair<std::uint64_t, std::vector<metrics::MetricsReport>>> sweeps;
};

/// Trains and evaluates the four arms for each seed. Arm checkpoints and
/// reports go to <output>/seed_<s>/<arm>/; the summary to ablation.csv.
inline AblationResult run_ablation(const AblateOptions& o, std::ostream& out) {
  AblationResult result;
  std::string csv = "seed,arm,config_hash,t_eval,n_pairs,psnr_mean,ssim_mean,frechet\n";
  for (std::uint64_t seed : o.seeds) {
    for (const AblationArm& arm : kAblationArms) {
      RunConfig cfg = with_arm(o.config, arm);
      cfg.seed = seed;
      const fs::path dir = o.output / ("seed_" + std::to_string(seed)) / arm.name;
      fs::create_directories(dir);
      out << "== seed " << seed << " arm " << arm.name << "\n";
      TrainOptions to;
      to.config = cfg;
      to.data = o.data;
      to.checkpoint_out = dir / "model.bsr";
      to.log_every = 0;
      run_training(to, out);

      EvalOptions eo;
      eo.checkpoint = to.checkpoint_out;
      eo.eval_set = o.eval_set;
      eo.limit = o.eval_limit;
      const EvalContext ctx = make_eval_context(eo);
      const metrics::MetricsReport r = run_eval(ctx, cfg.default_t_eval());
      detail::write_json(dir / "report.json", report_json(ctx, r));
      print_table(out, {r});
      result.rows.push_back({seed, arm.name, ctx.config_hash, r});
      csv += std::to_string(seed) + "," + arm.name + "," + ctx.config_hash + "," + metrics::csv_row(r) + "\n";

      if (o.sweep_grid && arm.use_degradations && arm.use_nca) {
        result.sweeps.emplace_back(seed, run_sweep(ctx, parse_grid(*o.sweep_grid), dir / "sweep"));
      }
    }
  }
  fs::create_directories(o.output);
  detail::write_text(o.output / "ablation.csv", csv);
  write_run_config(o.output / "config.json", o.config);
  return result;
}

inline int cmd_ablate(const AblateOptions& o, std::ostream& out) {
  run_ablation(o, out);
  return kOk;
}

}  // namespace blindsr::cli
