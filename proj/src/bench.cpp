#include "lca/bench.hpp"

#include "lca/neuromorphic.hpp"
#include "lca/reference.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <tuple>

namespace lca::bench {

std::string to_string(Model m) {
  switch (m) {
    case Model::one_layer_float: return "one-layer-float";
    case Model::one_layer_fixed: return "one-layer-fixed";
    case Model::two_layer_float: return "two-layer-float";
    case Model::two_layer_fixed: return "two-layer-fixed";
  }
  return "unknown";
}

Model parse_model(const std::string& name) {
  for (Model m : {Model::one_layer_float, Model::one_layer_fixed, Model::two_layer_float, Model::two_layer_fixed}) {
    if (to_string(m) == name) return m;
  }
  throw UsageError("unknown model '" + name +
                   "' (expected one-layer-float, one-layer-fixed, two-layer-float or two-layer-fixed)");
}

bool is_two_layer(Model m) { return m == Model::two_layer_float || m == Model::two_layer_fixed; }

namespace {

void check_exp_range(const char* what, int lo, int hi) {
  if (lo > hi) throw UsageError(std::string(what) + ": min exponent exceeds max exponent");
  if (lo < kMinThresholdExp || hi > kMaxThresholdExp) {
    throw UsageError(std::string(what) + ": exponents must lie in [" + std::to_string(kMinThresholdExp) + ", " +
                     std::to_string(kMaxThresholdExp) + "]");
  }
}

}  // namespace

void SweepSpec::validate() const {
  if (models.empty()) throw UsageError("at least one model is required");
  check_exp_range("lambda", lambda_min_exp, lambda_max_exp);
  check_exp_range("lambda_e", lambda_e_min_exp, lambda_e_max_exp);
  if (num_images < 1) throw UsageError("--num-images must be >= 1");
}

std::vector<RunPoint> SweepSpec::grid() const {
  std::vector<RunPoint> points;
  for (Model m : models) {
    for (int le = lambda_min_exp; le <= lambda_max_exp; ++le) {
      if (!is_two_layer(m)) {
        points.push_back({m, le, lambda_e_min_exp});
        continue;
      }
      for (int ee = lambda_e_min_exp; ee <= lambda_e_max_exp; ++ee) points.push_back({m, le, ee});
    }
  }
  return points;
}

std::vector<std::size_t> sample_images(std::size_t available, std::size_t k, std::uint64_t seed) {
  if (k > available) {
    throw UsageError("requested " + std::to_string(k) + " images but only " + std::to_string(available) +
                     " are available");
  }
  std::vector<std::size_t> pool(available);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, available - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

struct Outcome {
  Eigen::VectorXd activations;
  io::ActivityCounters counters;
  std::int64_t wall_ns = 0;
};

// Runs one (model, lambda, lambda_e) configuration over many images, reusing
// the weights built for the first.
class PointRunner {
 public:
  PointRunner(const Dictionary& d, const RunPoint& p, const ExecOptions& opts) : d_(d), point_(p), opts_(opts) {
    cfg_.lambda = fx::fx_from_real(std::ldexp(1.0, p.lambda_exp));
    cfg_.lambda_e = fx::fx_from_real(std::ldexp(1.0, p.lambda_e_exp));
    cfg_.tau_exp = opts.tau_exp;
    cfg_.steps = opts.steps;
    cfg_.topology = is_two_layer(p.model) ? emu::Topology::two_layer : emu::Topology::one_layer;
    cfg_.numeric = (p.model == Model::one_layer_fixed || p.model == Model::two_layer_fixed) ? emu::NumericMode::fixed
                                                                                              : emu::NumericMode::floating;
    switch (p.model) {
      case Model::one_layer_float:
        reference_.emplace(d, LcaConfig{std::ldexp(1.0, p.lambda_exp), cfg_.tau(), opts.steps});
        break;
      case Model::one_layer_fixed:
      case Model::two_layer_fixed:
        fixed_.emplace(d, cfg_);
        break;
      case Model::two_layer_float:
        floating_.emplace(d, cfg_);
        break;
    }
  }

  Outcome run(const Eigen::VectorXd& x) {
    if (reference_) return run_reference(x);
    if (fixed_) return run_network(*fixed_, x);
    return run_network(*floating_, x);
  }

  io::RunLabel label(std::size_t image_index) const {
    io::RunLabel l;
    l.model = to_string(point_.model);
    l.lambda = std::ldexp(1.0, point_.lambda_exp);
    l.lambda_e = is_two_layer(point_.model) ? std::ldexp(1.0, point_.lambda_e_exp) : 0.0;
    l.tau = cfg_.tau();
    l.steps = opts_.steps;
    l.image_index = static_cast<std::int64_t>(image_index);
    return l;
  }

 private:
  // Spike accounting for the reference mirrors the one-layer emulator: every
  // active neuron emits once per step to its N - 1 lateral targets.
  Outcome run_reference(const Eigen::VectorXd& x) {
    const LcaSolver<double>& solver = *reference_;
    constexpr double kRangeMax = 128.0 - 1.0 / 65536.0;
    Outcome o;
    LcaState<double> s = solver.initial_state(x);
    const auto fanout = static_cast<std::uint64_t>(d_.num_features() - 1);
    const auto start = Clock::now();
    for (int t = 0; t < opts_.steps; ++t) {
      solver.step(s);
      const auto active = static_cast<std::uint64_t>((s.a.array() > 0.0).count());
      o.counters.v1_spikes += active;
      o.counters.synops += active * fanout;
      o.counters.saturation_events +=
          static_cast<std::uint64_t>((!(s.u.array() >= -128.0 && s.u.array() <= kRangeMax)).count());
    }
    o.wall_ns = elapsed_ns(start);
    o.activations = s.a;
    return o;
  }

  template <typename Value>
  Outcome run_network(emu::Network<Value>& net, const Eigen::VectorXd& x) {
    Outcome o;
    net.present(x);
    const auto start = Clock::now();
    for (int t = 0; t < opts_.steps; ++t) {
      const auto r = net.step();
      o.counters.v1_spikes += r.v1_frame.size();
      o.counters.residual_spikes += r.residual_frame.size();
      o.counters.saturation_events += r.saturations;
    }
    o.wall_ns = elapsed_ns(start);
    const emu::Fanouts f = emu::fanouts_for(cfg_.topology, static_cast<std::size_t>(d_.input_dim()),
                                            static_cast<std::size_t>(d_.num_features()));
    o.counters.synops = o.counters.v1_spikes * f.v1 + o.counters.residual_spikes * f.residual;
    o.activations = net.activations();
    return o;
  }

  const Dictionary& d_;
  RunPoint point_;
  ExecOptions opts_;
  emu::EmuConfig cfg_;
  std::optional<LcaSolver<double>> reference_;
  std::optional<emu::Network<fx::FxValue>> fixed_;
  std::optional<emu::Network<double>> floating_;
};

auto row_key(const RunPoint& p, std::size_t image) {
  return std::make_tuple(static_cast<int>(p.model), p.lambda_exp, is_two_layer(p.model) ? p.lambda_e_exp : 0, image);
}

}  // namespace

std::vector<io::MetricsRow> execute(const Dictionary& d, const io::ImageSet& images,
                                    std::span<const RunPoint> points, std::span<const std::size_t> image_indices,
                                    const ExecOptions& opts) {
  if (opts.steps < 1) throw UsageError("--steps must be >= 1");
  if (opts.tau_exp < 1) throw UsageError("--tau-exp must be >= 1");
  io::check_image_dims(images, d.input_dim());
  for (std::size_t idx : image_indices) {
    if (idx >= images.count()) throw std::out_of_range("image index " + std::to_string(idx) + " out of range");
  }

  // One job per run point; images within a job run sequentially with reset.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return row_key(points[a], 0) < row_key(points[b], 0); });

  std::vector<std::vector<io::MetricsRow>> results(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= order.size()) return;
      try {
        const RunPoint& p = points[order[j]];
        PointRunner runner(d, p, opts);
        auto& rows = results[j];
        for (std::size_t idx : image_indices) {
          const Eigen::VectorXd& x = images.images[idx];
          const Outcome o = runner.run(x);
          rows.push_back(io::compute_metrics(runner.label(idx), x, d, o.activations, o.counters,
                                             opts.timing ? o.wall_ns : 0));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(order.size());
      }
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(order.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<io::MetricsRow> rows;
  for (std::size_t j = 0; j < order.size(); ++j) {
    auto& chunk = results[j];
    std::sort(chunk.begin(), chunk.end(),
              [](const io::MetricsRow& a, const io::MetricsRow& b) { return a.image_index < b.image_index; });
    for (auto& r : chunk) rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

struct CommonFlags {
  std::string dict;
  std::string images;
  std::size_t num_images = 10;
  int steps = 256;
  int tau_exp = 7;
  std::uint64_t seed = 0;
  std::string out;
  unsigned jobs = 1;
  bool no_timing = false;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--dict", f.dict, "Dictionary file (LCAD)")->required();
  cmd.add_option("--images", f.images, "IDX3 image file")->required();
  cmd.add_option("--num-images", f.num_images, "Images per configuration");
  cmd.add_option("--steps", f.steps, "Timesteps per reconstruction")->capture_default_str();
  cmd.add_option("--tau-exp", f.tau_exp, "tau = 2^-E")->capture_default_str();
  cmd.add_option("--seed", f.seed, "Image sampling seed")->capture_default_str();
  cmd.add_option("--out", f.out, "Output CSV path")->required();
  cmd.add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();
  cmd.add_flag("--no-timing", f.no_timing, "Write 0 in the wall_ns column");
}

void write_metadata(const std::string& command, const CommonFlags& f, const SweepSpec& spec,
                    std::span<const std::size_t> indices) {
  nlohmann::ordered_json meta;
  meta["command"] = command;
  std::vector<std::string> models;
  for (Model m : spec.models) models.push_back(to_string(m));
  meta["models"] = models;
  meta["dictionary"] = f.dict;
  meta["images"] = f.images;
  meta["image_indices"] = std::vector<std::size_t>(indices.begin(), indices.end());
  meta["seed"] = f.seed;
  meta["steps"] = f.steps;
  meta["tau_exp"] = f.tau_exp;
  meta["lambda_exp_range"] = {spec.lambda_min_exp, spec.lambda_max_exp};
  meta["lambda_e_exp_range"] = {spec.lambda_e_min_exp, spec.lambda_e_max_exp};
  meta["pixel_scaling"] = "p/255";
  meta["timing"] = !f.no_timing;
  std::ofstream out(f.out + ".meta.json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + f.out + ".meta.json");
  out << meta.dump(2) << '\n';
}

int run_sweep(const std::string& command, const CommonFlags& f, const SweepSpec& spec, bool first_k,
              std::ostream& out, std::ostream& err) {
  spec.validate();
  if (f.steps < 1) throw UsageError("--steps must be >= 1");
  if (f.tau_exp < 1) throw UsageError("--tau-exp must be >= 1");
  if (f.jobs < 1) throw UsageError("--jobs must be >= 1");

  const Dictionary d = load_dictionary(f.dict);
  const io::ImageSet images = io::load_idx_images(f.images);
  io::check_image_dims(images, d.input_dim(), &err);

  std::vector<std::size_t> indices;
  if (first_k) {
    if (spec.num_images > images.count()) {
      throw UsageError("requested " + std::to_string(spec.num_images) + " images but " + f.images + " holds " +
                       std::to_string(images.count()));
    }
    indices.resize(spec.num_images);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  } else {
    indices = sample_images(images.count(), spec.num_images, spec.seed);
  }

  const std::vector<RunPoint> points = spec.grid();
  const std::vector<io::MetricsRow> rows =
      execute(d, images, points, indices, ExecOptions{f.steps, f.tau_exp, f.jobs, !f.no_timing});
  io::write_csv(rows, f.out);
  write_metadata(command, f, spec, indices);
  out << "wrote " << rows.size() << " rows to " << f.out << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"LCA sparse-coding benchmark: float reference and fixed-point neuromorphic emulation"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string run_model;
  int run_lambda_exp = -1;
  int run_lambda_e_exp = 6;
  auto* run = app.add_subcommand("run", "Run one model on the first K images");
  add_common(*run, run_flags);
  run->add_option("--model", run_model, "one-layer-float | one-layer-fixed | two-layer-float | two-layer-fixed")
      ->required();
  run->add_option("--lambda-exp", run_lambda_exp, "lambda = 2^E")->capture_default_str();
  run->add_option("--lambda-e-exp", run_lambda_e_exp, "lambda_e = 2^E (two-layer)")->capture_default_str();

  CommonFlags sl_flags;
  std::vector<std::string> sl_models{"one-layer-float", "one-layer-fixed"};
  SweepSpec sl_spec;
  auto* sweep_l = app.add_subcommand("sweep-lambda", "Sweep the V1 threshold over a 2^E grid");
  add_common(*sweep_l, sl_flags);
  sweep_l->add_option("--model", sl_models, "Models (repeat or comma-separate)")->delimiter(',');
  sweep_l->add_option("--lambda-min-exp", sl_spec.lambda_min_exp)->capture_default_str();
  sweep_l->add_option("--lambda-max-exp", sl_spec.lambda_max_exp)->capture_default_str();
  int sl_lambda_e_exp = 6;
  sweep_l->add_option("--lambda-e-exp", sl_lambda_e_exp, "lambda_e = 2^E for two-layer models")
      ->capture_default_str();

  CommonFlags se_flags;
  se_flags.num_images = 3;
  std::vector<std::string> se_models{"two-layer-fixed"};
  SweepSpec se_spec;
  se_spec.lambda_e_min_exp = -16;
  auto* sweep_e = app.add_subcommand("sweep-lambda-e", "Sweep the residual threshold over a 2^E grid");
  add_common(*sweep_e, se_flags);
  sweep_e->add_option("--model", se_models, "Two-layer models (repeat or comma-separate)")->delimiter(',');
  int se_lambda_exp = -1;
  sweep_e->add_option("--lambda-exp", se_lambda_exp, "lambda = 2^E")->capture_default_str();
  sweep_e->add_option("--lambda-e-min-exp", se_spec.lambda_e_min_exp)->capture_default_str();
  sweep_e->add_option("--lambda-e-max-exp", se_spec.lambda_e_max_exp)->capture_default_str();

  std::string md_mode = "gaussian";
  long long md_m = 784;
  long long md_n = 784;
  std::uint64_t md_seed = 0;
  std::string md_out;
  auto* make_dict = app.add_subcommand("make-dict", "Synthesize a unit-norm dictionary");
  make_dict->add_option("--mode", md_mode, "gaussian | overcomplete_dct")->capture_default_str();
  make_dict->add_option("--m", md_m, "Input dimension")->capture_default_str();
  make_dict->add_option("--n", md_n, "Number of features")->capture_default_str();
  make_dict->add_option("--seed", md_seed)->capture_default_str();
  make_dict->add_option("--out", md_out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*run) {
      SweepSpec spec;
      spec.models = {parse_model(run_model)};
      spec.lambda_min_exp = spec.lambda_max_exp = run_lambda_exp;
      spec.lambda_e_min_exp = spec.lambda_e_max_exp = run_lambda_e_exp;
      spec.num_images = run_flags.num_images;
      spec.seed = run_flags.seed;
      return run_sweep("run", run_flags, spec, true, out, err);
    }
    if (*sweep_l) {
      for (const auto& m : sl_models) sl_spec.models.push_back(parse_model(m));
      sl_spec.lambda_e_min_exp = sl_spec.lambda_e_max_exp = sl_lambda_e_exp;
      sl_spec.num_images = sl_flags.num_images;
      sl_spec.seed = sl_flags.seed;
      return run_sweep("sweep-lambda", sl_flags, sl_spec, false, out, err);
    }
    if (*sweep_e) {
      for (const auto& m : se_models) {
        const Model model = parse_model(m);
        if (!is_two_layer(model)) throw UsageError("sweep-lambda-e needs a two-layer model, got '" + m + "'");
        se_spec.models.push_back(model);
      }
      se_spec.lambda_min_exp = se_spec.lambda_max_exp = se_lambda_exp;
      se_spec.num_images = se_flags.num_images;
      se_spec.seed = se_flags.seed;
      return run_sweep("sweep-lambda-e", se_flags, se_spec, false, out, err);
    }
    if (*make_dict) {
      if (md_m < 1 || md_n < 1) throw UsageError("--m and --n must be >= 1");
      SynthMode mode{};
      try {
        mode = parse_synth_mode(md_mode);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const Dictionary d = synth_dictionary(md_seed, mode, md_m, md_n);
      save_dictionary(d, md_out);
      out << "wrote " << md_m << "x" << md_n << " dictionary to " << md_out << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("lca_bench");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace lca::bench
