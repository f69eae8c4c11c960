#include "lca/neuromorphic.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace lca::emu {

double EmuConfig::tau() const { return std::ldexp(1.0, -tau_exp); }

void EmuConfig::validate() const {
  if (tau_exp < 1) throw std::invalid_argument("tau_exp must be >= 1");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (lambda.raw < 0) throw std::invalid_argument("lambda must be >= 0");
  if (lambda_e.raw < 0) throw std::invalid_argument("lambda_e must be >= 0");
}

std::string to_string(Topology t) { return t == Topology::one_layer ? "one_layer" : "two_layer"; }
std::string to_string(NumericMode m) { return m == NumericMode::fixed ? "fixed" : "float"; }

Fanouts fanouts_for(Topology topology, std::size_t input_dim, std::size_t num_features) {
  if (topology == Topology::one_layer) return {num_features == 0 ? 0 : num_features - 1, 0};
  return {input_dim, num_features};
}

namespace {

// Per-representation arithmetic. Both specializations expose the same
// surface so the layer updates are written once.
template <typename Value>
struct Arith;

template <>
struct Arith<fx::FxValue> {
  using V = fx::FxValue;
  using Weights = fx::QuantizedWeights;

  static V from_real(double x) { return fx::fx_from_real(x); }
  static double to_real(V v) { return fx::fx_to_real(v); }
  static V threshold(V lambda) { return lambda; }
  static V soft_threshold(V u, V lambda) { return fx::fx_soft_threshold(u, lambda); }
  static bool positive(V v) { return v.raw > 0; }
  static bool nonzero(V v) { return v.raw != 0; }
  static bool reaches(V e, V threshold) { return std::llabs(std::int64_t{e.raw}) >= threshold.raw; }

  static V clamp_counted(std::int64_t wide, std::size_t& sat) {
    const V out = V::saturate(wide);
    if (out.raw != wide) ++sat;
    return out;
  }
  static V v1_update(V u, V bias, V self, V syn, int tau_exp, std::size_t& sat) {
    const std::int64_t wide = std::int64_t{fx::fx_decay(u, tau_exp).raw} + bias.raw + self.raw + syn.raw;
    return clamp_counted(wide, sat);
  }
  static V tau_scaled(V a, int tau_exp) { return fx::fx_scale_tau(a, tau_exp); }
  static V residual_update(V e, V x, V recon, std::size_t& sat) {
    return clamp_counted(std::int64_t{e.raw} + x.raw - recon.raw, sat);
  }

  static Weights make_weights(const Eigen::MatrixXd& w) { return fx::quantize_weights(w); }
  static std::vector<V> deliver(std::span<const Spike<V>> spikes, const Weights& w, std::size_t out_dim,
                                std::size_t& sat) {
    fx::SynapticInput in = fx::fx_deliver(spikes, w, out_dim);
    sat += in.saturations;
    return std::move(in.values);
  }
};

template <>
struct Arith<double> {
  using V = double;
  using Weights = Eigen::MatrixXd;

  static constexpr double kRangeMin = -128.0;
  static constexpr double kRangeMax = 128.0 - 1.0 / 65536.0;

  static V from_real(double x) { return x; }
  static double to_real(V v) { return v; }
  static V threshold(fx::FxValue lambda) { return fx::fx_to_real(lambda); }
  static V soft_threshold(V u, V lambda) { return u > lambda ? u - lambda : 0.0; }
  static bool positive(V v) { return v > 0.0; }
  static bool nonzero(V v) { return v != 0.0; }
  static bool reaches(V e, V threshold) { return std::abs(e) >= threshold; }

  // Exact arithmetic; leaving the Q7.16 range is counted, not clamped.
  static V counted(V v, std::size_t& sat) {
    if (!(v >= kRangeMin && v <= kRangeMax)) ++sat;
    return v;
  }
  static V v1_update(V u, V bias, V self, V syn, int tau_exp, std::size_t& sat) {
    return counted(u - std::ldexp(u, -tau_exp) + bias + self + syn, sat);
  }
  static V tau_scaled(V a, int tau_exp) { return std::ldexp(a, -tau_exp); }
  static V residual_update(V e, V x, V recon, std::size_t& sat) { return counted(e + x - recon, sat); }

  static Weights make_weights(const Eigen::MatrixXd& w) { return w; }
  static std::vector<V> deliver(std::span<const Spike<V>> spikes, const Weights& w, std::size_t out_dim,
                                std::size_t& sat) {
    if (static_cast<Eigen::Index>(out_dim) != w.rows()) throw std::invalid_argument("deliver: bad out_dim");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(w.rows());
    for (const auto& s : spikes) {
      if (s.index >= static_cast<std::size_t>(w.cols())) throw std::out_of_range("deliver: spike index");
      acc.noalias() += s.payload * w.col(static_cast<Eigen::Index>(s.index));
    }
    std::vector<V> out(acc.data(), acc.data() + acc.size());
    for (V& v : out) counted(v, sat);
    return out;
  }
};

template <typename Value>
std::size_t advance_v1(V1Layer<Value>& layer, std::span<const Value> syn_in, const EmuConfig& cfg,
                       SpikeFrame<Value>& frame) {
  using A = Arith<Value>;
  const std::size_t n = layer.u.size();
  if (syn_in.size() != n || layer.bias.size() != n) throw std::invalid_argument("v1_step: dimension mismatch");
  const bool self_comp = cfg.topology == Topology::two_layer;
  std::size_t sat = 0;
  frame.source = Layer::v1;
  frame.entries.clear();
  for (std::size_t i = 0; i < n; ++i) {
    Value self{};
    if (self_comp) self = A::tau_scaled(A::soft_threshold(layer.u[i], layer.threshold), cfg.tau_exp);
    layer.u[i] = A::v1_update(layer.u[i], layer.bias[i], self, syn_in[i], cfg.tau_exp, sat);
    const Value a = A::soft_threshold(layer.u[i], layer.threshold);
    if (A::positive(a)) frame.entries.push_back({i, a});
  }
  return sat;
}

template <typename Value>
std::size_t advance_residual(ResidualLayer<Value>& layer, std::span<const Value> recon_in,
                             SpikeFrame<Value>& frame) {
  using A = Arith<Value>;
  const std::size_t m = layer.e.size();
  if (recon_in.size() != m || layer.x.size() != m) throw std::invalid_argument("residual_step: dimension mismatch");
  std::size_t sat = 0;
  frame.source = Layer::residual;
  frame.entries.clear();
  for (std::size_t i = 0; i < m; ++i) {
    layer.e[i] = A::residual_update(layer.e[i], layer.x[i], recon_in[i], sat);
    if (A::nonzero(layer.e[i]) && A::reaches(layer.e[i], layer.threshold)) {
      frame.entries.push_back({i, layer.e[i]});
      layer.e[i] = Value{};
    }
  }
  return sat;
}

}  // namespace

template <typename Value>
V1StepResult<Value> v1_step(V1Layer<Value> layer, std::span<const Value> syn_in, const EmuConfig& cfg) {
  cfg.validate();
  V1StepResult<Value> out;
  out.saturations = advance_v1(layer, syn_in, cfg, out.frame);
  out.layer = std::move(layer);
  return out;
}

template <typename Value>
ResidualStepResult<Value> residual_step(ResidualLayer<Value> layer, std::span<const Value> recon_in,
                                        const EmuConfig& cfg) {
  cfg.validate();
  ResidualStepResult<Value> out;
  out.saturations = advance_residual(layer, recon_in, out.frame);
  out.layer = std::move(layer);
  return out;
}

template <typename Value>
Network<Value>::Network(const Dictionary& d, const EmuConfig& cfg)
    : cfg_(cfg),
      input_dim_(static_cast<std::size_t>(d.input_dim())),
      num_features_(static_cast<std::size_t>(d.num_features())),
      fanouts_(fanouts_for(cfg.topology, input_dim_, num_features_)) {
  cfg_.validate();
  using A = Arith<Value>;
  if (cfg_.topology == Topology::one_layer) {
    conn_.lateral = A::make_weights(lateral_weights(d, cfg_.tau()));
  } else {
    conn_.residual_to_v1 = A::make_weights(cfg_.tau() * d.phi().transpose());
    conn_.v1_to_residual = A::make_weights(d.phi());
  }
  v1_.threshold = A::threshold(cfg_.lambda);
  residual_.threshold = A::threshold(cfg_.lambda_e);
  v1_.u.assign(num_features_, Value{});
  v1_.bias.assign(num_features_, Value{});
  if (cfg_.topology == Topology::two_layer) {
    residual_.e.assign(input_dim_, Value{});
    residual_.x.assign(input_dim_, Value{});
  }
  phi_ = d.phi();
}

template <typename Value>
void Network<Value>::reset() {
  std::fill(v1_.u.begin(), v1_.u.end(), Value{});
  std::fill(residual_.e.begin(), residual_.e.end(), Value{});
  last_v1_frame_ = SpikeFrame<Value>{};
  timestep_ = 0;
}

template <typename Value>
void Network<Value>::present(const Eigen::Ref<const Eigen::VectorXd>& x) {
  using A = Arith<Value>;
  if (static_cast<std::size_t>(x.size()) != input_dim_) {
    throw std::invalid_argument("input length " + std::to_string(x.size()) + " does not match dictionary input_dim " +
                                std::to_string(input_dim_));
  }
  if (cfg_.topology == Topology::one_layer) {
    // tau * b is formed at full precision and quantized once.
    const Eigen::VectorXd tau_b = cfg_.tau() * (phi_.transpose() * x);
    for (std::size_t j = 0; j < num_features_; ++j) v1_.bias[j] = A::from_real(tau_b(static_cast<Eigen::Index>(j)));
  } else {
    for (std::size_t i = 0; i < input_dim_; ++i) residual_.x[i] = A::from_real(x(static_cast<Eigen::Index>(i)));
  }
  reset();
}

template <typename Value>
typename Network<Value>::StepReport Network<Value>::step() {
  using A = Arith<Value>;
  StepReport report;
  ++timestep_;
  if (cfg_.topology == Topology::one_layer) {
    const std::vector<Value> syn =
        A::deliver(last_v1_frame_.entries, conn_.lateral, num_features_, report.saturations);
    report.saturations += advance_v1(v1_, std::span<const Value>(syn), cfg_, report.v1_frame);
  } else {
    const std::vector<Value> recon =
        A::deliver(last_v1_frame_.entries, conn_.v1_to_residual, input_dim_, report.saturations);
    report.saturations += advance_residual(residual_, std::span<const Value>(recon), report.residual_frame);
    const std::vector<Value> syn =
        A::deliver(report.residual_frame.entries, conn_.residual_to_v1, num_features_, report.saturations);
    report.saturations += advance_v1(v1_, std::span<const Value>(syn), cfg_, report.v1_frame);
  }
  report.v1_frame.timestep = timestep_;
  report.residual_frame.timestep = timestep_;
  report.residual_frame.source = Layer::residual;
  last_v1_frame_ = report.v1_frame;
  return report;
}

template <typename Value>
Eigen::VectorXd Network<Value>::activations() const {
  using A = Arith<Value>;
  Eigen::VectorXd a(static_cast<Eigen::Index>(num_features_));
  for (std::size_t j = 0; j < num_features_; ++j) {
    a(static_cast<Eigen::Index>(j)) = A::to_real(A::soft_threshold(v1_.u[j], v1_.threshold));
  }
  return a;
}

template <typename Value>
EmuRun Network<Value>::run(const Eigen::Ref<const Eigen::VectorXd>& x, const EmuRunOptions& opts) {
  present(x);
  frames_.clear();
  EmuRun out;
  const auto steps = static_cast<std::size_t>(cfg_.steps);
  out.v1_spikes_per_step.reserve(steps);
  if (cfg_.topology == Topology::two_layer) out.residual_spikes_per_step.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    StepReport r = step();
    out.saturation_events += r.saturations;
    out.v1_spikes_per_step.push_back(r.v1_frame.size());
    out.v1_spikes += r.v1_frame.size();
    out.synops += r.v1_frame.size() * fanouts_.v1;
    if (cfg_.topology == Topology::two_layer) {
      out.residual_spikes_per_step.push_back(r.residual_frame.size());
      out.residual_spikes += r.residual_frame.size();
      out.synops += r.residual_frame.size() * fanouts_.residual;
    }
    if (opts.record_activations) out.trajectory.push_back(activations());
    if (opts.record_frames) {
      if (cfg_.topology == Topology::two_layer) frames_.push_back(std::move(r.residual_frame));
      frames_.push_back(std::move(r.v1_frame));
    }
  }
  out.activations = activations();
  return out;
}

EmuRun run_emulation(const Dictionary& d, const Eigen::Ref<const Eigen::VectorXd>& x, const EmuConfig& cfg,
                     const EmuRunOptions& opts) {
  if (x.size() != d.input_dim()) {
    throw std::invalid_argument("run_emulation: input length " + std::to_string(x.size()) +
                                " does not match dictionary input_dim " + std::to_string(d.input_dim()));
  }
  if (cfg.numeric == NumericMode::fixed) return Network<fx::FxValue>(d, cfg).run(x, opts);
  return Network<double>(d, cfg).run(x, opts);
}

template V1StepResult<fx::FxValue> v1_step(V1Layer<fx::FxValue>, std::span<const fx::FxValue>, const EmuConfig&);
template V1StepResult<double> v1_step(V1Layer<double>, std::span<const double>, const EmuConfig&);
template ResidualStepResult<fx::FxValue> residual_step(ResidualLayer<fx::FxValue>, std::span<const fx::FxValue>,
                                                       const EmuConfig&);
template ResidualStepResult<double> residual_step(ResidualLayer<double>, std::span<const double>, const EmuConfig&);
template class Network<fx::FxValue>;
template class Network<double>;

}  // namespace lca::emu
