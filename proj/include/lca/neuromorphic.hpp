#pragma once

#include "lca/dictionary.hpp"
#include "lca/fixed_point.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lca::emu {

enum class Topology { one_layer, two_layer };
enum class NumericMode { fixed, floating };

/// Emulator run parameters. Thresholds are Q7.16 in both numeric modes;
/// floating mode reads their real value.
struct EmuConfig {
  fx::FxValue lambda = fx::fx_from_real(0.5);
  fx::FxValue lambda_e = fx::FxValue::lsb();
  int tau_exp = 7;
  int steps = 256;
  Topology topology = Topology::one_layer;
  NumericMode numeric = NumericMode::fixed;

  double tau() const;
  void validate() const;
};

enum class Layer : std::uint8_t { v1, residual };

template <typename Value>
using Spike = fx::BasicSpike<Value>;

/// Graded spikes emitted by one layer in one timestep, in ascending index order.
template <typename Value>
struct SpikeFrame {
  std::size_t timestep = 0;
  Layer source = Layer::v1;
  std::vector<Spike<Value>> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

template <typename Value>
struct V1Layer {
  std::vector<Value> u;
  /// tau * Phi^T x for one_layer; zero for two_layer.
  std::vector<Value> bias;
  Value threshold{};
};

template <typename Value>
struct ResidualLayer {
  std::vector<Value> e;
  std::vector<Value> x;
  Value threshold{};
};

template <typename Value>
struct V1StepResult {
  V1Layer<Value> layer;
  SpikeFrame<Value> frame;
  std::size_t saturations = 0;
};

template <typename Value>
struct ResidualStepResult {
  ResidualLayer<Value> layer;
  SpikeFrame<Value> frame;
  std::size_t saturations = 0;
};

/// u <- decay(u) + bias + [two_layer: tau * T(u_prev)] + syn_in, saturating;
/// then emits (i, T(u_i)) for every neuron with a positive activation.
/// syn_in is expected to already carry the tau factor from the weights.
template <typename Value>
V1StepResult<Value> v1_step(V1Layer<Value> layer, std::span<const Value> syn_in, const EmuConfig& cfg);

/// e <- e + x - recon_in, saturating; neurons with |e| >= threshold and
/// e != 0 emit (i, e) and reset e to zero.
template <typename Value>
ResidualStepResult<Value> residual_step(ResidualLayer<Value> layer, std::span<const Value> recon_in,
                                        const EmuConfig& cfg);

/// Structural fan-out of each layer's outgoing connection.
struct Fanouts {
  std::size_t v1 = 0;
  std::size_t residual = 0;
};

Fanouts fanouts_for(Topology topology, std::size_t input_dim, std::size_t num_features);

/// Sum over spikes of the emitting layer's fan-out.
template <typename Value>
std::uint64_t count_synops(std::span<const SpikeFrame<Value>> frames, const Fanouts& fanouts) {
  std::uint64_t total = 0;
  for (const auto& f : frames) {
    total += f.entries.size() * (f.source == Layer::v1 ? fanouts.v1 : fanouts.residual);
  }
  return total;
}

struct EmuRunOptions {
  bool record_activations = false;
  bool record_frames = false;
};

/// Final activations plus raw counters for one reconstruction.
struct EmuRun {
  Eigen::VectorXd activations;
  std::vector<std::size_t> v1_spikes_per_step;
  std::vector<std::size_t> residual_spikes_per_step;
  std::uint64_t v1_spikes = 0;
  std::uint64_t residual_spikes = 0;
  std::uint64_t synops = 0;
  std::uint64_t saturation_events = 0;
  /// activations[t - 1] is T(u) after global timestep t (record_activations).
  std::vector<Eigen::VectorXd> trajectory;
};

/// Connection weights for a (dictionary, config) pair, built once and reused
/// across inputs. Value is fx::FxValue (quantized) or double (exact).
template <typename Value>
struct Connections;

template <>
struct Connections<fx::FxValue> {
  fx::QuantizedWeights lateral;         ///< N x N, -tau (Phi^T Phi - I)
  fx::QuantizedWeights residual_to_v1;  ///< N x M, tau Phi^T
  fx::QuantizedWeights v1_to_residual;  ///< M x N, Phi
};

template <>
struct Connections<double> {
  Eigen::MatrixXd lateral;
  Eigen::MatrixXd residual_to_v1;
  Eigen::MatrixXd v1_to_residual;
};

/// Stateful LCA network in one_layer or two_layer form.
///
/// A global timestep in two_layer runs the residual layer on the
/// reconstruction of the current activations, then the V1 layer on the
/// residual spikes of that same timestep.
template <typename Value>
class Network {
 public:
  Network(const Dictionary& d, const EmuConfig& cfg);

  const EmuConfig& config() const { return cfg_; }
  const Connections<Value>& connections() const { return conn_; }
  const V1Layer<Value>& v1() const { return v1_; }
  const ResidualLayer<Value>& residual() const { return residual_; }
  std::size_t timestep() const { return timestep_; }

  /// Load input x and reset every voltage and accumulator to zero.
  void present(const Eigen::Ref<const Eigen::VectorXd>& x);
  void reset();

  struct StepReport {
    SpikeFrame<Value> residual_frame;
    SpikeFrame<Value> v1_frame;
    std::size_t saturations = 0;
  };
  StepReport step();

  /// T(u) as real values.
  Eigen::VectorXd activations() const;

  /// present(x) followed by config().steps timesteps.
  EmuRun run(const Eigen::Ref<const Eigen::VectorXd>& x, const EmuRunOptions& opts = {});

  /// Frames recorded by the last run() with record_frames set.
  const std::vector<SpikeFrame<Value>>& frames() const { return frames_; }

 private:
  EmuConfig cfg_;
  std::size_t input_dim_;
  std::size_t num_features_;
  Fanouts fanouts_;
  Connections<Value> conn_;
  Eigen::MatrixXd phi_;
  V1Layer<Value> v1_;
  ResidualLayer<Value> residual_;
  SpikeFrame<Value> last_v1_frame_;
  std::size_t timestep_ = 0;
  std::vector<SpikeFrame<Value>> frames_;
};

/// Build connections for (d, cfg), then run input x from the zero state.
EmuRun run_emulation(const Dictionary& d, const Eigen::Ref<const Eigen::VectorXd>& x, const EmuConfig& cfg,
                     const EmuRunOptions& opts = {});

std::string to_string(Topology t);
std::string to_string(NumericMode m);

}  // namespace lca::emu
