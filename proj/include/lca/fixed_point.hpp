#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lca::fx {

/// Signed 24-bit Q7.16 scalar. Value = raw * 2^-16, range [-128, 128 - 2^-16].
///
/// The raw payload lives in an int32 but every operation in this header
/// keeps it inside the 24-bit range by saturation, never by wraparound.
struct FxValue {
  static constexpr int kFracBits = 16;
  static constexpr std::int32_t kRawMin = -(std::int32_t{1} << 23);
  static constexpr std::int32_t kRawMax = (std::int32_t{1} << 23) - 1;

  std::int32_t raw = 0;

  /// Clamp a wide integer into the 24-bit range.
  static constexpr FxValue saturate(std::int64_t wide) {
    if (wide > kRawMax) return FxValue{kRawMax};
    if (wide < kRawMin) return FxValue{kRawMin};
    return FxValue{static_cast<std::int32_t>(wide)};
  }

  static constexpr FxValue max() { return FxValue{kRawMax}; }
  static constexpr FxValue min() { return FxValue{kRawMin}; }
  static constexpr FxValue lsb() { return FxValue{1}; }

  constexpr bool is_zero() const { return raw == 0; }

  friend constexpr auto operator<=>(FxValue, FxValue) = default;
};

/// Round-to-nearest-even of value / 2^shift, for shift >= 0.
std::int64_t round_shift_right(std::int64_t value, int shift);

/// Round-to-nearest-even of x * 2^16, saturated. Throws on NaN.
FxValue fx_from_real(double x);
double fx_to_real(FxValue v);

FxValue fx_add_sat(FxValue a, FxValue b);
FxValue fx_sub_sat(FxValue a, FxValue b);

/// u * (1 - 2^-tau_exp): result.raw = u.raw - rnd(u.raw / 2^tau_exp).
FxValue fx_decay(FxValue u, int tau_exp);

/// rnd(u.raw / 2^tau_exp), the part fx_decay removes. Used as tau * a.
FxValue fx_scale_tau(FxValue u, int tau_exp);

/// Soft threshold on raw values: u - lambda if u > lambda, else 0.
FxValue fx_soft_threshold(FxValue u, FxValue lambda);

/// Weight matrix with 8-bit signed mantissas and one shared power-of-two
/// exponent: weight(i, j) = mantissas(i, j) * 2^exponent.
///
/// Rows index the receiving neuron, columns the sending neuron, so a
/// column holds one sender's fan-out contiguously.
struct QuantizedWeights {
  static constexpr int kMantissaMax = 127;

  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> mantissas;
  int exponent = 0;

  Eigen::Index rows() const { return mantissas.rows(); }
  Eigen::Index cols() const { return mantissas.cols(); }

  Eigen::MatrixXd dequantize() const;
};

/// Smallest shared exponent k with every rnd(w / 2^k) in [-127, 127].
/// An all-zero matrix maps to k = 0. Throws on non-finite entries.
QuantizedWeights quantize_weights(const Eigen::Ref<const Eigen::MatrixXd>& w);

/// Spike event carrying a multi-bit payload from neuron `index`.
template <typename Payload>
struct BasicSpike {
  std::size_t index = 0;
  Payload payload{};

  friend bool operator==(const BasicSpike&, const BasicSpike&) = default;
};

using GradedSpike = BasicSpike<FxValue>;

/// Result of delivering spikes through a quantized connection.
struct SynapticInput {
  std::vector<FxValue> values;
  std::size_t saturations = 0;
};

/// out[j] = sat(rnd(2^k * sum_i mantissa(j, i) * payload_i)) over the given
/// spikes. The sum is carried exactly in 64 bits and rounded once.
/// Throws std::out_of_range on a bad spike index, std::invalid_argument
/// when out_dim does not match weights.rows().
SynapticInput fx_deliver(std::span<const GradedSpike> spikes,
                         const QuantizedWeights& weights, std::size_t out_dim);

/// Convenience form of fx_deliver that drops the saturation count.
std::vector<FxValue> fx_weighted_sum(std::span<const GradedSpike> spikes,
                                     const QuantizedWeights& weights,
                                     std::size_t out_dim);

}  // namespace lca::fx
