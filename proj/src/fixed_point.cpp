#include "lca/fixed_point.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lca::fx {

std::int64_t round_shift_right(std::int64_t value, int shift) {
  if (shift < 0) throw std::invalid_argument("round_shift_right: negative shift");
  if (shift == 0) return value;
  // |value| <= 2^63, so the quotient is at most 1/2 in magnitude and the only
  // tie (INT64_MIN / 2^64) rounds to the even neighbour 0.
  if (shift >= 64) return 0;

  const std::uint64_t mask = (std::uint64_t{1} << shift) - 1;
  const std::uint64_t half = std::uint64_t{1} << (shift - 1);
  const std::int64_t floor_q = value >> shift;
  const std::uint64_t rem = static_cast<std::uint64_t>(value) & mask;
  if (rem > half || (rem == half && (floor_q & 1) != 0)) return floor_q + 1;
  return floor_q;
}

FxValue fx_from_real(double x) {
  if (std::isnan(x)) throw std::invalid_argument("fx_from_real: NaN input");
  // Scaling by 2^16 is exact; nearbyint uses the default ties-to-even mode.
  const double scaled = std::nearbyint(std::ldexp(x, FxValue::kFracBits));
  if (scaled >= static_cast<double>(FxValue::kRawMax)) return FxValue::max();
  if (scaled <= static_cast<double>(FxValue::kRawMin)) return FxValue::min();
  return FxValue{static_cast<std::int32_t>(scaled)};
}

double fx_to_real(FxValue v) { return std::ldexp(static_cast<double>(v.raw), -FxValue::kFracBits); }

FxValue fx_add_sat(FxValue a, FxValue b) {
  return FxValue::saturate(std::int64_t{a.raw} + std::int64_t{b.raw});
}

FxValue fx_sub_sat(FxValue a, FxValue b) {
  return FxValue::saturate(std::int64_t{a.raw} - std::int64_t{b.raw});
}

FxValue fx_scale_tau(FxValue u, int tau_exp) {
  if (tau_exp < 1) throw std::invalid_argument("tau_exp must be >= 1");
  return FxValue{static_cast<std::int32_t>(round_shift_right(u.raw, tau_exp))};
}

FxValue fx_decay(FxValue u, int tau_exp) {
  return FxValue::saturate(std::int64_t{u.raw} - fx_scale_tau(u, tau_exp).raw);
}

FxValue fx_soft_threshold(FxValue u, FxValue lambda) {
  if (u.raw > lambda.raw) return fx_sub_sat(u, lambda);
  return FxValue{};
}

Eigen::MatrixXd QuantizedWeights::dequantize() const {
  return mantissas.cast<double>() * std::ldexp(1.0, exponent);
}

namespace {

bool mantissa_fits(double magnitude, int exponent) {
  return std::nearbyint(std::ldexp(magnitude, -exponent)) <= QuantizedWeights::kMantissaMax;
}

}  // namespace

QuantizedWeights quantize_weights(const Eigen::Ref<const Eigen::MatrixXd>& w) {
  if (!w.allFinite()) throw std::invalid_argument("quantize_weights: non-finite weight");

  QuantizedWeights q;
  q.mantissas.setZero(w.rows(), w.cols());
  const double peak = w.size() == 0 ? 0.0 : w.cwiseAbs().maxCoeff();
  if (peak == 0.0) return q;

  // Rounding is monotone in magnitude, so the largest entry decides k.
  // peak / 2^k lands in [64, 128) for k = ilogb(peak) - 6.
  int k = std::ilogb(peak) - 6;
  while (!mantissa_fits(peak, k)) ++k;
  while (mantissa_fits(peak, k - 1)) --k;

  q.exponent = k;
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      q.mantissas(i, j) = static_cast<std::int8_t>(std::nearbyint(std::ldexp(w(i, j), -k)));
    }
  }
  return q;
}

namespace {

// acc * 2^exponent, rounded and saturated to Q7.16. Reports saturation.
FxValue scale_accumulator(std::int64_t acc, int exponent, bool& saturated) {
  constexpr std::int64_t kSpan = std::int64_t{1} << 24;
  saturated = false;
  std::int64_t wide = 0;
  if (acc == 0) return FxValue{};
  if (exponent >= 0) {
    if (exponent > 30 || acc > kSpan || acc < -kSpan) {
      saturated = true;
      return acc > 0 ? FxValue::max() : FxValue::min();
    }
    wide = acc * (std::int64_t{1} << exponent);
  } else {
    wide = round_shift_right(acc, -exponent);
  }
  const FxValue out = FxValue::saturate(wide);
  saturated = out.raw != wide;
  return out;
}

}  // namespace

SynapticInput fx_deliver(std::span<const GradedSpike> spikes, const QuantizedWeights& weights,
                         std::size_t out_dim) {
  if (static_cast<Eigen::Index>(out_dim) != weights.rows()) {
    throw std::invalid_argument("fx_deliver: out_dim " + std::to_string(out_dim) +
                                " does not match weight rows " + std::to_string(weights.rows()));
  }
  std::vector<std::int64_t> acc(out_dim, 0);
  const auto fan_in = static_cast<std::size_t>(weights.cols());
  for (const GradedSpike& s : spikes) {
    if (s.index >= fan_in) {
      throw std::out_of_range("fx_deliver: spike index " + std::to_string(s.index) +
                              " >= input dimension " + std::to_string(fan_in));
    }
    const std::int8_t* column = weights.mantissas.col(static_cast<Eigen::Index>(s.index)).data();
    const std::int64_t payload = s.payload.raw;
    for (std::size_t j = 0; j < out_dim; ++j) acc[j] += std::int64_t{column[j]} * payload;
  }

  SynapticInput out;
  out.values.resize(out_dim);
  for (std::size_t j = 0; j < out_dim; ++j) {
    bool saturated = false;
    out.values[j] = scale_accumulator(acc[j], weights.exponent, saturated);
    if (saturated) ++out.saturations;
  }
  return out;
}

std::vector<FxValue> fx_weighted_sum(std::span<const GradedSpike> spikes,
                                     const QuantizedWeights& weights, std::size_t out_dim) {
  return fx_deliver(spikes, weights, out_dim).values;
}

}  // namespace lca::fx
