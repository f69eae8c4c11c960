#pragma once

#include "lca/dictionary.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace lca {

/// Parameters of one reconstruction: threshold, time constant, step count.
struct LcaConfig {
  double lambda = 0.5;
  double tau = 1.0 / 128.0;
  int steps = 256;

  void validate() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  }
};

/// One-sided soft threshold: u - lambda where u > lambda, 0 elsewhere.
/// Returns an Eigen expression; it references u, so evaluate before u dies.
template <typename Derived>
auto soft_threshold(const Eigen::MatrixBase<Derived>& u, typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (lambda < Scalar(0)) throw std::invalid_argument("soft_threshold: lambda must be >= 0");
  return (u.derived().array() - lambda).cwiseMax(Scalar(0)).matrix();
}

/// 0.5 * ||x - Phi a||^2 + lambda * ||a||_1.
template <typename DerivedX, typename DerivedPhi, typename DerivedA>
typename DerivedX::Scalar energy(const Eigen::MatrixBase<DerivedX>& x,
                                 const Eigen::MatrixBase<DerivedPhi>& phi,
                                 const Eigen::MatrixBase<DerivedA>& a,
                                 typename DerivedX::Scalar lambda) {
  if (phi.rows() != x.size() || phi.cols() != a.size()) {
    throw std::invalid_argument("energy: dimension mismatch");
  }
  using Scalar = typename DerivedX::Scalar;
  return Scalar(0.5) * (x - phi * a).squaredNorm() + lambda * a.template lpNorm<1>();
}

template <typename DerivedX, typename DerivedA>
double energy(const Eigen::MatrixBase<DerivedX>& x, const Dictionary& d,
              const Eigen::MatrixBase<DerivedA>& a, double lambda) {
  return energy(x, d.phi(), a, lambda);
}

template <typename Scalar = double>
struct LcaState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector u;  ///< membrane potentials
  Vector a;  ///< activations, soft_threshold(u, lambda)
  Vector b;  ///< input drive Phi^T x
};

/// ||-u + Phi^T (x - Phi a) + a||_inf, which vanishes at an equilibrium.
template <typename Scalar, typename DerivedPhi, typename DerivedX>
Scalar fixed_point_residual(const LcaState<Scalar>& state, const Eigen::MatrixBase<DerivedPhi>& phi,
                            const Eigen::MatrixBase<DerivedX>& x) {
  const typename LcaState<Scalar>::Vector rhs =
      -state.u + phi.transpose() * (x - phi * state.a) + state.a;
  return rhs.template lpNorm<Eigen::Infinity>();
}

template <typename DerivedX>
double fixed_point_residual(const LcaState<double>& state, const Dictionary& d,
                            const Eigen::MatrixBase<DerivedX>& x) {
  return fixed_point_residual(state, d.phi(), x);
}

/// Zero state for input x: u = 0, a = 0, b = Phi^T x.
template <typename DerivedX>
LcaState<double> initial_state(const Dictionary& d, const Eigen::MatrixBase<DerivedX>& x) {
  if (x.size() != d.input_dim()) throw std::invalid_argument("input length does not match dictionary");
  LcaState<double> s;
  s.u = Eigen::VectorXd::Zero(d.num_features());
  s.a = Eigen::VectorXd::Zero(d.num_features());
  s.b = d.phi().transpose() * x;
  return s;
}

/// One explicit-Euler step, u <- u + tau (-u + Phi^T (x - Phi a) + a),
/// with a = soft_threshold(u) taken before the update and refreshed after.
template <typename DerivedX>
LcaState<double> step(LcaState<double> state, const Dictionary& d,
                      const Eigen::MatrixBase<DerivedX>& x, const LcaConfig& cfg) {
  const auto& phi = d.phi();
  const Eigen::VectorXd drive = phi.transpose() * (x - phi * state.a) + state.a;
  state.u += cfg.tau * (drive - state.u);
  state.a = soft_threshold(state.u, cfg.lambda);
  return state;
}

struct RunOptions {
  bool record_energy = false;
  bool record_activations = false;
};

template <typename Scalar = double>
struct ReferenceRun {
  using Vector = typename LcaState<Scalar>::Vector;

  LcaState<Scalar> state;
  int steps_taken = 0;
  /// energy[0] is the zero state, energy[t] the state after step t.
  std::vector<Scalar> energy;
  /// activations[t - 1] is a after step t.
  std::vector<Vector> activations;
};

/// Fixed-step LCA solver with the lateral matrix (Phi^T Phi - I) cached.
///
/// Scalar selects the working precision; the dictionary is cast once.
template <typename Scalar = double>
class LcaSolver {
 public:
  using Vector = typename LcaState<Scalar>::Vector;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  LcaSolver(const Dictionary& d, LcaConfig cfg) : cfg_(cfg), phi_(d.phi().cast<Scalar>()) {
    cfg_.validate();
    competition_ = d.gram().cast<Scalar>();
    competition_.diagonal().setZero();
  }

  const LcaConfig& config() const { return cfg_; }

  template <typename DerivedX>
  LcaState<Scalar> initial_state(const Eigen::MatrixBase<DerivedX>& x) const {
    if (x.size() != phi_.rows()) throw std::invalid_argument("input length does not match dictionary");
    LcaState<Scalar> s;
    s.u = Vector::Zero(phi_.cols());
    s.a = Vector::Zero(phi_.cols());
    s.b = phi_.transpose() * x.template cast<Scalar>();
    return s;
  }

  /// u <- u (1 - tau) + tau (b - (Phi^T Phi - I) a).
  void step(LcaState<Scalar>& s) const {
    const auto tau = static_cast<Scalar>(cfg_.tau);
    const auto lambda = static_cast<Scalar>(cfg_.lambda);
    s.u = (Scalar(1) - tau) * s.u + tau * (s.b - competition_ * s.a);
    s.a = soft_threshold(s.u, lambda);
  }

  template <typename DerivedX>
  ReferenceRun<Scalar> run(const Eigen::MatrixBase<DerivedX>& x, RunOptions opts = {}) const {
    const Vector xs = x.template cast<Scalar>();
    const auto lambda = static_cast<Scalar>(cfg_.lambda);
    ReferenceRun<Scalar> out;
    out.state = initial_state(xs);
    if (opts.record_energy) {
      out.energy.reserve(static_cast<std::size_t>(cfg_.steps) + 1);
      out.energy.push_back(lca::energy(xs, phi_, out.state.a, lambda));
    }
    if (opts.record_activations) out.activations.reserve(static_cast<std::size_t>(cfg_.steps));
    for (int t = 0; t < cfg_.steps; ++t) {
      step(out.state);
      ++out.steps_taken;
      if (opts.record_energy) out.energy.push_back(lca::energy(xs, phi_, out.state.a, lambda));
      if (opts.record_activations) out.activations.push_back(out.state.a);
    }
    return out;
  }

 private:
  LcaConfig cfg_;
  Matrix phi_;
  Matrix competition_;
};

/// cfg.steps steps from the zero state.
template <typename DerivedX>
ReferenceRun<double> run(const Dictionary& d, const Eigen::MatrixBase<DerivedX>& x,
                         const LcaConfig& cfg, RunOptions opts = {}) {
  return LcaSolver<double>(d, cfg).run(x, opts);
}

}  // namespace lca
