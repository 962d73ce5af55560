#pragma once

// On-line adjustment of the per-node slack vector theta.
//
// At every update the controller predicts state and measurement error a short
// horizon t_e ahead with a truncated Taylor expansion under the held input,
// then picks the zero-sum theta that makes every node's predicted decision gap
// equal. If that theta would violate some local condition immediately, the
// horizon falls back to tau_min, and then to theta = 0.

#include <dectrig/core.hpp>
#include <dectrig/trigger.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <utility>

namespace dectrig {

enum class EqualizationRule {
  PreviousInterval,  // t_e = t_k - t_{k-1}
  TauMin,            // t_e = tau_min
  Fixed,             // t_e = fixed_seconds
};

struct AdaptationConfig {
  bool enabled = true;
  int q = 1;
  EqualizationRule te_rule = EqualizationRule::PreviousInterval;
  double te_fixed_seconds = 0.0;
  // Central differences for q = 2 when the model has no directional derivative.
  bool finite_difference_fallback = true;
  double finite_difference_rel_step = 1e-6;

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (q != 1 && q != 2) out.push_back("adaptation.q must be 1 or 2");
    if (te_rule == EqualizationRule::Fixed && !(te_fixed_seconds > 0.0)) {
      out.push_back("adaptation.te_fixed_seconds must be > 0 for the fixed rule");
    }
    if (!(finite_difference_rel_step > 0.0)) out.push_back("adaptation.fd_rel_step must be > 0");
    return out;
  }
};

struct TaylorEstimate {
  Vector state;  // predicted xi(t_k + tau)
  Vector error;  // predicted epsilon(t_k + tau) = x_k - state
};

/// Per-node theta-independent part of the predicted decision gap.
struct GapEstimate {
  Vector c;
};

namespace detail {

template <PlantModel M>
Vector second_derivative(const M& model, const Vector& x, const Vector& u, const Vector& xdot,
                         const AdaptationConfig& cfg) {
  if constexpr (DirectionalDerivativeModel<M>) {
    return model.directional_derivative(x, u, xdot);
  } else {
    if (!cfg.finite_difference_fallback) {
      throw CapabilityError("taylor_estimates: q = 2 needs a directional derivative or the finite-difference fallback");
    }
    const double norm = xdot.norm();
    if (norm == 0.0) return Vector::Zero(x.size());
    const Vector dir = xdot / norm;
    const double delta = cfg.finite_difference_rel_step * (1.0 + x.norm());
    const Vector fp = model.derivative(x + delta * dir, u);
    const Vector fm = model.derivative(x - delta * dir, u);
    return (fp - fm) * (norm / (2.0 * delta));
  }
}

}  // namespace detail

template <PlantModel M>
TaylorEstimate taylor_estimates(const M& model, const Vector& x_k, const Vector& u_k, int q, double tau,
                                const AdaptationConfig& cfg = {}) {
  if (q != 1 && q != 2) throw PreconditionError("taylor_estimates: supported orders are 1 and 2");
  if (!(tau >= 0.0)) throw PreconditionError("taylor_estimates: tau must be nonnegative");
  const Vector xdot = model.derivative(x_k, u_k);
  Vector tail = xdot * tau;
  if (q >= 2) tail += detail::second_derivative(model, x_k, u_k, xdot, cfg) * (0.5 * tau * tau);
  TaylorEstimate out{x_k + tail, -tail};
  if (!all_finite(out.state)) throw NumericError("taylor_estimates: non-finite prediction");
  return out;
}

inline GapEstimate gap_estimates(const TaylorEstimate& est, const TriggerConfig& trig) {
  GapEstimate out{Vector(trig.node_count())};
  for (int i = 0; i < trig.node_count(); ++i) {
    out.c(i) = local_gap(est.state, est.error, 0.0, trig.grouping[static_cast<std::size_t>(i)], trig);
  }
  return out;
}

/// theta_i = c_i - mean(c): the zero-sum vector equalizing every c_i - theta_i.
inline ThetaVector solve_theta(const GapEstimate& gaps) {
  const Eigen::Index n = gaps.c.size();
  if (n < 1) throw PreconditionError("solve_theta: need at least one node");
  if (!all_finite(gaps.c)) throw NumericError("solve_theta: non-finite gap estimate");
  const double mean = gaps.c.sum() / static_cast<double>(n);
  ThetaVector theta{gaps.c.array() - mean, 0};
  const double scale = gaps.c.cwiseAbs().maxCoeff();
  if (!theta.sums_to_zero(scale)) {
    // One compensation pass removes the residual left by rounding in the mean.
    theta.values.array() -= theta.sum() / static_cast<double>(n);
  }
  return theta;
}

/// True when theta_i >= -sigma |x_I - center_I|^2 for every node, i.e. no
/// local condition is violated at the update instant itself.
inline bool theta_feasible(const Vector& x_k, const ThetaVector& theta, const TriggerConfig& trig) {
  const Vector zero = Vector::Zero(x_k.size());
  for (int i = 0; i < trig.node_count(); ++i) {
    const double slack = local_gap(x_k, zero, 0.0, trig.grouping[static_cast<std::size_t>(i)], trig);
    if (slack > theta.values(i)) return false;
  }
  return true;
}

struct UpdateHistory {
  std::optional<double> t_previous;  // absent at the first update
  double t_current = 0.0;
};

enum class AdaptationStep { Equalized, TauMinRetry, ZeroFallback };

struct AdaptationOutcome {
  ThetaVector theta;
  AdaptationStep step;
  double t_e;  // horizon of the accepted solve; 0 for the zero fallback
};

template <PlantModel M>
ThetaVector equalize_at(const M& model, const Vector& x_k, const Vector& u_k, double t_e,
                        const AdaptationConfig& cfg, const TriggerConfig& trig) {
  return solve_theta(gap_estimates(taylor_estimates(model, x_k, u_k, cfg.q, t_e, cfg), trig));
}

template <PlantModel M>
AdaptationOutcome adapt_theta_traced(const M& model, const Vector& x_k, const Vector& u_k, const UpdateHistory& history,
                                     const AdaptationConfig& cfg, const TriggerConfig& trig) {
  double t_e = trig.tau_min;
  switch (cfg.te_rule) {
    case EqualizationRule::PreviousInterval:
      if (history.t_previous) t_e = history.t_current - *history.t_previous;
      break;
    case EqualizationRule::TauMin:
      break;
    case EqualizationRule::Fixed:
      t_e = cfg.te_fixed_seconds;
      break;
  }

  ThetaVector theta = equalize_at(model, x_k, u_k, t_e, cfg, trig);
  if (theta_feasible(x_k, theta, trig)) return {std::move(theta), AdaptationStep::Equalized, t_e};

  theta = equalize_at(model, x_k, u_k, trig.tau_min, cfg, trig);
  if (theta_feasible(x_k, theta, trig)) return {std::move(theta), AdaptationStep::TauMinRetry, trig.tau_min};

  return {ThetaVector::zero(trig.node_count()), AdaptationStep::ZeroFallback, 0.0};
}

template <PlantModel M>
ThetaVector adapt_theta(const M& model, const Vector& x_k, const Vector& u_k, const UpdateHistory& history,
                        const AdaptationConfig& cfg, const TriggerConfig& trig) {
  return adapt_theta_traced(model, x_k, u_k, history, cfg, trig).theta;
}

}  // namespace dectrig
