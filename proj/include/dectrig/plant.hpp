#pragma once

// Quadruple-tank plant extended with two nonlinear integrator states, its
// equilibrium inputs, the passivity-based feedback law and the closed-loop
// energy function H_d.
//
// State layout: x1..x4 tank levels [cm], x5, x6 integrator states.
// Inputs: u1, u2 pump flows [cm^3/s].

#include <dectrig/core.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace dectrig {

enum class LevelPolicy {
  Clamp,   // square-root arguments clamped at 0
  Strict,  // negative level raises DomainError
};

struct QuadrupleTankParams {
  std::array<double, 4> A{};  // tank cross-sections [cm^2]
  std::array<double, 4> a{};  // outlet cross-sections [cm^2]
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double g = 981.0;  // [cm/s^2]
  double k_I1 = 0.0;
  double k_I2 = 0.0;
  std::array<double, 4> k{};  // controller design scalars k1..k4
  Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
  LevelPolicy level_policy = LevelPolicy::Clamp;

  /// Reference set used by the shipped scenarios. Chosen for this project, not
  /// taken from a published parameter table. k_Ii = 1/A_i makes dH_d/dt a
  /// negative definite form in grad H_d for every positive definite Q.
  static QuadrupleTankParams reference() {
    QuadrupleTankParams p;
    p.A = {28.0, 32.0, 28.0, 32.0};
    p.a = {0.071, 0.057, 0.071, 0.057};
    p.gamma1 = 0.7;
    p.gamma2 = 0.6;
    p.g = 981.0;
    p.k_I1 = 1.0 / 28.0;
    p.k_I2 = 1.0 / 32.0;
    p.k = {2.0, 2.0, 1.0, 1.0};
    p.Q = 10.0 * Eigen::Matrix2d::Identity();
    return p;
  }

  /// Structural checks only; equilibrium checks need a setpoint.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    for (int i = 0; i < 4; ++i) {
      if (!(A[i] > 0.0)) out.push_back("plant.A" + std::to_string(i + 1) + " must be > 0");
      if (!(a[i] > 0.0)) out.push_back("plant.a" + std::to_string(i + 1) + " must be > 0");
    }
    if (!(gamma1 >= 0.0 && gamma1 <= 1.0)) out.push_back("plant.gamma1 must lie in [0, 1]");
    if (!(gamma2 >= 0.0 && gamma2 <= 1.0)) out.push_back("plant.gamma2 must lie in [0, 1]");
    if (std::abs(gamma1 + gamma2 - 1.0) < 1e-9) {
      out.push_back("plant.gamma: gamma1 + gamma2 = 1 makes the valve matrix singular");
    }
    if (!(g > 0.0)) out.push_back("plant.g must be > 0");
    if (!std::isfinite(k_I1) || !std::isfinite(k_I2)) out.push_back("plant.k_I must be finite");
    for (int i = 0; i < 4; ++i) {
      if (!std::isfinite(k[i])) out.push_back("plant.k" + std::to_string(i + 1) + " must be finite");
    }
    const bool symmetric = std::abs(Q(0, 1) - Q(1, 0)) <= 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff());
    if (!symmetric || !Q.allFinite()) {
      out.push_back("plant.Q must be symmetric");
    } else if (!(Q(0, 0) > 0.0 && Q.determinant() > 0.0)) {
      out.push_back("plant.Q must be positive definite");
    }
    return out;
  }
};

/// Equilibrium target. Entries 5 and 6 are the arbitrary fixed integrator references.
struct Setpoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;
  double x4 = 0.0;
  double x5_hat = 0.0;
  double x6_hat = 0.0;
  Eigen::Vector2d u = Eigen::Vector2d::Zero();

  Vector state() const { return make_vector({x1, x2, x3, x4, x5_hat, x6_hat}); }
};

struct ControllerGains {
  Eigen::Matrix<double, 2, 6> P;
  Eigen::Matrix<double, 2, 6> K;
};

namespace detail {

inline double checked_level(const Vector& x, int i, LevelPolicy policy) {
  const double v = x(i);
  if (v < 0.0) {
    if (policy == LevelPolicy::Strict) throw DomainError(i, v);
    return 0.0;
  }
  return v;
}

}  // namespace detail

/// Solves the valve-split balance for u* and recovers the upper-tank levels.
inline Setpoint equilibrium_inputs(const QuadrupleTankParams& p, double x1_star, double x2_star) {
  if (std::abs(p.gamma1 + p.gamma2 - 1.0) < 1e-9) {
    throw ConfigError({"plant.gamma: gamma1 + gamma2 = 1 makes the valve matrix singular"});
  }
  if (!(x1_star >= 0.0) || !(x2_star >= 0.0)) {
    throw ConfigError({"setpoint: x1* and x2* must be nonnegative"});
  }
  const double s2g = std::sqrt(2.0 * p.g);
  const double q1 = p.a[0] * s2g * std::sqrt(x1_star);
  const double q2 = p.a[1] * s2g * std::sqrt(x2_star);
  // [g1, 1-g2; 1-g1, g2] u = [q1; q2] by Cramer's rule.
  const double det = p.gamma1 * p.gamma2 - (1.0 - p.gamma1) * (1.0 - p.gamma2);
  Setpoint sp;
  sp.x1 = x1_star;
  sp.x2 = x2_star;
  sp.u(0) = (p.gamma2 * q1 - (1.0 - p.gamma2) * q2) / det;
  sp.u(1) = (p.gamma1 * q2 - (1.0 - p.gamma1) * q1) / det;
  // Outflow of tank 3 balances (1-g2) u2, tank 4 balances (1-g1) u1.
  const double r3 = (1.0 - p.gamma2) * sp.u(1) / (p.a[2] * s2g);
  const double r4 = (1.0 - p.gamma1) * sp.u(0) / (p.a[3] * s2g);
  sp.x3 = r3 * r3;
  sp.x4 = r4 * r4;
  return sp;
}

inline ControllerGains controller_gains(const QuadrupleTankParams& p) {
  const double g1 = p.gamma1;
  const double g2 = p.gamma2;
  const auto& k = p.k;
  ControllerGains out;
  out.P << g1 * k[0], (1 - g1) * k[1], 0.0, (1 - g1) * k[3], g1 * k[0], (1 - g1) * k[1],
      (1 - g2) * k[0], g2 * k[1], (1 - g2) * k[2], 0.0, (1 - g2) * k[0], g2 * k[1];
  out.K = p.Q * out.P;
  return out;
}

inline Vector tank_dynamics(const QuadrupleTankParams& p, const Setpoint& sp, const Vector& x, const Vector& u) {
  const double s2g = std::sqrt(2.0 * p.g);
  double w[4];
  for (int i = 0; i < 4; ++i) w[i] = p.a[i] * s2g * std::sqrt(detail::checked_level(x, i, p.level_policy));
  Vector dx(6);
  dx(0) = (-w[0] + w[2] + p.gamma1 * u(0)) / p.A[0];
  dx(1) = (-w[1] + w[3] + p.gamma2 * u(1)) / p.A[1];
  dx(2) = (-w[2] + (1.0 - p.gamma2) * u(1)) / p.A[2];
  dx(3) = (-w[3] + (1.0 - p.gamma1) * u(0)) / p.A[3];
  dx(4) = p.k_I1 * p.a[0] * s2g * (std::sqrt(detail::checked_level(x, 0, p.level_policy)) - std::sqrt(sp.x1));
  dx(5) = p.k_I2 * p.a[1] * s2g * (std::sqrt(detail::checked_level(x, 1, p.level_policy)) - std::sqrt(sp.x2));
  return dx;
}

/// u = -K (x - x*) + u*
inline Vector feedback_law(const ControllerGains& gains, const Setpoint& sp, const Vector& x) {
  const Eigen::Matrix<double, 6, 1> dx = x - sp.state();
  const Eigen::Vector2d u = -gains.K * dx + sp.u;
  return make_vector({u(0), u(1)});
}

inline double lyapunov_hd(const QuadrupleTankParams& p, const ControllerGains& gains, const Setpoint& sp,
                          const Vector& x) {
  for (int i = 0; i < 4; ++i) {
    if (x(i) < 0.0) throw DomainError(i, x(i));
  }
  const Eigen::Matrix<double, 6, 1> xx = x;
  const Eigen::Matrix<double, 6, 1> dx = xx - Eigen::Matrix<double, 6, 1>(sp.state());
  const Eigen::Vector2d pdx = gains.P * dx;
  const double s2g = std::sqrt(2.0 * p.g);
  double h = 0.5 * pdx.dot(p.Q * pdx) - sp.u.dot(gains.P * xx);
  for (int i = 0; i < 4; ++i) h += (2.0 / 3.0) * p.k[i] * p.a[i] * std::pow(x(i), 1.5) * s2g;
  h += p.k[0] * p.a[0] * x(4) * std::sqrt(2.0 * p.g * sp.x1);
  h += p.k[1] * p.a[1] * x(5) * std::sqrt(2.0 * p.g * sp.x2);
  return h;
}

inline Vector lyapunov_hd_gradient(const QuadrupleTankParams& p, const ControllerGains& gains, const Setpoint& sp,
                                   const Vector& x) {
  for (int i = 0; i < 4; ++i) {
    if (x(i) < 0.0) throw DomainError(i, x(i));
  }
  const Eigen::Matrix<double, 6, 1> dx = x - sp.state();
  Eigen::Matrix<double, 6, 1> grad = gains.P.transpose() * (p.Q * (gains.P * dx) - sp.u);
  const double s2g = std::sqrt(2.0 * p.g);
  for (int i = 0; i < 4; ++i) grad(i) += p.k[i] * p.a[i] * s2g * std::sqrt(x(i));
  grad(4) += p.k[0] * p.a[0] * std::sqrt(2.0 * p.g * sp.x1);
  grad(5) += p.k[1] * p.a[1] * std::sqrt(2.0 * p.g * sp.x2);
  return grad;
}

/// Worst equilibrium residual ||f(x*, u*)||_inf over components 1..6.
inline double equilibrium_residual(const QuadrupleTankParams& p, const Setpoint& sp) {
  const Vector u = make_vector({sp.u(0), sp.u(1)});
  return tank_dynamics(p, sp, sp.state(), u).cwiseAbs().maxCoeff();
}

/// Setpoint-dependent validation: equilibrium residual and nonnegative pump flows.
inline std::vector<std::string> setpoint_violations(const QuadrupleTankParams& p, const Setpoint& sp) {
  std::vector<std::string> out;
  if (!sp.u.allFinite()) {
    out.push_back("setpoint: equilibrium inputs are not finite");
    return out;
  }
  if (sp.u(0) < 0.0 || sp.u(1) < 0.0) out.push_back("setpoint: equilibrium inputs u* must be >= 0");
  const double residual = equilibrium_residual(p, sp);
  if (!(residual < 1e-10)) {
    out.push_back("setpoint: equilibrium residual " + std::to_string(residual) + " exceeds 1e-10");
  }
  return out;
}

/// Quadruple tank as a PlantModel with an analytic directional derivative.
class QuadrupleTank {
 public:
  QuadrupleTank(QuadrupleTankParams params, Setpoint setpoint)
      : params_(std::move(params)), setpoint_(std::move(setpoint)) {}

  int state_dim() const { return 6; }
  int input_dim() const { return 2; }

  Vector derivative(const Vector& x, const Vector& u) const { return tank_dynamics(params_, setpoint_, x, u); }

  Vector directional_derivative(const Vector& x, const Vector& /*u*/, const Vector& v) const {
    const double s2g = std::sqrt(2.0 * params_.g);
    // d/dx_i of a_i sqrt(2 g x_i); infinite slope at an empty tank is clipped to zero.
    double dw[4];
    for (int i = 0; i < 4; ++i) {
      const double level = detail::checked_level(x, i, params_.level_policy);
      dw[i] = level > 0.0 ? params_.a[i] * s2g / (2.0 * std::sqrt(level)) * v(i) : 0.0;
    }
    const auto& p = params_;
    Vector out(6);
    out(0) = (-dw[0] + dw[2]) / p.A[0];
    out(1) = (-dw[1] + dw[3]) / p.A[1];
    out(2) = -dw[2] / p.A[2];
    out(3) = -dw[3] / p.A[3];
    out(4) = p.k_I1 * dw[0];
    out(5) = p.k_I2 * dw[1];
    return out;
  }

  const QuadrupleTankParams& params() const { return params_; }
  const Setpoint& setpoint() const { return setpoint_; }

 private:
  QuadrupleTankParams params_;
  Setpoint setpoint_;
};

struct GradientBoundCheck {
  double rho_m_estimate;  // min |grad H_d| / |x - x*| over the samples
  Vector worst_state;
  int samples;
};

/// Sampling check of |grad H_d(x)| >= rho_m |x - x*| on the operating box
/// 1 <= x1..x4 <= 20, 0 <= x5, x6 <= 20.
inline GradientBoundCheck check_gradient_bound(const QuadrupleTankParams& p, const ControllerGains& gains,
                                               const Setpoint& sp, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> levels(1.0, 20.0);
  std::uniform_real_distribution<double> integrators(0.0, 20.0);
  GradientBoundCheck out{std::numeric_limits<double>::infinity(), Vector::Zero(6), samples};
  const Vector center = sp.state();
  for (int s = 0; s < samples; ++s) {
    Vector x(6);
    for (int i = 0; i < 4; ++i) x(i) = levels(rng);
    x(4) = integrators(rng);
    x(5) = integrators(rng);
    const double dist = (x - center).norm();
    if (dist == 0.0) continue;
    const double ratio = lyapunov_hd_gradient(p, gains, sp, x).norm() / dist;
    if (ratio < out.rho_m_estimate) {
      out.rho_m_estimate = ratio;
      out.worst_state = x;
    }
  }
  return out;
}

}  // namespace dectrig
