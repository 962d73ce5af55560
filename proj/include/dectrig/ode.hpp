#pragma once

// Fixed-step RK4 integration of xdot = f(x, u_held) with guard-based event
// localization. Guards fire when they reach zero from below; the firing time is
// bracketed by bisection inside the step where the sign change is observed.

#include <dectrig/core.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dectrig {

/// Guard value as a function of the time since the last update and the current state.
using Guard = std::function<double(double, const Vector&)>;

/// Wraps a callable f(x, u) (and optionally its directional derivative) as a PlantModel.
template <class F>
class FunctionModel {
 public:
  FunctionModel(int n, int m, F f) : n_(n), m_(m), f_(std::move(f)) {}

  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  Vector derivative(const Vector& x, const Vector& u) const { return f_(x, u); }

 private:
  int n_;
  int m_;
  F f_;
};

template <PlantModel M>
Vector rk4_step(const M& model, const Vector& x, const Vector& u_held, double h) {
  if (!(h > 0.0)) throw PreconditionError("rk4_step: step size must be positive");
  const Vector k1 = model.derivative(x, u_held);
  const Vector k2 = model.derivative(x + (0.5 * h) * k1, u_held);
  const Vector k3 = model.derivative(x + (0.5 * h) * k2, u_held);
  const Vector k4 = model.derivative(x + h * k3, u_held);
  Vector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(next)) throw NumericError("rk4_step: non-finite state");
  return next;
}

struct EventResult {
  std::optional<double> t_event;  // time since the start of integration
  Vector x;                       // state at t_event, or at t_max when nothing fired
  std::vector<int> fired;         // every guard index nonnegative at t_event
};

namespace detail {

// Step boundaries are i*h, with a final shorter step ending exactly at t_max.
inline double step_end(int i, double h, double t_max) {
  const double t = static_cast<double>(i + 1) * h;
  return t >= t_max * (1.0 - 1e-14) ? t_max : t;
}

inline std::vector<int> nonnegative_guards(const std::vector<Guard>& guards, double s, const Vector& x) {
  std::vector<int> fired;
  for (std::size_t i = 0; i < guards.size(); ++i) {
    if (guards[i](s, x) >= 0.0) fired.push_back(static_cast<int>(i));
  }
  return fired;
}

}  // namespace detail

template <PlantModel M>
EventResult integrate_until_event(const M& model, const Vector& x0, const Vector& u_held,
                                  const std::vector<Guard>& guards, double h, double t_max,
                                  double tol_t) {
  if (!(tol_t > 0.0)) throw PreconditionError("integrate_until_event: tol_t must be positive");
  if (!(h > 0.0)) throw PreconditionError("integrate_until_event: step size must be positive");
  if (!(t_max >= 0.0)) throw PreconditionError("integrate_until_event: t_max must be nonnegative");
  if (!all_finite(x0)) throw NumericError("integrate_until_event: non-finite initial state");
  for (std::size_t i = 0; i < guards.size(); ++i) {
    if (guards[i](0.0, x0) >= 0.0) {
      throw PreconditionError("integrate_until_event: guard " + std::to_string(i) +
                              " is already nonnegative at s = 0");
    }
  }

  Vector x = x0;
  double s = 0.0;
  for (int i = 0; s < t_max; ++i) {
    const double s_next = detail::step_end(i, h, t_max);
    Vector x_next = rk4_step(model, x, u_held, s_next - s);

    bool crossed = false;
    for (const auto& g : guards) {
      if (g(s_next, x_next) >= 0.0) {
        crossed = true;
        break;
      }
    }
    if (!crossed) {
      x = std::move(x_next);
      s = s_next;
      continue;
    }

    // Invariant: all guards < 0 at lo, at least one >= 0 at hi.
    double lo = s;
    double hi = s_next;
    Vector x_hi = x_next;
    while (hi - lo > tol_t) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      Vector x_mid = rk4_step(model, x, u_held, mid - s);
      bool any = false;
      for (const auto& g : guards) {
        if (g(mid, x_mid) >= 0.0) {
          any = true;
          break;
        }
      }
      if (any) {
        hi = mid;
        x_hi = std::move(x_mid);
      } else {
        lo = mid;
      }
    }
    EventResult r;
    r.t_event = hi;
    r.fired = detail::nonnegative_guards(guards, hi, x_hi);
    r.x = std::move(x_hi);
    return r;
  }
  return EventResult{std::nullopt, std::move(x), {}};
}

/// Advance without guards and return only the final state.
template <PlantModel M>
Vector integrate_fixed(const M& model, const Vector& x0, const Vector& u_held, double h, double duration) {
  Vector x = x0;
  double s = 0.0;
  for (int i = 0; s < duration; ++i) {
    const double s_next = detail::step_end(i, h, duration);
    x = rk4_step(model, x, u_held, s_next - s);
    s = s_next;
  }
  return x;
}

struct StateSample {
  double t;
  Vector x;
};

/// Dense output at every integration step, starting with (0, x0).
template <PlantModel M>
std::vector<StateSample> sample_trajectory(const M& model, const Vector& x0, const Vector& u_held, double h,
                                           double duration) {
  if (!(h > 0.0)) throw PreconditionError("sample_trajectory: step size must be positive");
  if (!(duration >= 0.0)) throw PreconditionError("sample_trajectory: duration must be nonnegative");
  std::vector<StateSample> out;
  out.push_back({0.0, x0});
  Vector x = x0;
  double s = 0.0;
  for (int i = 0; s < duration; ++i) {
    const double s_next = detail::step_end(i, h, duration);
    x = rk4_step(model, x, u_held, s_next - s);
    s = s_next;
    out.push_back({s, x});
  }
  return out;
}

}  // namespace dectrig
