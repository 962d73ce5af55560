#pragma once

// Closed-loop sample-and-hold simulation.
//
// simulate_loop() is the generic engine: hold the input computed at t_k,
// integrate with the triggering guards, localize the first firing, apply the
// tau_min rule, sample the state (which resets the measurement error), recompute
// the input and, in adaptive mode, theta. The quadruple-tank scenario layer
// below builds the model, controller and energy function from a ScenarioConfig.

#include <dectrig/adaptation.hpp>
#include <dectrig/core.hpp>
#include <dectrig/ode.hpp>
#include <dectrig/plant.hpp>
#include <dectrig/trigger.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dectrig {

enum class RunMode { Centralized, DecentralizedTheta0, DecentralizedAdaptive, Periodic };

inline std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Centralized: return "centralized";
    case RunMode::DecentralizedTheta0: return "decentralized-theta0";
    case RunMode::DecentralizedAdaptive: return "decentralized-adaptive";
    case RunMode::Periodic: return "periodic";
  }
  return "unknown";
}

inline std::optional<RunMode> parse_run_mode(std::string_view name) {
  for (RunMode m : {RunMode::Centralized, RunMode::DecentralizedTheta0, RunMode::DecentralizedAdaptive,
                    RunMode::Periodic}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

enum class UpdateCause { Initial, Centralized, Nodes, Periodic };

struct UpdateRecord {
  std::size_t k = 0;
  double t = 0.0;
  double dt = std::numeric_limits<double>::quiet_NaN();  // undefined for k = 0
  UpdateCause cause = UpdateCause::Initial;
  std::vector<int> fired_nodes;  // 0-based node indices, decentralized only
  double event_time = std::numeric_limits<double>::quiet_NaN();  // localized firing instant
  bool clamped = false;  // firing fell inside the tau_min blackout
  double gap_at_fire = std::numeric_limits<double>::quiet_NaN();
  double central_gap_at_fire = std::numeric_limits<double>::quiet_NaN();
  double error_at_update = 0.0;  // |x_held - x| right after sampling
  double energy = std::numeric_limits<double>::quiet_NaN();
  AdaptationStep adaptation_step = AdaptationStep::ZeroFallback;
  std::vector<double> theta;  // slack in force on [t_k, t_{k+1}); empty for periodic runs
  // Sampled state and computed input; empty unless LoopSpec::store_update_states.
  std::vector<double> x;
  std::vector<double> u;
};

struct TrajectorySample {
  double t;
  Vector x;
  Vector u;  // input acting at t
  double energy;
};

struct SimSummary {
  std::size_t update_count = 0;
  double min_interval = std::numeric_limits<double>::quiet_NaN();
  double mean_interval = std::numeric_limits<double>::quiet_NaN();
  double max_interval = std::numeric_limits<double>::quiet_NaN();
  Vector final_state;
  double final_time = 0.0;
  double final_error_norm = std::numeric_limits<double>::quiet_NaN();  // |x - center|
  double energy_initial = std::numeric_limits<double>::quiet_NaN();
  double energy_final = std::numeric_limits<double>::quiet_NaN();
  // max over k of (H(t_{k+1}) - H(t_k)) / max(1, |H(t_k)|)
  double energy_max_rel_increase = std::numeric_limits<double>::quiet_NaN();
  std::size_t adaptation_equalized = 0;
  std::size_t adaptation_tau_min_retry = 0;
  std::size_t adaptation_zero_fallback = 0;
};

struct SimMetadata {
  std::string mode;
  double step = 0.0;
  double horizon = 0.0;
  double sigma = 0.0;  // effective value after any delay reduction
  double tau_min = 0.0;
  double period = 0.0;
  double delay = 0.0;
  double log_interval = 0.0;
  double event_tol = 0.0;
  double gap_floor = 0.0;
  int node_count = 0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double rho_m = std::numeric_limits<double>::quiet_NaN();
};

struct SimResult {
  std::vector<TrajectorySample> trajectory;
  std::vector<UpdateRecord> updates;
  SimSummary summary;
  SimMetadata metadata;
  std::vector<std::string> warnings;
};

enum class LoopKind { Centralized, Decentralized, Periodic };

struct LoopSpec {
  LoopKind kind = LoopKind::Decentralized;
  TriggerConfig trigger;
  AdaptationConfig adaptation;  // used when kind == Decentralized && adaptation.enabled
  double period = 0.0;          // Periodic only
  double horizon = 0.0;
  double step = 0.0;
  double event_tol = 1e-9;
  double log_interval = 0.1;
  double delay = 0.0;      // the input computed at t_k acts from t_k + delay
  double gap_floor = 0.0;  // guards fire when a gap reaches this value
  std::vector<int> nonnegative_coordinates;  // warn once if any goes below 0
  bool store_update_states = true;
};

namespace detail {

struct Firing {
  double time;
  std::vector<int> nodes;
  double gap;
  double central_gap;
};

// Gaps depend only on the state, so the guards ignore the elapsed time.
inline std::vector<Guard> make_guards(const LoopSpec& spec, const Vector& x_held, const ThetaVector& theta) {
  std::vector<Guard> guards;
  const TriggerConfig& trig = spec.trigger;
  const double floor = spec.gap_floor;
  if (spec.kind == LoopKind::Centralized) {
    guards.emplace_back([&trig, x_held, floor](double, const Vector& x) {
      return centralized_gap(x, x_held - x, trig) - floor;
    });
    return guards;
  }
  for (int i = 0; i < trig.node_count(); ++i) {
    const auto* group = &trig.grouping[static_cast<std::size_t>(i)];
    const double theta_i = theta.values(i);
    guards.emplace_back([&trig, group, x_held, theta_i, floor](double, const Vector& x) {
      double err = 0.0;
      double state = 0.0;
      for (int j : *group) {
        const double e = x_held(j) - x(j);
        const double c = detail::centered(x, trig, j);
        err += e * e;
        state += c * c;
      }
      return err - trig.sigma * state - theta_i - floor;
    });
  }
  return guards;
}

inline double interval_stat_mean(const std::vector<UpdateRecord>& updates) {
  double sum = 0.0;
  for (std::size_t k = 1; k < updates.size(); ++k) sum += updates[k].dt;
  return sum / static_cast<double>(updates.size() - 1);
}

}  // namespace detail

template <PlantModel M, class Controller, class Energy>
SimResult simulate_loop(const M& model, const Controller& controller, const Energy& energy, const LoopSpec& spec,
                        const Vector& x0) {
  if (!(spec.horizon > 0.0)) throw PreconditionError("simulate_loop: horizon must be positive");
  if (!(spec.step > 0.0)) throw PreconditionError("simulate_loop: step must be positive");
  if (!(spec.log_interval > 0.0)) throw PreconditionError("simulate_loop: log interval must be positive");
  if (spec.delay < 0.0) throw PreconditionError("simulate_loop: delay must be nonnegative");
  if (spec.kind == LoopKind::Periodic && !(spec.period > 0.0)) {
    throw PreconditionError("simulate_loop: period must be positive");
  }
  if (x0.size() != model.state_dim()) throw PreconditionError("simulate_loop: x0 has the wrong dimension");

  const bool event_driven = spec.kind != LoopKind::Periodic;
  const bool adaptive = spec.kind == LoopKind::Decentralized && spec.adaptation.enabled;
  const int nodes = spec.trigger.node_count();
  // Remaining time below this is treated as zero so rounding never spawns a sliver update.
  const double end_slack = 1e-9 * std::min(spec.step, spec.kind == LoopKind::Periodic ? spec.period : spec.trigger.tau_min);

  SimResult res;
  std::vector<bool> warned(static_cast<std::size_t>(x0.size()), false);
  auto check_domain = [&](double t, const Vector& x) {
    for (int j : spec.nonnegative_coordinates) {
      if (x(j) < 0.0 && !warned[static_cast<std::size_t>(j)]) {
        warned[static_cast<std::size_t>(j)] = true;
        res.warnings.push_back("x" + std::to_string(j + 1) + " went negative (" + std::to_string(x(j)) +
                               ") at t = " + std::to_string(t) + "; square-root arguments clamped at 0");
      }
    }
  };

  std::size_t log_index = 0;
  auto next_log_time = [&] { return static_cast<double>(log_index) * spec.log_interval; };

  Vector x = x0;
  double t = 0.0;
  Vector u_applied;
  ThetaVector theta = ThetaVector::zero(nodes);
  std::optional<double> t_prev;
  std::optional<detail::Firing> pending;
  if (spec.kind == LoopKind::Periodic) {
    res.updates.reserve(static_cast<std::size_t>(std::ceil(spec.horizon / spec.period)) + 1);
  }
  Vector u_final;

  for (std::size_t k = 0;; ++k) {
    // Update instant: sample, reset the error, recompute the input and theta.
    const double t_k = t;
    const Vector x_held = x;
    const Vector u_k = controller(x_held);
    if (k == 0) u_applied = u_k;

    UpdateRecord rec;
    rec.k = k;
    rec.t = t_k;
    if (spec.store_update_states) {
      rec.x = to_std(x_held);
      rec.u = to_std(u_k);
    }
    rec.energy = energy(x_held);
    rec.error_at_update = (x_held - x).norm();
    if (k > 0) rec.dt = t_k - *t_prev;
    if (k == 0) {
      rec.cause = UpdateCause::Initial;
    } else if (spec.kind == LoopKind::Periodic) {
      rec.cause = UpdateCause::Periodic;
    } else {
      rec.cause = spec.kind == LoopKind::Centralized ? UpdateCause::Centralized : UpdateCause::Nodes;
      rec.event_time = pending->time;
      rec.clamped = pending->time < t_k;
      rec.fired_nodes = pending->nodes;
      rec.gap_at_fire = pending->gap;
      rec.central_gap_at_fire = pending->central_gap;
    }
    if (adaptive) {
      AdaptationOutcome outcome = adapt_theta_traced(model, x_held, u_k, UpdateHistory{t_prev, t_k}, spec.adaptation,
                                                     spec.trigger);
      theta = std::move(outcome.theta);
      rec.adaptation_step = outcome.step;
    }
    theta.epoch = k;
    if (spec.kind == LoopKind::Decentralized) rec.theta = to_std(theta.values);
    res.updates.push_back(std::move(rec));
    pending.reset();

    const Vector u_old = u_applied;
    const double t_switch = t_k + spec.delay;
    auto input_at = [&](double tt) -> const Vector& { return (spec.delay > 0.0 && tt < t_switch) ? u_old : u_k; };

    if (next_log_time() <= t_k) {
      res.trajectory.push_back({t_k, x, input_at(t_k), energy(x)});
      ++log_index;
    }

    std::optional<double> t_next;
    if (spec.kind == LoopKind::Periodic) t_next = advance_at_least(t_k, spec.period);

    bool finished = false;
    while (true) {
      if (spec.horizon - t <= end_slack) {
        finished = true;
        break;
      }
      double end = spec.horizon;
      if (next_log_time() > t) end = std::min(end, next_log_time());
      if (spec.delay > 0.0 && t < t_switch) end = std::min(end, t_switch);
      if (t_next) end = std::min(end, *t_next);

      const Vector& u_now = input_at(t);
      try {
        if (event_driven && !pending) {
          const auto guards = detail::make_guards(spec, x_held, theta);
          EventResult r = integrate_until_event(model, x, u_now, guards, spec.step, end - t, spec.event_tol);
          if (r.t_event) {
            const double t_fire = std::min(t + *r.t_event, end);
            x = std::move(r.x);
            t = t_fire;
            detail::Firing firing{t_fire, {}, std::numeric_limits<double>::quiet_NaN(),
                                  centralized_gap(x, x_held - x, spec.trigger)};
            if (spec.kind == LoopKind::Centralized) {
              firing.gap = firing.central_gap;
            } else {
              const Vector gaps = local_gaps(x, x_held - x, theta, spec.trigger);
              for (int node : r.fired) firing.nodes.push_back(node);
              firing.gap = -std::numeric_limits<double>::infinity();
              for (int node : r.fired) firing.gap = std::max(firing.gap, gaps(node));
            }
            pending = std::move(firing);
            t_next = schedule_next_update(t_k, t_fire, spec.trigger);
          } else {
            x = std::move(r.x);
            t = end;
          }
        } else {
          x = integrate_fixed(model, x, u_now, spec.step, end - t);
          t = end;
        }
      } catch (const NumericError& e) {
        throw DivergenceError(std::string("simulation diverged: ") + e.what(), t);
      }
      check_domain(t, x);

      if (t == next_log_time()) {
        res.trajectory.push_back({t, x, input_at(t), energy(x)});
        ++log_index;
      }
      // An update due exactly at the horizon is not taken; the loop top ends the run.
      if (t_next && t == *t_next && spec.horizon - t > end_slack) break;
    }
    if (finished) {
      u_final = input_at(t);
      break;
    }
    t_prev = t_k;
    u_applied = u_k;
  }

  if (res.trajectory.empty() || res.trajectory.back().t != t) {
    res.trajectory.push_back({t, x, u_final, energy(x)});
  }

  SimSummary& s = res.summary;
  s.update_count = res.updates.size();
  if (res.updates.size() >= 2) {
    s.min_interval = std::numeric_limits<double>::infinity();
    s.max_interval = 0.0;
    for (std::size_t k = 1; k < res.updates.size(); ++k) {
      s.min_interval = std::min(s.min_interval, res.updates[k].dt);
      s.max_interval = std::max(s.max_interval, res.updates[k].dt);
    }
    s.mean_interval = detail::interval_stat_mean(res.updates);
    s.energy_max_rel_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < res.updates.size(); ++k) {
      const double prev = res.updates[k - 1].energy;
      const double rel = (res.updates[k].energy - prev) / std::max(1.0, std::abs(prev));
      s.energy_max_rel_increase = std::max(s.energy_max_rel_increase, rel);
    }
  }
  s.final_state = x;
  s.final_time = t;
  s.final_error_norm =
      spec.trigger.center.size() == x.size() ? (x - spec.trigger.center).norm() : x.norm();
  s.energy_initial = res.updates.front().energy;
  s.energy_final = res.trajectory.back().energy;
  if (adaptive) {
    for (const auto& u : res.updates) {
      switch (u.adaptation_step) {
        case AdaptationStep::Equalized: ++s.adaptation_equalized; break;
        case AdaptationStep::TauMinRetry: ++s.adaptation_tau_min_retry; break;
        case AdaptationStep::ZeroFallback: ++s.adaptation_zero_fallback; break;
      }
    }
  }

  SimMetadata& m = res.metadata;
  m.step = spec.step;
  m.horizon = spec.horizon;
  m.sigma = spec.trigger.sigma;
  m.tau_min = spec.trigger.tau_min;
  m.period = spec.period;
  m.delay = spec.delay;
  m.log_interval = spec.log_interval;
  m.event_tol = spec.event_tol;
  m.gap_floor = spec.gap_floor;
  m.node_count = nodes;
  return res;
}

// ---------------------------------------------------------------------------
// Quadruple-tank scenarios

struct ScenarioConfig {
  QuadrupleTankParams plant = QuadrupleTankParams::reference();
  double x1_star = 15.0;
  double x2_star = 13.0;
  double x5_hat = 0.0;
  double x6_hat = 0.0;

  TriggerConfig trigger;  // center is overwritten with x* at run time
  AdaptationConfig adaptation;
  double rho = 0.25;   // recorded only
  double rho_m = 0.14;  // recorded only

  Vector x0 = make_vector({12.0, 10.0, 5.0, 7.0, 0.0, 0.0});
  double horizon = 500.0;
  std::optional<double> step;  // default tau_min / 10
  double event_tol = 1e-9;
  double log_interval = 0.1;
  double delay = 0.0;
  double delay_sigma_factor = 0.25;
  double gap_floor = 1e-20;
  bool store_update_states = true;
  std::optional<double> period;  // periodic baseline; default tau_min
  std::uint64_t seed = 0;

  static ScenarioConfig reference() {
    ScenarioConfig c;
    c.trigger.sigma = 0.0054 * 0.0054;
    c.trigger.tau_min = 1e-4;
    c.trigger.mode = TriggerMode::Decentralized;
    c.trigger.grouping = {{0, 4}, {1, 5}, {2}, {3}};
    c.adaptation.enabled = true;
    c.adaptation.q = 1;
    c.adaptation.te_rule = EqualizationRule::PreviousInterval;
    return c;
  }

  double effective_step() const { return step.value_or(trigger.tau_min / 10.0); }
  double effective_period() const { return period.value_or(trigger.tau_min); }

  RunMode mode() const {
    if (trigger.mode == TriggerMode::Centralized) return RunMode::Centralized;
    return adaptation.enabled ? RunMode::DecentralizedAdaptive : RunMode::DecentralizedTheta0;
  }

  Setpoint setpoint() const {
    Setpoint sp = equilibrium_inputs(plant, x1_star, x2_star);
    sp.x5_hat = x5_hat;
    sp.x6_hat = x6_hat;
    return sp;
  }

  /// Every violated invariant, in a stable order.
  std::vector<std::string> violations() const {
    std::vector<std::string> out = plant.violations();
    if (!(x1_star >= 0.0) || !(x2_star >= 0.0)) out.push_back("setpoint: x1* and x2* must be nonnegative");
    if (out.empty()) {
      auto sp = setpoint_violations(plant, setpoint());
      out.insert(out.end(), sp.begin(), sp.end());
    }
    auto trig = trigger.violations(6);
    out.insert(out.end(), trig.begin(), trig.end());
    auto ad = adaptation.violations();
    out.insert(out.end(), ad.begin(), ad.end());
    if (x0.size() != 6) {
      out.push_back("simulation.x0 must have 6 entries");
    } else {
      if (!all_finite(x0)) out.push_back("simulation.x0 must be finite");
      for (int i = 0; i < 4; ++i) {
        if (x0(i) < 0.0) out.push_back("simulation.x0: level x" + std::to_string(i + 1) + " must be >= 0");
      }
    }
    if (!(horizon > 0.0)) out.push_back("simulation.horizon_s must be > 0");
    if (step && !(*step > 0.0)) out.push_back("simulation.step_s must be > 0");
    if (!(event_tol > 0.0)) out.push_back("simulation.event_tol_s must be > 0");
    if (!(log_interval > 0.0)) {
      out.push_back("simulation.log_interval_s must be > 0");
    } else if (horizon / log_interval > 1e6) {
      out.push_back("simulation.log_interval_s would log more than 1e6 samples");
    }
    if (!(delay >= 0.0)) out.push_back("simulation.delay_s must be >= 0");
    if (delay > 0.0 && trigger.tau_min > 0.0 && !(delay < trigger.tau_min)) {
      out.push_back("simulation.delay_s must be < tau_min");
    }
    if (!(delay_sigma_factor > 0.0 && delay_sigma_factor <= 1.0)) {
      out.push_back("simulation.delay_sigma_factor must lie in (0, 1]");
    }
    if (!(gap_floor >= 0.0)) out.push_back("simulation.gap_floor must be >= 0");
    if (period && trigger.tau_min > 0.0 && !(*period >= trigger.tau_min)) {
      out.push_back("run.period_s must be >= tau_min");
    }
    return out;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) throw ConfigError(std::move(v));
  }
};

inline ScenarioConfig with_mode(ScenarioConfig cfg, RunMode mode) {
  switch (mode) {
    case RunMode::Centralized:
      cfg.trigger.mode = TriggerMode::Centralized;
      break;
    case RunMode::DecentralizedTheta0:
      cfg.trigger.mode = TriggerMode::Decentralized;
      cfg.adaptation.enabled = false;
      break;
    case RunMode::DecentralizedAdaptive:
      cfg.trigger.mode = TriggerMode::Decentralized;
      cfg.adaptation.enabled = true;
      break;
    case RunMode::Periodic:
      break;
  }
  return cfg;
}

/// Trigger configuration in force once a loop delay is present: sigma scaled by
/// delay_sigma_factor when delay > 0, unchanged otherwise.
inline TriggerConfig apply_actuation_delay(const ScenarioConfig& cfg) {
  if (cfg.delay < 0.0) throw ConfigError({"simulation.delay_s must be >= 0"});
  if (cfg.delay > 0.0 && !(cfg.delay < cfg.trigger.tau_min)) {
    throw ConfigError({"simulation.delay_s must be < tau_min"});
  }
  TriggerConfig out = cfg.trigger;
  if (cfg.delay > 0.0) out.sigma *= cfg.delay_sigma_factor;
  return out;
}

namespace detail {

inline SimResult run_tank(const ScenarioConfig& cfg, LoopKind kind, double period, RunMode mode) {
  cfg.validate();
  const Setpoint sp = cfg.setpoint();
  const ControllerGains gains = controller_gains(cfg.plant);
  const QuadrupleTank model(cfg.plant, sp);

  LoopSpec spec;
  spec.kind = kind;
  spec.trigger = apply_actuation_delay(cfg);
  spec.trigger.center = sp.state();
  spec.adaptation = cfg.adaptation;
  spec.period = period;
  spec.horizon = cfg.horizon;
  spec.step = cfg.effective_step();
  spec.event_tol = cfg.event_tol;
  spec.log_interval = cfg.log_interval;
  spec.delay = cfg.delay;
  spec.gap_floor = cfg.gap_floor;
  spec.nonnegative_coordinates = {0, 1, 2, 3};
  spec.store_update_states = cfg.store_update_states;
  if (kind == LoopKind::Periodic && cfg.delay > 0.0 && !(cfg.delay < period)) {
    throw ConfigError({"simulation.delay_s must be < the periodic sampling period"});
  }

  auto controller = [&](const Vector& x) { return feedback_law(gains, sp, x); };
  auto energy = [&](const Vector& x) {
    for (int i = 0; i < 4; ++i) {
      if (x(i) < 0.0) return std::numeric_limits<double>::quiet_NaN();
    }
    return lyapunov_hd(cfg.plant, gains, sp, x);
  };
  SimResult res = simulate_loop(model, controller, energy, spec, cfg.x0);
  res.metadata.mode = std::string(to_string(mode));
  res.metadata.rho = cfg.rho;
  res.metadata.rho_m = cfg.rho_m;
  return res;
}

}  // namespace detail

/// Event-triggered run in the mode described by cfg.trigger.mode and cfg.adaptation.enabled.
inline SimResult run_event_triggered(const ScenarioConfig& cfg) {
  const LoopKind kind = cfg.trigger.mode == TriggerMode::Centralized ? LoopKind::Centralized : LoopKind::Decentralized;
  return detail::run_tank(cfg, kind, 0.0, cfg.mode());
}

inline SimResult run_periodic(const ScenarioConfig& cfg, double period) {
  if (!(period >= cfg.trigger.tau_min)) throw ConfigError({"run.period_s must be >= tau_min"});
  return detail::run_tank(cfg, LoopKind::Periodic, period, RunMode::Periodic);
}

inline SimResult run_mode(const ScenarioConfig& cfg, RunMode mode) {
  if (mode == RunMode::Periodic) return run_periodic(cfg, cfg.effective_period());
  return run_event_triggered(with_mode(cfg, mode));
}

// ---------------------------------------------------------------------------
// Mode comparison

struct ModeOutcome {
  RunMode mode;
  bool ok = false;
  std::string error;
  SimResult result;  // empty when !ok
};

struct ComparisonReport {
  std::vector<ModeOutcome> outcomes;
  // deviation[i][j]: max over outcome i's samples of |(x1, x2)_i - (x1, x2)_j| with j interpolated.
  std::vector<std::vector<double>> deviation;
  double max_deviation = 0.0;
  std::string ordering;  // modes sorted by update count, e.g. "centralized <= decentralized-theta0"
  bool failed = false;
};

/// Linear interpolation of coordinate `coord` of a logged trajectory at time t (clamped to its ends).
inline double interpolate(const std::vector<TrajectorySample>& traj, double t, int coord) {
  if (traj.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (t <= traj.front().t) return traj.front().x(coord);
  if (t >= traj.back().t) return traj.back().x(coord);
  auto it = std::lower_bound(traj.begin(), traj.end(), t,
                             [](const TrajectorySample& s, double v) { return s.t < v; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  if (hi.t == lo.t) return hi.x(coord);
  const double w = (t - lo.t) / (hi.t - lo.t);
  return lo.x(coord) + w * (hi.x(coord) - lo.x(coord));
}

inline double max_level_deviation(const std::vector<TrajectorySample>& a, const std::vector<TrajectorySample>& b) {
  double worst = 0.0;
  for (const auto& s : a) {
    const double d1 = s.x(0) - interpolate(b, s.t, 0);
    const double d2 = s.x(1) - interpolate(b, s.t, 1);
    worst = std::max(worst, std::hypot(d1, d2));
  }
  return worst;
}

inline ComparisonReport compare_modes(const ScenarioConfig& cfg, const std::vector<RunMode>& modes) {
  if (modes.size() < 2) throw PreconditionError("compare_modes: need at least two modes");
  std::vector<std::future<SimResult>> runs;
  runs.reserve(modes.size());
  for (RunMode mode : modes) {
    runs.push_back(std::async(std::launch::async, [&cfg, mode] { return run_mode(cfg, mode); }));
  }

  ComparisonReport report;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    ModeOutcome outcome;
    outcome.mode = modes[i];
    try {
      outcome.result = runs[i].get();
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
      report.failed = true;
    }
    report.outcomes.push_back(std::move(outcome));
  }

  const std::size_t n = report.outcomes.size();
  report.deviation.assign(n, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!report.outcomes[i].ok || !report.outcomes[j].ok) continue;
      report.deviation[i][j] =
          max_level_deviation(report.outcomes[i].result.trajectory, report.outcomes[j].result.trajectory);
      report.max_deviation = std::max(report.max_deviation, report.deviation[i][j]);
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (report.outcomes[i].ok) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.outcomes[a].result.summary.update_count < report.outcomes[b].result.summary.update_count;
  });
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    if (idx) report.ordering += " <= ";
    report.ordering += to_string(report.outcomes[order[idx]].mode);
  }
  return report;
}

}  // namespace dectrig
