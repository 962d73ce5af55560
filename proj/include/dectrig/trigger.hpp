#pragma once

// Centralized and decentralized event-triggering conditions.
//
// All gaps are "condition minus slack": the condition holds while the gap is
// <= 0 and an update is requested when it reaches 0 from below.

#include <dectrig/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace dectrig {

enum class TriggerMode { Centralized, Decentralized };

/// Partition of the (0-based) state indices into sensor nodes.
using Grouping = std::vector<std::vector<int>>;

inline Grouping singleton_grouping(int n) {
  Grouping g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = {i};
  return g;
}

/// Reports every covering/disjointness violation, naming indices 1-based.
inline std::vector<std::string> grouping_violations(const Grouping& grouping, int n) {
  std::vector<std::string> out;
  if (grouping.empty()) out.push_back("trigger.grouping must contain at least one node");
  std::vector<int> seen(static_cast<std::size_t>(std::max(n, 0)), 0);
  for (std::size_t node = 0; node < grouping.size(); ++node) {
    if (grouping[node].empty()) out.push_back("trigger.grouping: node " + std::to_string(node + 1) + " is empty");
    for (int idx : grouping[node]) {
      if (idx < 0 || idx >= n) {
        out.push_back("trigger.grouping: state index " + std::to_string(idx + 1) + " is out of range 1.." +
                      std::to_string(n));
        continue;
      }
      if (++seen[static_cast<std::size_t>(idx)] == 2) {
        out.push_back("trigger.grouping: state index " + std::to_string(idx + 1) + " appears in more than one node");
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (seen[static_cast<std::size_t>(i)] == 0) {
      out.push_back("trigger.grouping: state index " + std::to_string(i + 1) + " is not assigned to any node");
    }
  }
  return out;
}

struct TriggerConfig {
  double sigma = 0.0;
  double tau_min = 0.0;  // [s]
  TriggerMode mode = TriggerMode::Decentralized;
  Grouping grouping;
  Vector center;  // subtracted from x before taking norms; empty means the origin

  int node_count() const { return static_cast<int>(grouping.size()); }

  std::vector<std::string> violations(int n) const {
    std::vector<std::string> out;
    if (!(sigma > 0.0) || !std::isfinite(sigma)) out.push_back("trigger.sigma must be > 0");
    if (!(tau_min > 0.0) || !std::isfinite(tau_min)) out.push_back("trigger.tau_min must be > 0");
    auto g = grouping_violations(grouping, n);
    out.insert(out.end(), g.begin(), g.end());
    if (center.size() != 0 && center.size() != n) out.push_back("trigger.center must have one entry per state");
    return out;
  }
};

/// Per-node slack offsets for update epoch k. The entries must sum to zero.
struct ThetaVector {
  Vector values;
  std::size_t epoch = 0;

  static ThetaVector zero(int nodes, std::size_t epoch = 0) { return {Vector::Zero(nodes), epoch}; }

  double sum() const { return values.sum(); }

  /// |sum| bound used for every zero-sum check: 1e-12 * N * max|theta_i| (exactly 0 when theta = 0).
  bool sums_to_zero(double scale = 0.0) const {
    const double n = static_cast<double>(values.size());
    const double m = std::max(scale, values.size() ? values.cwiseAbs().maxCoeff() : 0.0);
    return std::abs(sum()) <= 1e-12 * n * m;
  }
};

namespace detail {

inline double centered(const Vector& x, const TriggerConfig& cfg, int j) {
  return cfg.center.size() == 0 ? x(j) : x(j) - cfg.center(j);
}

}  // namespace detail

/// |e|^2 - sigma |x - center|^2
inline double centralized_gap(const Vector& x, const Vector& e, const TriggerConfig& cfg) {
  if (x.size() != e.size()) throw PreconditionError("centralized_gap: state and error sizes differ");
  double err = 0.0;
  double state = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double c = detail::centered(x, cfg, static_cast<int>(j));
    err += e(j) * e(j);
    state += c * c;
  }
  return err - cfg.sigma * state;
}

/// Gap of a single node: |e_I|^2 - sigma |x_I - center_I|^2 - theta_i.
inline double local_gap(const Vector& x, const Vector& e, double theta_i, const std::vector<int>& group,
                        const TriggerConfig& cfg) {
  double err = 0.0;
  double state = 0.0;
  for (int j : group) {
    const double c = detail::centered(x, cfg, j);
    err += e(j) * e(j);
    state += c * c;
  }
  return err - cfg.sigma * state - theta_i;
}

inline Vector local_gaps(const Vector& x, const Vector& e, const ThetaVector& theta, const TriggerConfig& cfg) {
  if (x.size() != e.size()) throw PreconditionError("local_gaps: state and error sizes differ");
  if (theta.values.size() != cfg.node_count()) {
    throw PreconditionError("local_gaps: theta has " + std::to_string(theta.values.size()) + " entries but grouping has " +
                            std::to_string(cfg.node_count()) + " nodes");
  }
  Vector gaps(cfg.node_count());
  for (int i = 0; i < cfg.node_count(); ++i) {
    gaps(i) = local_gap(x, e, theta.values(i), cfg.grouping[static_cast<std::size_t>(i)], cfg);
  }
  return gaps;
}

/// Checks (all local gaps <= 0) => centralized gap <= 0 for one sample.
/// The centralized side is allowed the rounding slack of summing the local terms.
inline bool implication_holds(const Vector& x, const Vector& e, const ThetaVector& theta, const TriggerConfig& cfg) {
  const Vector gaps = local_gaps(x, e, theta, cfg);
  if ((gaps.array() > 0.0).any()) return true;
  double magnitude = e.squaredNorm() + theta.values.cwiseAbs().sum();
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double c = detail::centered(x, cfg, static_cast<int>(j));
    magnitude += cfg.sigma * c * c;
  }
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(x.size() + 2) * magnitude;
  return centralized_gap(x, e, cfg) <= slack;
}

/// Smallest representable t >= t_k + dt whose difference to t_k, computed in
/// floating point, is still >= dt.
inline double advance_at_least(double t_k, double dt) {
  double t = t_k + dt;
  while (t - t_k < dt) t = std::nextafter(t, std::numeric_limits<double>::infinity());
  return t;
}

/// t_{k+1} = t_k + max(tau_min, t_candidate - t_k). Events inside the tau_min
/// blackout are ignored and the update lands exactly at t_k + tau_min.
inline double schedule_next_update(double t_k, double t_candidate_event, const TriggerConfig& cfg) {
  if (t_candidate_event < t_k) throw PreconditionError("schedule_next_update: candidate event precedes t_k");
  if (t_candidate_event - t_k >= cfg.tau_min) return t_candidate_event;
  return advance_at_least(t_k, cfg.tau_min);
}

}  // namespace dectrig
