#pragma once

// JSON scenario documents and the CSV/JSON output bundle.

#include <dectrig/sim.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dectrig {

inline constexpr int kConfigSchemaVersion = 1;

class IoError : public Error {
 public:
  using Error::Error;
};

/// What to run and where to write it; everything else lives in ScenarioConfig.
struct RunSelection {
  std::optional<RunMode> mode;
  std::optional<std::string> out_dir;
};

struct ConfigDocument {
  ScenarioConfig scenario;
  RunSelection run;
  bool strict = true;
  std::vector<std::string> warnings;  // unknown keys in lenient mode
};

namespace io_detail {

using nlohmann::json;

inline std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline std::string_view te_rule_name(EqualizationRule r) {
  switch (r) {
    case EqualizationRule::PreviousInterval: return "previous-interval";
    case EqualizationRule::TauMin: return "tau-min";
    case EqualizationRule::Fixed: return "fixed";
  }
  return "previous-interval";
}

// Collects violations while reading typed fields out of a JSON tree.
class Reader {
 public:
  std::vector<std::string> errors;
  std::vector<std::string> unknown;

  void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) return;
    for (const auto& [key, value] : obj.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == key;
      if (!ok) unknown.push_back(path.empty() ? key : path + "." + key);
    }
  }

  const json* section(const json& root, const std::string& key) {
    auto it = root.find(key);
    if (it == root.end()) return nullptr;
    if (!it->is_object()) {
      errors.push_back(key + " must be an object");
      return nullptr;
    }
    return &*it;
  }

  void number(const json* obj, const std::string& path, const char* key, double& out) {
    if (!obj) return;
    auto it = obj->find(key);
    if (it == obj->end()) return;
    if (!it->is_number()) {
      errors.push_back(path + "." + key + " must be a number");
      return;
    }
    out = it->get<double>();
  }

  void optional_number(const json* obj, const std::string& path, const char* key, std::optional<double>& out) {
    if (!obj) return;
    auto it = obj->find(key);
    if (it == obj->end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    if (!it->is_number()) {
      errors.push_back(path + "." + key + " must be a number or null");
      return;
    }
    out = it->get<double>();
  }

  void boolean(const json* obj, const std::string& path, const char* key, bool& out) {
    if (!obj) return;
    auto it = obj->find(key);
    if (it == obj->end()) return;
    if (!it->is_boolean()) {
      errors.push_back(path + "." + key + " must be true or false");
      return;
    }
    out = it->get<bool>();
  }

  template <class Int>
  void integer(const json* obj, const std::string& path, const char* key, Int& out) {
    if (!obj) return;
    auto it = obj->find(key);
    if (it == obj->end()) return;
    if (!it->is_number_integer()) {
      errors.push_back(path + "." + key + " must be an integer");
      return;
    }
    out = it->get<Int>();
  }

  void string(const json* obj, const std::string& path, const char* key, std::optional<std::string>& out) {
    if (!obj) return;
    auto it = obj->find(key);
    if (it == obj->end()) return;
    if (!it->is_string()) {
      errors.push_back(path + "." + key + " must be a string");
      return;
    }
    out = it->get<std::string>();
  }

  bool numbers(const json* obj, const std::string& path, const char* key, std::size_t n, std::vector<double>& out) {
    if (!obj) return false;
    auto it = obj->find(key);
    if (it == obj->end()) return false;
    if (!it->is_array() || (n && it->size() != n)) {
      errors.push_back(path + "." + key + " must be an array of " + std::to_string(n) + " numbers");
      return false;
    }
    out.clear();
    for (const auto& v : *it) {
      if (!v.is_number()) {
        errors.push_back(path + "." + key + " must contain only numbers");
        return false;
      }
      out.push_back(v.get<double>());
    }
    return true;
  }
};

}  // namespace io_detail

inline ConfigDocument parse_config_document(std::string_view text) {
  using io_detail::json;
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError({"parse error at " + io_detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"config document must be a JSON object"});

  ConfigDocument doc;
  doc.scenario = ScenarioConfig::reference();
  ScenarioConfig& c = doc.scenario;
  io_detail::Reader r;

  if (auto it = root.find("schema_version"); it == root.end()) {
    r.errors.push_back("schema_version is missing");
  } else if (!it->is_number_integer() || it->get<int>() != kConfigSchemaVersion) {
    r.errors.push_back("schema_version must be " + std::to_string(kConfigSchemaVersion));
  }
  r.boolean(&root, "", "strict", doc.strict);
  r.check_keys(root, "",
               {"schema_version", "strict", "description", "plant", "setpoint", "trigger", "adaptation", "simulation",
                "run"});

  std::vector<double> tmp;
  if (const auto* plant = r.section(root, "plant")) {
    r.check_keys(*plant, "plant", {"A_cm2", "a_cm2", "gamma", "g_cm_s2", "k_I", "k", "Q", "level_policy"});
    if (r.numbers(plant, "plant", "A_cm2", 4, tmp)) std::copy(tmp.begin(), tmp.end(), c.plant.A.begin());
    if (r.numbers(plant, "plant", "a_cm2", 4, tmp)) std::copy(tmp.begin(), tmp.end(), c.plant.a.begin());
    if (r.numbers(plant, "plant", "gamma", 2, tmp)) {
      c.plant.gamma1 = tmp[0];
      c.plant.gamma2 = tmp[1];
    }
    r.number(plant, "plant", "g_cm_s2", c.plant.g);
    if (r.numbers(plant, "plant", "k_I", 2, tmp)) {
      c.plant.k_I1 = tmp[0];
      c.plant.k_I2 = tmp[1];
    }
    if (r.numbers(plant, "plant", "k", 4, tmp)) std::copy(tmp.begin(), tmp.end(), c.plant.k.begin());
    if (auto it = plant->find("Q"); it != plant->end()) {
      bool ok = it->is_array() && it->size() == 2;
      for (std::size_t i = 0; ok && i < 2; ++i) {
        ok = (*it)[i].is_array() && (*it)[i].size() == 2 && (*it)[i][0].is_number() && (*it)[i][1].is_number();
      }
      if (ok) {
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) c.plant.Q(i, j) = (*it)[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
        }
      } else {
        r.errors.push_back("plant.Q must be a 2x2 array of numbers");
      }
    }
    std::optional<std::string> policy;
    r.string(plant, "plant", "level_policy", policy);
    if (policy) {
      if (*policy == "clamp") {
        c.plant.level_policy = LevelPolicy::Clamp;
      } else if (*policy == "strict") {
        c.plant.level_policy = LevelPolicy::Strict;
      } else {
        r.errors.push_back("plant.level_policy must be \"clamp\" or \"strict\"");
      }
    }
  }

  if (const auto* sp = r.section(root, "setpoint")) {
    r.check_keys(*sp, "setpoint", {"x1_cm", "x2_cm", "x5_hat", "x6_hat"});
    r.number(sp, "setpoint", "x1_cm", c.x1_star);
    r.number(sp, "setpoint", "x2_cm", c.x2_star);
    r.number(sp, "setpoint", "x5_hat", c.x5_hat);
    r.number(sp, "setpoint", "x6_hat", c.x6_hat);
  }

  if (const auto* trig = r.section(root, "trigger")) {
    r.check_keys(*trig, "trigger", {"mode", "sigma", "tau_min_s", "grouping", "rho", "rho_m"});
    std::optional<std::string> mode;
    r.string(trig, "trigger", "mode", mode);
    if (mode) {
      if (*mode == "centralized") {
        c.trigger.mode = TriggerMode::Centralized;
      } else if (*mode == "decentralized") {
        c.trigger.mode = TriggerMode::Decentralized;
      } else {
        r.errors.push_back("trigger.mode must be \"centralized\" or \"decentralized\"");
      }
    }
    r.number(trig, "trigger", "sigma", c.trigger.sigma);
    r.number(trig, "trigger", "tau_min_s", c.trigger.tau_min);
    r.number(trig, "trigger", "rho", c.rho);
    r.number(trig, "trigger", "rho_m", c.rho_m);
    if (auto it = trig->find("grouping"); it != trig->end()) {
      Grouping g;
      bool ok = it->is_array();
      for (std::size_t i = 0; ok && i < it->size(); ++i) {
        const auto& node = (*it)[i];
        ok = node.is_array();
        std::vector<int> members;
        for (std::size_t j = 0; ok && j < node.size(); ++j) {
          ok = node[j].is_number_integer();
          if (ok) members.push_back(node[j].get<int>() - 1);
        }
        g.push_back(std::move(members));
      }
      if (ok) {
        c.trigger.grouping = std::move(g);
      } else {
        r.errors.push_back("trigger.grouping must be an array of arrays of 1-based state indices");
      }
    }
  }

  if (const auto* ad = r.section(root, "adaptation")) {
    r.check_keys(*ad, "adaptation", {"enabled", "q", "te_rule", "te_fixed_seconds", "fd_fallback", "fd_rel_step"});
    r.boolean(ad, "adaptation", "enabled", c.adaptation.enabled);
    r.integer(ad, "adaptation", "q", c.adaptation.q);
    std::optional<std::string> rule;
    r.string(ad, "adaptation", "te_rule", rule);
    if (rule) {
      bool matched = false;
      for (auto candidate : {EqualizationRule::PreviousInterval, EqualizationRule::TauMin, EqualizationRule::Fixed}) {
        if (io_detail::te_rule_name(candidate) == *rule) {
          c.adaptation.te_rule = candidate;
          matched = true;
        }
      }
      if (!matched) r.errors.push_back("adaptation.te_rule must be previous-interval, tau-min or fixed");
    }
    r.number(ad, "adaptation", "te_fixed_seconds", c.adaptation.te_fixed_seconds);
    r.boolean(ad, "adaptation", "fd_fallback", c.adaptation.finite_difference_fallback);
    r.number(ad, "adaptation", "fd_rel_step", c.adaptation.finite_difference_rel_step);
  }

  if (const auto* sim = r.section(root, "simulation")) {
    r.check_keys(*sim, "simulation",
                 {"x0", "horizon_s", "step_s", "event_tol_s", "log_interval_s", "delay_s", "delay_sigma_factor",
                  "gap_floor", "store_update_states", "seed"});
    if (r.numbers(sim, "simulation", "x0", 0, tmp)) c.x0 = from_std(tmp);
    r.number(sim, "simulation", "horizon_s", c.horizon);
    r.optional_number(sim, "simulation", "step_s", c.step);
    r.number(sim, "simulation", "event_tol_s", c.event_tol);
    r.number(sim, "simulation", "log_interval_s", c.log_interval);
    r.number(sim, "simulation", "delay_s", c.delay);
    r.number(sim, "simulation", "delay_sigma_factor", c.delay_sigma_factor);
    r.number(sim, "simulation", "gap_floor", c.gap_floor);
    r.boolean(sim, "simulation", "store_update_states", c.store_update_states);
    r.integer(sim, "simulation", "seed", c.seed);
  }

  if (const auto* run = r.section(root, "run")) {
    r.check_keys(*run, "run", {"mode", "period_s", "out_dir"});
    std::optional<std::string> mode;
    r.string(run, "run", "mode", mode);
    if (mode) {
      doc.run.mode = parse_run_mode(*mode);
      if (!doc.run.mode) r.errors.push_back("run.mode \"" + *mode + "\" is not a known mode");
    }
    r.optional_number(run, "run", "period_s", c.period);
    r.string(run, "run", "out_dir", doc.run.out_dir);
  }

  for (const auto& key : r.unknown) {
    if (doc.strict) {
      r.errors.push_back("unknown key " + key);
    } else {
      doc.warnings.push_back("ignoring unknown key " + key);
    }
  }
  // Fields that failed to parse keep their defaults, so the invariant check still runs.
  if (doc.run.mode && *doc.run.mode != RunMode::Periodic) c = with_mode(c, *doc.run.mode);
  auto v = c.violations();
  r.errors.insert(r.errors.end(), v.begin(), v.end());
  if (!r.errors.empty()) throw ConfigError(std::move(r.errors));
  return doc;
}

/// Parses a config document and checks every scenario invariant.
inline ScenarioConfig parse_and_validate(std::string_view text) { return parse_config_document(text).scenario; }

inline nlohmann::json config_to_json(const ScenarioConfig& c, const RunSelection& run = {}) {
  using io_detail::json;
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["strict"] = true;
  const auto& p = c.plant;
  j["plant"] = {{"A_cm2", p.A},
                {"a_cm2", p.a},
                {"gamma", {p.gamma1, p.gamma2}},
                {"g_cm_s2", p.g},
                {"k_I", {p.k_I1, p.k_I2}},
                {"k", p.k},
                {"Q", {{p.Q(0, 0), p.Q(0, 1)}, {p.Q(1, 0), p.Q(1, 1)}}},
                {"level_policy", p.level_policy == LevelPolicy::Clamp ? "clamp" : "strict"}};
  j["setpoint"] = {{"x1_cm", c.x1_star}, {"x2_cm", c.x2_star}, {"x5_hat", c.x5_hat}, {"x6_hat", c.x6_hat}};
  json grouping = json::array();
  for (const auto& node : c.trigger.grouping) {
    json members = json::array();
    for (int idx : node) members.push_back(idx + 1);
    grouping.push_back(members);
  }
  j["trigger"] = {{"mode", c.trigger.mode == TriggerMode::Centralized ? "centralized" : "decentralized"},
                  {"sigma", c.trigger.sigma},
                  {"tau_min_s", c.trigger.tau_min},
                  {"grouping", grouping},
                  {"rho", c.rho},
                  {"rho_m", c.rho_m}};
  j["adaptation"] = {{"enabled", c.adaptation.enabled},
                     {"q", c.adaptation.q},
                     {"te_rule", std::string(io_detail::te_rule_name(c.adaptation.te_rule))},
                     {"te_fixed_seconds", c.adaptation.te_fixed_seconds},
                     {"fd_fallback", c.adaptation.finite_difference_fallback},
                     {"fd_rel_step", c.adaptation.finite_difference_rel_step}};
  j["simulation"] = {{"x0", to_std(c.x0)},
                     {"horizon_s", c.horizon},
                     {"step_s", c.step ? json(*c.step) : json(nullptr)},
                     {"event_tol_s", c.event_tol},
                     {"log_interval_s", c.log_interval},
                     {"delay_s", c.delay},
                     {"delay_sigma_factor", c.delay_sigma_factor},
                     {"gap_floor", c.gap_floor},
                     {"store_update_states", c.store_update_states},
                     {"seed", c.seed}};
  json r = json::object();
  r["mode"] = std::string(to_string(run.mode.value_or(c.mode())));
  r["period_s"] = c.period ? json(*c.period) : json(nullptr);
  if (run.out_dir) r["out_dir"] = *run.out_dir;
  j["run"] = r;
  return j;
}

inline std::string emit_config(const ScenarioConfig& c, const RunSelection& run = {}) {
  return config_to_json(c, run).dump(2) + "\n";
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

// ---------------------------------------------------------------------------
// Output bundle

/// 17 significant digits; NaN and infinities are spelled out.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string node_ids_field(const UpdateRecord& u) {
  switch (u.cause) {
    case UpdateCause::Initial: return "init";
    case UpdateCause::Centralized: return "central";
    case UpdateCause::Periodic: return "periodic";
    case UpdateCause::Nodes: break;
  }
  std::string out;
  for (int node : u.fired_nodes) {
    if (!out.empty()) out += ';';
    out += std::to_string(node + 1);
  }
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const SimResult& r) {
  os << "t,x1,x2,x3,x4,x5,x6,u1,u2,Hd\n";
  for (const auto& s : r.trajectory) {
    os << format_number(s.t);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) os << ',' << format_number(s.x(i));
    for (Eigen::Index i = 0; i < s.u.size(); ++i) os << ',' << format_number(s.u(i));
    os << ',' << format_number(s.energy) << '\n';
  }
}

inline void write_events_csv(std::ostream& os, const SimResult& r) {
  os << "k,t_k,dt,node_ids,gap_at_fire\n";
  for (const auto& u : r.updates) {
    os << u.k << ',' << format_number(u.t) << ',' << (u.k == 0 ? std::string() : format_number(u.dt)) << ','
       << node_ids_field(u) << ',' << (std::isnan(u.gap_at_fire) ? std::string() : format_number(u.gap_at_fire))
       << '\n';
  }
}

/// Rows only for decentralized runs; other modes get the header alone.
inline void write_theta_csv(std::ostream& os, const SimResult& r) {
  os << 'k';
  for (int i = 0; i < r.metadata.node_count; ++i) os << ",theta_" << (i + 1);
  os << '\n';
  for (const auto& u : r.updates) {
    if (u.theta.empty()) continue;
    os << u.k;
    for (double v : u.theta) os << ',' << format_number(v);
    os << '\n';
  }
}

namespace io_detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace io_detail

inline nlohmann::json summary_to_json(const SimResult& r, const ScenarioConfig& cfg) {
  using io_detail::finite_or_null;
  using io_detail::json;
  const auto& s = r.summary;
  const auto& m = r.metadata;
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["mode"] = m.mode;
  j["update_count"] = s.update_count;
  j["intervals"] = {{"min", finite_or_null(s.min_interval)},
                    {"mean", finite_or_null(s.mean_interval)},
                    {"max", finite_or_null(s.max_interval)}};
  json final_state = json::array();
  for (Eigen::Index i = 0; i < s.final_state.size(); ++i) final_state.push_back(finite_or_null(s.final_state(i)));
  j["final"] = {{"time", s.final_time},
                {"state", final_state},
                {"error_norm", finite_or_null(s.final_error_norm)},
                {"x1_error", finite_or_null(s.final_state(0) - cfg.x1_star)},
                {"x2_error", finite_or_null(s.final_state(1) - cfg.x2_star)}};
  j["energy"] = {{"initial", finite_or_null(s.energy_initial)},
                 {"final", finite_or_null(s.energy_final)},
                 {"max_rel_increase_at_updates", finite_or_null(s.energy_max_rel_increase)}};
  j["adaptation"] = {{"equalized", s.adaptation_equalized},
                     {"tau_min_retry", s.adaptation_tau_min_retry},
                     {"zero_fallback", s.adaptation_zero_fallback}};
  j["warnings"] = r.warnings;
  j["metadata"] = {{"step_s", m.step},
                   {"horizon_s", m.horizon},
                   {"sigma_effective", m.sigma},
                   {"tau_min_s", m.tau_min},
                   {"period_s", m.period},
                   {"delay_s", m.delay},
                   {"log_interval_s", m.log_interval},
                   {"event_tol_s", m.event_tol},
                   {"gap_floor", m.gap_floor},
                   {"node_count", m.node_count},
                   {"rho", finite_or_null(m.rho)},
                   {"rho_m", finite_or_null(m.rho_m)},
                   {"trajectory_samples", r.trajectory.size()}};
  return j;
}

struct BundlePaths {
  std::filesystem::path trajectory;
  std::filesystem::path events;
  std::filesystem::path theta;
  std::filesystem::path summary;
};

inline BundlePaths bundle_paths(const std::filesystem::path& dir) {
  return {dir / "trajectory.csv", dir / "events.csv", dir / "theta.csv", dir / "summary.json"};
}

namespace io_detail {

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace io_detail

inline BundlePaths write_bundle(const SimResult& r, const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const BundlePaths paths = bundle_paths(dir);
  io_detail::write_file(paths.trajectory, [&](std::ostream& os) { write_trajectory_csv(os, r); });
  io_detail::write_file(paths.events, [&](std::ostream& os) { write_events_csv(os, r); });
  io_detail::write_file(paths.theta, [&](std::ostream& os) { write_theta_csv(os, r); });
  io_detail::write_file(paths.summary, [&](std::ostream& os) { os << summary_to_json(r, cfg).dump(2) << '\n'; });
  return paths;
}

inline nlohmann::json comparison_to_json(const ComparisonReport& report, const ScenarioConfig& cfg) {
  using io_detail::finite_or_null;
  using io_detail::json;
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  json modes = json::array();
  json summaries = json::object();
  json errors = json::object();
  for (const auto& o : report.outcomes) {
    const std::string name(to_string(o.mode));
    modes.push_back(name);
    if (o.ok) {
      j["count_" + name] = o.result.summary.update_count;
      summaries[name] = summary_to_json(o.result, cfg);
    } else {
      errors[name] = o.error;
    }
  }
  j["modes"] = modes;
  j["summaries"] = summaries;
  j["errors"] = errors;
  json ratios = json::object();
  for (const auto& a : report.outcomes) {
    for (const auto& b : report.outcomes) {
      if (&a == &b || !a.ok || !b.ok || b.result.summary.update_count == 0) continue;
      ratios[std::string(to_string(a.mode)) + "/" + std::string(to_string(b.mode))] =
          static_cast<double>(a.result.summary.update_count) / static_cast<double>(b.result.summary.update_count);
    }
  }
  j["count_ratios"] = ratios;
  json dev = json::array();
  for (const auto& row : report.deviation) {
    json jr = json::array();
    for (double v : row) jr.push_back(finite_or_null(v));
    dev.push_back(jr);
  }
  j["deviation_x1x2_cm"] = dev;
  j["max_deviation_x1x2_cm"] = report.max_deviation;
  j["ordering"] = report.ordering;
  j["failed"] = report.failed;
  return j;
}

}  // namespace dectrig
