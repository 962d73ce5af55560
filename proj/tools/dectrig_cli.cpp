// dectrig command-line front end: simulate, compare, sweep, validate-config.
//
// Exit codes: 0 ok, 2 configuration error, 3 numeric divergence, 4 I/O error.

#include <dectrig/dectrig.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace dectrig;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<double> period;
  std::optional<std::uint64_t> seed;
};

ConfigDocument load(const CommonOptions& opt) {
  ConfigDocument doc = parse_config_document(read_text_file(opt.config));
  for (const auto& w : doc.warnings) std::cerr << "warning: " << w << '\n';
  if (opt.period) doc.scenario.period = *opt.period;
  if (opt.seed) doc.scenario.seed = *opt.seed;
  doc.scenario.validate();
  return doc;
}

std::filesystem::path out_dir(const CommonOptions& opt, const ConfigDocument& doc) {
  if (!opt.out.empty()) return opt.out;
  return doc.run.out_dir.value_or("out");
}

RunMode require_mode(const std::string& name) {
  auto mode = parse_run_mode(name);
  if (!mode) throw ConfigError({"unknown mode \"" + name + "\""});
  return *mode;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << '\n';
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "numeric divergence: " << e.what() << " (last finite state at t = " << e.last_good_time() << ")\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::cerr << "numeric divergence: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "numeric divergence: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
}

int cmd_simulate(const CommonOptions& opt, const std::string& mode_name) {
  return guarded([&] {
    ConfigDocument doc = load(opt);
    RunMode mode = doc.run.mode.value_or(doc.scenario.mode());
    if (!mode_name.empty()) mode = require_mode(mode_name);
    const SimResult result = run_mode(doc.scenario, mode);
    const auto dir = out_dir(opt, doc);
    const BundlePaths paths = write_bundle(result, doc.scenario, dir);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << to_string(mode) << ": " << result.summary.update_count << " updates, final |x - x*| = "
              << format_number(result.summary.final_error_norm) << "\n"
              << "wrote " << paths.trajectory.string() << ", " << paths.events.string() << ", "
              << paths.theta.string() << ", " << paths.summary.string() << '\n';
    return kExitOk;
  });
}

int cmd_compare(const CommonOptions& opt, const std::vector<std::string>& mode_names) {
  return guarded([&] {
    ConfigDocument doc = load(opt);
    doc.scenario.store_update_states = false;  // no bundle is written
    std::vector<RunMode> modes;
    for (const auto& name : mode_names) modes.push_back(require_mode(name));
    if (modes.empty()) {
      modes = {RunMode::Centralized, RunMode::DecentralizedAdaptive, RunMode::DecentralizedTheta0};
    }
    if (modes.size() < 2) throw ConfigError({"compare needs at least two --mode values"});
    const ComparisonReport report = compare_modes(doc.scenario, modes);
    const std::string text = comparison_to_json(report, doc.scenario).dump(2) + "\n";
    const auto dir = out_dir(opt, doc);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream out(dir / "compare.json", std::ios::binary | std::ios::trunc);
    if (!(out << text)) throw IoError("cannot write " + (dir / "compare.json").string());
    std::cout << text;
    if (report.failed) {
      for (const auto& o : report.outcomes) {
        if (!o.ok) std::cerr << to_string(o.mode) << " failed: " << o.error << '\n';
      }
      return kExitNumeric;
    }
    return kExitOk;
  });
}

struct SweepCell {
  double sigma;
  int q;
  EqualizationRule rule;
};

int cmd_sweep(const CommonOptions& opt, const std::string& mode_name, const std::vector<double>& sigmas,
              const std::vector<int>& qs, const std::vector<std::string>& rules) {
  return guarded([&] {
    ConfigDocument doc = load(opt);
    RunMode mode = doc.run.mode.value_or(doc.scenario.mode());
    if (!mode_name.empty()) mode = require_mode(mode_name);
    if (sigmas.empty() && qs.empty() && rules.empty()) {
      throw ConfigError({"sweep grid is empty: give at least one of --sigma, --q, --te-rule"});
    }

    std::vector<EqualizationRule> rule_values;
    for (const auto& name : rules) {
      if (name == "previous-interval") {
        rule_values.push_back(EqualizationRule::PreviousInterval);
      } else if (name == "tau-min") {
        rule_values.push_back(EqualizationRule::TauMin);
      } else if (name == "fixed") {
        rule_values.push_back(EqualizationRule::Fixed);
      } else {
        throw ConfigError({"unknown te rule \"" + name + "\""});
      }
    }
    const std::vector<double> sigma_axis = sigmas.empty() ? std::vector<double>{doc.scenario.trigger.sigma} : sigmas;
    const std::vector<int> q_axis = qs.empty() ? std::vector<int>{doc.scenario.adaptation.q} : qs;
    if (rule_values.empty()) rule_values.push_back(doc.scenario.adaptation.te_rule);

    std::vector<SweepCell> cells;
    for (double s : sigma_axis) {
      for (int q : q_axis) {
        for (auto rule : rule_values) cells.push_back({s, q, rule});
      }
    }

    struct Row {
      bool ok = false;
      SimSummary summary;
      std::string error;
    };
    std::vector<std::future<Row>> futures;
    for (const auto& cell : cells) {
      futures.push_back(std::async(std::launch::async, [&doc, cell, mode] {
        Row row;
        try {
          ScenarioConfig cfg = doc.scenario;
          cfg.trigger.sigma = cell.sigma;
          cfg.adaptation.q = cell.q;
          cfg.adaptation.te_rule = cell.rule;
          cfg.store_update_states = false;
          row.summary = run_mode(cfg, mode).summary;
          row.ok = true;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        return row;
      }));
    }

    std::ostringstream csv;
    csv << "cell,mode,sigma,q,te_rule,status,update_count,min_interval,mean_interval,max_interval,final_error_norm,"
           "error\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      Row row = futures[i].get();
      std::string error = row.error;
      for (char& ch : error) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      csv << i << ',' << to_string(mode) << ',' << format_number(cells[i].sigma) << ',' << cells[i].q << ','
          << io_detail::te_rule_name(cells[i].rule) << ',' << (row.ok ? "ok" : "failed") << ',';
      if (row.ok) {
        const auto& s = row.summary;
        csv << s.update_count << ',' << format_number(s.min_interval) << ',' << format_number(s.mean_interval) << ','
            << format_number(s.max_interval) << ',' << format_number(s.final_error_norm) << ",\n";
      } else {
        csv << ",,,,," << error << '\n';
      }
    }
    const auto dir = out_dir(opt, doc);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream out(dir / "sweep.csv", std::ios::binary | std::ios::trunc);
    if (!(out << csv.str())) throw IoError("cannot write " + (dir / "sweep.csv").string());
    std::cout << csv.str();
    return kExitOk;
  });
}

int cmd_validate(const CommonOptions& opt) {
  return guarded([&] {
    ConfigDocument doc = load(opt);
    const ScenarioConfig& c = doc.scenario;
    const Setpoint sp = c.setpoint();
    const auto check = check_gradient_bound(c.plant, controller_gains(c.plant), sp, 20000, c.seed);
    std::cout << "config OK\n"
              << "  u* = (" << format_number(sp.u(0)) << ", " << format_number(sp.u(1)) << ") cm^3/s\n"
              << "  x3* = " << format_number(sp.x3) << " cm, x4* = " << format_number(sp.x4) << " cm\n"
              << "  equilibrium residual = " << format_number(equilibrium_residual(c.plant, sp)) << '\n'
              << "  sampled min |grad Hd| / |x - x*| on the operating box = " << format_number(check.rho_m_estimate)
              << " (configured rho_m = " << format_number(c.rho_m) << ")\n"
              << "  integration step = " << format_number(c.effective_step()) << " s\n";
    return kExitOk;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized event-triggered control simulator"};
  app.require_subcommand(1);

  CommonOptions sim_opt;
  std::string sim_mode;
  auto* simulate = app.add_subcommand("simulate", "Run one mode and write the output bundle");
  simulate->add_option("--config", sim_opt.config, "Scenario JSON")->required();
  simulate->add_option("--mode", sim_mode, "centralized | decentralized-theta0 | decentralized-adaptive | periodic");
  simulate->add_option("--out", sim_opt.out, "Output directory");
  simulate->add_option("--period", sim_opt.period, "Sampling period for the periodic mode [s]");
  simulate->add_option("--seed", sim_opt.seed, "Seed recorded with the run");

  CommonOptions cmp_opt;
  std::vector<std::string> cmp_modes;
  auto* compare = app.add_subcommand("compare", "Run several modes on one scenario and report side by side");
  compare->add_option("--config", cmp_opt.config, "Scenario JSON")->required();
  compare->add_option("--mode", cmp_modes, "Mode to include (repeatable)");
  compare->add_option("--out", cmp_opt.out, "Output directory");
  compare->add_option("--period", cmp_opt.period, "Sampling period for the periodic mode [s]");
  compare->add_option("--seed", cmp_opt.seed, "Seed recorded with the run");

  CommonOptions sweep_opt;
  std::string sweep_mode;
  std::vector<double> sweep_sigma;
  std::vector<int> sweep_q;
  std::vector<std::string> sweep_rules;
  auto* sweep = app.add_subcommand("sweep", "Grid sweep over sigma, q and the equalization-time rule");
  sweep->add_option("--config", sweep_opt.config, "Scenario JSON")->required();
  sweep->add_option("--mode", sweep_mode, "Mode for every cell");
  sweep->add_option("--sigma", sweep_sigma, "Sigma values")->delimiter(',');
  sweep->add_option("--q", sweep_q, "Approximation orders")->delimiter(',');
  sweep->add_option("--te-rule", sweep_rules, "previous-interval | tau-min | fixed")->delimiter(',');
  sweep->add_option("--out", sweep_opt.out, "Output directory");
  sweep->add_option("--period", sweep_opt.period, "Sampling period for the periodic mode [s]");
  sweep->add_option("--seed", sweep_opt.seed, "Seed recorded with the run");

  CommonOptions val_opt;
  auto* validate = app.add_subcommand("validate-config", "Check a scenario file and print derived quantities");
  validate->add_option("--config", val_opt.config, "Scenario JSON")->required();
  validate->add_option("--seed", val_opt.seed, "Seed for the sampled gradient-bound check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*simulate) return cmd_simulate(sim_opt, sim_mode);
  if (*compare) return cmd_compare(cmp_opt, cmp_modes);
  if (*sweep) return cmd_sweep(sweep_opt, sweep_mode, sweep_sigma, sweep_q, sweep_rules);
  if (*validate) return cmd_validate(val_opt);
  return kExitConfig;
}
