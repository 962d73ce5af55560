// Runs the default quadruple-tank scenario in every mode and prints update counts.
// Usage: sample_tank_modes [horizon_seconds]

#include <dectrig/dectrig.hpp>

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  using namespace dectrig;
  ScenarioConfig cfg = ScenarioConfig::reference();
  cfg.horizon = argc > 1 ? std::atof(argv[1]) : 60.0;
  cfg.store_update_states = false;

  for (RunMode mode : {RunMode::Centralized, RunMode::DecentralizedAdaptive, RunMode::DecentralizedTheta0,
                       RunMode::Periodic}) {
    const SimResult r = run_mode(cfg, mode);
    const auto& x = r.summary.final_state;
    std::printf("%-24s updates=%-9zu x1=%.4f x2=%.4f Hd=%.6g\n", std::string(to_string(mode)).c_str(),
                r.summary.update_count, x(0), x(1), r.summary.energy_final);
  }
  return 0;
}
