#include <dectrig/io.hpp>

#include <gtest/gtest.h>

#include <array>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

using namespace dectrig;
namespace fs = std::filesystem;

namespace {

const fs::path kScenario = fs::path(DECTRIG_SOURCE_DIR) / "scenarios" / "reference.json";

struct CliResult {
  int code;
  std::string output;  // stdout and stderr interleaved
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(DECTRIG_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, {}};
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dectrig_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Shipped scenario with a shorter horizon and optional further edits.
  std::string config(double horizon, const std::function<void(nlohmann::json&)>& edit = {}) {
    auto j = nlohmann::json::parse(read_text_file(kScenario));
    j["simulation"]["horizon_s"] = horizon;
    if (edit) edit(j);
    const fs::path p = dir_ / "config.json";
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_F(CliTest, ValidateShippedScenario) {
  const CliResult r = cli("validate-config --config " + kScenario.string() + " --seed 3");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("config OK"), std::string::npos);
}

TEST_F(CliTest, MissingConfigIsUsageError) {
  const CliResult r = cli("simulate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("--config"), std::string::npos) << r.output;
}

TEST_F(CliTest, NoSubcommandIsUsageError) { EXPECT_EQ(cli("").code, 2); }

TEST_F(CliTest, InvalidConfigExitsTwo) {
  const CliResult r = cli("validate-config --config " + config(1.0, [](auto& j) { j["plant"]["gamma"] = {0.5, 0.5}; }));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("singular"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnknownModeExitsTwo) {
  EXPECT_EQ(cli("simulate --config " + config(1.0) + " --mode sometimes --out " + dir_.string()).code, 2);
}

TEST_F(CliTest, MissingFileExitsFour) {
  const CliResult r = cli("simulate --config " + (dir_ / "absent.json").string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("absent.json"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnwritableOutputExitsFour) {
  std::ofstream(dir_ / "blocker") << "x";
  const CliResult r = cli("simulate --config " + config(0.5) + " --out " + (dir_ / "blocker" / "out").string());
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST_F(CliTest, DomainViolationExitsThree) {
  const std::string cfg = config(5.0, [](auto& j) {
    j["plant"]["level_policy"] = "strict";
    j["simulation"]["x0"] = {100, 100, 0.01, 0.01, 0, 0};
  });
  const CliResult r = cli("simulate --config " + cfg + " --out " + (dir_ / "out").string());
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST_F(CliTest, SimulateWritesMonotoneBundle) {
  const fs::path out = dir_ / "out";
  const CliResult r = cli("simulate --config " + config(5.0) + " --mode decentralized-adaptive --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto ev = lines(read_text_file(out / "events.csv"));
  ASSERT_GT(ev.size(), 2u);
  double prev = -1.0;
  for (std::size_t i = 1; i < ev.size(); ++i) {
    const double tk = std::stod(ev[i].substr(ev[i].find(',') + 1));
    EXPECT_GT(tk, prev);
    prev = tk;
  }
  const auto summary = nlohmann::json::parse(read_text_file(out / "summary.json"));
  EXPECT_EQ(summary["update_count"].get<std::size_t>(), ev.size() - 1);
  EXPECT_EQ(summary["mode"], "decentralized-adaptive");
  EXPECT_TRUE(fs::exists(out / "theta.csv"));
  EXPECT_TRUE(fs::exists(out / "trajectory.csv"));
}

TEST_F(CliTest, PeriodicRowCount) {
  const fs::path out = dir_ / "out";
  const CliResult r = cli("simulate --config " + config(1.0) + " --mode periodic --period 1e-4 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(lines(read_text_file(out / "events.csv")).size() - 1, 10000u);
}

TEST_F(CliTest, CompareCentralizedAgainstThetaZero) {
  const CliResult r = cli("compare --config " + config(20.0) +
                    " --mode centralized --mode decentralized-theta0 --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(read_text_file(dir_ / "compare.json"));
  EXPECT_LE(j["count_centralized"].get<int>(), j["count_decentralized-theta0"].get<int>());
}

TEST_F(CliTest, CompareModeWithItself) {
  const CliResult r = cli("compare --config " + config(5.0) + " --mode centralized --mode centralized --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(read_text_file(dir_ / "compare.json"));
  EXPECT_EQ(j["max_deviation_x1x2_cm"].get<double>(), 0.0);
}

TEST_F(CliTest, CompareThreeModesHasOrdering) {
  const CliResult r = cli("compare --config " + config(10.0) + " --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(read_text_file(dir_ / "compare.json"));
  EXPECT_EQ(j["modes"].size(), 3u);
  EXPECT_FALSE(j["ordering"].get<std::string>().empty());
}

TEST_F(CliTest, SweepEmptyGridExitsTwo) {
  EXPECT_EQ(cli("sweep --config " + config(1.0) + " --out " + dir_.string()).code, 2);
}

TEST_F(CliTest, OneCellSweepMatchesSimulate) {
  const std::string cfg = config(5.0);
  const CliResult s = cli("simulate --config " + cfg + " --out " + (dir_ / "sim").string());
  ASSERT_EQ(s.code, 0) << s.output;
  const CliResult w = cli("sweep --config " + cfg + " --q 1 --out " + (dir_ / "sweep").string());
  ASSERT_EQ(w.code, 0) << w.output;
  const auto summary = nlohmann::json::parse(read_text_file(dir_ / "sim" / "summary.json"));
  const auto rows = lines(read_text_file(dir_ / "sweep" / "sweep.csv"));
  ASSERT_EQ(rows.size(), 2u);
  std::vector<std::string> cells;
  std::istringstream in(rows[1]);
  for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
  EXPECT_EQ(cells[5], "ok");
  EXPECT_EQ(std::stoul(cells[6]), summary["update_count"].get<std::size_t>());
  EXPECT_EQ(std::stod(cells[10]), summary["final"]["error_norm"].get<double>());
}

TEST_F(CliTest, SigmaSweepCountsNonIncreasing) {
  const double s = 0.0054 * 0.0054;
  std::ostringstream sig;
  sig.precision(17);
  sig << s / 4 << ',' << s << ',' << 4 * s;
  const CliResult r = cli("sweep --config " + config(20.0) + " --mode decentralized-adaptive --sigma " + sig.str() +
                    " --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = lines(read_text_file(dir_ / "sweep.csv"));
  ASSERT_EQ(rows.size(), 4u);
  std::vector<unsigned long> counts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::istringstream in(rows[i]);
    for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells[5], "ok") << rows[i];
    counts.push_back(std::stoul(cells[6]));
  }
  EXPECT_GE(counts[0], counts[1]);
  EXPECT_GE(counts[1], counts[2]);
}

TEST_F(CliTest, SweepRecordsFailedCells) {
  const CliResult r = cli("sweep --config " + config(1.0) + " --sigma=-1," + std::to_string(0.0054 * 0.0054) + " --out " +
                    dir_.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = lines(read_text_file(dir_ / "sweep.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NE(rows[1].find("failed"), std::string::npos);
  EXPECT_NE(rows[2].find(",ok,"), std::string::npos);
}
