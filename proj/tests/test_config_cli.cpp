#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlhg/config.hpp"
#include "nlhg/run.hpp"

using namespace nlhg;

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("nlhg_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NLHG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WEXITSTATUS(raw);
}

}  // namespace

TEST(Config, MinimalDocumentGetsDefaults) {
  const RunConfig cfg = parse_config("command = verify-kernel\n");
  EXPECT_EQ(cfg.command, "verify-kernel");
  EXPECT_EQ(cfg.family, "indicator-ball");
  EXPECT_EQ(cfg.d, 3);
  EXPECT_EQ(cfg.p, 2.0);
  EXPECT_EQ(cfg.seed, 1u);
  // the echo carries every effective value
  const auto echo = cfg.echo();
  bool saw_tol = false, saw_seed = false;
  for (const auto& [k, v] : echo) {
    if (k == "solver.tol") saw_tol = true;
    if (k == "run.seed") saw_seed = true;
  }
  EXPECT_TRUE(saw_tol);
  EXPECT_TRUE(saw_seed);
}

TEST(Config, SectionsAndLists) {
  const std::string text = R"(
command = phi
[kernel]
family = indicator-ball
d = 3
m = 1
p = 2
[schedules]
z = 0.5 1 2
R = 4 6 8
[run]
seed = 7
threads = auto
deterministic = true
)";
  const RunConfig cfg = parse_config(text);
  EXPECT_EQ(cfg.z_schedule, (std::vector<double>{0.5, 1, 2}));
  EXPECT_EQ(cfg.R_schedule, (std::vector<double>{4, 6, 8}));
  EXPECT_EQ(cfg.threads, 0);
  EXPECT_TRUE(cfg.deterministic);
  EXPECT_EQ(cfg.seed, 7u);
}

TEST(Config, UnknownKeysAreHardErrors) {
  try {
    parse_config("command = phi\n[kernel]\nfamly = indicator-ball\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("famly"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_config("command = phi\n[nosuch]\nx = 1\n"), ConfigError);
}

TEST(Config, ExponentRangeIsNamed) {
  try {
    parse_config("command = phi\n[kernel]\nd = 3\np = 3.5\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(1, d)"), std::string::npos) << e.what();
  }
}

TEST(Config, MalformedScheduleCarriesLineReference) {
  try {
    parse_config("command = phi\n[schedules]\nz = 1 two 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, MissingCommandRejected) {
  EXPECT_THROW(parse_config("[kernel]\nd = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("command = fly\n"), ConfigError);
}

TEST(Cli, VerifyKernelRunsClean) {
  const fs::path out = scratch_dir("verify");
  const fs::path cfg = out / "run.cfg";
  std::ofstream(cfg) << "command = verify-kernel\n[run]\nsamples = 2000\n[output]\ndir = "
                     << (out / "artifacts").string() << "\n";
  const int status = run_cli("--config " + cfg.string());
  EXPECT_EQ(status, 0);
  EXPECT_TRUE(fs::exists(out / "artifacts" / "kernel_report.csv"));
  const std::string manifest = slurp(out / "artifacts" / "manifest.txt");
  EXPECT_NE(manifest.find("status 0"), std::string::npos);
  EXPECT_NE(manifest.find("run.samples = 2000"), std::string::npos);
}

TEST(Cli, InvalidConfigExitsWithTwo) {
  const fs::path out = scratch_dir("badcfg");
  const fs::path cfg = out / "run.cfg";
  std::ofstream(cfg) << "command = phi\n[kernel]\np = 9\n";
  EXPECT_EQ(run_cli("--config " + cfg.string()), 2);
  EXPECT_EQ(run_cli("--config /nonexistent/nlhg.cfg"), 2);
}

TEST(Cli, RegimeSweepMatchesTableFixtures) {
  const fs::path out = scratch_dir("regimes");
  const fs::path cfg = out / "run.cfg";
  std::ofstream(cfg) << "command = regime-sweep\n[output]\ndir = " << (out / "a").string()
                     << "\n";
  EXPECT_EQ(run_cli("--config " + cfg.string()), 0);
  const std::string csv = slurp(out / "a" / "regimes.csv");
  EXPECT_NE(csv.find("LocalCapacitary"), std::string::npos);
  EXPECT_NE(csv.find("NonlocalCapacitary"), std::string::npos);
  EXPECT_NE(csv.find("TrivialCollapse"), std::string::npos);
  EXPECT_NE(csv.find("Uncharacterized"), std::string::npos);
}

TEST(Cli, DeterministicRunsAreByteIdentical) {
  const fs::path out = scratch_dir("determinism");
  const fs::path cfg = out / "run.cfg";
  std::ofstream(cfg) << R"(command = phi
[kernel]
family = indicator-ball
d = 3
m = 1
p = 2
normalize = true
[geometry]
h = 0.25
[schedules]
z = 1
R = 3 4
[solver]
tol = 1e-6
[output]
dump_fields = false
)";
  const fs::path a = out / "a", b = out / "b";
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --deterministic --output " + a.string()),
            0);
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --deterministic --output " + b.string()),
            0);
  EXPECT_EQ(slurp(a / "phi.csv"), slurp(b / "phi.csv"));
  EXPECT_FALSE(slurp(a / "phi.csv").empty());
}

TEST(Cli, PhiZeroScheduleGivesZeroTable) {
  const fs::path out = scratch_dir("phizero");
  const fs::path cfg = out / "run.cfg";
  std::ofstream(cfg) << R"(command = phi
[kernel]
normalize = true
[geometry]
h = 0.25
[schedules]
z = 0
R = 3 4
[output]
dump_fields = false
)";
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --output " + (out / "a").string()), 0);
  const std::string csv = slurp(out / "a" / "phi.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  int rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_NE(line.find(",0,"), std::string::npos) << line;  // zero value column
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}
