#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "hsync_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(HSYNC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, EnhancementWritesSummaryAndTable) {
  const auto cfg = write_config("enh.conf", "scenario = enhancement\n");
  const auto out = kWork / "enh_out";
  fs::remove_all(out);
  ASSERT_EQ(run("enhancement --config " + cfg.string() + " --out " + out.string()), 0);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["scenario"], "enhancement");
  const double e = summary["metrics"]["enhancement"];
  EXPECT_GE(e, 129.0);
  EXPECT_LE(e, 143.0);
  EXPECT_EQ(slurp(out / "enhancement.csv").substr(0, 33), "tau_c_us,n_write_max,enhancement\n");
}

TEST(Cli, ScenarioMayComeFromCommandLineOnly) {
  const auto cfg = write_config("hom.conf", "hom.domain = frequency\n");
  const auto out = kWork / "hom_out";
  ASSERT_EQ(run("hom_scan --config " + cfg.string() + " --out " + out.string()), 0);
  EXPECT_EQ(slurp(out / "hom_scan.csv").substr(0, 33), "detuning_mhz,coincidence,plateau\n");
}

TEST(Cli, SeedAndTrialOverridesAreDeterministic) {
  const auto cfg = write_config("sim.conf", "scenario = protocol_sim\nprotocol_sim.record_trials = true\n"
                                            "source_a.p_as = 0.1\nsource_b.p_as = 0.1\n");
  const auto a = kWork / "sim_a", b = kWork / "sim_b";
  ASSERT_EQ(run("protocol_sim --config " + cfg.string() + " --seed 5 --trials 2000 --out " + a.string()), 0);
  ASSERT_EQ(run("protocol_sim --config " + cfg.string() + " --seed 5 --trials 2000 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_EQ(slurp(a / "protocol_sim.csv"), slurp(b / "protocol_sim.csv"));
  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(summary["seed"], 5);
  EXPECT_EQ(summary["metrics"]["trials"], 2000.0);
}

TEST(Cli, ExitCodes) {
  const auto ok = write_config("ok.conf", "scenario = chsh\n");
  EXPECT_EQ(run("chsh --config " + ok.string() + " --out " + (kWork / "chsh_out").string()), 0);

  // 2: config problems, including a missing file and bad arguments.
  const auto bad = write_config("bad.conf", "scenario = chsh\nbogus = 1\n");
  EXPECT_EQ(run("chsh --config " + bad.string()), 2);
  EXPECT_EQ(run("enhancement --config " + ok.string()), 2);  // scenario mismatch
  EXPECT_EQ(run("teleport --config " + ok.string()), 2);
  EXPECT_EQ(run("chsh"), 2);

  // 3: output location cannot be created.
  const auto blocker = kWork / "blocker";
  std::ofstream(blocker) << "x";
  EXPECT_EQ(run("chsh --config " + ok.string() + " --out " + (blocker / "sub").string()), 3);
  EXPECT_EQ(run("chsh --config " + (kWork / "missing.conf").string()), 3);

  // 4: numeric domain error inside a module.
  const auto zero = write_config("zero.conf", "scenario = enhancement\nsource_a.p_as = 0\n");
  EXPECT_EQ(run("enhancement --config " + zero.string() + " --out " + (kWork / "z").string()), 4);
}
