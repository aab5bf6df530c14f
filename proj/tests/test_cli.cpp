#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CliRun run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / ("fdx_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
  const fs::path err = dir / ("err" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string("\"") + FDX_SIM_PATH + "\" " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const std::string kSmall = "--snr 10 --inr 30 --delta-f 1e-3 --iters 2";

}  // namespace

TEST(Cli, HelpExitsZero) {
  const CliRun r = run_cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--mode"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) { EXPECT_EQ(run_cli("--bogus").code, 2); }

TEST(Cli, BadModeIsUsageError) { EXPECT_EQ(run_cli("--mode fastest").code, 2); }

TEST(Cli, MissingConfigNamesPath) {
  const CliRun r = run_cli("--config /nonexistent/fdx_missing.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/fdx_missing.json"), std::string::npos);
}

TEST(Cli, InvalidParamsAreConfigErrors) {
  const fs::path cfg = fs::temp_directory_path() / "fdx_cli_bad.json";
  std::ofstream(cfg) << R"({"params": {"pilots": 3}})";
  const CliRun r = run_cli("--config " + cfg.string() + " --mode bounds-only");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
}

TEST(Cli, BoundsOnly) {
  const CliRun r = run_cli("--mode bounds-only --snr 0 --snr 20 --inr 40 --delta-f 1e-4");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("lambda_s"), std::string::npos);
  std::size_t lines = 0;
  for (char c : r.out) lines += c == '\n';
  EXPECT_EQ(lines, 3u);
}

TEST(Cli, SeededRunsAreIdentical) {
  const CliRun a = run_cli(kSmall + " --trials 100 --seed 7");
  const CliRun b = run_cli(kSmall + " --trials 100 --seed 7");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("snr_db,inr_db,delta_f,iteration,ber", 0), 0u);
  const CliRun c = run_cli(kSmall + " --trials 100 --seed 8");
  EXPECT_NE(a.out, c.out);
}

TEST(Cli, WritesCsvFile) {
  const fs::path csv = fs::temp_directory_path() / "fdx_cli_out.csv";
  fs::remove(csv);
  const CliRun r = run_cli(kSmall + " --trials 20 --mode mse-sweep --out " + csv.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string body = slurp(csv);
  std::size_t lines = 0;
  for (char c : body) lines += c == '\n';
  EXPECT_EQ(lines, 3u);
}

TEST(Cli, UnwritableOutputIsRuntimeError) {
  const CliRun r = run_cli(kSmall + " --trials 2 --out /nonexistent/dir/x.csv");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/dir/x.csv"), std::string::npos);
}
