#include "cli_args.hpp"
#include "harness.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gfe::cli {
namespace {

namespace fs = std::filesystem;
using testing::temp_path;

RunSpec parse(std::vector<const char*> args, const char* env = nullptr) {
  args.insert(args.begin(), "gfe-cli");
  return parse_args(static_cast<int>(args.size()), args.data(), env);
}

TEST(CliArgs, TrainWithMethod) {
  const auto s = parse({"train", "--method", "gfe_amd", "--data-dir", "D", "--out", "O"});
  EXPECT_EQ(s.command, Command::train);
  EXPECT_EQ(s.data_dir, "D");
  EXPECT_EQ(s.out_dir, "O");
  ASSERT_EQ(s.overrides.size(), 1u);
  EXPECT_EQ(s.overrides[0], (std::pair<std::string, std::string>{"method", "gfe_amd"}));
}

TEST(CliArgs, UnknownMethodIsUsageError) {
  try {
    parse({"train", "--method", "bogus", "--data-dir", "D", "--out", "O"});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_EQ(e.status(), 2);
  }
  EXPECT_THROW(parse({"train", "--data-dir", "D"}), UsageError);
  EXPECT_THROW(parse({"eval", "--data-dir", "D", "--out", "O"}), UsageError);
  EXPECT_THROW(parse({"train", "--out", "O", "--data-dir", "D", "--set", "novalue"}), UsageError);
  EXPECT_THROW(parse({"frobnicate"}), UsageError);
}

TEST(CliArgs, HelpExitsCleanly) {
  try {
    parse({"--help"});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_EQ(e.status(), 0);
    EXPECT_NE(std::string(e.what()).find("train"), std::string::npos);
  }
}

TEST(CliArgs, DataDirFallsBackToEnvironment) {
  EXPECT_EQ(parse({"train", "--out", "O"}, "/env/dir").data_dir, "/env/dir");
  EXPECT_EQ(parse({"train", "--out", "O", "--data-dir", "X"}, "/env/dir").data_dir, "X");
  EXPECT_THROW(parse({"train", "--out", "O"}), UsageError);
  EXPECT_THROW(parse({"train", "--out", "O"}, ""), UsageError);
}

TEST(CliArgs, FlagsFollowSetAssignmentsInOrder) {
  const auto s = parse({"train", "--out", "O", "--data-dir", "D", "--seed", "7", "--set", "flow.tau=2",
                        "--images", "64", "--set", "lr=0.01"});
  const std::vector<std::pair<std::string, std::string>> want{
      {"seed", "7"}, {"images", "64"}, {"flow.tau", "2"}, {"lr", "0.01"}};
  EXPECT_EQ(s.overrides, want);
}

TEST(CliArgs, FixtureCheckNeedsNoData) {
  const auto s = parse({"fixture-check", "--seed", "9"});
  EXPECT_EQ(s.command, Command::fixture_check);
  EXPECT_EQ(s.check_seed, 9u);
  EXPECT_EQ(command_name(Command::latents), "latents");
}

TEST(CliArgs, ValidatePaths) {
  RunSpec s;
  s.data_dir = temp_path("no_such_dir");
  s.out_dir = temp_path("out");
  EXPECT_THROW(validate_paths(s), UsageError);
  s.data_dir = temp_path("");
  EXPECT_NO_THROW(validate_paths(s));
  s.config_path = temp_path("missing.cfg");
  EXPECT_THROW(validate_paths(s), UsageError);
}

// End-to-end runs of the installed binary.

struct Run {
  int status;
  std::string out;
};

Run run_cli(const std::string& args) {
  const auto log = temp_path("cli_log.txt");
  const std::string cmd = std::string(GFE_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::string metrics_without_wall_time(const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& r : harness::read_metrics(path))
    out << r.images_seen << ' ' << r.train_loss << ' ' << r.val_loss << ' ' << r.model_calls << ' '
        << r.skipped << '\n';
  return out.str();
}

class CliBinary : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = testing::make_idx_dir("cli_idx", 24);
    cfg_ = temp_path("cli.cfg");
    std::ofstream(cfg_) << "# tiny run\nwidths = 2,4,16\nbatch_size = 4\nimages = 12\n"
                           "eval_every = 1\neval_samples = 4\ntest_samples = 6\n";
  }
  std::string out(const std::string& name) {
    const auto d = temp_path(name);
    fs::remove_all(d);
    return d;
  }
  std::string data_, cfg_;
};

TEST_F(CliBinary, TrainIsReproducible) {
  const auto a = out("cli_a"), b = out("cli_b");
  for (const auto& o : {a, b}) {
    const auto r = run_cli("train --config " + cfg_ + " --data-dir " + data_ + " --out " + o);
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("final_val_loss="), std::string::npos);
  }
  EXPECT_EQ(metrics_without_wall_time(a + "/metrics.csv"), metrics_without_wall_time(b + "/metrics.csv"));
  // Steps 1 and 2, then the final row after step 3.
  EXPECT_EQ(harness::read_metrics(a + "/metrics.csv").size(), 3u);
  std::ifstream resolved(a + "/resolved-config.txt");
  std::stringstream ss;
  ss << resolved.rdbuf();
  EXPECT_NE(ss.str().find("widths=2,4,16"), std::string::npos);
  EXPECT_NE(ss.str().find("flow.tau="), std::string::npos);
}

TEST_F(CliBinary, EvalReconstructLatents) {
  const auto o = out("cli_ae");
  ASSERT_EQ(run_cli("train --method ae --config " + cfg_ + " --data-dir " + data_ + " --out " + o).status, 0);
  const auto ck = " --checkpoint " + o + "/checkpoint.bin --config " + cfg_ + " --data-dir " + data_;
  const auto r = run_cli("eval" + ck + " --out " + o + " --encoding amd");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(o + "/eval.txt"));
  ASSERT_EQ(run_cli("reconstruct" + ck + " --out " + o + " --limit 3").status, 0);
  EXPECT_TRUE(fs::exists(o + "/reconstructions/recon_0002.pgm"));
  EXPECT_FALSE(fs::exists(o + "/reconstructions/recon_0003.pgm"));
  ASSERT_EQ(run_cli("latents" + ck + " --out " + o).status, 0);
  std::ifstream in(o + "/latents.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 24u);
}

TEST_F(CliBinary, FailuresExitNonZero) {
  const auto o = out("cli_bad");
  const auto empty = temp_path("cli_empty");
  fs::create_directories(empty);
  EXPECT_EQ(run_cli("train --data-dir " + empty + " --out " + o).status, 1);
  EXPECT_EQ(run_cli("train --method bogus --data-dir " + data_ + " --out " + o).status, 2);
  EXPECT_EQ(run_cli("train --set flow.tau=-1 --data-dir " + data_ + " --out " + o).status, 2);
  EXPECT_EQ(run_cli("train --set nokey=1 --data-dir " + data_ + " --out " + o).status, 2);
  EXPECT_EQ(run_cli("--help").status, 0);
  EXPECT_EQ(run_cli("fixture-check").status, 0);
}

}  // namespace
}  // namespace gfe::cli
