#include "taskfactor/csv.hpp"
#include "taskfactor/pipeline.hpp"

#include "scratch.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <string>
#include <vector>

using namespace taskfactor;
namespace tt = taskfactor::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(TASKFACTOR_FIXTURE_DIR) / "synthetic";

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

CliResult run_cli(const std::vector<std::string>& args) {
  static int counter = 0;
  const fs::path capture = fs::temp_directory_path() / ("taskfactor_cli_" + std::to_string(::getpid()) + "_" +
                                                        std::to_string(counter++));
  std::string cmd = quote(TASKFACTOR_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote(capture.string() + ".out") + " 2>" + quote(capture.string() + ".err");
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = csv::read_file(capture.string() + ".out");
  r.err = csv::read_file(capture.string() + ".err");
  fs::remove(capture.string() + ".out");
  fs::remove(capture.string() + ".err");
  return r;
}

std::vector<std::string> model_args(const fs::path& dir) {
  std::vector<std::string> args;
  for (const char* m : {"model_a", "model_b", "model_c", "model_d"}) {
    args.push_back("-m");
    args.push_back(std::string(m) + "=" + (dir / (std::string(m) + ".csv")).string());
  }
  return args;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

} // namespace

TEST(Cli, VersionAndFormats) {
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.exit_code, 0);
  EXPECT_NE(v.out.find(version_string()), std::string::npos);
  const auto f = run_cli({"--describe-formats"});
  EXPECT_EQ(f.exit_code, 0);
  EXPECT_EQ(f.out, describe_formats());
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({"efa"}).exit_code, 1);
  EXPECT_EQ(run_cli({"no-such-command"}).exit_code, 1);
  EXPECT_EQ(run_cli({"run", "-c", "/nonexistent/run.toml"}).exit_code, 1);
}

TEST(Cli, RunMatchesLibrary) {
  tt::ScratchDir dir("cli_run");
  const auto r = run_cli({"run", "-c", (kFixture / "run.toml").string(), "-o", (dir / "cli").string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  RunConfig c = load_run_config(kFixture / "run.toml");
  c.output_dir = dir / "lib";
  ASSERT_EQ(run_pipeline(c).exit_code, 0);
  EXPECT_EQ(tt::read_tree(dir / "cli"), tt::read_tree(dir / "lib"));
}

TEST(Cli, CommandLineOverridesConfig) {
  tt::ScratchDir dir("cli_override");
  const auto r = run_cli({"run", "-c", (kFixture / "run.toml").string(), "-o", (dir / "a").string(), "--set",
                          "embedding_rank=4", "--seed", "99"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string report = csv::read_file(dir / "a" / "report.json");
  EXPECT_NE(report.find("\"embedding_rank\": 4"), std::string::npos);
  EXPECT_NE(report.find("\"seed\": 99"), std::string::npos);

  // --set and the dedicated flag land on the same key.
  const auto s = run_cli({"run", "-c", (kFixture / "run.toml").string(), "-o", (dir / "b").string(), "-D", "4",
                          "--set", "seed=99"});
  ASSERT_EQ(s.exit_code, 0) << s.err;
  EXPECT_EQ(tt::read_tree(dir / "a"), tt::read_tree(dir / "b"));
}

TEST(Cli, BadOverrideExitsOne) {
  tt::ScratchDir dir("cli_badset");
  const auto r = run_cli({"run", "-c", (kFixture / "run.toml").string(), "-o", (dir / "o").string(), "--set",
                          "factors=many"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("factors"), std::string::npos) << r.err;
}

TEST(Cli, StrictRunWithoutSeedExitsOne) {
  tt::ScratchDir dir("cli_noseed");
  const auto cfg = tt::copy_fixture(kFixture, dir / "in");
  std::string text = csv::read_file(cfg);
  text.erase(text.find("seed = 1234\n"), std::string("seed = 1234\n").size());
  csv::write_file(cfg, text);
  const auto r = run_cli({"run", "-c", cfg.string(), "-o", (dir / "o").string()});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("seed"), std::string::npos) << r.err;
}

// Each subcommand writes the same bytes as the corresponding stage of `run`.
TEST(Cli, SubcommandsComposeToRunOutputs) {
  tt::ScratchDir dir("cli_compose");
  const fs::path full = dir / "full";
  const fs::path step = dir / "step";
  const std::string s = step.string();
  ASSERT_EQ(run_cli({"run", "-c", (kFixture / "run.toml").string(), "-o", full.string()}).exit_code, 0);

  auto ok = [](const CliResult& r) { return r.exit_code == 0 ? std::string() : r.err; };
  ASSERT_EQ(ok(run_cli(concat({"normalize", "--metadata", (kFixture / "metadata.json").string(), "--strict", "-o", s},
                              model_args(kFixture)))),
            "");
  ASSERT_EQ(ok(run_cli({"embed", "-i", s + "/aggregate.csv", "-o", s, "-D", "8"})), "");
  ASSERT_EQ(ok(run_cli({"cluster", "-i", s + "/features.csv", "-o", s})), "");
  ASSERT_EQ(ok(run_cli({"residualize", "-i", s + "/aggregate.csv", "-o", s})), "");
  ASSERT_EQ(ok(run_cli({"nfactors", "-i", s + "/residuals.csv", "-o", s, "--seed", "1234"})), "");
  ASSERT_EQ(ok(run_cli({"efa", "-i", s + "/residuals.csv", "-o", s, "-L", "6"})), "");
  ASSERT_EQ(ok(run_cli({"robustness", "-i", s + "/aggregate.csv", "-o", s, "-L", "6"})), "");
  ASSERT_EQ(ok(run_cli({"rank", "-i", s + "/aggregate.csv", "-o", s})), "");
  ASSERT_EQ(ok(run_cli({"lengths", "-i", s + "/aggregate.csv", "-o", s, "--metadata",
                        (kFixture / "metadata.json").string()})),
            "");

  const auto a = tt::read_tree(full);
  const auto b = tt::read_tree(step);
  for (const auto& [name, bytes] : b) {
    ASSERT_TRUE(a.count(name)) << name;
    EXPECT_EQ(bytes, a.at(name)) << name;
  }
  for (const auto& [name, bytes] : a) {
    if (name != "report.json") EXPECT_TRUE(b.count(name)) << name;
  }
}

TEST(Cli, AutoFactorCountReportsBothRules) {
  tt::ScratchDir dir("cli_auto");
  const auto run = run_cli({"run", "-c", (kFixture / "run.toml").string(), "-o", (dir / "full").string()});
  ASSERT_EQ(run.exit_code, 0) << run.err;
  const auto r = run_cli({"efa", "-i", (dir / "full" / "residuals.csv").string(), "-o", (dir / "e").string(), "-L",
                          "auto", "--seed", "1234"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("parallel analysis: 6 factor(s)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("velicer MAP: 6 factor(s)"), std::string::npos) << r.out;
  EXPECT_EQ(csv::read_file(dir / "e" / "loadings.csv"), csv::read_file(dir / "full" / "loadings.csv"));
}

TEST(Cli, ClusterCutWritesPartition) {
  tt::ScratchDir dir("cli_cut");
  ASSERT_EQ(run_cli({"run", "-c", (kFixture / "run.toml").string(), "-o", (dir / "full").string()}).exit_code, 0);
  const auto r = run_cli({"cluster", "-i", (dir / "full" / "features.csv").string(), "-o", (dir / "c").string(),
                          "-k", "6"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = csv::parse(csv::read_file(dir / "c" / "clusters_k6.csv"));
  EXPECT_EQ(rows.size(), 30u);
}

TEST(Cli, DiversityPrintsCsv) {
  tt::ScratchDir dir("cli_div");
  csv::write_file(dir / "a.txt", "x y x y\n");
  const auto r = run_cli({"diversity", "--text", (dir / "a.txt").string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find(",1\n"), std::string::npos) << r.out;
}
