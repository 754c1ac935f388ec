#include "mgs/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mgs;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mgs_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int cli(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);)
      if (!l.empty() && l[0] != '#') out.push_back(l);
    return out;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const char* kRunConfig = "m=4\nn=10\ndim=3\nT=15\nQ=2\nc=0.2\nseeds=1,2\nlog_every=5\n";

const char* kBoundInputs =
    "c=0.1\nbeta=1\nn=100\nm=10\nT=100\nQ=5\nrho=0.8\nlambda_max=1.5\nsigma2=0.5\nxi2=0.25\n"
    "mu=0.1\nDelta2=1\nR0=2\nb=2\nRS_last=0.3\n";

}  // namespace

TEST_F(CliTest, RunWritesOneFilePerSeedAndAnAggregate) {
  const auto cfg = write("a.cfg", kRunConfig);
  ASSERT_EQ(cli({"run", "--config", cfg.string(), "--out", (dir_ / "out").string()}), kExitOk) << err_.str();
  const std::string seed1 = slurp(dir_ / "out" / "run_seed1.csv");
  EXPECT_EQ(seed1.rfind("# resolved config\n", 0), 0u);
  const auto rows = lines(seed1);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], kRoundRecordHeader);
  EXPECT_EQ(rows[3].rfind("15,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "run_seed2.csv"));
  EXPECT_EQ(lines(slurp(dir_ / "out" / "aggregate.csv")).size(), 2u);
}

TEST_F(CliTest, RerunsAreByteIdenticalAcrossJobCounts) {
  const auto cfg = write("a.cfg", kRunConfig);
  ASSERT_EQ(cli({"run", "--config", cfg.string(), "--out", (dir_ / "one").string(), "--jobs", "1"}), kExitOk);
  ASSERT_EQ(cli({"run", "--config", cfg.string(), "--out", (dir_ / "two").string(), "--jobs", "8"}), kExitOk);
  for (const char* f : {"run_seed1.csv", "run_seed2.csv", "aggregate.csv"})
    EXPECT_EQ(slurp(dir_ / "one" / f), slurp(dir_ / "two" / f)) << f;
}

TEST_F(CliTest, ResolvedBlockReproducesTheRun) {
  const auto cfg = write("a.cfg", kRunConfig);
  ASSERT_EQ(cli({"run", "--config", cfg.string(), "--out", (dir_ / "first").string(), "--seeds", "2"}), kExitOk);
  const fs::path csv = dir_ / "first" / "run_seed2.csv";
  ASSERT_EQ(cli({"run", "--config", csv.string(), "--out", (dir_ / "again").string()}), kExitOk) << err_.str();
  EXPECT_EQ(slurp(csv), slurp(dir_ / "again" / "run_seed2.csv"));
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  const auto bad = write("bad.cfg", "m=4\nwhat=1\n");
  EXPECT_EQ(cli({"run", "--config", bad.string()}), kExitUsage);
  EXPECT_NE(err_.str().find("what"), std::string::npos);
  EXPECT_EQ(cli({"run"}), kExitUsage);
  EXPECT_EQ(cli({"launch"}), kExitUsage);
  EXPECT_EQ(cli({"run", "--config", (dir_ / "missing.cfg").string()}), kExitUsage);
  const auto cfg = write("a.cfg", kRunConfig);
  EXPECT_EQ(cli({"run", "--config", cfg.string(), "--seeds", "x"}), kExitUsage);
  const auto sweep = write("s.cfg", std::string(kRunConfig) + "sweep_Q=1,2\n");
  EXPECT_EQ(cli({"run", "--config", sweep.string()}), kExitUsage);
}

TEST_F(CliTest, SweepAddsCentralizedRows) {
  const auto cfg = write("s.cfg", std::string(kRunConfig) + "sweep_Q=1,3\nsweep_topology=ring,fully_connected\n");
  ASSERT_EQ(cli({"sweep", "--config", cfg.string(), "--out", dir_.string(), "--jobs", "4"}), kExitOk) << err_.str();
  const auto rows = lines(slurp(dir_ / "sweep.csv"));
  ASSERT_EQ(rows.size(), 1u + 4u + 1u);
  EXPECT_EQ(rows.back().rfind("centralized,centralized,,", 0), 0u) << rows.back();
}

TEST_F(CliTest, StabilityWritesSummaries) {
  const auto cfg = write("st.cfg", std::string(kRunConfig) + "perturb_agent=random\nperturb_index=random\nsweep_Q=1,4\n");
  ASSERT_EQ(cli({"stability", "--config", cfg.string(), "--out", dir_.string()}), kExitOk) << err_.str();
  EXPECT_EQ(lines(slurp(dir_ / "summary.csv")).size(), 1u + 4u);
  EXPECT_EQ(lines(slurp(dir_ / "summary_by_point.csv")).size(), 1u + 2u);
}

TEST_F(CliTest, BoundsTableHasEightRows) {
  const auto in = write("in.txt", kBoundInputs);
  ASSERT_EQ(cli({"bounds", in.string()}), kExitOk) << err_.str();
  const auto rows = lines(out_.str());
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], kBoundsHeader);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NE(rows[i].find(",ok,"), std::string::npos) << rows[i];
}

TEST_F(CliTest, BoundsReportsPlFailure) {
  std::string text = kBoundInputs;
  text.replace(text.find("mu=0.1"), 6, "mu=0");
  const auto in = write("in.txt", text);
  ASSERT_EQ(cli({"bounds", "--config", in.string(), "--out", dir_.string()}), kExitOk);
  const std::string table = slurp(dir_ / "bounds.csv");
  for (const char* row : {"optimization_proxy,,PL fails", "q0_threshold,,PL fails", "excess,,PL fails"})
    EXPECT_NE(table.find(row), std::string::npos) << row;
  EXPECT_NE(table.find("generalization,0."), std::string::npos);
}

TEST_F(CliTest, BoundsMissingSymbolExitsTwo) {
  const auto in = write("in.txt", "c=1\n");
  EXPECT_EQ(cli({"bounds", in.string()}), kExitUsage);
  EXPECT_NE(err_.str().find("missing symbol"), std::string::npos);
}

TEST_F(CliTest, BoundsTableMatchesEvaluators) {
  const BoundsFile f = parse_bounds_file(kBoundInputs);
  const auto rows = bounds_table(f);
  ASSERT_EQ(rows.size(), 8u);
  const double g = gbar_bound(0.5, 0.25, 1.0, 0.3).value;
  EXPECT_EQ(rows[1].bound, "gbar");
  EXPECT_EQ(*rows[1].value, g);
  EXPECT_EQ(rows[4].bound, "generalization");
  EXPECT_EQ(*rows[4].value, generalization_bound(f.inputs, g).value);
  EXPECT_EQ(*rows[5].value, minibatch_generalization_bound(f.inputs, g).value);
  EXPECT_EQ(*rows[6].value, excess_bound(f.inputs, g).value);
}

TEST_F(CliTest, ValidateMatrix) {
  const auto good = write("w.csv", "0.5,0.5\n0.5,0.5\n");
  EXPECT_EQ(cli({"validate", good.string()}), kExitOk);
  EXPECT_NE(out_.str().find("rho=0"), std::string::npos) << out_.str();
  const auto bad = write("b.csv", "0.9,0.1\n0.5,0.5\n");
  EXPECT_EQ(cli({"validate", bad.string()}), kExitRuntime);
  EXPECT_NE(out_.str().find("symmetric"), std::string::npos);
  const auto id = write("i.csv", "1,0,0\n0,1,0\n0,0,1\n");
  EXPECT_EQ(cli({"validate", id.string()}), kExitOk);
  EXPECT_NE(out_.str().find("rho=1"), std::string::npos) << out_.str();
  EXPECT_EQ(cli({"validate", write("x.csv", "a,b\n").string()}), kExitUsage);
}

TEST(WriteFileAtomic, ReplacesContents) {
  const fs::path p = fs::temp_directory_path() / "mgs_atomic" / "f.txt";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  std::ifstream in(p);
  std::string s;
  in >> s;
  EXPECT_EQ(s, "two");
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
  fs::remove_all(p.parent_path());
}
