#include "mgs/config.hpp"

#include <gtest/gtest.h>

using namespace mgs;

TEST(KeyValues, CommentsBlanksAndWhitespace) {
  const auto entries = parse_key_values("# note\n\n  m = 4 \nn=10 # trailing\n", "x.cfg");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].key, "m");
  EXPECT_EQ(entries[0].value, "4");
  EXPECT_EQ(entries[0].line, 3);
  EXPECT_EQ(entries[1].value, "10");
}

TEST(KeyValues, ResolvedBlockTakesPrecedence) {
  const std::string text = "# resolved config\n# m=3\n# n=7\nt,train_loss\n1,0.5\n";
  const auto entries = parse_key_values(text, "run.csv");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].key, "n");
}

TEST(ExperimentConfig, ParsesEveryGroup) {
  const ExperimentConfig c = parse_experiment_config(
      "m=4\nn=25\nmodel=mlp\nhidden=16,8\nclasses=3\ntopology=torus\ntorus_rows=2\ntorus_cols=2\n"
      "lr=constant\nseeds=1,2,3\nsweep_Q=1,5\nperturb_agent=random\nperturb_index=2\nbounded=true\n");
  EXPECT_EQ(c.m, 4);
  EXPECT_EQ(c.hidden, (std::vector<int>{16, 8}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.sweep_Q, (std::vector<int>{1, 5}));
  EXPECT_EQ(c.perturb_agent, 0);
  EXPECT_EQ(c.perturb_index, 2);
  EXPECT_TRUE(c.bounded);
  EXPECT_EQ(c.pool_size(), 4 * 25 + 1000);
}

TEST(ExperimentConfig, ErrorsNameKeyAndLine) {
  try {
    parse_experiment_config("m=4\nbogus=1\n", "a.cfg");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("bogus"), std::string::npos) << what;
    EXPECT_NE(what.find("a.cfg:2"), std::string::npos) << what;
  }
  EXPECT_THROW(parse_experiment_config("m=four\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("m=4\nm=5\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("m=0\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("topology=moebius\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("model=logistic\nclasses=3\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("perturb_agent=9\nm=8\n"), ConfigError);
}

TEST(ExperimentConfig, KeyValuesRoundTrip) {
  const ExperimentConfig c = parse_experiment_config(
      "m=6\nn=12\ndim=2\nmodel=quadratic\ncurvature=0.5,2\nc=0.25\nseeds=4,9\nsweep_c=0.1,0.01\ninit=0.3\n");
  const ExperimentConfig back = parse_experiment_config(resolved_block(c));
  EXPECT_EQ(to_key_values(back), to_key_values(c));
  EXPECT_EQ(resolved_block(back), resolved_block(c));
}

TEST(BoundsFile, RequiresEverySymbol) {
  const std::string full =
      "c=1\nbeta=1\nn=100\nm=10\nT=100\nQ=5\nrho=0.8\nlambda_max=1.5\nsigma2=0.5\nxi2=0.25\n"
      "mu=0.1\nDelta2=1\nR0=2\nb=1\nRS_last=0.3\n";
  const BoundsFile f = parse_bounds_file(full);
  EXPECT_DOUBLE_EQ(f.inputs.delta, 0.2);
  EXPECT_FALSE(f.gbar);
  EXPECT_DOUBLE_EQ(f.rs_last, 0.3);
  try {
    parse_bounds_file("c=1\n", "in.txt");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("missing symbol"), std::string::npos);
  }
  EXPECT_THROW(parse_bounds_file(full + "rho2=1\n"), ConfigError);
  EXPECT_THROW(parse_bounds_file(full + "delta=0.5\n"), ConfigError);
  const BoundsFile tagged = parse_bounds_file(full + "Gbar=2\nestimated=beta,mu\nt0=10\n");
  EXPECT_EQ(*tagged.gbar, 2.0);
  EXPECT_EQ(tagged.inputs.estimated.size(), 2u);
  EXPECT_EQ(*tagged.inputs.t0, 10.0);
}

TEST(SplitList, TrimsAndSkipsEmpty) {
  EXPECT_EQ(split_list(" 1, 2 ,3"), (std::vector<std::string>{"1", "2", "3"}));
  EXPECT_TRUE(split_list("").empty());
}
