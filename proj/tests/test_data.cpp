#include "mgs/data.hpp"
#include "mgs/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace mgs;

namespace {

Sample point(double x, double y, double label = 0.0) {
  Sample s;
  s.features = Vector(2);
  s.features << x, y;
  s.label = label;
  return s;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mgs_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Two agents, two samples each; with A = I the gradients are theta - x.
FederatedDataset two_agent_quadratic() {
  return FederatedDataset({{point(1, 0), point(3, 0)}, {point(0, 4), point(0, 0)}}, {point(5, 5)}, {});
}

}  // namespace

TEST(Synth, CountsPerClass) {
  const SamplePool pool = synth_classification(0, 200, 2, 2, 3.0);
  ASSERT_EQ(pool.size(), 200u);
  int ones = 0;
  for (const auto& s : pool) {
    EXPECT_EQ(s.features.size(), 2);
    EXPECT_TRUE(s.label == 0.0 || s.label == 1.0);
    ones += s.label == 1.0;
  }
  EXPECT_EQ(ones, 100);
}

TEST(Synth, DeterministicGivenSeed) {
  EXPECT_EQ(synth_classification(42, 300, 5, 3, 2.0), synth_classification(42, 300, 5, 3, 2.0));
  EXPECT_NE(synth_classification(42, 300, 5, 3, 2.0), synth_classification(43, 300, 5, 3, 2.0));
}

TEST(Synth, ZeroSeparationSharesTheDistribution) {
  const SamplePool pool = synth_classification(3, 20000, 2, 2, 0.0);
  Vector mean0 = Vector::Zero(2), mean1 = Vector::Zero(2);
  int n0 = 0, n1 = 0;
  for (const auto& s : pool) {
    if (s.label == 0.0) {
      mean0 += s.features;
      ++n0;
    } else {
      mean1 += s.features;
      ++n1;
    }
  }
  EXPECT_LT((mean0 / n0 - mean1 / n1).norm(), 0.1);
}

TEST(Synth, ClassMeansSitAtHalfSeparation) {
  const SamplePool pool = synth_classification(5, 40000, 3, 2, 6.0);
  Vector mean0 = Vector::Zero(3);
  int n0 = 0;
  for (const auto& s : pool)
    if (s.label == 0.0) {
      mean0 += s.features;
      ++n0;
    }
  EXPECT_NEAR((mean0 / n0).norm(), 3.0, 0.1);
}

TEST(Synth, RejectsInvalidCounts) {
  EXPECT_THROW(synth_classification(0, 1, 2, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(synth_classification(0, 10, 0, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(synth_classification(0, 10, 2, 1, 1.0), std::invalid_argument);
}

TEST(Partition, DisjointExactSizesAndHeldOutRemainder) {
  const SamplePool pool = synth_classification(1, 700, 3, 4, 2.0);
  for (double alpha : {0.05, 0.3, 1.0, 100.0}) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
      const FederatedDataset data = partition_dirichlet(pool, 6, 80, alpha, seed);
      ASSERT_EQ(data.agents(), 6);
      std::set<std::size_t> used;
      for (int k = 0; k < 6; ++k) {
        EXPECT_EQ(data.shard(k).size(), 80u);
        ASSERT_EQ(data.source_indices()[k].size(), 80u);
        for (std::size_t i = 0; i < 80; ++i) {
          const std::size_t idx = data.source_indices()[k][i];
          EXPECT_TRUE(used.insert(idx).second) << "index " << idx << " assigned twice";
          EXPECT_EQ(data.shard(k)[i], pool[idx]);
        }
      }
      EXPECT_EQ(data.held_out().size(), pool.size() - used.size());
    }
  }
}

TEST(Partition, HugeAlphaTracksGlobalProportions) {
  const SamplePool pool = synth_classification(2, 4000, 2, 4, 2.0);
  const auto global = class_proportions(pool, 4);
  const FederatedDataset data = partition_dirichlet(pool, 8, 200, 1e6, 9);
  for (int k = 0; k < 8; ++k) {
    const auto local = class_proportions(data.shard(k), 4);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(local[c], global[c], 0.05) << "agent " << k << " class " << c;
  }
}

TEST(Partition, SmallAlphaProducesNearlyPureShards) {
  const SamplePool pool = synth_classification(3, 1500, 2, 2, 2.0);
  int seeds_with_pure_shard = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FederatedDataset data = partition_dirichlet(pool, 10, 50, 0.1, seed);
    bool found = false;
    for (int k = 0; k < 10; ++k) {
      const auto p = class_proportions(data.shard(k), 2);
      if (std::max(p[0], p[1]) >= 0.9) found = true;
    }
    seeds_with_pure_shard += found;
  }
  EXPECT_GE(seeds_with_pure_shard, 19);
}

TEST(Partition, SingleAgentIsSubsample) {
  const SamplePool pool = synth_classification(4, 120, 2, 2, 2.0);
  const FederatedDataset data = partition_dirichlet(pool, 1, 50, 0.3, 0);
  ASSERT_EQ(data.per_agent(), 50);
  for (int i = 0; i < 50; ++i)
    EXPECT_NE(std::find(pool.begin(), pool.end(), data.sample(0, i)), pool.end());
  EXPECT_EQ(data.held_out().size(), 70u);
}

TEST(Partition, InsufficientPoolThrows) {
  const SamplePool pool = synth_classification(4, 100, 2, 2, 2.0);
  EXPECT_THROW(partition_dirichlet(pool, 4, 30, 0.3, 0), std::invalid_argument);
  EXPECT_THROW(partition_dirichlet(pool, 2, 10, 0.0, 0), std::invalid_argument);
}

TEST(Partition, Deterministic) {
  const SamplePool pool = synth_classification(6, 500, 3, 3, 2.0);
  const auto a = partition_dirichlet(pool, 4, 60, 0.3, 11);
  const auto b = partition_dirichlet(pool, 4, 60, 0.3, 11);
  EXPECT_EQ(a.pooled(), b.pooled());
  EXPECT_EQ(a.held_out(), b.held_out());
}

TEST(Perturb, DiffersOnlyAtTheChosenEntry) {
  const SamplePool pool = synth_classification(7, 400, 3, 2, 2.0);
  const FederatedDataset data = partition_dirichlet(pool, 4, 50, 0.3, 0);
  const PerturbedPair pair = make_perturbed(data, 0, 0, 5);
  int differing = 0;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 50; ++i) differing += !(pair.perturbed.sample(k, i) == data.sample(k, i));
  EXPECT_EQ(differing, 1);
  EXPECT_FALSE(pair.perturbed.sample(0, 0) == data.sample(0, 0));
  EXPECT_EQ(pair.perturbed.sample(0, 0), data.held_out()[pair.heldout_index]);
  for (int k = 1; k < 4; ++k) EXPECT_TRUE(pair.perturbed.shares_shard_with(data, k));
  EXPECT_FALSE(pair.perturbed.shares_shard_with(data, 0));
}

TEST(Perturb, RevertingReproducesTheBase) {
  const SamplePool pool = synth_classification(8, 400, 3, 2, 2.0);
  const FederatedDataset data = partition_dirichlet(pool, 4, 50, 0.3, 0);
  const PerturbedPair pair = make_perturbed(data, 17, 2, 3);
  const FederatedDataset back = pair.perturbed.with_replacement(2, 17, pair.original);
  EXPECT_EQ(back.pooled(), data.pooled());
}

TEST(Perturb, ForcedIdentityReplacement) {
  const SamplePool pool = synth_classification(9, 300, 2, 2, 2.0);
  const FederatedDataset data = partition_dirichlet(pool, 3, 40, 0.3, 0);
  const PerturbedPair pair = make_perturbed_with(data, 4, 1, data.sample(1, 4));
  EXPECT_EQ(pair.perturbed.pooled(), data.pooled());
  EXPECT_EQ(pair.heldout_index, -1);
}

TEST(Perturb, SameSeedSameReplacement) {
  const SamplePool pool = synth_classification(10, 300, 2, 2, 2.0);
  const FederatedDataset data = partition_dirichlet(pool, 3, 40, 0.3, 0);
  EXPECT_EQ(make_perturbed(data, 3, 2, 77).replacement, make_perturbed(data, 3, 2, 77).replacement);
}

TEST(Perturb, ErrorsOnBadSiteOrEmptyHeldOut) {
  const FederatedDataset no_heldout({{point(0, 0)}, {point(1, 1)}}, {}, {});
  EXPECT_THROW(make_perturbed(no_heldout, 0, 0, 0), std::invalid_argument);
  const FederatedDataset data = two_agent_quadratic();
  EXPECT_THROW(make_perturbed(data, 2, 0, 0), std::out_of_range);
  EXPECT_THROW(make_perturbed(data, 0, 2, 0), std::out_of_range);
}

TEST(Assumptions, HeterogeneityHandComputed) {
  // Shard means (2,0) and (0,2), global mean (1,1): each deviation has squared norm 2.
  const Model model = Model::quadratic_diagonal(Vector::Ones(2));
  const std::vector<Vector> probes{Vector::Zero(2), Vector::Constant(2, 3.0)};
  EXPECT_NEAR(estimate_heterogeneity(two_agent_quadratic(), model, probes), 2.0, 1e-12);
}

TEST(Assumptions, GradientNoiseHandComputed) {
  // Per-shard variance is |x1 - x2|^2 / 4: 1 for the first shard, 4 for the second.
  const Model model = Model::quadratic_diagonal(Vector::Ones(2));
  const std::vector<Vector> probes{Vector::Zero(2)};
  EXPECT_NEAR(estimate_gradient_noise(two_agent_quadratic(), model, probes, 1), 4.0, 1e-12);
  EXPECT_NEAR(estimate_gradient_noise(two_agent_quadratic(), model, probes, 2), 2.0, 1e-12);
}

TEST(Assumptions, IdenticalShardsHaveNoHeterogeneity) {
  const SamplePool shard = synth_classification(11, 30, 3, 2, 2.0);
  const FederatedDataset data({shard, shard, shard}, {}, {});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<Vector> probes;
  for (int p = 0; p < 5; ++p) probes.push_back(Vector::NullaryExpr(3, [&] { return normal(rng); }));
  EXPECT_LT(estimate_heterogeneity(data, Model::logistic(3), probes), 1e-12);
  const Model mlp = Model::mlp(3, {4}, 2);
  std::vector<Vector> mlp_probes;
  for (int p = 0; p < 3; ++p) mlp_probes.push_back(Vector::NullaryExpr(mlp.dim(), [&] { return normal(rng); }));
  EXPECT_LT(estimate_heterogeneity(data, mlp, mlp_probes), 1e-12);
}

TEST(Assumptions, SingleAgentHasNoHeterogeneity) {
  const FederatedDataset data({synth_classification(12, 30, 3, 2, 2.0)}, {}, {});
  const std::vector<Vector> probes{Vector::Ones(3)};
  EXPECT_EQ(estimate_heterogeneity(data, Model::logistic(3), probes), 0.0);
}

TEST(Assumptions, IdenticalSamplesHaveNoNoise) {
  const FederatedDataset data({{point(1, 2), point(1, 2), point(1, 2)}}, {}, {});
  const std::vector<Vector> probes{Vector::Zero(2), Vector::Ones(2)};
  EXPECT_EQ(estimate_gradient_noise(data, Model::quadratic_diagonal(Vector::Ones(2)), probes, 1), 0.0);
}

TEST(Assumptions, NoiseScalesAsOneOverBatch) {
  const SamplePool pool = synth_classification(13, 400, 4, 2, 2.0);
  const FederatedDataset data = partition_dirichlet(pool, 4, 40, 0.3, 0);
  const std::vector<Vector> probes{Vector::Zero(4), Vector::Constant(4, 0.5)};
  const double one = estimate_gradient_noise(data, Model::logistic(4), probes, 1);
  for (int b : {2, 5, 40}) EXPECT_NEAR(estimate_gradient_noise(data, Model::logistic(4), probes, b), one / b, 1e-10);
  EXPECT_THROW(estimate_gradient_noise(data, Model::logistic(4), probes, 41), std::invalid_argument);
}

TEST(Assumptions, CombinedEstimates) {
  const Model model = Model::quadratic_diagonal(Vector::Ones(2));
  const std::vector<Vector> probes{Vector::Zero(2)};
  const AssumptionEstimates est = estimate_assumptions(two_agent_quadratic(), model, probes, 2);
  EXPECT_NEAR(est.sigma2, 2.0, 1e-12);
  EXPECT_NEAR(est.xi2, 2.0, 1e-12);
  EXPECT_EQ(est.probe_count, 1);
}

TEST(Csv, WellFormedFile) {
  const auto dir = scratch("csv_ok");
  {
    std::ofstream out(dir / "a.csv");
    out << "1,2,0\n3,4,1\n5,6,0\n";
  }
  const SamplePool pool = load_csv(dir / "a.csv");
  ASSERT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool[1], point(3, 4, 1));
}

TEST(Csv, NonNumericFeatureNamesLine) {
  const auto dir = scratch("csv_bad");
  {
    std::ofstream out(dir / "a.csv");
    out << "1,2,0\n3,x,1\n";
  }
  try {
    load_csv(dir / "a.csv");
    FAIL() << "expected a parse error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Csv, EmptyFileHasNoSamples) {
  const auto dir = scratch("csv_empty");
  { std::ofstream out(dir / "a.csv"); }
  try {
    load_csv(dir / "a.csv");
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("no samples"), std::string::npos) << e.what();
  }
}

TEST(Csv, SaveLoadRoundTripIsExact) {
  const auto dir = scratch("csv_roundtrip");
  const SamplePool pool = synth_classification(14, 50, 3, 2, 2.0);
  save_csv(dir / "p.csv", pool);
  EXPECT_EQ(load_csv(dir / "p.csv"), pool);
}

TEST(Csv, FederatedDirectoryRoundTrip) {
  const auto dir = scratch("fed_roundtrip");
  const SamplePool pool = synth_classification(15, 300, 3, 3, 2.0);
  const FederatedDataset data = partition_dirichlet(pool, 3, 40, 0.5, 2);
  save_federated_dataset(dir, data);
  const FederatedDataset back = load_federated_dataset(dir);
  EXPECT_EQ(back.agents(), 3);
  EXPECT_EQ(back.pooled(), data.pooled());
  EXPECT_EQ(back.held_out(), data.held_out());
  EXPECT_EQ(back.meta().seed, 2u);
  EXPECT_EQ(back.meta().classes, 3);
  EXPECT_DOUBLE_EQ(back.meta().alpha, 0.5);
}

TEST(Dataset, RejectsUnequalShards) {
  EXPECT_THROW(FederatedDataset({{point(0, 0)}, {point(0, 0), point(1, 1)}}, {}, {}), std::invalid_argument);
  EXPECT_THROW(FederatedDataset({}, {}, {}), std::invalid_argument);
}
