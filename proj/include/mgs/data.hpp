#pragma once

#include "mgs/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace mgs {

class Model;

/// One observation. Classification models read `label` as a class index;
/// the quadratic family treats `features` as the target point.
struct Sample {
  Vector features;
  double label = 0.0;

  bool operator==(const Sample& other) const {
    return label == other.label && features.size() == other.features.size() &&
           features == other.features;
  }
};

using SamplePool = std::vector<Sample>;

struct DatasetMeta {
  std::uint64_t seed = 0;
  int dim = 0;
  int classes = 0;
  double alpha = 0.0;
};

/// m shards of exactly n samples plus a held-out pool.
///
/// Shards are held through shared pointers so a perturbed copy shares every
/// shard it does not modify.
class FederatedDataset {
 public:
  FederatedDataset() = default;
  FederatedDataset(std::vector<SamplePool> shards, SamplePool held_out, DatasetMeta meta,
                   std::vector<std::vector<std::size_t>> source_indices = {});

  int agents() const { return static_cast<int>(shards_.size()); }
  int per_agent() const { return shards_.empty() ? 0 : static_cast<int>(shards_.front()->size()); }
  const SamplePool& shard(int k) const { return *shards_[k]; }
  const Sample& sample(int k, int i) const { return (*shards_[k])[i]; }
  const SamplePool& held_out() const { return *held_out_; }
  const DatasetMeta& meta() const { return meta_; }
  /// Pool indices each shard was drawn from (empty when not known).
  const std::vector<std::vector<std::size_t>>& source_indices() const { return source_; }

  /// All m*n training samples, agent-major.
  SamplePool pooled() const;

  /// Copy that differs only at (agent, position). Untouched shards are shared.
  FederatedDataset with_replacement(int agent, int position, const Sample& replacement) const;

  bool shares_shard_with(const FederatedDataset& other, int k) const {
    return shards_[k] == other.shards_[k];
  }

 private:
  std::vector<std::shared_ptr<const SamplePool>> shards_;
  std::shared_ptr<const SamplePool> held_out_ = std::make_shared<const SamplePool>();
  DatasetMeta meta_;
  std::vector<std::vector<std::size_t>> source_;
};

/// S and S^(ij), differing only in sample `position` of agent `agent` (0-based).
struct PerturbedPair {
  FederatedDataset base;
  FederatedDataset perturbed;
  int agent = 0;
  int position = 0;
  Sample original;
  Sample replacement;
  /// Held-out index the replacement came from; -1 when forced.
  long heldout_index = -1;
};

struct AssumptionEstimates {
  double sigma2 = 0.0;
  double xi2 = 0.0;
  int probe_count = 0;
};

/// Balanced Gaussian class-conditional pool with unit covariance. Each class
/// mean sits at distance separation/2 from the origin along its own random
/// direction.
SamplePool synth_classification(std::uint64_t seed, int total, int dim, int classes,
                                double separation);

/// Label-skewed split: each agent draws class proportions from
/// Dirichlet(alpha * global proportions), takes round(n * q_c) samples of each
/// class without replacement, and falls back to its other classes when one
/// runs dry. Everything not assigned becomes the held-out pool.
FederatedDataset partition_dirichlet(const SamplePool& pool, int m, int n, double alpha,
                                     std::uint64_t seed);

/// Replacement drawn uniformly (seeded) from the held-out pool.
PerturbedPair make_perturbed(const FederatedDataset& base, int position, int agent,
                             std::uint64_t seed);

/// Same as make_perturbed but with a caller-chosen replacement sample.
PerturbedPair make_perturbed_with(const FederatedDataset& base, int position, int agent,
                                  const Sample& replacement);

/// max over probes of (1/m) sum_k ||grad R_{S_k}(theta) - grad R_S(theta)||^2
double estimate_heterogeneity(const FederatedDataset& data, const Model& model,
                              std::span<const Vector> probes);

/// max over probes and agents of the per-shard variance of a b-sample
/// mini-batch gradient drawn i.i.d. with replacement, i.e. var(1 sample) / b.
double estimate_gradient_noise(const FederatedDataset& data, const Model& model,
                               std::span<const Vector> probes, int batch);

AssumptionEstimates estimate_assumptions(const FederatedDataset& data, const Model& model,
                                         std::span<const Vector> probes, int batch = 1);

/// Rows of d feature columns followed by one label column.
SamplePool load_csv(const std::filesystem::path& path);
void save_csv(const std::filesystem::path& path, const SamplePool& pool);

/// Directory with shard_<k>.csv, heldout.csv and meta.txt (key=value lines).
void save_federated_dataset(const std::filesystem::path& dir, const FederatedDataset& data);
FederatedDataset load_federated_dataset(const std::filesystem::path& dir);

/// Fraction of each class in a pool, length `classes`.
std::vector<double> class_proportions(const SamplePool& pool, int classes);

}  // namespace mgs
