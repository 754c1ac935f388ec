#include "mgs/data.hpp"

#include "mgs/model.hpp"
#include "mgs/rng.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace mgs {

FederatedDataset::FederatedDataset(std::vector<SamplePool> shards, SamplePool held_out, DatasetMeta meta,
                                   std::vector<std::vector<std::size_t>> source_indices)
    : held_out_(std::make_shared<const SamplePool>(std::move(held_out))),
      meta_(meta),
      source_(std::move(source_indices)) {
  if (shards.empty()) {
    throw std::invalid_argument("federated dataset needs at least one shard");
  }
  const auto n = shards.front().size();
  for (std::size_t k = 0; k < shards.size(); ++k) {
    if (shards[k].size() != n) {
      throw std::invalid_argument(
          fmt::format("shard {} has {} samples, shard 0 has {}", k, shards[k].size(), n));
    }
    if (n == 0) throw std::invalid_argument("shards must be nonempty");
  }
  shards_.reserve(shards.size());
  for (auto& s : shards) shards_.push_back(std::make_shared<const SamplePool>(std::move(s)));
}

SamplePool FederatedDataset::pooled() const {
  SamplePool all;
  all.reserve(static_cast<std::size_t>(agents()) * per_agent());
  for (const auto& s : shards_) all.insert(all.end(), s->begin(), s->end());
  return all;
}

FederatedDataset FederatedDataset::with_replacement(int agent, int position, const Sample& replacement) const {
  if (agent < 0 || agent >= agents() || position < 0 || position >= per_agent()) {
    throw std::out_of_range(fmt::format("perturbation ({}, {}) outside {} agents x {} samples", position,
                                        agent, agents(), per_agent()));
  }
  FederatedDataset copy = *this;
  auto shard = std::make_shared<SamplePool>(*shards_[agent]);
  (*shard)[position] = replacement;
  copy.shards_[agent] = std::move(shard);
  return copy;
}

SamplePool synth_classification(std::uint64_t seed, int total, int dim, int classes, double separation) {
  if (classes < 2 || total < classes || dim < 1) {
    throw std::invalid_argument(
        fmt::format("synth_classification: need total >= classes >= 2 and dim >= 1 (got total={}, "
                    "classes={}, dim={})",
                    total, classes, dim));
  }
  CounterRng rng(tagged_seed(seed, StreamTag::synth_data));
  boost::random::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Vector> means(classes, Vector::Zero(dim));
  for (int c = 0; c < classes; ++c) {
    Vector dir(dim);
    for (auto& v : dir) v = normal(rng);
    means[c] = 0.5 * separation * dir / dir.norm();
  }

  SamplePool pool;
  pool.reserve(total);
  for (int i = 0; i < total; ++i) {
    const int c = i % classes;
    Sample s;
    s.features = means[c];
    for (auto& v : s.features) v += normal(rng);
    s.label = c;
    pool.push_back(std::move(s));
  }
  // Fisher-Yates with the counter stream.
  for (std::size_t i = pool.size(); i > 1; --i) {
    std::swap(pool[i - 1], pool[rng.uniform_below(i)]);
  }
  return pool;
}

std::vector<double> class_proportions(const SamplePool& pool, int classes) {
  std::vector<double> p(classes, 0.0);
  for (const auto& s : pool) {
    const auto c = static_cast<int>(std::llround(s.label));
    if (c >= 0 && c < classes) p[c] += 1.0;
  }
  if (!pool.empty()) {
    for (auto& v : p) v /= static_cast<double>(pool.size());
  }
  return p;
}

namespace {

// Largest-remainder rounding of n * q into integer counts summing to n.
std::vector<int> apportion(const std::vector<double>& q, int n) {
  std::vector<int> counts(q.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int used = 0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    const double exact = q[c] * n;
    counts[c] = static_cast<int>(std::floor(exact));
    used += counts[c];
    remainders.emplace_back(exact - counts[c], c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; used < n; ++i, ++used) {
    ++counts[remainders[i % remainders.size()].second];
  }
  return counts;
}

std::vector<double> dirichlet(CounterRng& rng, const std::vector<double>& concentration) {
  std::vector<double> draw(concentration.size(), 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < concentration.size(); ++c) {
    if (concentration[c] > 0.0) {
      boost::random::gamma_distribution<double> gamma(concentration[c], 1.0);
      draw[c] = gamma(rng);
    }
    total += draw[c];
  }
  if (!(total > 0.0)) {
    // Every gamma underflowed (tiny alpha): the limit is a one-hot draw.
    std::vector<std::size_t> live;
    for (std::size_t c = 0; c < concentration.size(); ++c)
      if (concentration[c] > 0.0) live.push_back(c);
    std::fill(draw.begin(), draw.end(), 0.0);
    draw[live[rng.uniform_below(live.size())]] = 1.0;
    return draw;
  }
  for (auto& v : draw) v /= total;
  return draw;
}

}  // namespace

FederatedDataset partition_dirichlet(const SamplePool& pool, int m, int n, double alpha, std::uint64_t seed) {
  if (m < 1 || n < 1) {
    throw std::invalid_argument("partition_dirichlet: m and n must be positive");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("partition_dirichlet: alpha must be positive");
  }
  if (pool.size() < static_cast<std::size_t>(m) * n) {
    throw std::invalid_argument(fmt::format(
        "partition_dirichlet: insufficient pool ({} samples for {} agents x {} samples)", pool.size(), m, n));
  }

  int classes = 0;
  int dim = pool.front().features.size();
  for (const auto& s : pool) {
    const double rounded = std::round(s.label);
    if (s.label < 0 || rounded != s.label) {
      throw std::invalid_argument("partition_dirichlet: labels must be nonnegative class indices");
    }
    classes = std::max(classes, static_cast<int>(rounded) + 1);
  }
  const auto global = class_proportions(pool, classes);

  CounterRng rng(tagged_seed(seed, StreamTag::partition));
  // Per-class queues of pool indices in a seeded random order.
  std::vector<std::vector<std::size_t>> queues(classes);
  for (std::size_t i = 0; i < pool.size(); ++i) queues[static_cast<int>(pool[i].label)].push_back(i);
  for (auto& q : queues) {
    for (std::size_t i = q.size(); i > 1; --i) std::swap(q[i - 1], q[rng.uniform_below(i)]);
    std::reverse(q.begin(), q.end());  // pop from the back
  }

  std::vector<double> concentration(classes);
  for (int c = 0; c < classes; ++c) concentration[c] = alpha * global[c];

  std::vector<bool> taken(pool.size(), false);
  std::vector<SamplePool> shards(m);
  std::vector<std::vector<std::size_t>> sources(m);
  for (int k = 0; k < m; ++k) {
    std::vector<double> q = dirichlet(rng, concentration);
    std::vector<int> want = apportion(q, n);
    int missing = 0;
    for (int c = 0; c < classes; ++c) {
      while (want[c] > 0 && !queues[c].empty()) {
        sources[k].push_back(queues[c].back());
        queues[c].pop_back();
        --want[c];
      }
      missing += want[c];
    }
    // Pad from the agent's own classes (by weight), then from anything left.
    while (missing > 0) {
      double mass = 0.0;
      for (int c = 0; c < classes; ++c)
        if (!queues[c].empty()) mass += q[c];
      int pick = -1;
      if (mass > 0.0) {
        double u = rng.uniform01() * mass;
        for (int c = 0; c < classes; ++c) {
          if (queues[c].empty() || q[c] <= 0.0) continue;
          pick = c;
          u -= q[c];
          if (u < 0.0) break;
        }
      } else {
        std::vector<int> live;
        for (int c = 0; c < classes; ++c)
          if (!queues[c].empty()) live.push_back(c);
        pick = live[rng.uniform_below(live.size())];
      }
      sources[k].push_back(queues[pick].back());
      queues[pick].pop_back();
      --missing;
    }
    std::sort(sources[k].begin(), sources[k].end());
    for (auto idx : sources[k]) {
      taken[idx] = true;
      shards[k].push_back(pool[idx]);
    }
  }

  SamplePool held_out;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!taken[i]) held_out.push_back(pool[i]);

  return FederatedDataset(std::move(shards), std::move(held_out), DatasetMeta{seed, dim, classes, alpha},
                          std::move(sources));
}

PerturbedPair make_perturbed_with(const FederatedDataset& base, int position, int agent, const Sample& replacement) {
  PerturbedPair pair;
  pair.perturbed = base.with_replacement(agent, position, replacement);
  pair.base = base;
  pair.agent = agent;
  pair.position = position;
  pair.original = base.sample(agent, position);
  pair.replacement = replacement;
  return pair;
}

PerturbedPair make_perturbed(const FederatedDataset& base, int position, int agent, std::uint64_t seed) {
  if (base.held_out().empty()) {
    throw std::invalid_argument("make_perturbed: held-out pool is empty");
  }
  CounterRng rng(tagged_seed(seed, StreamTag::perturbation), static_cast<std::uint64_t>(agent),
                 static_cast<std::uint64_t>(position));
  const auto idx = rng.uniform_below(base.held_out().size());
  PerturbedPair pair = make_perturbed_with(base, position, agent, base.held_out()[idx]);
  pair.heldout_index = static_cast<long>(idx);
  return pair;
}

double estimate_heterogeneity(const FederatedDataset& data, const Model& model, std::span<const Vector> probes) {
  if (probes.empty()) {
    throw std::invalid_argument("estimate_heterogeneity: need at least one probe");
  }
  const int m = data.agents();
  double best = 0.0;
  for (const auto& theta : probes) {
    std::vector<Vector> local(m);
    Vector global = Vector::Zero(model.dim());
    for (int k = 0; k < m; ++k) {
      local[k] = risk_grad(model, theta, data.shard(k));
      global += local[k];
    }
    global /= m;
    double spread = 0.0;
    for (int k = 0; k < m; ++k) spread += (local[k] - global).squaredNorm();
    best = std::max(best, spread / m);
  }
  return best;
}

double estimate_gradient_noise(const FederatedDataset& data, const Model& model, std::span<const Vector> probes,
                               int batch) {
  if (probes.empty()) {
    throw std::invalid_argument("estimate_gradient_noise: need at least one probe");
  }
  if (batch < 1 || batch > data.per_agent()) {
    throw std::invalid_argument(
        fmt::format("estimate_gradient_noise: batch {} outside [1, {}]", batch, data.per_agent()));
  }
  double best = 0.0;
  for (const auto& theta : probes) {
    for (int k = 0; k < data.agents(); ++k) {
      const auto& shard = data.shard(k);
      std::vector<Vector> grads;
      grads.reserve(shard.size());
      Vector mean = Vector::Zero(model.dim());
      for (const auto& s : shard) {
        grads.push_back(grad(model, theta, s));
        mean += grads.back();
      }
      mean /= static_cast<double>(shard.size());
      double var = 0.0;
      for (const auto& g : grads) var += (g - mean).squaredNorm();
      best = std::max(best, var / static_cast<double>(shard.size()));
    }
  }
  return best / batch;
}

AssumptionEstimates estimate_assumptions(const FederatedDataset& data, const Model& model,
                                         std::span<const Vector> probes, int batch) {
  return {estimate_gradient_noise(data, model, probes, batch), estimate_heterogeneity(data, model, probes),
          static_cast<int>(probes.size())};
}

SamplePool load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  SamplePool pool;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v)) {
        throw std::runtime_error(
            fmt::format("{}:{}: cannot parse '{}' as a finite number", path.string(), line_no, cell));
      }
      cells.push_back(v);
    }
    if (cells.size() < 2) {
      throw std::runtime_error(
          fmt::format("{}:{}: need at least one feature and a label", path.string(), line_no));
    }
    if (width != 0 && cells.size() != width) {
      throw std::runtime_error(
          fmt::format("{}:{}: expected {} columns, found {}", path.string(), line_no, width, cells.size()));
    }
    width = cells.size();
    Sample s;
    s.features = Eigen::Map<const Vector>(cells.data(), static_cast<Eigen::Index>(cells.size() - 1));
    s.label = cells.back();
    pool.push_back(std::move(s));
  }
  if (pool.empty()) {
    throw std::runtime_error(path.string() + ": no samples");
  }
  return pool;
}

void save_csv(const std::filesystem::path& path, const SamplePool& pool) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : pool) {
    for (Eigen::Index i = 0; i < s.features.size(); ++i) out << fmt::format("{:.17g},", s.features(i));
    out << fmt::format("{:.17g}\n", s.label);
  }
}

void save_federated_dataset(const std::filesystem::path& dir, const FederatedDataset& data) {
  std::filesystem::create_directories(dir);
  for (int k = 0; k < data.agents(); ++k) save_csv(dir / fmt::format("shard_{}.csv", k), data.shard(k));
  save_csv(dir / "heldout.csv", data.held_out());
  std::ofstream meta(dir / "meta.txt");
  meta << "agents=" << data.agents() << '\n'
       << "per_agent=" << data.per_agent() << '\n'
       << "seed=" << data.meta().seed << '\n'
       << "dim=" << data.meta().dim << '\n'
       << "classes=" << data.meta().classes << '\n'
       << fmt::format("alpha={:.17g}\n", data.meta().alpha);
}

FederatedDataset load_federated_dataset(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.txt");
  if (!meta_in) throw std::runtime_error("missing " + (dir / "meta.txt").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta_in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const int m = std::stoi(kv.at("agents"));
  DatasetMeta meta{std::stoull(kv.at("seed")), std::stoi(kv.at("dim")), std::stoi(kv.at("classes")),
                   std::stod(kv.at("alpha"))};
  std::vector<SamplePool> shards;
  for (int k = 0; k < m; ++k) shards.push_back(load_csv(dir / fmt::format("shard_{}.csv", k)));
  SamplePool held;
  if (std::filesystem::file_size(dir / "heldout.csv") > 0) held = load_csv(dir / "heldout.csv");
  return FederatedDataset(std::move(shards), std::move(held), meta);
}

}  // namespace mgs
