#include "mgs/model.hpp"

#include "mgs/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace mgs {

namespace {

double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) {
  if (v >= 0.0) {
    return 1.0 / (1.0 + std::exp(-v));
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

void check_dims(const Model& model, const Vector& theta, const Sample& sample) {
  if (theta.size() != model.dim()) {
    throw std::invalid_argument(
        fmt::format("parameter dimension {} does not match model dimension {}", theta.size(), model.dim()));
  }
  if (sample.features.size() != model.input_dim()) {
    throw std::invalid_argument(fmt::format("sample has {} features, model expects {}",
                                            sample.features.size(), model.input_dim()));
  }
}

double logistic_sign(const Sample& s) { return s.label >= 0.5 ? 1.0 : -1.0; }

// Forward and backward pass of the MLP; returns the raw loss and, when
// `accum` is non-null, adds weight * gradient into it.
double mlp_pass(const MlpShape& shape, const Vector& theta, const Sample& sample, double weight,
                Vector* accum) {
  std::vector<int> widths;
  widths.push_back(shape.input_dim);
  widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
  widths.push_back(shape.classes);
  const std::size_t layers = widths.size() - 1;

  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += static_cast<Eigen::Index>(widths[l + 1]) * widths[l] + widths[l + 1];
  }

  // pre[l] = W_l a_l + b_l, act[0] = x, act[l+1] = softplus(pre[l]) for hidden layers.
  std::vector<Vector> act(layers + 1);
  std::vector<Vector> pre(layers);
  act[0] = sample.features;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        theta.data() + offsets[l], out, in);
    Eigen::Map<const Vector> b(theta.data() + offsets[l] + static_cast<Eigen::Index>(out) * in, out);
    pre[l] = w * act[l] + b;
    if (l + 1 < layers) {
      act[l + 1] = pre[l].unaryExpr([](double v) { return softplus(v); });
    }
  }

  const Vector& logits = pre[layers - 1];
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  const auto label = static_cast<Eigen::Index>(sample.label);
  if (label < 0 || label >= logits.size()) {
    throw std::invalid_argument(fmt::format("label {} outside [0, {})", sample.label, logits.size()));
  }
  const double value = lse - logits(label);

  if (accum != nullptr) {
    Vector delta = (logits.array() - lse).exp();
    delta(label) -= 1.0;
    for (std::size_t l = layers; l-- > 0;) {
      const int in = widths[l];
      const int out = widths[l + 1];
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
          accum->data() + offsets[l], out, in);
      Eigen::Map<Vector> gb(accum->data() + offsets[l] + static_cast<Eigen::Index>(out) * in, out);
      gw.noalias() += weight * delta * act[l].transpose();
      gb += weight * delta;
      if (l > 0) {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
            theta.data() + offsets[l], out, in);
        Vector back = w.transpose() * delta;
        delta = back.array() * pre[l - 1].unaryExpr([](double v) { return sigmoid(v); }).array();
      }
    }
  }
  return value;
}

double raw_loss_and_grad(const Model& model, const Vector& theta, const Sample& sample,
                         double weight, Vector* accum) {
  switch (model.family()) {
    case ModelFamily::quadratic: {
      const Matrix& a = model.curvature_for(sample);
      const Vector diff = theta - sample.features;
      const Vector ad = a * diff;
      if (accum) *accum += weight * ad;
      return 0.5 * diff.dot(ad);
    }
    case ModelFamily::logistic: {
      const double y = logistic_sign(sample);
      const double margin = y * sample.features.dot(theta);
      if (accum) *accum -= (weight * y * sigmoid(-margin)) * sample.features;
      return softplus(-margin);
    }
    case ModelFamily::mlp:
      return mlp_pass(model.mlp_shape(), theta, sample, weight, accum);
  }
  return 0.0;
}

}  // namespace

std::string to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::quadratic:
      return "quadratic";
    case ModelFamily::logistic:
      return "logistic";
    case ModelFamily::mlp:
      return "mlp";
  }
  return "unknown";
}

Model Model::quadratic(std::vector<Matrix> curvatures) {
  if (curvatures.empty()) {
    throw std::invalid_argument("quadratic model needs at least one curvature matrix");
  }
  const auto d = curvatures.front().rows();
  for (const auto& a : curvatures) {
    if (a.rows() != d || a.cols() != d) {
      throw std::invalid_argument("curvature matrices must all be d x d");
    }
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("curvature matrices must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12) {
      throw std::invalid_argument("curvature matrices must be positive semidefinite");
    }
  }
  Model m;
  m.family_ = ModelFamily::quadratic;
  m.dim_ = static_cast<int>(d);
  m.input_dim_ = static_cast<int>(d);
  m.curvatures_ = std::move(curvatures);
  return m;
}

Model Model::quadratic_diagonal(const Vector& diagonal) {
  return quadratic({Matrix(diagonal.asDiagonal())});
}

Model Model::logistic(int dim) {
  if (dim < 1) throw std::invalid_argument("logistic model needs dim >= 1");
  Model m;
  m.family_ = ModelFamily::logistic;
  m.dim_ = dim;
  m.input_dim_ = dim;
  return m;
}

Model Model::mlp(int input_dim, std::vector<int> hidden, int classes) {
  if (input_dim < 1 || classes < 2) {
    throw std::invalid_argument("mlp needs input_dim >= 1 and classes >= 2");
  }
  Model m;
  m.family_ = ModelFamily::mlp;
  m.input_dim_ = input_dim;
  m.shape_ = {input_dim, std::move(hidden), classes};
  int prev = input_dim;
  int dim = 0;
  for (int width : m.shape_.hidden) {
    if (width < 1) throw std::invalid_argument("mlp hidden widths must be positive");
    dim += width * prev + width;
    prev = width;
  }
  dim += classes * prev + classes;
  m.dim_ = dim;
  return m;
}

Model Model::bounded(double sup_loss) const {
  if (!(sup_loss > 0.0) || !std::isfinite(sup_loss)) {
    throw std::invalid_argument("bounded wrapper needs a positive finite sup");
  }
  Model m = *this;
  m.scale_ = sup_loss;
  return m;
}

Model Model::raw() const {
  Model m = *this;
  m.scale_.reset();
  return m;
}

const Matrix& Model::curvature_for(const Sample& sample) const {
  if (curvatures_.size() == 1) return curvatures_.front();
  const auto idx = static_cast<long>(std::llround(sample.label));
  const long k = static_cast<long>(curvatures_.size());
  return curvatures_[static_cast<std::size_t>(((idx % k) + k) % k)];
}

double accumulate_grad(const Model& model, const Vector& theta, const Sample& sample, double weight,
                       Vector& accum) {
  check_dims(model, theta, sample);
  if (!model.is_bounded()) {
    return raw_loss_and_grad(model, theta, sample, weight, &accum);
  }
  const double s = model.loss_scale();
  const double raw = raw_loss_and_grad(model, theta, sample, 0.0, nullptr);
  if (raw >= s) {
    return 1.0;
  }
  raw_loss_and_grad(model, theta, sample, weight / s, &accum);
  return raw / s;
}

double loss(const Model& model, const Vector& theta, const Sample& sample) {
  check_dims(model, theta, sample);
  const double raw = raw_loss_and_grad(model, theta, sample, 0.0, nullptr);
  if (!model.is_bounded()) return raw;
  return std::min(raw / model.loss_scale(), 1.0);
}

Vector grad(const Model& model, const Vector& theta, const Sample& sample) {
  Vector g = Vector::Zero(model.dim());
  accumulate_grad(model, theta, sample, 1.0, g);
  return g;
}

Vector batch_grad(const Model& model, const Vector& theta, std::span<const Sample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("batch_grad: empty sample list");
  }
  Vector g = Vector::Zero(model.dim());
  for (const auto& s : samples) {
    accumulate_grad(model, theta, s, 1.0, g);
  }
  return g / static_cast<double>(samples.size());
}

double empirical_risk(const Model& model, const Vector& theta, std::span<const Sample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("empirical_risk: empty sample list");
  }
  double total = 0.0;
  for (const auto& s : samples) total += loss(model, theta, s);
  return total / static_cast<double>(samples.size());
}

Vector risk_grad(const Model& model, const Vector& theta, std::span<const Sample> samples) {
  return batch_grad(model, theta, samples);
}

SmoothnessEstimate smoothness_constant(const Model& model, std::span<const Sample> samples,
                                       const SmoothnessOptions& options) {
  if (samples.empty()) {
    throw std::invalid_argument("smoothness_constant: empty dataset");
  }
  SmoothnessEstimate est;
  const double wrap = 1.0 / model.loss_scale();
  switch (model.family()) {
    case ModelFamily::quadratic: {
      double beta = 0.0;
      for (const auto& a : model.curvatures()) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
        beta = std::max(beta, es.eigenvalues().maxCoeff());
      }
      est.beta = beta * wrap;
      return est;
    }
    case ModelFamily::logistic: {
      double beta = 0.0;
      for (const auto& s : samples) beta = std::max(beta, s.features.squaredNorm() / 4.0);
      est.beta = beta * wrap;
      return est;
    }
    case ModelFamily::mlp:
      break;
  }

  est.estimated = true;
  CounterRng rng(tagged_seed(options.seed, StreamTag::probe), 0xbe7a);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const Model raw_model = model.raw();
  for (int p = 0; p < options.pairs; ++p) {
    Vector theta(model.dim());
    for (auto& v : theta) v = options.scale * normal(rng);
    Vector dir(model.dim());
    for (auto& v : dir) v = normal(rng);
    // Radii spread over three decades probe both local and global curvature.
    const double radius = options.scale * std::pow(10.0, -3.0 + 3.0 * rng.uniform01());
    const Vector other = theta + radius * dir.normalized();
    const auto& s = samples[rng.uniform_below(samples.size())];
    const double dist = (theta - other).norm();
    if (dist == 0.0) continue;
    const double ratio = (grad(raw_model, theta, s) - grad(raw_model, other, s)).norm() / dist;
    est.sampled_ratios.push_back(ratio * wrap);
    est.beta = std::max(est.beta, ratio * wrap);
  }
  return est;
}

PlEstimate pl_constant(const Model& model, std::span<const Sample> samples) {
  if (model.family() != ModelFamily::quadratic) {
    throw UnsupportedFamilyError("pl_constant: only the quadratic family has a closed-form PL constant, got " +
                                 to_string(model.family()));
  }
  if (samples.empty()) {
    throw std::invalid_argument("pl_constant: empty dataset");
  }
  Matrix mean = Matrix::Zero(model.dim(), model.dim());
  for (const auto& s : samples) mean += model.curvature_for(s);
  mean /= static_cast<double>(samples.size());
  Eigen::SelfAdjointEigenSolver<Matrix> es(mean, Eigen::EigenvaluesOnly);
  PlEstimate pl;
  pl.mu = std::max(0.0, es.eigenvalues().minCoeff()) / model.loss_scale();
  if (pl.mu < 1e-14) pl.mu = 0.0;
  pl.holds = pl.mu > 0.0;
  return pl;
}

SupEstimate calibrate_sup_loss(const Model& model, std::span<const Sample> samples, double radius,
                               std::uint64_t seed) {
  if (samples.empty()) {
    throw std::invalid_argument("calibrate_sup_loss: empty dataset");
  }
  if (!(radius > 0.0)) {
    throw std::invalid_argument("calibrate_sup_loss: radius must be positive");
  }
  SupEstimate sup;
  switch (model.family()) {
    case ModelFamily::quadratic:
      for (const auto& s : samples) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(model.curvature_for(s), Eigen::EigenvaluesOnly);
        const double reach = radius + s.features.norm();
        sup.value = std::max(sup.value, 0.5 * es.eigenvalues().maxCoeff() * reach * reach);
      }
      return sup;
    case ModelFamily::logistic: {
      double xmax = 0.0;
      for (const auto& s : samples) xmax = std::max(xmax, s.features.norm());
      sup.value = softplus(radius * xmax);
      return sup;
    }
    case ModelFamily::mlp:
      break;
  }
  sup.estimated = true;
  const Model raw_model = model.raw();
  CounterRng rng(tagged_seed(seed, StreamTag::probe), 0x5159);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  for (int p = 0; p < 64; ++p) {
    Vector theta(model.dim());
    for (auto& v : theta) v = normal(rng);
    theta *= radius * rng.uniform01() / std::max(theta.norm(), 1e-300);
    for (const auto& s : samples) sup.value = std::max(sup.value, loss(raw_model, theta, s));
  }
  return sup;
}

ModelConstants model_constants(const Model& model, std::span<const Sample> samples, double sup_radius) {
  ModelConstants c;
  const auto smooth = smoothness_constant(model, samples);
  c.beta = smooth.beta;
  c.beta_estimated = smooth.estimated;
  if (model.family() == ModelFamily::quadratic) {
    c.mu = pl_constant(model, samples).mu;
  }
  if (model.is_bounded()) {
    c.sup_loss = 1.0;
  } else {
    const auto sup = calibrate_sup_loss(model, samples, sup_radius);
    c.sup_loss = sup.value;
    c.sup_estimated = sup.estimated;
  }
  return c;
}

Vector initial_params(const Model& model, double scale, std::uint64_t seed) {
  Vector theta = Vector::Zero(model.dim());
  if (scale > 0.0) {
    CounterRng rng(tagged_seed(seed, StreamTag::initialization));
    boost::random::normal_distribution<double> normal(0.0, scale);
    for (auto& v : theta) v = normal(rng);
  }
  return theta;
}

}  // namespace mgs
