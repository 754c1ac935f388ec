#pragma once

#include "mgs/data.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgs {

enum class ModelFamily { quadratic, logistic, mlp };

std::string to_string(ModelFamily family);

class UnsupportedFamilyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MlpShape {
  int input_dim = 0;
  std::vector<int> hidden;
  int classes = 2;
};

/// Loss family with exact gradients.
///
/// - quadratic: l(theta; z) = 1/2 (theta - x)^T A (theta - x) with x the
///   sample features. A comes from a curvature bank; with more than one
///   matrix the sample label selects A[label mod size].
/// - logistic: binary, no bias, label 0 -> y = -1, label 1 -> y = +1,
///   l = log(1 + exp(-y x^T theta)).
/// - mlp: fully connected, softplus hidden activations, softmax
///   cross-entropy output. Parameters are laid out layer by layer as the
///   row-major weight matrix followed by the bias vector.
///
/// The bounded wrapper divides the raw loss by a calibrated sup and clamps at
/// one, so wrapped losses live in [0, 1]. In the clamped region the gradient is
/// zero.
class Model {
 public:
  static Model quadratic(std::vector<Matrix> curvatures);
  static Model quadratic_diagonal(const Vector& diagonal);
  static Model logistic(int dim);
  static Model mlp(int input_dim, std::vector<int> hidden, int classes);

  /// Copy with the [0,1] wrapper applied, dividing the raw loss by `sup_loss`.
  Model bounded(double sup_loss) const;
  /// Copy with the wrapper removed.
  Model raw() const;

  ModelFamily family() const { return family_; }
  int dim() const { return dim_; }
  int input_dim() const { return input_dim_; }
  bool is_bounded() const { return scale_.has_value(); }
  double loss_scale() const { return scale_.value_or(1.0); }

  const std::vector<Matrix>& curvatures() const { return curvatures_; }
  const Matrix& curvature_for(const Sample& sample) const;
  const MlpShape& mlp_shape() const { return shape_; }

 private:
  ModelFamily family_ = ModelFamily::logistic;
  int dim_ = 0;
  int input_dim_ = 0;
  std::vector<Matrix> curvatures_;
  MlpShape shape_;
  std::optional<double> scale_;
};

double loss(const Model& model, const Vector& theta, const Sample& sample);
Vector grad(const Model& model, const Vector& theta, const Sample& sample);

/// Adds weight * grad into `accum` and returns the loss.
double accumulate_grad(const Model& model, const Vector& theta, const Sample& sample,
                       double weight, Vector& accum);

/// Mean of per-sample gradients. Throws on an empty list.
Vector batch_grad(const Model& model, const Vector& theta, std::span<const Sample> samples);

/// Mean loss over `samples`.
double empirical_risk(const Model& model, const Vector& theta, std::span<const Sample> samples);

/// Gradient of the mean loss over `samples`.
Vector risk_grad(const Model& model, const Vector& theta, std::span<const Sample> samples);

struct SmoothnessOptions {
  int pairs = 256;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

struct SmoothnessEstimate {
  double beta = 0.0;
  bool estimated = false;
  /// Ratios ||g(theta) - g(theta')|| / ||theta - theta'|| behind an estimate.
  std::vector<double> sampled_ratios;
};

/// quadratic: max eigenvalue of the per-sample Hessians (exact);
/// logistic: max ||x||^2 / 4 (exact); mlp: max sampled gradient-difference
/// ratio (estimate). Wrapped models report the wrapped constant.
SmoothnessEstimate smoothness_constant(const Model& model, std::span<const Sample> samples,
                                       const SmoothnessOptions& options = {});

struct PlEstimate {
  double mu = 0.0;
  bool holds = false;  // false when mu == 0
};

/// Smallest eigenvalue of the mean Hessian of R_S. Quadratic family only;
/// other families throw UnsupportedFamilyError.
PlEstimate pl_constant(const Model& model, std::span<const Sample> samples);

struct ModelConstants {
  double beta = 0.0;
  bool beta_estimated = false;
  std::optional<double> mu;
  double sup_loss = 0.0;
  bool sup_estimated = false;
};

ModelConstants model_constants(const Model& model, std::span<const Sample> samples,
                               double sup_radius = 10.0);

struct SupEstimate {
  double value = 0.0;
  bool estimated = false;
};

/// Bound on the raw loss over the ball ||theta|| <= radius and the given
/// samples. Closed form for quadratic and logistic, sampled for mlp.
SupEstimate calibrate_sup_loss(const Model& model, std::span<const Sample> samples, double radius,
                               std::uint64_t seed = 0);

/// Zero vector, or N(0, scale^2) entries when scale > 0.
Vector initial_params(const Model& model, double scale, std::uint64_t seed);

}  // namespace mgs
