#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

namespace mgs {

/// Scalars feeding the closed-form bounds.
struct BoundInputs {
  double c = 0.0;       // learning-rate scale
  double beta = 0.0;    // smoothness
  double n = 0.0;       // samples per agent
  double m = 0.0;       // agents
  double T = 0.0;       // rounds
  double Q = 0.0;       // gossip steps per round
  double rho = 0.0;     // |lambda_2(W)|
  double delta = 1.0;   // 1 - rho
  double lambda_max = 0.0;  // largest eigenvalue of I - W
  double sigma2 = 0.0;
  double xi2 = 0.0;
  double mu = 0.0;      // PL constant
  double Delta2 = 0.0;  // max over minimizers of sum_k ||grad R_{S_k}||^2
  double R0 = 0.0;      // R_S(theta_0) - R_S*
  double RS_star = 0.0;
  double b = 1.0;       // batch size
  std::optional<double> gamma;
  std::optional<double> t0;
  /// Symbols whose values are estimates rather than exact.
  std::set<std::string> estimated;
};

enum class Provenance { exact, estimated, proxy };

std::string to_string(Provenance p);

struct BoundReport {
  double value = 0.0;
  /// Symbol -> provenance; the key "value" tags the result itself.
  std::map<std::string, Provenance> provenance;
  std::string notes;
};

/// Raised when a PL-dependent evaluator receives mu = 0.
class PlViolationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// 8 e sqrt(2 beta) c^2 / ((1 + 2 c beta) n m t0) * (T / t0)^(2 c beta).
/// Needs inputs.t0 in [1, T].
BoundReport stability_bound(const BoundInputs& in);

/// 3 sigma^2 + 3 xi^2 + 6 beta R_S(theta_T).
BoundReport gbar_bound(double sigma2, double xi2, double beta, double rs_last);

/// Optimization error with the hidden constant set to 1:
/// Delta^2 e^{-delta g Q / 4} / (1 - rho_bar) + [1 + beta/(mu rho_bar) (1 + e^{-delta g Q / 4})] R0 rho^T
/// with rho_bar = 1 - mu / (m beta) and g = gamma_tilde.
BoundReport optimization_bound_proxy(const BoundInputs& in);

struct Q0Result {
  double q0 = 0.0;
  double gamma_tilde = 0.0;
};

/// gamma_tilde = delta / (delta^2 + 8 delta + (4 + 2 delta) lambda_max^2),
/// Q0 = log(rho_bar / 46) / log(1 - delta gamma_tilde / 2).
Q0Result q0_threshold(const BoundInputs& in);

double gamma_tilde(double delta, double lambda_max);

/// Generalization error with t0 and gamma chosen in closed form.
BoundReport generalization_bound(const BoundInputs& in, double gbar);

/// Mini-batch variant; b = 1 gives generalization_bound exactly.
BoundReport minibatch_generalization_bound(const BoundInputs& in, double gbar);

/// optimization_bound_proxy + generalization_bound.
BoundReport excess_bound(const BoundInputs& in, double gbar);

/// rho^{2Q} (2 + 24 beta^2 eta^2) x_t + 24 rho^{2Q} (sigma^2 + xi^2) eta^2.
double consensus_recursion_bound(double x_t, double eta, const BoundInputs& in);

/// T^{c beta / (c beta + 1)} / (m n), order only.
BoundReport centralized_reference_bound(double c, double beta, double n, double m, double T);

/// t0 minimizing the stability trade-off for a given gamma: (4 (gamma + beta) H)^{1/(2 c beta + 2)}
/// with H = e sqrt(2 beta) c^2 T^{2 c beta} / m.
double optimal_t0(const BoundInputs& in, double gamma);

/// gamma minimizing C2 gamma^alpha + gbar / (2 gamma).
double optimal_gamma(const BoundInputs& in, double gbar);

/// Pre-optimization bound for explicit (t0, gamma):
/// t0 / n + gbar / (2 gamma) + (gamma + beta) / 2 * stability(t0).
double lemma_tradeoff_bound(const BoundInputs& in, double gbar, double t0, double gamma);

/// Throws std::invalid_argument when a field is negative or inconsistent.
void check_inputs(const BoundInputs& in);

}  // namespace mgs
