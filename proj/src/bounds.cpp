#include "mgs/bounds.hpp"

#include <fmt/format.h>

#include <cmath>
#include <initializer_list>
#include <numbers>

namespace mgs {

namespace {

constexpr double kE = std::numbers::e;

std::map<std::string, Provenance> tags(const BoundInputs& in, std::initializer_list<const char*> symbols,
                                       Provenance value) {
  std::map<std::string, Provenance> out;
  for (const char* s : symbols) out[s] = in.estimated.count(s) ? Provenance::estimated : Provenance::exact;
  out["value"] = value;
  return out;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("{} must be positive and finite, got {}", name, v));
  }
}

// e sqrt(2 beta) c^2 T^{2 c beta} / m
double h_factor(const BoundInputs& in) {
  const double a = 2.0 * in.c * in.beta;
  return kE * std::sqrt(2.0 * in.beta) * in.c * in.c * std::pow(in.T, a) / in.m;
}

double stability_value(const BoundInputs& in, double t0) {
  const double a = 2.0 * in.c * in.beta;
  return 8.0 * kE * std::sqrt(2.0 * in.beta) * in.c * in.c / ((1.0 + a) * in.n * in.m * t0) *
         std::pow(in.T / t0, a);
}

double generalization_value(const BoundInputs& in, double gbar, double n_eff) {
  const double a = 2.0 * in.c * in.beta;
  const double h = h_factor(in);
  const double first = (a + 3.0) / std::pow(n_eff * (a + 1.0), (a + 2.0) / (a + 3.0)) *
                       std::pow(2.0 * gbar * h, 1.0 / (a + 3.0));
  const double second = (a + 2.0) / (n_eff * (a + 1.0)) * std::pow(4.0 * in.beta * h, 1.0 / (a + 2.0));
  return first + second;
}

void check_generalization_inputs(const BoundInputs& in, double gbar) {
  require_positive(in.c, "c");
  require_positive(in.beta, "beta");
  require_positive(in.n, "n");
  require_positive(in.m, "m");
  require_positive(in.T, "T");
  if (!(gbar >= 0.0) || !std::isfinite(gbar)) {
    throw std::invalid_argument(fmt::format("Gbar must be nonnegative, got {}", gbar));
  }
}

double rho_bar(const BoundInputs& in) {
  if (!(in.mu > 0.0)) {
    throw PlViolationError("PL constant mu must be positive");
  }
  require_positive(in.beta, "beta");
  require_positive(in.m, "m");
  const double rb = 1.0 - in.mu / (in.m * in.beta);
  if (!(rb > 0.0 && rb < 1.0)) {
    throw std::domain_error(fmt::format("rho_bar = 1 - mu/(m beta) = {} lies outside (0, 1)", rb));
  }
  return rb;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::exact:
      return "exact";
    case Provenance::estimated:
      return "estimated";
    case Provenance::proxy:
      return "proxy";
  }
  return "unknown";
}

void check_inputs(const BoundInputs& in) {
  const std::pair<const char*, double> fields[] = {
      {"c", in.c},         {"beta", in.beta},     {"n", in.n},         {"m", in.m},
      {"T", in.T},         {"Q", in.Q},           {"rho", in.rho},     {"delta", in.delta},
      {"lambda_max", in.lambda_max}, {"sigma2", in.sigma2}, {"xi2", in.xi2}, {"mu", in.mu},
      {"Delta2", in.Delta2}, {"R0", in.R0},       {"RS_star", in.RS_star}, {"b", in.b}};
  for (const auto& [name, v] : fields) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(fmt::format("{} must be finite and nonnegative, got {}", name, v));
    }
  }
  if (in.rho >= 1.0) throw std::invalid_argument(fmt::format("rho must be < 1, got {}", in.rho));
  if (std::abs(in.rho + in.delta - 1.0) > 1e-12) {
    throw std::invalid_argument(fmt::format("delta = {} does not equal 1 - rho = {}", in.delta, 1.0 - in.rho));
  }
  if (in.lambda_max > 2.0) throw std::invalid_argument("lambda_max must lie in [0, 2]");
  if (in.mu > in.beta) {
    throw std::invalid_argument(fmt::format("mu = {} exceeds beta = {}", in.mu, in.beta));
  }
  if (in.b < 1.0) throw std::invalid_argument("b must be >= 1");
  if (in.t0 && (*in.t0 < 0.0 || *in.t0 > in.T)) {
    throw std::invalid_argument(fmt::format("t0 = {} outside [0, T = {}]", *in.t0, in.T));
  }
  if (in.gamma && !(*in.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
}

BoundReport stability_bound(const BoundInputs& in) {
  if (!in.t0) throw std::invalid_argument("stability bound needs t0");
  const double t0 = *in.t0;
  if (!(t0 >= 1.0)) throw std::invalid_argument(fmt::format("t0 must be >= 1, got {}", t0));
  if (!(in.T >= t0)) throw std::invalid_argument(fmt::format("T = {} is below t0 = {}", in.T, t0));
  require_positive(in.c, "c");
  require_positive(in.beta, "beta");
  require_positive(in.n, "n");
  require_positive(in.m, "m");
  BoundReport r;
  r.value = stability_value(in, t0);
  r.provenance = tags(in, {"c", "beta", "n", "m", "T", "t0"}, Provenance::exact);
  return r;
}

BoundReport gbar_bound(double sigma2, double xi2, double beta, double rs_last) {
  for (double v : {sigma2, xi2, beta, rs_last}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("gbar_bound inputs must be nonnegative");
  }
  BoundReport r;
  r.value = 3.0 * sigma2 + 3.0 * xi2 + 6.0 * beta * rs_last;
  r.provenance = {{"sigma2", Provenance::exact}, {"xi2", Provenance::exact}, {"beta", Provenance::exact},
                  {"RS_last", Provenance::exact}, {"value", Provenance::exact}};
  return r;
}

double gamma_tilde(double delta, double lambda_max) {
  return delta / (delta * delta + 8.0 * delta + (4.0 + 2.0 * delta) * lambda_max * lambda_max);
}

BoundReport optimization_bound_proxy(const BoundInputs& in) {
  const double rb = rho_bar(in);
  require_positive(in.delta, "delta");
  const double g = gamma_tilde(in.delta, in.lambda_max);
  const double decay = std::exp(-in.delta * g * in.Q / 4.0);
  BoundReport r;
  // 1 / (1 - rho_bar) = m beta / mu
  r.value = in.Delta2 * decay * (in.m * in.beta / in.mu) +
            (1.0 + in.beta / (in.mu * rb) * (1.0 + decay)) * in.R0 * std::pow(in.rho, in.T);
  r.provenance = tags(in, {"beta", "mu", "m", "Q", "T", "rho", "delta", "lambda_max", "Delta2", "R0"},
                      Provenance::proxy);
  r.notes = "hidden constant set to 1";
  return r;
}

Q0Result q0_threshold(const BoundInputs& in) {
  const double rb = rho_bar(in);
  if (!(in.delta > 0.0)) throw std::domain_error("Q0 is undefined for delta = 0");
  Q0Result out;
  out.gamma_tilde = gamma_tilde(in.delta, in.lambda_max);
  const double step = in.delta * out.gamma_tilde / 2.0;
  if (!(step > 0.0 && step < 1.0)) {
    throw std::domain_error(fmt::format("delta * gamma_tilde / 2 = {} outside (0, 1)", step));
  }
  out.q0 = std::log(rb / 46.0) / std::log1p(-step);
  return out;
}

BoundReport generalization_bound(const BoundInputs& in, double gbar) {
  check_generalization_inputs(in, gbar);
  BoundReport r;
  r.value = generalization_value(in, gbar, in.n);
  r.provenance = tags(in, {"c", "beta", "n", "m", "T", "Gbar"}, Provenance::exact);
  return r;
}

BoundReport minibatch_generalization_bound(const BoundInputs& in, double gbar) {
  check_generalization_inputs(in, gbar);
  if (!(in.b >= 1.0)) throw std::invalid_argument("b must be >= 1");
  BoundReport r;
  r.value = generalization_value(in, gbar, in.n / in.b);
  r.provenance = tags(in, {"c", "beta", "n", "m", "T", "b", "Gbar"}, Provenance::exact);
  return r;
}

BoundReport excess_bound(const BoundInputs& in, double gbar) {
  const BoundReport opt = optimization_bound_proxy(in);
  const BoundReport gen = generalization_bound(in, gbar);
  BoundReport r;
  r.value = opt.value + gen.value;
  r.provenance = opt.provenance;
  r.provenance.insert(gen.provenance.begin(), gen.provenance.end());
  r.provenance["value"] = Provenance::proxy;
  r.notes = "optimization term is a proxy";
  return r;
}

double consensus_recursion_bound(double x_t, double eta, const BoundInputs& in) {
  if (!(x_t >= 0.0)) throw std::invalid_argument("x_t must be nonnegative");
  const double r2q = std::pow(in.rho, 2.0 * in.Q);
  return r2q * (2.0 + 24.0 * in.beta * in.beta * eta * eta) * x_t +
         24.0 * r2q * (in.sigma2 + in.xi2) * eta * eta;
}

BoundReport centralized_reference_bound(double c, double beta, double n, double m, double T) {
  require_positive(c, "c");
  require_positive(beta, "beta");
  require_positive(n, "n");
  require_positive(m, "m");
  require_positive(T, "T");
  BoundReport r;
  r.value = std::pow(T, c * beta / (c * beta + 1.0)) / (m * n);
  r.provenance = {{"c", Provenance::exact}, {"beta", Provenance::exact}, {"n", Provenance::exact},
                  {"m", Provenance::exact}, {"T", Provenance::exact}, {"value", Provenance::proxy}};
  r.notes = "order of magnitude only";
  return r;
}

double optimal_t0(const BoundInputs& in, double gamma) {
  check_generalization_inputs(in, 0.0);
  require_positive(gamma, "gamma");
  const double alpha = 1.0 / (2.0 * in.c * in.beta + 2.0);
  return std::pow(4.0 * (gamma + in.beta) * h_factor(in), alpha);
}

double optimal_gamma(const BoundInputs& in, double gbar) {
  check_generalization_inputs(in, gbar);
  require_positive(gbar, "Gbar");
  const double a = 2.0 * in.c * in.beta;
  const double alpha = 1.0 / (a + 2.0);
  const double c1 = gbar / 2.0;
  const double c2 = (a + 2.0) / (in.n * (a + 1.0)) * std::pow(4.0 * h_factor(in), alpha);
  return std::pow(c1 / (alpha * c2), 1.0 / (alpha + 1.0));
}

double lemma_tradeoff_bound(const BoundInputs& in, double gbar, double t0, double gamma) {
  check_generalization_inputs(in, gbar);
  require_positive(gamma, "gamma");
  require_positive(t0, "t0");
  return t0 / in.n + gbar / (2.0 * gamma) + (gamma + in.beta) / 2.0 * stability_value(in, t0);
}

}  // namespace mgs
