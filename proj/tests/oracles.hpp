#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the routine it is meant to check.

#include "mgs/bounds.hpp"
#include "mgs/data.hpp"
#include "mgs/model.hpp"
#include "mgs/topology.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <random>
#include <vector>

namespace oracle {

using Real = boost::multiprecision::cpp_bin_float_50;

/// Cyclic Jacobi rotations on a symmetric matrix; eigenvalues ascending.
std::vector<double> jacobi_eigenvalues(const mgs::Matrix& a);

/// Second-largest eigenvalue magnitude from the Jacobi spectrum.
double jacobi_rho(const mgs::Matrix& w);

/// Explicit double loop over agents and coordinates.
double brute_consensus_error(const mgs::AgentParams& p);

/// Loss evaluated in 50-digit arithmetic with its own forward pass.
Real hp_loss(const mgs::Model& model, const std::vector<Real>& theta, const mgs::Sample& s);

/// Central differences of hp_loss, rounded to double.
mgs::Vector fd_gradient(const mgs::Model& model, const mgs::Vector& theta, const mgs::Sample& s);

/// ||a - b|| / max(||b||, 1e-8)
double relative_error(const mgs::Vector& a, const mgs::Vector& b);

Real stability(const mgs::BoundInputs& in);
Real gbar(double sigma2, double xi2, double beta, double rs_last);
Real gamma_tilde(double delta, double lambda_max);
Real optimization(const mgs::BoundInputs& in);
Real q0(const mgs::BoundInputs& in);
Real generalization(const mgs::BoundInputs& in, double gbar);
Real minibatch_generalization(const mgs::BoundInputs& in, double gbar);
Real excess(const mgs::BoundInputs& in, double gbar);
Real consensus_recursion(double x, double eta, const mgs::BoundInputs& in);
Real centralized(double c, double beta, double n, double m, double T);

/// |a - b| / |b| evaluated in extended precision.
double rel_diff(double value, const Real& reference);

/// Inputs accepted by every evaluator: mu in (0, beta), t0 in [1, T],
/// rho in [0, 0.99], lambda_max in [delta, 2].
mgs::BoundInputs random_inputs(std::mt19937_64& rng);

/// Random state on m agents with d coordinates, entries N(0, 1).
mgs::AgentParams random_params(std::mt19937_64& rng, int m, int d);

}  // namespace oracle
