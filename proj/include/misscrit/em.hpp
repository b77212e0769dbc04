#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "misscrit/model.hpp"

namespace misscrit {

enum class InitMethod { TrueAnchored, Quantile, Random };

std::string to_string(InitMethod m);
InitMethod parse_init_method(const std::string& s);

struct EmConfig {
  int max_iters = 2000;
  // Convergence needs |delta loglik| / n below this and a fixed-point step
  // (sup norm, free coordinates) no larger than 10 * tol_loglik.
  double tol_loglik = 1e-9;
  int n_restarts = 1;
  InitMethod init = InitMethod::TrueAnchored;
  std::uint64_t seed = 0;
  // Starting point for TrueAnchored; projected onto the candidate spec.
  std::optional<Params> anchor;

  void validate() const;
};

struct FitResult {
  Params theta_hat;
  double loglik = 0.0;
  int iters = 0;
  bool converged = false;
  bool degenerate = false;
  std::vector<double> loglik_trace;
  // sup-norm of pack(em_map(theta_hat)) - pack(theta_hat)
  double fixed_point_residual = 0.0;

  // Largest drop between consecutive trace entries (0 when monotone).
  double max_trace_decrease() const;
};

struct EStepResult {
  Eigen::MatrixXd resp;  // n x k, rows on the simplex
  double loglik = 0.0;
};

EStepResult e_step_with_loglik(const IncompleteDataset& data, const Params& theta);
Eigen::MatrixXd e_step(const IncompleteDataset& data, const Params& theta);

struct MStepResult {
  Params theta;
  bool floor_hit = false;
};

// Closed-form maximizer of Q given responsibilities. Class variances below
// variance_floor are clamped to it and reported through floor_hit.
MStepResult m_step(const IncompleteDataset& data, const Eigen::Ref<const Eigen::MatrixXd>& weights,
                   const MixtureSpec& spec, double variance_floor = 0.0);

// 1e-8 times the (biased) sample variance of y.
double variance_floor_for(const IncompleteDataset& data);

double log_likelihood(const IncompleteDataset& data, const Params& theta);

// Q(theta2; theta1) = sum_t sum_z r_z(y_t; theta1) log p_x(y_t, z; theta2)
double q_function(const Params& theta2, const Params& theta1, const IncompleteDataset& data);

// One E step followed by one M step.
Params em_map(const Params& theta, const IncompleteDataset& data);

// em_map expressed on free vectors, the map whose Jacobian SEM needs.
Vector em_map_free(const MixtureSpec& spec, const Vector& free, const IncompleteDataset& data);

FitResult fit_em(const IncompleteDataset& data, const MixtureSpec& spec, const EmConfig& cfg);

// 2 Q(theta; theta) - 2 l_y(theta) = 2 sum_t sum_z r log r  (always <= 0)
double diff_term(const IncompleteDataset& data, const Params& theta);

}  // namespace misscrit
