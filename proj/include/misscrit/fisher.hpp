#pragma once

#include <optional>
#include <string>

#include "misscrit/em.hpp"
#include "misscrit/model.hpp"

namespace misscrit {

// Which pair of matrices feeds the shared penalty tr(I_x I_y^{-1}):
// expected information at the plug-in point, or the empirical Hx / H pair.
enum class PenaltyRoute { Expected, Empirical };

std::string to_string(PenaltyRoute r);
PenaltyRoute parse_penalty_route(const std::string& s);

struct FisherBundle {
  Params at;
  SymMatrix i_x;
  SymMatrix i_y;
  SymMatrix i_zy;
  std::optional<SymMatrix> g_hat;
  std::optional<SymMatrix> h_hat;
  std::optional<SymMatrix> hx_hat;
  PenaltyRoute route = PenaltyRoute::Expected;
  double penalty_trace = 0.0;
};

// Expected complete-data information, closed form.
SymMatrix info_complete(const Params& theta);

// Same matrix from its definition: sum_z pi_z E_{y|z}[-hess_px] with each
// inner expectation done by Gauss-Hermite.
SymMatrix info_complete_by_quadrature(const Params& theta, Eigen::Index nodes_per_component = 20);

struct IncompleteInfoForms {
  SymMatrix outer_product;  // int p_y s s^T
  SymMatrix neg_hessian;    // -int p_y hess log p_y
};

IncompleteInfoForms info_incomplete_forms(const Params& theta, const QuadratureRule<double>& rule);

// Outer-product form; throws QuadratureUnreliable when the two forms differ
// by more than 1e-3 relative to the largest entry. One component: I_x itself.
SymMatrix info_incomplete(const Params& theta, const QuadratureRule<double>& rule);
SymMatrix info_incomplete(const Params& theta);

// I_x - I_y evaluated directly as int p_y Cov_{z|y}(s_x): PSD by construction
// and free of the cancellation the difference suffers when components separate.
SymMatrix info_missing(const Params& theta, const QuadratureRule<double>& rule);
SymMatrix info_missing(const Params& theta);

struct EmpiricalGH {
  SymMatrix g;  // (1/n) sum s s^T
  SymMatrix h;  // -(1/n) sum hess log p_y
};

EmpiricalGH empirical_GH(const IncompleteDataset& data, const Params& theta);

// (1/n) sum_t sum_z r_tz (-hess_px(y_t, z))
SymMatrix empirical_Hx(const IncompleteDataset& data, const Params& theta);

struct SemEstimate {
  double value = 0.0;             // tr((I - DM)^{-1}) at the base step
  double value_half_step = 0.0;   // same with the step halved
  double relative_disagreement = 0.0;
  bool flagged = false;           // disagreement above 1%
  SymMatrix rate_matrix;          // DM at the base step (not symmetric in general)
};

// SEM shortcut for tr(I_x I_y^{-1}) from the Jacobian of the EM map at a
// fixed point. Steps are rel_step * (1 + |coordinate|).
SemEstimate sem_penalty(const IncompleteDataset& data, const Params& theta_hat, double rel_step = 1e-5);

// Expected matrices always; empirical ones when data is given. The empirical
// route needs data.
FisherBundle bundle(const Params& theta, PenaltyRoute route = PenaltyRoute::Expected,
                    const IncompleteDataset* data = nullptr);

}  // namespace misscrit
