#pragma once

#include <array>
#include <span>
#include <string>

#include "misscrit/em.hpp"
#include "misscrit/fisher.hpp"

namespace misscrit {

enum class Criterion { Aic, Tic, Pdio, AicCd, AicXy };

inline constexpr std::array<Criterion, 5> kAllCriteria = {Criterion::Aic, Criterion::Tic, Criterion::Pdio,
                                                          Criterion::AicCd, Criterion::AicXy};

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& s);

struct CriteriaReport {
  std::string model_label;
  int d = 0;
  double loglik = 0.0;    // l_y(theta_hat)
  double q_at_hat = 0.0;  // Q(theta_hat; theta_hat)
  double penalty_trace = 0.0;
  PenaltyRoute penalty_route = PenaltyRoute::Expected;
  double aic = 0.0;
  double tic = 0.0;
  double pdio = 0.0;
  double aic_cd = 0.0;
  double aic_xy = 0.0;
  // riskhat_{x;y} without the model-independent entropy of the truth.
  double riskhat_xy_minus_entropy = 0.0;

  double value(Criterion c) const;
};

//   AIC     = -2 l + 2 d
//   TIC     = -2 l + 2 tr(G H^{-1})
//   PDIO    = -2 l + 2 tr(Ix Iy^{-1})
//   AIC_cd  = -2 Q + 2 tr(Ix Iy^{-1})
//   AIC_x;y = -2 l + d + tr(Ix Iy^{-1})
// The penalty trace comes from the bundle (and so from its route). Empirical
// G and H are taken from the bundle when present, else computed from data.
CriteriaReport compute_criteria(const FitResult& fit, const FisherBundle& bundle, const IncompleteDataset& data);

// -l/n + (1/2n) [tr(G H^{-1}) + tr(Hx H^{-1} G H^{-1})]
double riskhat_xy(double loglik, const SymMatrix& g, const SymMatrix& h, const SymMatrix& hx, Eigen::Index n);
double riskhat_xy(const FitResult& fit, const SymMatrix& g, const SymMatrix& h, const SymMatrix& hx,
                  Eigen::Index n);

// Index of the minimizer; ties go to smaller d, then to the earlier label.
std::size_t select(std::span<const CriteriaReport> reports, Criterion c);

// CSV row with columns model,d,loglik,q,penalty_trace,aic,tic,pdio,aic_cd,aic_xy
std::string criteria_csv_header();
std::string to_csv_row(const CriteriaReport& r);

}  // namespace misscrit
