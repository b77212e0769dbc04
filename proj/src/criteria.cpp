#include "misscrit/criteria.hpp"

#include "misscrit/dataset_io.hpp"

namespace misscrit {

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::Aic: return "aic";
    case Criterion::Tic: return "tic";
    case Criterion::Pdio: return "pdio";
    case Criterion::AicCd: return "aic_cd";
    case Criterion::AicXy: return "aic_xy";
  }
  return "unknown";
}

Criterion parse_criterion(const std::string& s) {
  for (Criterion c : kAllCriteria) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument("unknown criterion '" + s + "'");
}

double CriteriaReport::value(Criterion c) const {
  switch (c) {
    case Criterion::Aic: return aic;
    case Criterion::Tic: return tic;
    case Criterion::Pdio: return pdio;
    case Criterion::AicCd: return aic_cd;
    case Criterion::AicXy: return aic_xy;
  }
  return 0.0;
}

double riskhat_xy(double loglik, const SymMatrix& g, const SymMatrix& h, const SymMatrix& hx, Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("riskhat_xy: n must be positive");
  const SymMatrix hinv_g = solve_spd(h, g);
  const SymMatrix hinv_hx = solve_spd(h, hx);
  const double nn = static_cast<double>(n);
  // tr(Hx H^-1 G H^-1) = tr((H^-1 Hx)(H^-1 G))
  return -loglik / nn + (hinv_g.trace() + (hinv_hx * hinv_g).trace()) / (2.0 * nn);
}

double riskhat_xy(const FitResult& fit, const SymMatrix& g, const SymMatrix& h, const SymMatrix& hx,
                  Eigen::Index n) {
  return riskhat_xy(fit.loglik, g, h, hx, n);
}

CriteriaReport compute_criteria(const FitResult& fit, const FisherBundle& bundle, const IncompleteDataset& data) {
  if (fit.degenerate) throw DegenerateFit("compute_criteria: fit hit the variance floor");
  if (!fit.converged) throw DegenerateFit("compute_criteria: fit did not converge");
  if (!(pack(bundle.at) - pack(fit.theta_hat)).isZero(0.0)) {
    throw std::invalid_argument("compute_criteria: bundle was not computed at the fitted parameters");
  }
  const Params& theta = fit.theta_hat;
  const int d = theta.spec.free_dim();

  SymMatrix g, h, hx;
  if (bundle.g_hat && bundle.h_hat && bundle.hx_hat) {
    g = *bundle.g_hat;
    h = *bundle.h_hat;
    hx = *bundle.hx_hat;
  } else {
    EmpiricalGH gh = empirical_GH(data, theta);
    g = std::move(gh.g);
    h = std::move(gh.h);
    hx = empirical_Hx(data, theta);
  }

  CriteriaReport r;
  r.model_label = theta.spec.label();
  r.d = d;
  r.loglik = fit.loglik;
  r.q_at_hat = q_function(theta, theta, data);
  r.penalty_trace = bundle.penalty_trace;
  r.penalty_route = bundle.route;
  r.aic = -2.0 * r.loglik + 2.0 * d;
  r.tic = -2.0 * r.loglik + 2.0 * trace_product_inv(g, h);
  r.pdio = -2.0 * r.loglik + 2.0 * r.penalty_trace;
  r.aic_cd = -2.0 * r.q_at_hat + 2.0 * r.penalty_trace;
  r.aic_xy = -2.0 * r.loglik + d + r.penalty_trace;
  r.riskhat_xy_minus_entropy = riskhat_xy(r.loglik, g, h, hx, data.size());
  return r;
}

std::size_t select(std::span<const CriteriaReport> reports, Criterion c) {
  if (reports.empty()) throw std::invalid_argument("select: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& a = reports[i];
    const auto& b = reports[best];
    const double va = a.value(c), vb = b.value(c);
    if (va < vb || (va == vb && (a.d < b.d || (a.d == b.d && a.model_label < b.model_label)))) best = i;
  }
  return best;
}

std::string criteria_csv_header() { return "model,d,loglik,q,penalty_trace,aic,tic,pdio,aic_cd,aic_xy"; }

std::string to_csv_row(const CriteriaReport& r) {
  std::string s = r.model_label + "," + std::to_string(r.d);
  for (double v : {r.loglik, r.q_at_hat, r.penalty_trace, r.aic, r.tic, r.pdio, r.aic_cd, r.aic_xy}) {
    s += "," + format_double(v);
  }
  return s;
}

}  // namespace misscrit
