#include "misscrit/fisher.hpp"

#include <Eigen/LU>

namespace misscrit {

std::string to_string(PenaltyRoute r) {
  return r == PenaltyRoute::Expected ? "expected" : "empirical";
}

PenaltyRoute parse_penalty_route(const std::string& s) {
  if (s == "expected") return PenaltyRoute::Expected;
  if (s == "empirical") return PenaltyRoute::Empirical;
  throw std::invalid_argument("unknown penalty route '" + s + "'");
}

SymMatrix info_complete(const Params& theta) {
  const MixtureSpec& spec = theta.spec;
  const int k = spec.k();
  const int d = spec.free_dim();
  SymMatrix info = SymMatrix::Zero(d, d);
  if (k > 1) {
    const double last = theta.weights[k - 1];
    info.topLeftCorner(k - 1, k - 1).setConstant(1.0 / last);
    for (int j = 0; j < k - 1; ++j) info(j, j) += 1.0 / theta.weights[j];
  }
  for (int i = 0; i < k; ++i) {
    const double v = theta.variance(i);
    info(spec.mean_offset() + i, spec.mean_offset() + i) = theta.weights[i] / v;
    const int iv = spec.variance_offset() + spec.class_of(i);
    info(iv, iv) += theta.weights[i] / (2.0 * v * v);
  }
  return info;
}

SymMatrix info_complete_by_quadrature(const Params& theta, Eigen::Index nodes_per_component) {
  const int d = theta.spec.free_dim();
  SymMatrix info = SymMatrix::Zero(d, d);
  for (int z = 0; z < theta.k(); ++z) {
    const auto rule = gauss_hermite_normal(nodes_per_component, theta.means[z], std::sqrt(theta.variance(z)));
    info -= theta.weights[z] * quad_integrate([&](double y) { return hess_px(y, z, theta); }, rule);
  }
  return info;
}

IncompleteInfoForms info_incomplete_forms(const Params& theta, const QuadratureRule<double>& rule) {
  const int d = theta.spec.free_dim();
  IncompleteInfoForms out{SymMatrix::Zero(d, d), SymMatrix::Zero(d, d)};
  for (Eigen::Index i = 0; i < rule.size(); ++i) {
    const double y = rule.nodes[i];
    const double w = rule.weights[i] * std::exp(log_py(y, theta));
    if (w == 0.0) continue;
    const Vector s = score_py(y, theta);
    const SymMatrix h = hess_py(y, theta);
    if (!s.allFinite() || !h.allFinite()) {
      throw NonFiniteIntegrand("info_incomplete: non-finite score at y = " + std::to_string(y));
    }
    out.outer_product.noalias() += w * s * s.transpose();
    out.neg_hessian -= w * h;
  }
  return out;
}

SymMatrix info_incomplete(const Params& theta, const QuadratureRule<double>& rule) {
  // a single component leaves nothing missing: p_y = p_x
  if (theta.k() == 1) return info_complete(theta);
  IncompleteInfoForms forms = info_incomplete_forms(theta, rule);
  const double scale = forms.outer_product.cwiseAbs().maxCoeff();
  const double gap = (forms.outer_product - forms.neg_hessian).cwiseAbs().maxCoeff();
  if (gap > 1e-3 * scale) {
    throw QuadratureUnreliable("info_incomplete: outer-product and Hessian forms differ by " +
                               std::to_string(gap / scale) + " relative");
  }
  return std::move(forms.outer_product);
}

SymMatrix info_incomplete(const Params& theta) { return info_incomplete(theta, default_rule(theta)); }

SymMatrix info_missing(const Params& theta, const QuadratureRule<double>& rule) {
  const int d = theta.spec.free_dim();
  SymMatrix info = SymMatrix::Zero(d, d);
  if (theta.k() == 1) return info;
  for (Eigen::Index i = 0; i < rule.size(); ++i) {
    const double y = rule.nodes[i];
    const double w = rule.weights[i] * std::exp(log_py(y, theta));
    if (w == 0.0) continue;
    const Vector r = responsibilities(y, theta);
    const Vector s = score_py(y, theta);
    for (int z = 0; z < theta.k(); ++z) {
      if (r[z] == 0.0) continue;
      const Vector dev = score_px(y, z, theta) - s;
      if (!dev.allFinite()) {
        throw NonFiniteIntegrand("info_missing: non-finite score at y = " + std::to_string(y));
      }
      info.noalias() += (w * r[z]) * dev * dev.transpose();
    }
  }
  return info;
}

SymMatrix info_missing(const Params& theta) { return info_missing(theta, default_rule(theta)); }

EmpiricalGH empirical_GH(const IncompleteDataset& data, const Params& theta) {
  const int d = theta.spec.free_dim();
  EmpiricalGH out{SymMatrix::Zero(d, d), SymMatrix::Zero(d, d)};
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    const Vector s = score_py(data.y[t], theta);
    out.g.noalias() += s * s.transpose();
    out.h -= hess_py(data.y[t], theta);
  }
  const double n = static_cast<double>(data.size());
  out.g /= n;
  out.h /= n;
  return out;
}

SymMatrix empirical_Hx(const IncompleteDataset& data, const Params& theta) {
  const int d = theta.spec.free_dim();
  const Eigen::MatrixXd r = e_step(data, theta);
  SymMatrix hx = SymMatrix::Zero(d, d);
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    for (int z = 0; z < theta.k(); ++z) hx -= r(t, z) * hess_px(data.y[t], z, theta);
  }
  return hx / static_cast<double>(data.size());
}

namespace {

double sem_trace(const IncompleteDataset& data, const Params& theta_hat, const Vector& steps, SymMatrix* dm_out) {
  const MixtureSpec& spec = theta_hat.spec;
  const Vector at = pack(theta_hat);
  const SymMatrix dm =
      central_diff_jacobian([&](const Vector& v) { return em_map_free(spec, v, data); }, at, steps);
  const SymMatrix a = SymMatrix::Identity(dm.rows(), dm.cols()) - dm;
  const Eigen::PartialPivLU<SymMatrix> lu(a);
  if (!(lu.rcond() > 1e-12)) {
    throw NotPositiveDefinite("sem_penalty: identity minus rate matrix is numerically singular");
  }
  if (dm_out) *dm_out = dm;
  return lu.inverse().trace();
}

}  // namespace

SemEstimate sem_penalty(const IncompleteDataset& data, const Params& theta_hat, double rel_step) {
  if (!(rel_step > 0)) throw std::invalid_argument("sem_penalty: step must be positive");
  SemEstimate out;
  const Vector steps = relative_steps(pack(theta_hat), rel_step);
  out.value = sem_trace(data, theta_hat, steps, &out.rate_matrix);
  out.value_half_step = sem_trace(data, theta_hat, steps / 2.0, nullptr);
  out.relative_disagreement = std::abs(out.value - out.value_half_step) / std::abs(out.value);
  out.flagged = out.relative_disagreement > 0.01;
  return out;
}

FisherBundle bundle(const Params& theta, PenaltyRoute route, const IncompleteDataset* data) {
  if (route == PenaltyRoute::Empirical && data == nullptr) {
    throw std::invalid_argument("bundle: the empirical penalty route needs data");
  }
  FisherBundle b{theta, info_complete(theta), info_incomplete(theta), {}, {}, {}, {}, route, 0.0};
  b.i_zy = info_missing(theta);
  if (data != nullptr) {
    EmpiricalGH gh = empirical_GH(*data, theta);
    b.g_hat = std::move(gh.g);
    b.h_hat = std::move(gh.h);
    b.hx_hat = empirical_Hx(*data, theta);
  }
  if (route == PenaltyRoute::Expected) {
    b.penalty_trace = theta.k() == 1 ? theta.spec.free_dim() : trace_product_inv(b.i_x, b.i_y);
  } else {
    b.penalty_trace = trace_product_inv(*b.hx_hat, *b.h_hat);
  }
  return b;
}

}  // namespace misscrit
