#include "misscrit/em.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <random>

namespace misscrit {

std::string to_string(InitMethod m) {
  switch (m) {
    case InitMethod::TrueAnchored: return "true-anchored";
    case InitMethod::Quantile: return "quantile";
    case InitMethod::Random: return "random";
  }
  return "unknown";
}

InitMethod parse_init_method(const std::string& s) {
  if (s == "true-anchored") return InitMethod::TrueAnchored;
  if (s == "quantile") return InitMethod::Quantile;
  if (s == "random") return InitMethod::Random;
  throw std::invalid_argument("unknown init method '" + s + "'");
}

void EmConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("EmConfig: max_iters must be >= 1");
  if (!(tol_loglik > 0)) throw std::invalid_argument("EmConfig: tol_loglik must be positive");
  if (n_restarts < 1) throw std::invalid_argument("EmConfig: n_restarts must be >= 1");
  if (init == InitMethod::TrueAnchored && !anchor) {
    throw std::invalid_argument("EmConfig: true-anchored init needs an anchor parameter point");
  }
}

double FitResult::max_trace_decrease() const {
  double worst = 0.0;
  for (std::size_t s = 1; s < loglik_trace.size(); ++s) {
    worst = std::max(worst, loglik_trace[s - 1] - loglik_trace[s]);
  }
  return worst;
}

namespace {

// Per-component constants of log pi_i + log N(y; mu_i, v_i).
struct ComponentTerms {
  Vector offset;     // log pi - 0.5 log(2 pi v)
  Vector inv_two_v;  // 1 / (2 v)
  Vector mean;

  explicit ComponentTerms(const Params& theta) : offset(theta.k()), inv_two_v(theta.k()), mean(theta.means) {
    for (int i = 0; i < theta.k(); ++i) {
      const double v = theta.variance(i);
      offset[i] = std::log(theta.weights[i]) - 0.5 * std::log(2.0 * std::numbers::pi * v);
      inv_two_v[i] = 0.5 / v;
    }
  }
};

}  // namespace

EStepResult e_step_with_loglik(const IncompleteDataset& data, const Params& theta) {
  const int k = theta.k();
  const Eigen::Index n = data.size();
  const ComponentTerms c(theta);
  EStepResult out{Eigen::MatrixXd(n, k), 0.0};
  Vector terms(k);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double y = data.y[t];
    for (int i = 0; i < k; ++i) {
      const double r = y - c.mean[i];
      terms[i] = c.offset[i] - r * r * c.inv_two_v[i];
    }
    const double m = terms.maxCoeff();
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += (terms[i] = std::exp(terms[i] - m));
    out.resp.row(t) = terms.transpose() / sum;
    out.loglik += m + std::log(sum);
  }
  return out;
}

Eigen::MatrixXd e_step(const IncompleteDataset& data, const Params& theta) {
  return e_step_with_loglik(data, theta).resp;
}

double log_likelihood(const IncompleteDataset& data, const Params& theta) {
  return e_step_with_loglik(data, theta).loglik;
}

double variance_floor_for(const IncompleteDataset& data) {
  const double mean = data.y.mean();
  const double var = (data.y.array() - mean).square().mean();
  return 1e-8 * var;
}

MStepResult m_step(const IncompleteDataset& data, const Eigen::Ref<const Eigen::MatrixXd>& weights,
                   const MixtureSpec& spec, double variance_floor) {
  const int k = spec.k();
  const Eigen::Index n = data.size();
  if (weights.rows() != n || weights.cols() != k) {
    throw std::invalid_argument("m_step: weight matrix must be n x k");
  }
  const Vector col_sums = weights.colwise().sum().transpose();
  for (int i = 0; i < k; ++i) {
    if (!(col_sums[i] > 1e-12 * static_cast<double>(n))) {
      throw EmptyComponent("m_step: component " + std::to_string(i + 1) + " has no responsibility mass");
    }
  }
  Params theta{spec, col_sums / col_sums.sum(), Vector(k), Vector(spec.num_classes())};
  theta.means = (weights.transpose() * data.y).cwiseQuotient(col_sums);

  MStepResult out{std::move(theta), false};
  for (int c = 0; c < spec.num_classes(); ++c) {
    double ss = 0.0, mass = 0.0;
    for (int i : spec.variance_classes()[c]) {
      ss += weights.col(i).dot((data.y.array() - out.theta.means[i]).square().matrix());
      mass += col_sums[i];
    }
    double v = ss / mass;
    if (!(v > variance_floor)) {
      v = variance_floor > 0 ? variance_floor : std::numeric_limits<double>::min();
      out.floor_hit = true;
    }
    out.theta.class_variances[c] = v;
  }
  if (k > 1 && (out.theta.weights.minCoeff() <= 0.0 || out.theta.weights.maxCoeff() >= 1.0)) {
    throw EmptyComponent("m_step: weights left the open simplex");
  }
  return out;
}

double q_function(const Params& theta2, const Params& theta1, const IncompleteDataset& data) {
  const Eigen::MatrixXd r = e_step(data, theta1);
  const ComponentTerms c(theta2);
  double q = 0.0;
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    for (int i = 0; i < theta2.k(); ++i) {
      const double res = data.y[t] - c.mean[i];
      q += r(t, i) * (c.offset[i] - res * res * c.inv_two_v[i]);
    }
  }
  return q;
}

Params em_map(const Params& theta, const IncompleteDataset& data) {
  return m_step(data, e_step(data, theta), theta.spec).theta;
}

Vector em_map_free(const MixtureSpec& spec, const Vector& free, const IncompleteDataset& data) {
  return pack(em_map(unpack(spec, free), data));
}

double diff_term(const IncompleteDataset& data, const Params& theta) {
  const Eigen::MatrixXd r = e_step(data, theta);
  double acc = 0.0;
  for (Eigen::Index t = 0; t < r.rows(); ++t) {
    for (Eigen::Index i = 0; i < r.cols(); ++i) {
      const double p = r(t, i);
      if (p > 0.0) acc += p * std::log(p);
    }
  }
  return 2.0 * acc;
}

namespace {

Params quantile_init(const IncompleteDataset& data, const MixtureSpec& spec) {
  const int k = spec.k();
  std::vector<double> sorted(data.y.data(), data.y.data() + data.size());
  std::sort(sorted.begin(), sorted.end());
  const double var = (data.y.array() - data.y.mean()).square().mean();
  Vector means(k);
  for (int i = 0; i < k; ++i) {
    const double q = (i + 0.5) / k;
    means[i] = sorted[static_cast<std::size_t>(q * static_cast<double>(sorted.size() - 1))];
  }
  return Params{spec, Vector::Constant(k, 1.0 / k), means, Vector::Constant(spec.num_classes(), var / k)};
}

Params random_init(const IncompleteDataset& data, const MixtureSpec& spec, std::uint64_t seed) {
  const int k = spec.k();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.size() - 1);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Vector w(k);
  for (int i = 0; i < k; ++i) w[i] = 0.05 + gamma(rng);
  w /= w.sum();
  Vector means(k);
  for (int i = 0; i < k; ++i) means[i] = data.y[pick(rng)];
  const double var = (data.y.array() - data.y.mean()).square().mean();
  return Params{spec, w, means, Vector::Constant(spec.num_classes(), var)};
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(restart + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

FitResult run_from(const IncompleteDataset& data, Params theta, const EmConfig& cfg, double floor) {
  const double n = static_cast<double>(data.size());
  FitResult fit{theta, 0.0, 0, false, false, {}, 0.0};
  fit.loglik_trace.reserve(64);
  for (int s = 0;; ++s) {
    EStepResult es = e_step_with_loglik(data, theta);
    fit.loglik_trace.push_back(es.loglik);
    if (s >= cfg.max_iters) {
      fit.theta_hat = theta;
      fit.loglik = es.loglik;
      fit.fixed_point_residual = (pack(em_map(theta, data)) - pack(theta)).lpNorm<Eigen::Infinity>();
      return fit;
    }
    MStepResult ms;
    try {
      ms = m_step(data, es.resp, theta.spec, floor);
    } catch (const EmptyComponent&) {
      ms = MStepResult{theta, true};
    }
    if (ms.floor_hit) {
      fit.theta_hat = theta;
      fit.loglik = es.loglik;
      fit.degenerate = true;
      return fit;
    }
    const double step = (pack(ms.theta) - pack(theta)).lpNorm<Eigen::Infinity>();
    const bool small_change =
        s > 0 && std::abs(es.loglik - fit.loglik_trace[fit.loglik_trace.size() - 2]) / n < cfg.tol_loglik;
    if (small_change && step <= 10.0 * cfg.tol_loglik) {
      fit.theta_hat = theta;
      fit.loglik = es.loglik;
      fit.converged = true;
      fit.fixed_point_residual = step;
      return fit;
    }
    theta = std::move(ms.theta);
    fit.iters = s + 1;
  }
}

}  // namespace

FitResult fit_em(const IncompleteDataset& data, const MixtureSpec& spec, const EmConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.size() < spec.free_dim()) {
    throw std::invalid_argument("fit_em: need at least d = " + std::to_string(spec.free_dim()) +
                                " observations, got " + std::to_string(data.size()));
  }
  const double floor = variance_floor_for(data);
  std::optional<FitResult> best;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    Params start = [&] {
      if (r == 0 && cfg.init == InitMethod::TrueAnchored) return project_to_spec(*cfg.anchor, spec);
      if (r == 0 && cfg.init == InitMethod::Quantile) return quantile_init(data, spec);
      return random_init(data, spec, restart_seed(cfg.seed, r));
    }();
    FitResult fit = run_from(data, std::move(start), cfg, floor);
    if (fit.degenerate) continue;
    if (!best || fit.loglik > best->loglik) best = std::move(fit);
  }
  if (!best) {
    throw AllRestartsDegenerate("fit_em: every restart of " + (spec.label().empty() ? "the model" : spec.label()) +
                                " hit the variance floor");
  }
  return *std::move(best);
}

}  // namespace misscrit
