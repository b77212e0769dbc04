#include "misscrit/lemma.hpp"

#include <random>

namespace misscrit {
namespace {

void check_joint(const Eigen::Ref<const Eigen::MatrixXd>& p, const char* name) {
  if (p.size() == 0 || !(p.array() > 0.0).all() || !p.allFinite()) {
    throw std::invalid_argument(std::string("lemma1_check: ") + name + " must be strictly positive");
  }
  if (std::abs(p.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string("lemma1_check: ") + name + " must sum to one");
  }
}

}  // namespace

double kl_divergence(const Eigen::Ref<const Eigen::MatrixXd>& g, const Eigen::Ref<const Eigen::MatrixXd>& f) {
  if (g.rows() != f.rows() || g.cols() != f.cols()) throw std::invalid_argument("kl_divergence: shape mismatch");
  return (g.array() * (g.array().log() - f.array().log())).sum();
}

Vector marginal_y(const DiscreteJoint& joint) { return joint.rowwise().sum(); }

Eigen::MatrixXd conditional_z_given_y(const DiscreteJoint& joint) {
  return joint.array().colwise() / joint.rowwise().sum().array();
}

DiscreteJoint compose(const Eigen::MatrixXd& conditional, const Vector& marginal) {
  return conditional.array().colwise() * marginal.array();
}

double Lemma1Residuals::max_residual() const {
  return std::max({decomposition1, decomposition2, any_conditional});
}

Lemma1Residuals lemma1_check(const DiscreteJoint& g, const DiscreteJoint& f, const DiscreteJoint& h) {
  check_joint(g, "g");
  check_joint(f, "f");
  check_joint(h, "h");
  if (g.rows() != f.rows() || g.cols() != f.cols() || h.rows() != g.rows() || h.cols() != g.cols()) {
    throw std::invalid_argument("lemma1_check: supports differ");
  }
  const Vector gy = marginal_y(g);
  const Vector fy = marginal_y(f);
  const Eigen::MatrixXd f_cond = conditional_z_given_y(f);
  const Eigen::MatrixXd h_cond = conditional_z_given_y(h);
  const DiscreteJoint f_cond_gy = compose(f_cond, gy);

  Lemma1Residuals r;
  r.d_x = kl_divergence(g, f);
  r.d_x_to_data = kl_divergence(g, f_cond_gy);
  r.d_y = kl_divergence(gy, fy);
  r.d_x_data_to_model = kl_divergence(f_cond_gy, f);
  r.decomposition1 = std::abs(r.d_x - r.d_x_to_data - r.d_y);
  r.decomposition2 = std::abs(r.d_x - r.d_x_to_data - r.d_x_data_to_model);
  r.any_conditional = std::abs(r.d_y - kl_divergence(compose(h_cond, gy), compose(h_cond, fy)));
  return r;
}

Lemma1Residuals lemma1_check(const DiscreteJoint& g, const DiscreteJoint& f) { return lemma1_check(g, f, f); }

DiscreteJoint random_joint(Eigen::Index ny, Eigen::Index nz, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  DiscreteJoint p(ny, nz);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = 1e-3 + gamma(rng);
  return p / p.sum();
}

}  // namespace misscrit
