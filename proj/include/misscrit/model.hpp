#pragma once

// Univariate K-component Gaussian mixtures with variance tying.
//
// Free coordinates of a parameter point are laid out as
//   [pi_1 .. pi_{k-1}, mu_1 .. mu_k, s2_{class 1} .. s2_{class m}]
// with pi_k = 1 - sum of the others. Component labels are 0-based in the
// API and 1-based in files.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "misscrit/errors.hpp"
#include "misscrit/numerics.hpp"

namespace misscrit {

class MixtureSpec {
 public:
  // Single normal component.
  MixtureSpec() : MixtureSpec(1, {{0}}) {}
  // variance_classes holds 0-based component indices and must partition 0..k-1.
  MixtureSpec(int k, std::vector<std::vector<int>> variance_classes, std::string label = {});

  static MixtureSpec untied(int k, std::string label = {});
  static MixtureSpec fully_tied(int k, std::string label = {});

  int k() const { return k_; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  int free_dim() const { return (k_ - 1) + k_ + num_classes(); }
  int class_of(int component) const { return class_of_[component]; }
  const std::vector<std::vector<int>>& variance_classes() const { return classes_; }
  const std::string& label() const { return label_; }

  // Offsets into the free vector.
  int mean_offset() const { return k_ - 1; }
  int variance_offset() const { return 2 * k_ - 1; }

  friend bool operator==(const MixtureSpec& a, const MixtureSpec& b) {
    return a.k_ == b.k_ && a.classes_ == b.classes_;
  }

 private:
  int k_;
  std::vector<std::vector<int>> classes_;
  std::vector<int> class_of_;
  std::string label_;
};

template <typename Scalar>
struct MixtureParams {
  MixtureSpec spec;
  VectorX<Scalar> weights;
  VectorX<Scalar> means;
  VectorX<Scalar> class_variances;

  int k() const { return spec.k(); }
  Scalar variance(int component) const { return class_variances[spec.class_of(component)]; }

  VectorX<Scalar> component_variances() const {
    VectorX<Scalar> v(k());
    for (int i = 0; i < k(); ++i) v[i] = variance(i);
    return v;
  }

  // Throws ConstraintViolation unless weights lie in the open simplex and
  // every variance is positive.
  void validate() const;
};

using Params = MixtureParams<double>;

// Build a parameter point from per-component variances; fails when the values
// break the spec's tying pattern.
template <typename Scalar>
MixtureParams<Scalar> make_params(const MixtureSpec& spec, VectorX<Scalar> weights,
                                  VectorX<Scalar> means, const VectorX<Scalar>& component_variances);
// Accepts any Eigen expressions for the double case.
inline Params make_params(const MixtureSpec& spec, const Vector& weights, const Vector& means,
                          const Vector& component_variances);

// Map a point of one family onto another spec with the same k, pooling
// variances within each tying class by weight.
template <typename Scalar>
MixtureParams<Scalar> project_to_spec(const MixtureParams<Scalar>& theta, const MixtureSpec& spec);

// True when theta's variances already satisfy the spec's tying constraints.
bool satisfies_tying(const Params& theta, const MixtureSpec& spec, double rel_tol = 1e-12);

struct IncompleteDataset {
  Vector y;

  Eigen::Index size() const { return y.size(); }
  void validate() const;
};

struct CompleteDataset {
  Vector y;
  Eigen::VectorXi z;  // 0-based labels

  Eigen::Index size() const { return y.size(); }
  IncompleteDataset observed() const { return IncompleteDataset{y}; }
  void validate(int k) const;
};

// ---------------------------------------------------------------------------
// Densities

template <typename Scalar>
Scalar log_normal_density(Scalar y, Scalar mean, Scalar variance) {
  const Scalar r = y - mean;
  return Scalar(-0.5) * (std::log(Scalar(2) * std::numbers::pi_v<Scalar> * variance) + r * r / variance);
}

// log pi_i + log N(y; mu_i, s2_i) for every component.
template <typename Scalar>
VectorX<Scalar> log_joint_terms(Scalar y, const MixtureParams<Scalar>& theta) {
  VectorX<Scalar> out(theta.k());
  for (int i = 0; i < theta.k(); ++i) {
    out[i] = std::log(theta.weights[i]) + log_normal_density(y, theta.means[i], theta.variance(i));
  }
  return out;
}

template <typename Scalar>
Scalar log_py(Scalar y, const MixtureParams<Scalar>& theta) {
  return log_sum_exp(log_joint_terms(y, theta));
}

template <typename Scalar>
Scalar log_px(Scalar y, int z, const MixtureParams<Scalar>& theta) {
  if (z < 0 || z >= theta.k()) {
    throw LabelOutOfRange("log_px: label " + std::to_string(z) + " outside 0.." +
                          std::to_string(theta.k() - 1));
  }
  return std::log(theta.weights[z]) + log_normal_density(y, theta.means[z], theta.variance(z));
}

template <typename Scalar>
VectorX<Scalar> responsibilities(Scalar y, const MixtureParams<Scalar>& theta) {
  VectorX<Scalar> terms = log_joint_terms(y, theta);
  const Scalar lse = log_sum_exp(terms);
  return (terms.array() - lse).exp().matrix();
}

// ---------------------------------------------------------------------------
// Derivatives in free coordinates

template <typename Scalar>
VectorX<Scalar> score_px(Scalar y, int z, const MixtureParams<Scalar>& theta) {
  const MixtureSpec& spec = theta.spec;
  const int k = spec.k();
  if (z < 0 || z >= k) throw LabelOutOfRange("score_px: label out of range");
  VectorX<Scalar> s = VectorX<Scalar>::Zero(spec.free_dim());
  for (int j = 0; j < k - 1; ++j) {
    if (z == j) s[j] += Scalar(1) / theta.weights[j];
    if (z == k - 1) s[j] -= Scalar(1) / theta.weights[k - 1];
  }
  const Scalar v = theta.variance(z);
  const Scalar r = y - theta.means[z];
  s[spec.mean_offset() + z] = r / v;
  s[spec.variance_offset() + spec.class_of(z)] = r * r / (Scalar(2) * v * v) - Scalar(1) / (Scalar(2) * v);
  return s;
}

template <typename Scalar>
SymMatrixX<Scalar> hess_px(Scalar y, int z, const MixtureParams<Scalar>& theta) {
  const MixtureSpec& spec = theta.spec;
  const int k = spec.k();
  if (z < 0 || z >= k) throw LabelOutOfRange("hess_px: label out of range");
  const int d = spec.free_dim();
  SymMatrixX<Scalar> h = SymMatrixX<Scalar>::Zero(d, d);
  if (z == k - 1) {
    const Scalar last = theta.weights[k - 1];
    h.topLeftCorner(k - 1, k - 1).array() -= Scalar(1) / (last * last);
  } else {
    h(z, z) -= Scalar(1) / (theta.weights[z] * theta.weights[z]);
  }
  const Scalar v = theta.variance(z);
  const Scalar r = y - theta.means[z];
  const int im = spec.mean_offset() + z;
  const int iv = spec.variance_offset() + spec.class_of(z);
  h(im, im) = Scalar(-1) / v;
  h(im, iv) = h(iv, im) = -r / (v * v);
  h(iv, iv) = -r * r / (v * v * v) + Scalar(1) / (Scalar(2) * v * v);
  return h;
}

// Gradient of log p_y; the conditional expectation of score_px.
template <typename Scalar>
VectorX<Scalar> score_py(Scalar y, const MixtureParams<Scalar>& theta) {
  const VectorX<Scalar> r = responsibilities(y, theta);
  VectorX<Scalar> s = VectorX<Scalar>::Zero(theta.spec.free_dim());
  for (int z = 0; z < theta.k(); ++z) s += r[z] * score_px(y, z, theta);
  return s;
}

// Hessian of log p_y = E_{z|y}[hess_px + s_x s_x^T] - s_y s_y^T.
template <typename Scalar>
SymMatrixX<Scalar> hess_py(Scalar y, const MixtureParams<Scalar>& theta) {
  const VectorX<Scalar> r = responsibilities(y, theta);
  const int d = theta.spec.free_dim();
  SymMatrixX<Scalar> h = SymMatrixX<Scalar>::Zero(d, d);
  VectorX<Scalar> sy = VectorX<Scalar>::Zero(d);
  for (int z = 0; z < theta.k(); ++z) {
    const VectorX<Scalar> sx = score_px(y, z, theta);
    h += r[z] * (hess_px(y, z, theta) + sx * sx.transpose());
    sy += r[z] * sx;
  }
  h -= sy * sy.transpose();
  return h;
}

// ---------------------------------------------------------------------------
// Packing

template <typename Scalar>
VectorX<Scalar> pack(const MixtureParams<Scalar>& theta) {
  const MixtureSpec& spec = theta.spec;
  VectorX<Scalar> v(spec.free_dim());
  v.head(spec.k() - 1) = theta.weights.head(spec.k() - 1);
  v.segment(spec.mean_offset(), spec.k()) = theta.means;
  v.tail(spec.num_classes()) = theta.class_variances;
  return v;
}

template <typename Derived>
MixtureParams<typename Derived::Scalar> unpack(const MixtureSpec& spec,
                                               const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() != spec.free_dim()) {
    throw std::invalid_argument("unpack: free vector has size " + std::to_string(v.size()) +
                                ", spec needs " + std::to_string(spec.free_dim()));
  }
  MixtureParams<Scalar> theta{spec, VectorX<Scalar>(spec.k()), v.segment(spec.mean_offset(), spec.k()),
                              v.tail(spec.num_classes())};
  theta.weights.head(spec.k() - 1) = v.head(spec.k() - 1);
  theta.weights[spec.k() - 1] = Scalar(1) - v.head(spec.k() - 1).sum();
  theta.validate();
  return theta;
}

// ---------------------------------------------------------------------------
// Sampling

CompleteDataset sample(const Params& theta, Eigen::Index n, std::uint64_t seed);

// Quadrature domain that holds essentially all of p_y's mass.
QuadratureRule<double> default_rule(const Params& theta, Eigen::Index n_nodes = 4001);

// ---------------------------------------------------------------------------
// Template definitions

template <typename Scalar>
void MixtureParams<Scalar>::validate() const {
  const int kk = spec.k();
  if (weights.size() != kk || means.size() != kk || class_variances.size() != spec.num_classes()) {
    throw ConstraintViolation("parameter sizes do not match spec");
  }
  for (int i = 0; i < kk; ++i) {
    if (!(weights[i] > Scalar(0)) || !(weights[i] < Scalar(1) || kk == 1)) {
      throw ConstraintViolation("weight " + std::to_string(i + 1) + " outside the open simplex");
    }
    if (!std::isfinite(static_cast<double>(means[i]))) {
      throw ConstraintViolation("mean " + std::to_string(i + 1) + " is not finite");
    }
  }
  if (std::abs(static_cast<double>(weights.sum()) - 1.0) > 1e-9) {
    throw ConstraintViolation("weights do not sum to one");
  }
  for (Eigen::Index c = 0; c < class_variances.size(); ++c) {
    if (!(class_variances[c] > Scalar(0)) || !std::isfinite(static_cast<double>(class_variances[c]))) {
      throw ConstraintViolation("variance of class " + std::to_string(c + 1) + " is not positive");
    }
  }
}

template <typename Scalar>
MixtureParams<Scalar> make_params(const MixtureSpec& spec, VectorX<Scalar> weights,
                                  VectorX<Scalar> means, const VectorX<Scalar>& component_variances) {
  if (component_variances.size() != spec.k()) {
    throw ConstraintViolation("make_params: need one variance per component");
  }
  VectorX<Scalar> cv(spec.num_classes());
  for (int c = 0; c < spec.num_classes(); ++c) {
    const auto& members = spec.variance_classes()[c];
    cv[c] = component_variances[members.front()];
    for (int i : members) {
      if (std::abs(static_cast<double>(component_variances[i] - cv[c])) >
          1e-12 * std::abs(static_cast<double>(cv[c]))) {
        throw ConstraintViolation("make_params: variances break the tying pattern of class " +
                                  std::to_string(c + 1));
      }
    }
  }
  MixtureParams<Scalar> theta{spec, std::move(weights), std::move(means), std::move(cv)};
  theta.validate();
  return theta;
}

inline Params make_params(const MixtureSpec& spec, const Vector& weights, const Vector& means,
                          const Vector& component_variances) {
  return make_params<double>(spec, weights, means, component_variances);
}

template <typename Scalar>
MixtureParams<Scalar> project_to_spec(const MixtureParams<Scalar>& theta, const MixtureSpec& spec) {
  if (theta.k() != spec.k()) {
    throw std::invalid_argument("project_to_spec: component counts differ");
  }
  VectorX<Scalar> cv(spec.num_classes());
  for (int c = 0; c < spec.num_classes(); ++c) {
    Scalar num = 0, den = 0;
    for (int i : spec.variance_classes()[c]) {
      num += theta.weights[i] * theta.variance(i);
      den += theta.weights[i];
    }
    cv[c] = num / den;
  }
  MixtureParams<Scalar> out{spec, theta.weights, theta.means, std::move(cv)};
  out.validate();
  return out;
}

}  // namespace misscrit
