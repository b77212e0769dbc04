#include "misscrit/model.hpp"

#include <algorithm>
#include <random>

namespace misscrit {

MixtureSpec::MixtureSpec(int k, std::vector<std::vector<int>> variance_classes, std::string label)
    : k_(k), classes_(std::move(variance_classes)), class_of_(k > 0 ? k : 0, -1), label_(std::move(label)) {
  if (k_ < 1) throw ConstraintViolation("mixture spec needs at least one component");
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    if (classes_[c].empty()) throw ConstraintViolation("empty variance class");
    for (int i : classes_[c]) {
      if (i < 0 || i >= k_) {
        throw ConstraintViolation("variance class refers to component " + std::to_string(i + 1) +
                                  " of a " + std::to_string(k_) + "-component mixture");
      }
      if (class_of_[i] != -1) {
        throw ConstraintViolation("component " + std::to_string(i + 1) + " is in two variance classes");
      }
      class_of_[i] = static_cast<int>(c);
    }
  }
  for (int i = 0; i < k_; ++i) {
    if (class_of_[i] == -1) {
      throw ConstraintViolation("component " + std::to_string(i + 1) + " has no variance class");
    }
  }
}

MixtureSpec MixtureSpec::untied(int k, std::string label) {
  std::vector<std::vector<int>> classes;
  for (int i = 0; i < k; ++i) classes.push_back({i});
  return MixtureSpec(k, std::move(classes), std::move(label));
}

MixtureSpec MixtureSpec::fully_tied(int k, std::string label) {
  std::vector<int> all(k);
  for (int i = 0; i < k; ++i) all[i] = i;
  return MixtureSpec(k, {all}, std::move(label));
}

bool satisfies_tying(const Params& theta, const MixtureSpec& spec, double rel_tol) {
  if (theta.k() != spec.k()) return false;
  for (const auto& members : spec.variance_classes()) {
    const double v0 = theta.variance(members.front());
    for (int i : members) {
      if (std::abs(theta.variance(i) - v0) > rel_tol * v0) return false;
    }
  }
  return true;
}

void IncompleteDataset::validate() const {
  if (y.size() == 0) throw ConstraintViolation("dataset is empty");
  if (!y.allFinite()) throw ConstraintViolation("dataset contains non-finite values");
}

void CompleteDataset::validate(int k) const {
  if (y.size() == 0) throw ConstraintViolation("dataset is empty");
  if (z.size() != y.size()) throw ConstraintViolation("label column length differs from y");
  if (!y.allFinite()) throw ConstraintViolation("dataset contains non-finite values");
  for (Eigen::Index t = 0; t < z.size(); ++t) {
    if (z[t] < 0 || z[t] >= k) {
      throw LabelOutOfRange("row " + std::to_string(t + 1) + ": label " + std::to_string(z[t] + 1) +
                            " outside 1.." + std::to_string(k));
    }
  }
}

CompleteDataset sample(const Params& theta, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be at least 1");
  theta.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int k = theta.k();
  Vector cumulative(k);
  double acc = 0.0;
  for (int i = 0; i < k; ++i) cumulative[i] = (acc += theta.weights[i]);
  const Vector sd = theta.component_variances().array().sqrt();

  CompleteDataset data{Vector(n), Eigen::VectorXi(n)};
  for (Eigen::Index t = 0; t < n; ++t) {
    const double u = unif(rng) * acc;
    int z = 0;
    while (z < k - 1 && u >= cumulative[z]) ++z;
    data.z[t] = z;
    data.y[t] = theta.means[z] + sd[z] * normal(rng);
  }
  return data;
}

QuadratureRule<double> default_rule(const Params& theta, Eigen::Index n_nodes) {
  const double max_sd = std::sqrt(theta.class_variances.maxCoeff());
  return composite_simpson(theta.means.minCoeff() - 10.0 * max_sd, theta.means.maxCoeff() + 10.0 * max_sd,
                           n_nodes);
}

}  // namespace misscrit
