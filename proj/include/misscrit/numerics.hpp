#pragma once

// Small dense symmetric linear algebra, 1-D quadrature and central
// differences. Everything here is templated on the scalar type and takes
// Eigen expressions, so callers can pass blocks and products without copies.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

#include "misscrit/errors.hpp"

namespace misscrit {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Symmetric matrices are stored densely; symmetry is an invariant of the
// producer, not of the type.
template <typename Scalar>
using SymMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using SymMatrix = SymMatrixX<double>;

// a^{-1} b for symmetric positive definite a. Fails rather than regularizes.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_spd(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != a.cols() || a.rows() != b.rows()) {
    throw std::invalid_argument("solve_spd: dimension mismatch");
  }
  const Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> llt(a.eval());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("solve_spd: matrix is not positive definite");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x = llt.solve(b.eval());
  if (!x.allFinite()) {
    throw NotPositiveDefinite("solve_spd: factorization produced non-finite solution");
  }
  return x;
}

// tr(a b^{-1}) for symmetric a and SPD b.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar trace_product_inv(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("trace_product_inv: dimension mismatch");
  }
  // tr(a b^{-1}) = tr(b^{-1} a)
  return solve_spd(b, a).trace();
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const SymMatrixX<Scalar> s = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<SymMatrixX<Scalar>> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const SymMatrixX<Scalar> s = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<SymMatrixX<Scalar>> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// PSD up to a tolerance relative to the spectral norm.
template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar rel_tol = 1e-8) {
  const auto norm = spectral_norm(a);
  return min_eigenvalue(a) >= -rel_tol * norm;
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  const auto scale = std::max(a.cwiseAbs().maxCoeff(), typename Derived::Scalar(1e-300));
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

enum class QuadratureKind { CompositeUniform, GaussHermite };

template <typename Scalar>
struct QuadratureRule {
  VectorX<Scalar> nodes;
  VectorX<Scalar> weights;
  QuadratureKind kind = QuadratureKind::CompositeUniform;

  Eigen::Index size() const { return nodes.size(); }
};

// Composite Simpson on [lo, hi]; n_nodes must be odd and >= 3.
template <typename Scalar = double>
QuadratureRule<Scalar> composite_simpson(Scalar lo, Scalar hi, Eigen::Index n_nodes = 4001) {
  if (n_nodes < 3 || n_nodes % 2 == 0) {
    throw std::invalid_argument("composite_simpson: node count must be odd and >= 3");
  }
  if (!(hi > lo)) {
    throw std::invalid_argument("composite_simpson: empty interval");
  }
  QuadratureRule<Scalar> rule;
  rule.kind = QuadratureKind::CompositeUniform;
  rule.nodes = VectorX<Scalar>::LinSpaced(n_nodes, lo, hi);
  rule.weights.resize(n_nodes);
  const Scalar h = (hi - lo) / Scalar(n_nodes - 1);
  for (Eigen::Index i = 0; i < n_nodes; ++i) {
    Scalar c = (i == 0 || i == n_nodes - 1) ? Scalar(1) : (i % 2 == 1 ? Scalar(4) : Scalar(2));
    rule.weights[i] = c * h / Scalar(3);
  }
  return rule;
}

// Gauss-Hermite rule for expectations under N(mean, sd^2): the weights already
// carry the normal density and sum to one. Nodes come from the Golub-Welsch
// eigenproblem of the Hermite Jacobi matrix.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_hermite_normal(Eigen::Index n_nodes, Scalar mean, Scalar sd) {
  if (n_nodes < 1) throw std::invalid_argument("gauss_hermite_normal: need at least one node");
  if (!(sd > 0)) throw std::invalid_argument("gauss_hermite_normal: sd must be positive");
  SymMatrixX<Scalar> jacobi = SymMatrixX<Scalar>::Zero(n_nodes, n_nodes);
  for (Eigen::Index i = 1; i < n_nodes; ++i) {
    // probabilists' Hermite recurrence: off-diagonal sqrt(i)
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(Scalar(i));
  }
  Eigen::SelfAdjointEigenSolver<SymMatrixX<Scalar>> es(jacobi);
  QuadratureRule<Scalar> rule;
  rule.kind = QuadratureKind::GaussHermite;
  rule.nodes = mean + sd * es.eigenvalues().array();
  rule.weights = es.eigenvectors().row(0).transpose().array().square();
  return rule;
}

namespace detail {
template <typename T>
bool all_finite(const T& v) {
  if constexpr (std::is_arithmetic_v<T>) {
    return std::isfinite(v);
  } else {
    return v.allFinite();
  }
}

template <typename T, bool = std::is_arithmetic_v<T>>
struct accumulator {
  using type = T;
};
template <typename T>
struct accumulator<T, false> {
  using type = typename Eigen::internal::plain_matrix_type<T>::type;
};
}  // namespace detail

// Sum of weights * f(nodes). f may return a scalar or any fixed-shape Eigen
// object; the shape of the first evaluation fixes the accumulator.
template <typename Scalar, typename F>
auto quad_integrate(F&& f, const QuadratureRule<Scalar>& rule) {
  using Result = std::decay_t<decltype(f(rule.nodes[0]))>;
  using Acc = typename detail::accumulator<Result>::type;
  if (rule.size() == 0) throw std::invalid_argument("quad_integrate: empty rule");
  Acc acc = f(rule.nodes[0]);
  if (!detail::all_finite(acc)) {
    throw NonFiniteIntegrand("quad_integrate: non-finite integrand at node " +
                             std::to_string(static_cast<double>(rule.nodes[0])));
  }
  acc = acc * rule.weights[0];
  for (Eigen::Index i = 1; i < rule.size(); ++i) {
    Acc v = f(rule.nodes[i]);
    if (!detail::all_finite(v)) {
      throw NonFiniteIntegrand("quad_integrate: non-finite integrand at node " +
                               std::to_string(static_cast<double>(rule.nodes[i])));
    }
    acc += rule.weights[i] * v;
  }
  return acc;
}

// Per-coordinate steps rel * (1 + |x_j|).
template <typename Derived>
VectorX<typename Derived::Scalar> relative_steps(const Eigen::MatrixBase<Derived>& at,
                                                 typename Derived::Scalar rel = 1e-5) {
  return rel * (at.array().abs() + 1).matrix();
}

// Central-difference Jacobian with one step per coordinate.
template <typename F, typename Derived, typename DerivedS>
SymMatrixX<typename Derived::Scalar> central_diff_jacobian(F&& f,
                                                           const Eigen::MatrixBase<Derived>& at,
                                                           const Eigen::MatrixBase<DerivedS>& steps) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = at.size();
  if (steps.size() != n) throw std::invalid_argument("central_diff_jacobian: step size mismatch");
  VectorX<Scalar> x = at;
  SymMatrixX<Scalar> jac;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Scalar h = steps[j];
    if (!(h > 0)) throw std::invalid_argument("central_diff_jacobian: step must be positive");
    x[j] = at[j] + h;
    const VectorX<Scalar> up = f(x);
    x[j] = at[j] - h;
    const VectorX<Scalar> down = f(x);
    x[j] = at[j];
    if (!up.allFinite() || !down.allFinite()) {
      throw NonFiniteValue("central_diff_jacobian: non-finite evaluation along coordinate " +
                           std::to_string(j));
    }
    if (j == 0) jac.resize(up.size(), n);
    jac.col(j) = (up - down) / (Scalar(2) * h);
  }
  return jac;
}

template <typename F, typename Derived>
SymMatrixX<typename Derived::Scalar> central_diff_jacobian(F&& f,
                                                           const Eigen::MatrixBase<Derived>& at,
                                                           typename Derived::Scalar step) {
  const VectorX<typename Derived::Scalar> steps =
      VectorX<typename Derived::Scalar>::Constant(at.size(), step);
  return central_diff_jacobian(std::forward<F>(f), at, steps);
}

// log(sum(exp(v))) without overflow.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

}  // namespace misscrit
