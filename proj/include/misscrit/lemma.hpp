#pragma once

// Exhaustive-summation checks of the complete/incomplete divergence
// decomposition on finite supports. Joint distributions are |Y| x |Z|
// matrices of strictly positive probabilities summing to one.

#include <cstdint>

#include "misscrit/numerics.hpp"

namespace misscrit {

using DiscreteJoint = Eigen::MatrixXd;

// sum g log(g / f) over all cells
double kl_divergence(const Eigen::Ref<const Eigen::MatrixXd>& g, const Eigen::Ref<const Eigen::MatrixXd>& f);

Vector marginal_y(const DiscreteJoint& joint);
Eigen::MatrixXd conditional_z_given_y(const DiscreteJoint& joint);
// cond(y, z) * marginal(y)
DiscreteJoint compose(const Eigen::MatrixXd& conditional, const Vector& marginal);

struct Lemma1Residuals {
  double d_x = 0.0;             // D_x(g; f)
  double d_x_to_data = 0.0;     // D_x(g; f_{z|y} g_y)
  double d_y = 0.0;             // D_y(g_y; f_y)
  double d_x_data_to_model = 0.0;  // D_x(f_{z|y} g_y; f)
  double decomposition1 = 0.0;  // |D_x(g;f) - D_x(g; f_{z|y} g_y) - D_y(g_y; f_y)|
  double decomposition2 = 0.0;  // |D_x(g;f) - D_x(g; f_{z|y} g_y) - D_x(f_{z|y} g_y; f)|
  double any_conditional = 0.0; // |D_y(g_y; f_y) - D_x(h_{z|y} g_y; h_{z|y} f_y)|

  double max_residual() const;
};

// h supplies the arbitrary conditional of the marginal identity.
Lemma1Residuals lemma1_check(const DiscreteJoint& g, const DiscreteJoint& f, const DiscreteJoint& h);
Lemma1Residuals lemma1_check(const DiscreteJoint& g, const DiscreteJoint& f);

DiscreteJoint random_joint(Eigen::Index ny, Eigen::Index nz, std::uint64_t seed);

}  // namespace misscrit
