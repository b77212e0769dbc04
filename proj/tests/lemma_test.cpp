#include <doctest.h>

#include "misscrit/lemma.hpp"

using namespace misscrit;

TEST_CASE("identical joints have zero divergences") {
  const DiscreteJoint g = random_joint(3, 3, 1);
  const Lemma1Residuals r = lemma1_check(g, g);
  CHECK(r.d_x == 0.0);
  CHECK(r.d_y == 0.0);
  // f_{z|y} g_y is recomposed from g, so only rounding separates it from g
  CHECK(std::abs(r.d_x_to_data) <= 1e-15);
  CHECK(r.max_residual() <= 1e-15);
}

TEST_CASE("shared conditional collapses the complete divergence to the marginal one") {
  const DiscreteJoint f = random_joint(3, 3, 2);
  const DiscreteJoint g = compose(conditional_z_given_y(f), marginal_y(random_joint(3, 3, 3)));
  const Lemma1Residuals r = lemma1_check(g, f);
  CHECK(r.d_y > 0.0);
  CHECK(std::abs(r.d_x - r.d_y) <= 1e-12);
  CHECK(std::abs(r.d_x_to_data) <= 1e-12);
}

TEST_CASE("decompositions hold on random pairs by exhaustive summation") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const DiscreteJoint g = random_joint(3, 3, 1000 + s), f = random_joint(3, 3, 2000 + s),
                        h = random_joint(3, 3, 3000 + s);
    const Lemma1Residuals r = lemma1_check(g, f, h);
    CHECK(r.max_residual() <= 1e-12);
    CHECK(r.d_x >= r.d_y);  // marginalizing cannot increase divergence
    CHECK(r.d_x_to_data >= 0.0);
  }
}

TEST_CASE("explicit two-cell divergence") {
  DiscreteJoint g(1, 2), f(1, 2);
  g << 0.25, 0.75;
  f << 0.5, 0.5;
  CHECK(kl_divergence(g, f) == doctest::Approx(0.25 * std::log(0.5) + 0.75 * std::log(1.5)).epsilon(1e-15));
}

TEST_CASE("lemma1_check rejects invalid joints") {
  DiscreteJoint bad = random_joint(2, 2, 4);
  bad(0, 0) = 0.0;
  CHECK_THROWS_AS(lemma1_check(bad, random_joint(2, 2, 5)), std::invalid_argument);
  CHECK_THROWS_AS(lemma1_check(random_joint(2, 3, 6), random_joint(3, 2, 7)), std::invalid_argument);
}
