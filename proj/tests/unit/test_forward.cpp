#include <cmath>

#include "doctest.h"
#include "eit/forward.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eit;
using test::theta_of;

TEST_CASE("unit conductivity gives the zero matrix") {
  auto model = test::canonical_model(0.1);
  const Eigen::MatrixXd g = model.forward_matrix(theta_of({1.0, 1.0})).G;
  CHECK(g.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(model.evaluate_reference(theta_of({1.0, 1.0}), false).matrix.G.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("G is symmetric and matches the literal energy difference") {
  auto model = test::canonical_model(0.1);
  const Theta theta = theta_of({2.0, 1.5});
  const Eigen::MatrixXd g = model.forward_matrix(theta).G;
  CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
  const Eigen::MatrixXd oracle = oracle::energy_difference_matrix(model, theta);
  CHECK((g - oracle).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
}

TEST_CASE("condensed and sparse paths agree") {
  auto model = test::canonical_model(0.05);
  for (const Theta& theta : {theta_of({2.0, 1.5}), theta_of({0.5, 4.0}), theta_of({3.3, 0.7})}) {
    const ForwardEvaluation fast = model.evaluate(theta, true);
    const ForwardEvaluation ref = model.evaluate_reference(theta, true);
    const double scale = ref.matrix.G.cwiseAbs().maxCoeff();
    CHECK((fast.matrix.G - ref.matrix.G).cwiseAbs().maxCoeff() <= 1e-10 * scale);
    for (int k = 0; k < 2; ++k)
      CHECK((fast.sensitivity.slices[k] - ref.sensitivity.slices[k]).cwiseAbs().maxCoeff() <=
            1e-10 * ref.sensitivity.slices[k].cwiseAbs().maxCoeff());
    CHECK(model.last_residual() <= 1e-8);
  }
}

TEST_CASE("rotating the electrodes permutes G") {
  // Equal sectors of angle pi and 16 equal electrodes: a half turn maps
  // electrode i to i + 8 and swaps the two regions. The triangulation is not
  // itself half-turn symmetric, so agreement is up to discretization error.
  auto model = test::canonical_model(0.05);
  const Eigen::MatrixXd g = model.forward_matrix(theta_of({2.0, 1.5})).G;
  const Eigen::MatrixXd swapped = model.forward_matrix(theta_of({1.5, 2.0})).G;
  const double scale = g.cwiseAbs().maxCoeff();
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) CHECK(std::abs(g(i, j) - swapped((i + 8) % 16, (j + 8) % 16)) <= 5e-3 * scale);
}

TEST_CASE("forward matrix rejects theta outside the box") {
  auto model = test::canonical_model(0.1);
  CHECK_THROWS_AS(model.forward_matrix(theta_of({0.4, 1.0})), std::domain_error);
  CHECK_THROWS_AS(model.forward_matrix(theta_of({1.0, 4.1})), std::domain_error);
  CHECK_THROWS(model.forward_matrix(theta_of({1.0})));
}

TEST_CASE("sensitivity matches central differences") {
  auto model = test::canonical_model(0.1);
  const Theta theta = theta_of({2.0, 1.5});
  const SensitivityTensor s = model.sensitivity_tensor(theta);
  const SensitivityTensor fd = fd_sensitivity(model, theta, 1e-4);
  const SensitivityTensor fd_half = fd_sensitivity(model, theta, 5e-5);
  double worst = 0.0;
  for (int k = 0; k < 2; ++k) {
    const Eigen::MatrixXd& a = s.slices[k];
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < 16; ++i) {
      CHECK(a(i, i) >= 0.0);
      for (int j = 0; j < 16; ++j)
        if (std::abs(a(i, j)) > 1e-8) worst = std::max(worst, std::abs(fd.slices[k](i, j) - a(i, j)) / std::abs(a(i, j)));
    }
  }
  CHECK(worst <= 1e-3);
  // truncation error shrinks ~4x when the step halves (until noise)
  const double e1 = (fd.slices[0] - s.slices[0]).cwiseAbs().maxCoeff();
  const double e2 = (fd_half.slices[0] - s.slices[0]).cwiseAbs().maxCoeff();
  CHECK((e2 < e1 / 2.5 || e1 < 1e-9));
  CHECK_THROWS(fd_sensitivity(model, theta_of({0.50001, 1.0}), 1e-4));
  CHECK_THROWS(fd_sensitivity(model, theta, 0.0));
}

TEST_CASE("spectral oracle") {
  // closed-form mode check
  CHECK(oracle::concentric_eigenvalue(0.5, 2.0, 1) == doctest::Approx(13.0 / 11.0).epsilon(1e-15));
  CHECK(oracle::concentric_eigenvalue(0.5, 2.0, 1) - 1.0 == doctest::Approx(2.0 / 11.0).epsilon(1e-14));
  const Arc a{0.0, kTwoPi / 16};
  const Arc b{kTwoPi / 16, 2 * kTwoPi / 16};
  const Arc far{kPi, kPi + 0.3};
  for (const Arc* other : {&a, &b, &far}) {
    const SpectralValue v = spectral_oracle_entry(0.5, 2.0, a, *other, 200);
    CHECK(v.value == doctest::Approx(oracle::concentric_pairing(0.5, 2.0, a, *other)).epsilon(1e-10));
    CHECK(v.tail_bound >= 0.0);
    const SpectralValue coarse = spectral_oracle_entry(0.5, 2.0, a, *other, 5);
    CHECK(std::abs(coarse.value - v.value) <= coarse.tail_bound + 1e-15);
  }
  CHECK(spectral_oracle_entry(0.5, 1.0, a, b, 50).value == 0.0);
  const Arc circle{0.0, kTwoPi};
  CHECK(std::abs(spectral_oracle_entry(0.5, 2.0, circle, circle, 50).value) <= 1e-15);
  CHECK_THROWS(spectral_oracle_entry(1.0, 2.0, a, b, 10));
  CHECK_THROWS(spectral_oracle_entry(0.5, 0.0, a, b, 10));
  CHECK_THROWS(spectral_oracle_entry(0.5, 2.0, a, b, 0));
}

TEST_CASE("FEM matches the concentric oracle") {
  auto model = test::make_model(1, 0.5, 0.05);
  const Eigen::MatrixXd g = model.forward_matrix(theta_of({2.0})).G;
  const Eigen::MatrixXd spec = spectral_oracle_matrix(0.5, 2.0, model.electrodes(), 400);
  CHECK((g - spec).norm() / spec.norm() <= 0.05);
}

TEST_CASE("sensitivity at unit conductivity matches the mode derivative") {
  auto model = test::make_model(1, 0.5, 0.05);
  const SensitivityTensor s = model.sensitivity_tensor(theta_of({1.0}));
  for (int i = 0; i < model.electrode_count(); ++i) {
    const Arc& a = model.electrodes().arcs[i];
    const double expected = oracle::concentric_pairing_dk(0.5, 1.0, a, a);
    CHECK(std::abs(s(i, i, 0) - expected) <= 0.02 * expected);
  }
}

TEST_CASE("stability probe") {
  auto model = test::canonical_model(0.1);
  const StabilityReport r = stability_probe(model, 10, 99);
  CHECK(r.pairs.size() == 10);
  CHECK(r.flagged == 0);
  CHECK(r.max_ratio > 0.0);
  const StabilityReport longer = stability_probe(model, 20, 99);
  for (int p = 0; p < 10; ++p) CHECK(longer.pairs[p].theta == r.pairs[p].theta);
  CHECK_THROWS(stability_probe(model, 0, 1));
}

TEST_CASE("copies share geometry but evaluate independently") {
  auto model = test::canonical_model(0.1);
  int seen = 0;
  model.set_observer([&](const Eigen::MatrixXd& g) {
    ++seen;
    CHECK(spectral_norm(g) <= g.norm() * (1 + 1e-12));
  });
  ForwardModel copy(model);
  CHECK(&copy.mesh() == &model.mesh());
  const Eigen::MatrixXd a = model.forward_matrix(theta_of({2.0, 1.5})).G;
  const Eigen::MatrixXd b = copy.forward_matrix(theta_of({2.0, 1.5})).G;
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(seen == 2);
  CHECK(model.evaluation_count() == 1);
}
