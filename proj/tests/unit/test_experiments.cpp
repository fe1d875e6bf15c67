#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include <Eigen/LU>

#include "eit/experiments.hpp"
#include "fixtures.hpp"

using namespace eit;
using test::theta_of;

namespace {

PosteriorSettings quick_settings(const ForwardModel& model) {
  PosteriorSettings s;
  s.prior.support = model.box();
  s.iters = 1500;
  s.burnin = 500;
  return s;
}

}  // namespace

TEST_CASE("log-log slope") {
  const std::vector<double> n{250, 1000, 4000};
  std::vector<double> y;
  for (double v : n) y.push_back(3.0 / std::sqrt(v));
  CHECK(loglog_slope(n, y) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK_THROWS(loglog_slope({1.0}, {1.0}));
  CHECK_THROWS(loglog_slope({1.0, 2.0}, {1.0}));
}

TEST_CASE("parallel_for_models visits each item once and rethrows") {
  auto model = test::canonical_model(0.2);
  std::vector<int> hits(25, 0);
  parallel_for_models(model, 25, 3, [&](ForwardModel&, int i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for_models(model, 5, 2,
                                      [](ForwardModel&, int i) {
                                        if (i == 3) throw std::runtime_error("boom");
                                      }),
                  std::runtime_error);
}

TEST_CASE("posterior run without data returns the box centroid") {
  auto model = test::canonical_model(0.2);
  PosteriorSettings s = quick_settings(model);
  s.iters = 40000;
  s.burnin = 2000;
  SufficientStatistics none;
  none.counts = Eigen::VectorXd::Zero(16);
  none.sums = Eigen::MatrixXd::Zero(16, 16);
  const PosteriorRun run = run_posterior(model, none, s, 3);
  CHECK((run.mean - theta_of({2.25, 2.25})).cwiseAbs().maxCoeff() <= 0.15);
}

TEST_CASE("posterior concentrates near the truth") {
  auto model = test::canonical_model(0.1);
  const Theta theta0 = theta_of({2.0, 1.5});
  const SufficientStatistics stats = SufficientStatistics::from(simulate(model, theta0, 4000, 8));
  const PosteriorRun run = run_posterior(model, stats, quick_settings(model), 8);
  const InformationMatrix info = information_matrix(model, theta0);
  const double scale = std::sqrt(info.matrix.inverse().trace() / 4000.0);
  CHECK((run.mean - theta0).norm() <= 5.0 * scale);
  CHECK(run.chain.acceptance_rate > 0.1);
  CHECK(run.chain.acceptance_rate < 0.5);

  PosteriorSettings fixed = quick_settings(model);
  fixed.proposal = ProposalKind::Fixed;
  const PosteriorRun plain = run_posterior(model, stats, fixed, 8);
  CHECK(plain.start == theta_of({2.25, 2.25}));
  CHECK((plain.mean - theta0).norm() <= 10.0 * scale);
}

TEST_CASE("coverage experiment is reproducible across job counts") {
  auto model = test::canonical_model(0.2);
  const Theta theta0 = theta_of({2.0, 1.5});
  const CoverageResult a = coverage_experiment(model, theta0, 500, 4, 0.1, quick_settings(model), 99, 1);
  const CoverageResult b = coverage_experiment(model, theta0, 500, 4, 0.1, quick_settings(model), 99, 2);
  REQUIRE(a.records.size() == 4);
  std::set<std::uint64_t> seeds;
  for (int r = 0; r < 4; ++r) {
    CHECK(a.records[r].mean == b.records[r].mean);
    CHECK(a.records[r].radius == b.records[r].radius);
    seeds.insert(a.records[r].seed);
  }
  CHECK(seeds.size() == 4);
  CHECK(a.coverage_rate == b.coverage_rate);
  // alpha -> 0: the ball holds every draw
  const CoverageResult wide = coverage_experiment(model, theta0, 500, 4, 1e-6, quick_settings(model), 99, 1);
  for (const auto& rec : wide.records) CHECK(rec.radius >= a.records[rec.replicate].radius);
  CHECK_THROWS(coverage_experiment(model, theta0, 500, 0, 0.1, quick_settings(model), 1, 1));
  CHECK_THROWS(coverage_experiment(model, theta_of({0.5, 1.5}), 500, 2, 0.1, quick_settings(model), 1, 1));
}

TEST_CASE("rate experiment records") {
  auto model = test::canonical_model(0.2);
  const RateResult r =
      rate_experiment(model, theta_of({2.0, 1.5}), {100, 200, 400}, 3, quick_settings(model), 5, 1);
  CHECK(r.rmse.size() == 3);
  CHECK(r.records.size() == 9);
  CHECK(std::isfinite(r.loglog_slope));
  for (double e : r.rmse) CHECK(e > 0.0);
}
