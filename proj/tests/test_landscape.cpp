#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "overem/fixedpoint.hpp"
#include "overem/landscape.hpp"

using namespace overem;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(v.size());
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("truth is the global maximizer") {
  SymmetricTruth truth{vec({1.0, -0.5}), 0.7};
  const double top = pop_loglik(truth.theta_star, 0.7, truth);
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(-2.5, 2.5), uw(0.01, 0.99);
  for (int i = 0; i < 100; ++i) CHECK(pop_loglik(vec({u(eng), u(eng)}), uw(eng), truth) <= top);
  CHECK(std::abs(pop_loglik(-truth.theta_star, 0.3, truth) - top) < 1e-10);
}

TEST_CASE("population log-likelihood against Monte Carlo in 2D") {
  SymmetricTruth truth{vec({1.0, 0.5}), 0.7};
  Vector th = vec({0.5, 0.5});
  const double w = 0.6;
  std::mt19937_64 eng(77);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  const int N = 1'000'000;
  double s = 0, s2 = 0;
  for (int i = 0; i < N; ++i) {
    double sgn = u(eng) < 0.7 ? 1.0 : -1.0;
    Vector y = sgn * truth.theta_star + vec({z(eng), z(eng)});
    double a = w * std::exp(-0.5 * (y - th).squaredNorm()), b = (1 - w) * std::exp(-0.5 * (y + th).squaredNorm());
    double v = std::log((a + b) / (2 * std::numbers::pi));
    s += v;
    s2 += v * v;
  }
  double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
  CHECK(std::abs(pop_loglik(th, w, truth) - mean) < 3 * se);
}

TEST_CASE("stationarity residuals") {
  SymmetricTruth truth{vec({1.0}), 0.7};
  CHECK(pop_grad(vec({1.0}), 0.7, truth).max_norm() < 1e-9);
  CHECK(pop_grad(vec({-1.0}), 0.3, truth).max_norm() < 1e-9);
  CHECK(pop_grad(vec({0.0}), 0.5, truth).max_norm() < 1e-9);

  auto tw = theta_wrong(1.0, 0.52);
  REQUIRE(tw.has_value());
  SymmetricTruth t52{vec({1.0}), 0.52};
  auto g = pop_grad(vec({tw->location}), 0.52, t52);
  CHECK(std::abs(g.mean(0)) < 1e-9);
  CHECK(std::abs(g.weight) > 1e-3);
}

TEST_CASE("gradient matches finite differences") {
  SymmetricTruth truth{vec({0.8, 0.6}), 0.65};
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> u(-2, 2), uw(0.1, 0.9);
  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    Vector th = vec({u(eng), u(eng)});
    double w = uw(eng);
    auto g = pop_grad(th, w, truth);
    for (int k = 0; k < 2; ++k) {
      Vector a = th, b = th;
      a(k) += h;
      b(k) -= h;
      double fd = (pop_loglik(a, w, truth) - pop_loglik(b, w, truth)) / (2 * h);
      CHECK(std::abs(g.mean(k) - fd) < 1e-6);
    }
    double fdw = (pop_loglik(th, w + h, truth) - pop_loglik(th, w - h, truth)) / (2 * h);
    CHECK(std::abs(g.weight - fdw) < 1e-6);
  }
}

TEST_CASE("symmetry of the objective") {
  SymmetricTruth truth{vec({1.2}), 0.8};
  for (double th = -3; th <= 3; th += 0.3)
    for (double w = 0.05; w < 1; w += 0.1)
      CHECK(std::abs(pop_loglik(vec({th}), w, truth) - pop_loglik(vec({-th}), 1 - w, truth)) < 1e-10);
}

TEST_CASE("Hessian at the origin") {
  SymmetricTruth truth{vec({1.0}), 0.7};
  auto h = hessian_at_origin(truth);
  Matrix want(2, 2);
  want << 1, 0.8, 0.8, 0;
  CHECK((h.closed_form - want).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((h.finite_difference - h.closed_form).cwiseAbs().maxCoeff() < 1e-4);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.closed_form);
  CHECK(es.eigenvalues()(0) < 0);
  CHECK(es.eigenvalues()(1) > 0);
  CHECK(h.closed_form.determinant() < 0);

  SymmetricTruth t2{vec({0.5, -1.0}), 0.6};
  auto h2 = hessian_at_origin(t2);
  CHECK(h2.closed_form.rows() == 3);
  CHECK((h2.finite_difference - h2.closed_form).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("stationary scan at (1, 0.7)") {
  SymmetricTruth truth{vec({1.0}), 0.7};
  std::vector<StationaryReport> pts;
  for (auto& p : scan_stationary_points(truth))
    if (p.classification != StationaryKind::NotStationary) pts.push_back(p);
  REQUIRE(pts.size() == 3);
  int maxes = 0, saddles = 0;
  for (const auto& p : pts) {
    CHECK(p.gradient_norm < kStationaryTol);
    const double t = p.theta(0);
    if (std::abs(t - 1) < 1e-6) {
      CHECK(std::abs(p.w1 - 0.7) < 1e-6);
      CHECK(p.classification == StationaryKind::GlobalMaxCandidate);
      ++maxes;
    } else if (std::abs(t + 1) < 1e-6) {
      CHECK(std::abs(p.w1 - 0.3) < 1e-6);
      CHECK(p.classification == StationaryKind::GlobalMaxCandidate);
      ++maxes;
    } else {
      CHECK(std::abs(t) < 1e-6);
      CHECK(std::abs(p.w1 - 0.5) < 1e-6);
      CHECK(p.classification == StationaryKind::Saddle);
      REQUIRE(p.hessian_eigs.has_value());
      CHECK(p.hessian_eigs->minCoeff() < 0);
      CHECK(p.hessian_eigs->maxCoeff() > 0);
      ++saddles;
    }
    // every stationary point is an EM2 fixed point
    PopulationMap pm(1.0, 0.7);
    CHECK(std::abs(pm.Gtheta(t, p.w1) - t) < 1e-8);
    CHECK(std::abs(pm.Gw(t, p.w1) - p.w1) < 1e-8);
  }
  CHECK(maxes == 2);
  CHECK(saddles == 1);
  // boundary fixed points of the EM2 map are not stationary
  PopulationMap pm(1.0, 0.7);
  CHECK(std::abs(pm.Gtheta(0.4, 1.0) - 0.4) < 1e-10);
  CHECK(std::abs(pop_grad(vec({0.4}), 1 - 1e-9, truth).weight) > 1e-3);
  CHECK(std::abs(pop_grad(vec({-0.4}), 1e-9, truth).weight) > 1e-3);
}

TEST_CASE("interior EM2 fixed points are stationary") {
  SymmetricTruth truth{vec({1.0}), 0.7};
  PopulationMap pm(1.0, 0.7);
  for (double th : {0.3, 1.0, 2.0}) {
    auto fw = stable_weight_fixed_point(th, pm);
    if (fw.location >= 1.0) continue;
    auto g = pop_grad(vec({th}), fw.location, truth);
    // weight stationarity holds at any weight fixed point
    CHECK(std::abs(g.weight) < 1e-8);
  }
  CHECK(pop_grad(vec({1.0}), 0.7, truth).max_norm() < 1e-8);
}

TEST_CASE("objective ascends along population EM2") {
  SymmetricTruth truth{vec({1.0, 0.3}), 0.75};
  auto tr = popem_trajectory(PopVariant::EM2, PopState{vec({-0.2, 1.4}), 0.5, 0}, truth.theta_star, 0.75);
  for (std::size_t t = 1; t < tr.states.size(); ++t)
    CHECK(pop_loglik(tr.states[t].theta, tr.states[t].w1, truth) >=
          pop_loglik(tr.states[t - 1].theta, tr.states[t - 1].w1, truth) - 1e-10);
}
