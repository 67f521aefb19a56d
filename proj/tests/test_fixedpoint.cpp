#include <cmath>

#include "doctest.h"
#include "overem/fixedpoint.hpp"

using namespace overem;

TEST_CASE("fixed points of H") {
  PopulationMap pm9(1.0, 0.9), pm7(1.0, 0.7);
  auto f9 = enumerate_fixed_points([&](double t) { return pm9.H(t); }, -6, 6);
  REQUIRE(f9.size() == 1);
  CHECK(std::abs(f9[0].location - 1.0) < 1e-10);
  CHECK(f9[0].stability == Stability::Stable);

  auto f7 = enumerate_fixed_points([&](double t) { return pm7.H(t); }, -6, 6);
  REQUIRE(f7.size() == 3);
  int stable_neg = 0;
  for (const auto& fp : f7) {
    CHECK(std::abs(pm7.H(fp.location) - fp.location) < 1e-10);
    if (fp.location > -1 && fp.location < 0 && fp.stability == Stability::Stable) ++stable_neg;
  }
  CHECK(stable_neg == 1);
  CHECK(count_fixed_points_H(1.0, 0.7) == 3);
  CHECK(count_fixed_points_H(1.0, 0.9) == 1);
}

TEST_CASE("enumeration labels and errors") {
  auto fps = enumerate_fixed_points([](double x) { return 0.5 * x + 1; }, -10, 10, 100);
  REQUIRE(fps.size() == 1);
  CHECK(fps[0].location == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fps[0].derivative == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(fps[0].stability == Stability::Stable);
  auto up = enumerate_fixed_points([](double x) { return 2 * x - 1; }, -10, 10, 100);
  REQUIRE(up.size() == 1);
  CHECK(up[0].stability == Stability::Unstable);
  CHECK_THROWS_AS(enumerate_fixed_points([](double x) { return x + 0.1 * std::sin(40 * x); }, -10, 10, 2000),
                  SuspiciousMapError);
  auto ends = enumerate_fixed_points([](double x) { return x * x; }, 0, 1, 100);
  CHECK(ends.size() == 2);
}

TEST_CASE("bifurcation threshold") {
  double b = bifurcation_threshold_H(1.0);
  CHECK(b >= 0.75);
  CHECK(b <= 0.79);
  // the count never increases with w1*
  int prev = 3;
  for (int i = 0; i < 200; ++i) {
    double w = 0.505 + 0.49 * i / 199.0;
    int c = count_fixed_points_H(1.0, w, 60);
    CHECK(c <= prev);
    prev = c;
  }
}

TEST_CASE("theta_wrong") {
  auto tw = theta_wrong(1.0, 0.52);
  REQUIRE(tw.has_value());
  CHECK(tw->location > -1.0);
  CHECK(tw->location < 0.0);
  CHECK(tw->stability == Stability::Stable);
  CHECK_FALSE(theta_wrong(1.0, 0.9).has_value());

  Vector star(1), init(1);
  star << 1.0;
  init << -1.5;
  auto tr = popem_trajectory(PopVariant::EM1, PopState{init, 0.52, 0}, star, 0.52);
  CHECK(std::abs(tr.states.back().theta(0) - tw->location) < 1e-8);
}

TEST_CASE("H has exactly one positive fixed point") {
  for (double ts : {0.5, 1.0, 2.0, 4.0})
    for (double ws : {0.52, 0.7, 0.9}) {
      PopulationMap pm(ts, ws);
      auto fps = enumerate_fixed_points([&](double t) { return pm.H(t); }, 1e-6, ts + 5);
      REQUIRE(fps.size() == 1);
      CHECK(std::abs(fps[0].location - ts) < 1e-9);
    }
}

TEST_CASE("stable weight fixed point") {
  PopulationMap pm(1.0, 0.7);
  SUBCASE("sign property") {
    for (double th : {0.05, 0.4, 1.0, 2.5}) {
      double fw = stable_weight_fixed_point(th, pm).location;
      for (int i = 1; i < 100; ++i) {
        double w = i / 100.0;
        double g = pm.Gw(th, w) - w;
        if (std::abs(w - fw) < 1e-6) continue;
        CHECK((g > 0) == (fw > w));
      }
    }
  }
  SUBCASE("truth on the curve") {
    auto fp = stable_weight_fixed_point(1.0, pm);
    CHECK(std::abs(fp.location - 0.7) < 1e-9);
    CHECK(fp.stability == Stability::Stable);
  }
  SUBCASE("slope at one: two routes") {
    const double th = 0.05, h = 1e-6;
    double fd = (pm.Gw(th, 1.0) - pm.Gw(th, 1.0 - h)) / h;
    CHECK(std::abs(weight_slope_at_one(th, pm) - fd) < 1e-6);
    // slope below one means the only stable point is w = 1
    if (weight_slope_at_one(th, pm) <= 1.0) CHECK(stable_weight_fixed_point(th, pm).location == 1.0);
  }
  SUBCASE("second derivative changes sign at most once") {
    for (double th : {0.2, 1.0, 3.0}) {
      const double h = 1e-3;
      int changes = 0;
      double prev = 0;
      for (double w = 0.01; w <= 0.99; w += 0.01) {
        double d2 = (pm.Gw(th, w + h) - 2 * pm.Gw(th, w) + pm.Gw(th, w - h)) / (h * h);
        if (std::abs(d2) < 1e-6) continue;
        if (prev != 0 && (d2 > 0) != (prev > 0)) ++changes;
        prev = d2;
      }
      CHECK(changes <= 1);
    }
  }
}

TEST_CASE("reference curve") {
  ReferenceCurve c{1.0, 0.7, 0.0, 0.0};
  CHECK(reference_r(0.7, c) == 1.0);
  CHECK(reference_r(1.0, c) == doctest::Approx(0.4).epsilon(1e-14));
  for (int i = 51; i < 100; ++i) CHECK(reference_r((i + 1) / 100.0, c) < reference_r(i / 100.0, c));
  CHECK_THROWS_AS(reference_r(0.5, c), std::invalid_argument);
  for (double t : {0.5, 1.0, 3.0}) CHECK(reference_r(reference_r_inverse(t, c), c) == doctest::Approx(t));
  ReferenceCurve adj{1.0, 0.7, 0.05, 0.05};
  CHECK(reference_r(0.9, adj) == reference_r(0.9, c));
  CHECK(reference_r(0.99, adj) == doctest::Approx(reference_r(0.99, c) - 0.05 * 0.04));
  for (double t : {0.5, 1.0}) CHECK(reference_r(reference_r_inverse(t, adj), adj) == doctest::Approx(t).epsilon(1e-9));
}

TEST_CASE("C2 checks at (1, 0.7)") {
  PopulationMap pm(1.0, 0.7);
  auto rep = verify_c2(ReferenceCurve{1.0, 0.7, 0.05, 0.05}, pm, 100);
  CHECK(rep.family_pass("c2b_sandwich"));
  CHECK(rep.family_pass("c2b_raw"));
  CHECK(rep.family_pass("c2c2c_v3"));
  CHECK(rep.family_pass("c2c2c_v4"));
  for (double w : {0.75, 0.85, 0.95}) {
    double gamma = 0.4 / (2 * w - 1);
    CHECK(pm.Gw(gamma, w) < w);
  }
  for (double w : {0.55, 0.6, 0.65}) {
    double gamma = 0.4 / (2 * w - 1);
    CHECK(pm.Gtheta(gamma, w) < gamma);
  }
  CHECK(to_json(rep).find("\"all_pass\"") != std::string::npos);
  auto found = search_adjusted_curve(1.0, 0.7, 60);
  REQUIRE(found.has_value());
  CHECK(verify_c2(*found, pm, 60).all_pass());
}

TEST_CASE("region certificate") {
  ReferenceCurve c{1.0, 0.7, 0.0, 0.0};
  auto star = classify_region(1.0, 0.7, c);
  CHECK(star.region == Region::Star);
  CHECK(star.m_value == 0.0);

  auto rc = classify_region(1.5, 0.75, c);
  CHECK(rc.region == Region::R2);
  // r(w) = 0.4 / (2w - 1), r^{-1}(t) = (1 + 0.4 / t) / 2
  double rinv = 0.5 * (1 + 0.4 / 1.5), r = 0.4 / 0.5;
  CHECK(rc.m_value == doctest::Approx((0.75 - rinv) * (1.5 - r)).epsilon(1e-12));
  CHECK(rc.m_value == doctest::Approx(rc.rectangle.area()));

  for (double t = 0.011; t < 5; t += 0.037)
    for (double w = 0.5011; w < 0.999; w += 0.0071) {
      auto q = classify_region(t, w, c);
      CHECK(q.region != Region::Star);
      CHECK(q.region != Region::R7);
      CHECK(q.region != Region::R8);
      CHECK(q.m_value > 0.0);
    }
}

TEST_CASE("Lyapunov certificate along trajectories") {
  for (double ts : {0.5, 1.0, 2.0})
    for (double ws : {0.6, 0.7, 0.9}) {
      PopulationMap pm(ts, ws);
      ReferenceCurve c{ts, ws, 0.0, 0.0};
      for (double th0 : {0.1, 0.8, 3.0}) {
        // S excludes w = 1/2, so the certificate starts after the first step
        auto first = pm.evaluate(th0, 0.5);
        double th = first.gtheta, w = first.gw;
        auto prev = classify_region(th, w, c);
        for (int t = 0; t < 500; ++t) {
          auto v = pm.evaluate(th, w);
          if (std::hypot(v.gtheta - ts, v.gw - ws) < 1e-9) break;
          auto cur = classify_region(v.gtheta, v.gw, c);
          CHECK(cur.m_value < prev.m_value);
          CHECK(prev.rectangle.strictly_contains(v.gtheta, v.gw));
          th = v.gtheta;
          w = v.gw;
          prev = cur;
        }
      }
    }
}
