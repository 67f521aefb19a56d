#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "overem/population.hpp"

namespace overem {

enum class Stability { Stable, Unstable, Marginal };
const char* to_string(Stability s);

struct FixedPoint {
  double location = 0.0;
  Stability stability = Stability::Marginal;
  double bracket_lo = 0.0, bracket_hi = 0.0;
  double derivative = 0.0;
};

using ScalarMap = std::function<double(double)>;

// Sign scan of map(x) - x on `grid` points of [a, b], bisection of every bracket to 1e-12,
// central-difference slope for the label. Endpoint fixed points are reported too.
std::vector<FixedPoint> enumerate_fixed_points(const ScalarMap& map, double a, double b,
                                               int grid = 2000);

// Number of fixed points of H on [-theta* - 5, theta* + 5].
int count_fixed_points_H(double theta_star, double w1_star, int quad_nodes = 150);

// Smallest w1* where the fixed-point count of H falls below 3.
double bifurcation_threshold_H(double theta_star, double tol = 1e-4, int quad_nodes = 150);

std::optional<FixedPoint> theta_wrong(double theta_star, double w1_star, int quad_nodes = 150);

// d G_w / d w at w = 1, via the normal moment generating function.
double weight_slope_at_one(double theta, const PopulationMap& pm);

// F_w(theta): the stable fixed point of w -> G_w(theta, w) in (0, 1].
FixedPoint stable_weight_fixed_point(double theta, const PopulationMap& pm);

struct ReferenceCurve {
  double theta_star = 1.0;
  double w1_star = 0.7;
  double epsilon = 0.0;
  double delta = 0.0;
};

double reference_r(double w1, const ReferenceCurve& curve);
// Inverse on [r(1), inf) -> (0.5, 1]; closed form when unadjusted, bisection otherwise.
double reference_r_inverse(double theta, const ReferenceCurve& curve);

struct C2Check {
  std::string family;  // c2b_sandwich, c2c_sandwich, c2b_raw, c2c2c_v3, c2c2c_v4
  double w1 = 0.0;
  double b = 0.0;       // only for c2c2c_v4
  double value = 0.0;   // the fixed point or map value being bounded
  double margin = 0.0;  // > 0 when the inequality holds
  bool pass = false;
};

struct C2Report {
  std::vector<C2Check> checks;
  bool all_pass() const;
  bool family_pass(const std::string& family) const;
  double min_margin(const std::string& family) const;
};

C2Report verify_c2(const ReferenceCurve& curve, const PopulationMap& pm, int grid = 100);
std::string to_json(const C2Report& report);

// First (epsilon, delta) on the grid {0.2, 0.1, 0.05, 0.02}^2 with both sandwich families passing.
std::optional<ReferenceCurve> search_adjusted_curve(double theta_star, double w1_star, int grid = 100,
                                                    int quad_nodes = 150);

enum class Region { Star, R11, R12, R2, R3, R41, R42, R5, R6, R7, R8 };
const char* to_string(Region r);

struct Rect {
  double theta_lo, theta_hi, w_lo, w_hi;
  double area() const { return (theta_hi - theta_lo) * (w_hi - w_lo); }
  bool strictly_contains(double theta, double w) const {
    return theta > theta_lo && theta < theta_hi && w > w_lo && w < w_hi;
  }
};

struct RegionCertificate {
  Region region = Region::Star;
  double m_value = 0.0;
  Rect rectangle{0, 0, 0, 0};
};

// Regions of S = (0, inf) x (0.5, 1) around the truth (curve.theta_star, curve.w1_star).
RegionCertificate classify_region(double theta, double w1, const ReferenceCurve& curve);

}  // namespace overem
