#include "overem/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"

namespace overem {

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "Stable";
    case Stability::Unstable: return "Unstable";
    case Stability::Marginal: return "Marginal";
  }
  return "?";
}

namespace {

Stability classify(double slope) {
  if (std::abs(slope) < 1.0 - 1e-6) return Stability::Stable;
  if (std::abs(slope) > 1.0 + 1e-6) return Stability::Unstable;
  return Stability::Marginal;
}

double slope_at(const ScalarMap& f, double x, double a, double b) {
  const double h = 1e-6;
  if (x - h >= a && x + h <= b) return (f(x + h) - f(x - h)) / (2 * h);
  if (x - h < a) return (-3 * f(x) + 4 * f(x + h) - f(x + 2 * h)) / (2 * h);
  return (3 * f(x) - 4 * f(x - h) + f(x - 2 * h)) / (2 * h);
}

}  // namespace

std::vector<FixedPoint> enumerate_fixed_points(const ScalarMap& map, double a, double b, int grid) {
  require(grid >= 100, "enumerate_fixed_points: grid >= 100");
  require(b > a, "enumerate_fixed_points: empty domain");
  std::vector<double> xs(grid), gs(grid);
  for (int i = 0; i < grid; ++i) {
    xs[i] = i + 1 == grid ? b : a + (b - a) * i / (grid - 1);
    gs[i] = map(xs[i]) - xs[i];
  }
  const double zero = 1e-13;
  std::vector<FixedPoint> out;
  int sign_changes = 0;
  auto finish = [&](double x, double lo, double hi) {
    FixedPoint fp;
    fp.location = x;
    fp.bracket_lo = lo;
    fp.bracket_hi = hi;
    fp.derivative = slope_at(map, x, a, b);
    fp.stability = classify(fp.derivative);
    out.push_back(fp);
  };
  for (int i = 0; i < grid; ++i) {
    if (std::abs(gs[i]) <= zero) {
      finish(xs[i], xs[i], xs[i]);
      continue;
    }
    if (i == 0 || std::abs(gs[i - 1]) <= zero || (gs[i - 1] > 0) == (gs[i] > 0)) continue;
    if (++sign_changes > 10) throw SuspiciousMapError("enumerate_fixed_points: more than 10 sign changes");
    double lo = xs[i - 1], hi = xs[i], glo = gs[i - 1];
    while (hi - lo > 1e-12) {
      double mid = 0.5 * (lo + hi);
      double gm = map(mid) - mid;
      if (gm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((gm > 0) == (glo > 0)) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
    finish(0.5 * (lo + hi), xs[i - 1], xs[i]);
  }
  return out;
}

int count_fixed_points_H(double theta_star, double w1_star, int quad_nodes) {
  PopulationMap pm(theta_star, w1_star, quad_nodes);
  return int(enumerate_fixed_points([&](double t) { return pm.H(t); }, -theta_star - 5,
                                    theta_star + 5, 2000)
                 .size());
}

double bifurcation_threshold_H(double theta_star, double tol, int quad_nodes) {
  require(theta_star > 0.0, "bifurcation_threshold_H: theta* > 0");
  require(tol > 0.0, "bifurcation_threshold_H: tol > 0");
  double lo = 0.5 + 1e-3, hi = 1.0 - 1e-3;
  if (count_fixed_points_H(theta_star, lo, quad_nodes) < 3) return lo;
  if (count_fixed_points_H(theta_star, hi, quad_nodes) >= 3) return hi;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (count_fixed_points_H(theta_star, mid, quad_nodes) < 3)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

std::optional<FixedPoint> theta_wrong(double theta_star, double w1_star, int quad_nodes) {
  require(w1_star > 0.5 && w1_star < 1.0, "theta_wrong: w1* in (0.5, 1)");
  PopulationMap pm(theta_star, w1_star, quad_nodes);
  auto fps = enumerate_fixed_points([&](double t) { return pm.H(t); }, -theta_star - 5,
                                    theta_star + 5, 2000);
  if (fps.empty()) return std::nullopt;
  const FixedPoint& lowest = fps.front();
  if (lowest.location > -theta_star && lowest.location < 0.0) return lowest;
  return std::nullopt;
}

double weight_slope_at_one(double theta, const PopulationMap& pm) {
  // at w = 1 the integrand 1/(w e^{ty} + (1-w) e^{-ty})^2 is e^{-2ty}
  const double ts = pm.theta_star(), ws = pm.w1_star();
  return ws * std::exp(2 * theta * theta - 2 * theta * ts) +
         (1 - ws) * std::exp(2 * theta * theta + 2 * theta * ts);
}

FixedPoint stable_weight_fixed_point(double theta, const PopulationMap& pm) {
  require(theta > 0.0, "stable_weight_fixed_point: theta > 0");
  const double slope1 = weight_slope_at_one(theta, pm);
  FixedPoint fp;
  if (slope1 <= 1.0) {
    fp.location = fp.bracket_lo = fp.bracket_hi = 1.0;
    fp.derivative = slope1;
    fp.stability = classify(slope1);
    return fp;
  }
  auto g = [&](double w) { return pm.Gw(theta, w) - w; };
  const int scan = 200;
  double lo = -1.0;
  for (int i = scan - 1; i >= 1; --i) {
    double w = double(i) / scan;
    if (g(w) > 0.0) {
      lo = w;
      break;
    }
  }
  if (lo < 0.0) throw Error("stable_weight_fixed_point: no interior sign change found");
  double hi = std::min(1.0, lo + 1.0 / scan);
  fp.bracket_lo = lo;
  fp.bracket_hi = hi;
  while (hi - lo > 1e-13) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  fp.location = 0.5 * (lo + hi);
  const double h = std::min(1e-6, 0.5 * (1.0 - fp.location));
  fp.derivative = (pm.Gw(theta, fp.location + h) - pm.Gw(theta, fp.location - h)) / (2 * h);
  fp.stability = classify(fp.derivative);
  return fp;
}

double reference_r(double w1, const ReferenceCurve& c) {
  require(w1 > 0.5 && w1 <= 1.0, "reference_r: w1 in (0.5, 1]");
  return (2 * c.w1_star - 1) / (2 * w1 - 1) * c.theta_star - c.epsilon * std::max(0.0, w1 - 1 + c.delta);
}

double reference_r_inverse(double theta, const ReferenceCurve& c) {
  require(theta > 0.0, "reference_r_inverse: theta > 0");
  if (c.epsilon == 0.0) return 0.5 * (1 + (2 * c.w1_star - 1) * c.theta_star / theta);
  if (theta <= reference_r(1.0, c)) return 1.0;
  double lo = 0.5, hi = 1.0;  // r(lo) > theta >= r(hi)
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    double mid = 0.5 * (lo + hi);
    if (reference_r(mid, c) > theta)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

bool C2Report::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const C2Check& c) { return c.pass; });
}

bool C2Report::family_pass(const std::string& family) const {
  return std::all_of(checks.begin(), checks.end(),
                     [&](const C2Check& c) { return c.family != family || c.pass; });
}

double C2Report::min_margin(const std::string& family) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : checks)
    if (c.family == family) m = std::min(m, c.margin);
  return m;
}

namespace {

// margin of x strictly between lo and hi (either order); exact-tie case when lo == hi
double between_margin(double x, double a, double b) {
  double lo = std::min(a, b), hi = std::max(a, b);
  return std::min(x - lo, hi - x);
}

bool near(double a, double b) { return std::abs(a - b) < 1e-12; }

}  // namespace

C2Report verify_c2(const ReferenceCurve& curve, const PopulationMap& pm, int grid) {
  require(grid >= 50, "verify_c2: grid >= 50");
  require(curve.w1_star > 0.5 && curve.w1_star < 1.0, "verify_c2: w1* in (0.5, 1)");
  require(near(pm.theta_star(), curve.theta_star) && near(pm.w1_star(), curve.w1_star),
          "verify_c2: map and curve disagree on the truth");
  const double ts = curve.theta_star, ws = curve.w1_star;
  const double theta_max = std::sqrt(1 + ts * ts) + 1.0;
  C2Report rep;
  for (int i = 1; i <= grid; ++i) {
    const double w1 = 0.5 + 0.5 * double(i) / grid;
    const bool at_truth = near(w1, ws);

    // fixed point of the weight map on the curve sits between w1 and w1*
    {
      C2Check c{"c2b_sandwich", w1};
      c.value = stable_weight_fixed_point(reference_r(w1, curve), pm).location;
      c.margin = at_truth ? 1e-8 - std::abs(c.value - ws) : between_margin(c.value, w1, ws);
      c.pass = c.margin > 0.0;
      rep.checks.push_back(c);
    }

    // fixed points of theta -> G_theta(theta, w1) sit between r(w1) and theta*
    {
      auto fps = enumerate_fixed_points([&](double t) { return pm.Gtheta(t, w1); }, 1e-9, theta_max, 200);
      const double r = reference_r(w1, curve);
      if (fps.empty()) rep.checks.push_back(C2Check{"c2c_sandwich", w1, 0.0, 0.0, -1.0, false});
      for (const auto& fp : fps) {
        C2Check c{"c2c_sandwich", w1};
        c.value = fp.location;
        c.margin = at_truth ? 1e-8 - std::abs(c.value - ts) : between_margin(c.value, r, ts);
        c.pass = c.margin > 0.0;
        rep.checks.push_back(c);
      }
    }

    if (at_truth) continue;
    const double gamma = (2 * ws - 1) / (2 * w1 - 1);
    const double t = gamma * ts;
    const double sgn = w1 > ws ? 1.0 : -1.0;
    {
      // G_w(., 1) = 1 identically, so the strict inequality only holds below w1 = 1
      if (w1 < 1.0) {
        C2Check c{"c2b_raw", w1};
        c.value = pm.Gw(t, w1);
        c.margin = sgn * (w1 - c.value);
        c.pass = c.margin > 0.0;
        rep.checks.push_back(c);
      }
      C2Check d{"c2b_raw", w1};
      d.value = pm.Gw(t, ws);
      d.margin = sgn * (d.value - ws);
      d.pass = d.margin > 0.0;
      rep.checks.push_back(d);
    }
    if (w1 < ws) {
      C2Check c{"c2c2c_v3", w1};
      c.value = pm.Gtheta(t, w1);
      c.margin = t - c.value;
      c.pass = c.margin > 0.0;
      rep.checks.push_back(c);
    } else if (w1 < 1.0) {
      for (int j = 1; j <= 10; ++j) {
        C2Check c{"c2c2c_v4", w1};
        c.b = gamma * j / 10.0;
        c.value = pm.Gtheta(c.b * ts, w1);
        c.margin = c.value - c.b * ts;
        c.pass = c.margin > 0.0;
        rep.checks.push_back(c);
      }
    }
  }
  return rep;
}

std::string to_json(const C2Report& report) {
  nlohmann::json j;
  j["all_pass"] = report.all_pass();
  nlohmann::json fams = nlohmann::json::object();
  for (const char* f : {"c2b_sandwich", "c2c_sandwich", "c2b_raw", "c2c2c_v3", "c2c2c_v4"})
    fams[f] = {{"pass", report.family_pass(f)}, {"min_margin", report.min_margin(f)}};
  j["families"] = fams;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : report.checks)
    rows.push_back({{"family", c.family}, {"w1", c.w1}, {"b", c.b}, {"value", c.value},
                    {"margin", c.margin}, {"pass", c.pass}});
  j["checks"] = rows;
  return j.dump();
}

std::optional<ReferenceCurve> search_adjusted_curve(double theta_star, double w1_star, int grid,
                                                    int quad_nodes) {
  PopulationMap pm(theta_star, w1_star, quad_nodes);
  const double vals[] = {0.2, 0.1, 0.05, 0.02};
  for (double eps : vals)
    for (double del : vals) {
      ReferenceCurve c{theta_star, w1_star, eps, del};
      if (verify_c2(c, pm, grid).all_pass()) return c;
    }
  return std::nullopt;
}

const char* to_string(Region r) {
  switch (r) {
    case Region::Star: return "Star";
    case Region::R11: return "R11";
    case Region::R12: return "R12";
    case Region::R2: return "R2";
    case Region::R3: return "R3";
    case Region::R41: return "R41";
    case Region::R42: return "R42";
    case Region::R5: return "R5";
    case Region::R6: return "R6";
    case Region::R7: return "R7";
    case Region::R8: return "R8";
  }
  return "?";
}

RegionCertificate classify_region(double theta, double w1, const ReferenceCurve& curve) {
  require(theta > 0.0 && w1 > 0.5 && w1 < 1.0, "classify_region: point outside (0,inf) x (0.5,1)");
  require(curve.w1_star > 0.5 && curve.w1_star < 1.0, "classify_region: w1* in (0.5, 1)");
  const double ts = curve.theta_star, ws = curve.w1_star, bw = 1.0;
  RegionCertificate rc;
  if (theta == ts && w1 == ws) {
    rc.rectangle = Rect{ts, ts, ws, ws};
    return rc;
  }
  auto r = [&](double w) { return reference_r(w, curve); };
  auto rinv = [&](double t) { return reference_r_inverse(t, curve); };
  // r(0.5+) is infinite, so the strips beyond r(a_w) (R7, R8) never occur here.
  if (theta >= ts) {
    if (w1 <= ws) {
      const double wc = rinv(theta);
      if (w1 <= wc) {
        rc.region = Region::R11;
        rc.rectangle = Rect{ts, r(w1), w1, ws};
      } else {
        rc.region = Region::R12;
        rc.rectangle = Rect{ts, theta, wc, ws};
      }
    } else {
      rc.region = Region::R2;
      rc.rectangle = Rect{r(w1), theta, rinv(theta), w1};
    }
  } else if (theta > std::max(r(bw), 0.0)) {
    if (w1 <= ws) {
      rc.region = Region::R3;
      rc.rectangle = Rect{theta, r(w1), w1, rinv(theta)};
    } else {
      const double wc = rinv(theta);
      if (w1 <= wc) {
        rc.region = Region::R41;
        rc.rectangle = Rect{theta, ts, ws, wc};
      } else {
        rc.region = Region::R42;
        rc.rectangle = Rect{r(w1), ts, ws, w1};
      }
    }
  } else {
    if (w1 <= ws) {
      rc.region = Region::R5;
      rc.rectangle = Rect{theta, r(w1), w1, bw};
    } else {
      rc.region = Region::R6;
      rc.rectangle = Rect{theta, ts, ws, bw};
    }
  }
  rc.m_value = rc.rectangle.area();
  return rc;
}

}  // namespace overem
