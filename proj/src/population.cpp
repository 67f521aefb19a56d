#include "overem/population.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace overem {

PopulationMap::PopulationMap(double theta_star, double w1_star, int quad_nodes)
    : theta_star_(theta_star), w1_star_(w1_star), quad_(quad_nodes) {
  require(std::isfinite(theta_star), "PopulationMap: theta* must be finite");
  require(w1_star > 0.0 && w1_star < 1.0, "PopulationMap: w1* in (0,1)");
  require(quad_nodes >= 40, "PopulationMap: quad_nodes >= 40");
}

std::optional<Kink> PopulationMap::kink_of(double theta, double w1) {
  double c = half_log_odds(w1);
  if (theta == 0.0 || !std::isfinite(c)) return std::nullopt;
  return Kink{-c / theta, 1.0 / std::abs(theta)};
}

PopulationMap::Values PopulationMap::evaluate(double theta, double w1) const {
  require(w1 >= 0.0 && w1 <= 1.0, "population map: w1 in [0,1]");
  require(std::isfinite(theta), "population map: theta must be finite");
  if (w1 == 0.0 || w1 == 1.0) {
    // tanh(theta y + c) is identically -1 or +1
    const double t = w1 == 1.0 ? 1.0 : -1.0;
    const double mean_y = (2 * w1_star_ - 1) * theta_star_;
    return Values{t * mean_y, w1, t * (2 * w1_star_ - 1)};
  }
  const double c = half_log_odds(w1);
  const auto kink = kink_of(theta, w1);
  thread_local std::vector<double> y, w;
  double a[2], g[2], b[2];
  for (int comp = 0; comp < 2; ++comp) {
    quad_.points(comp == 0 ? theta_star_ : -theta_star_, kink, y, w);
    double sa = 0.0, sg = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      double t = std::tanh(theta * y[i] + c);
      sa += w[i] * t * y[i];
      sb += w[i] * t;
      sg += w[i] * 0.5 * (1.0 + t);
    }
    a[comp] = sa;
    g[comp] = sg;
    b[comp] = sb;
  }
  const double w2s = 1.0 - w1_star_;
  Values v{w1_star_ * a[0] + w2s * a[1], w1_star_ * g[0] + w2s * g[1], w1_star_ * b[0] - w2s * b[1]};
  if (!std::isfinite(v.gtheta) || !std::isfinite(v.gw) || !std::isfinite(v.s))
    throw QuadratureOverflowError("population map: non-finite quadrature result");
  if (v.gw < 0.0 && v.gw > -1e-12) v.gw = 0.0;
  if (v.gw > 1.0 && v.gw < 1.0 + 1e-12) v.gw = 1.0;
  return v;
}

PopulationMap::Partials PopulationMap::partials(double theta, double w1) const {
  require(w1 > 0.0 && w1 < 1.0, "population partials: w1 in (0,1)");
  const double c = half_log_odds(w1);
  const auto kink = kink_of(theta, w1);
  thread_local std::vector<double> y, w;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;  // E sech^2, E sech^2 y, E sech^2 y^2
  for (int comp = 0; comp < 2; ++comp) {
    const double pi = comp == 0 ? w1_star_ : 1.0 - w1_star_;
    quad_.points(comp == 0 ? theta_star_ : -theta_star_, kink, y, w);
    for (std::size_t i = 0; i < y.size(); ++i) {
      double ch = std::cosh(theta * y[i] + c);
      double sech2 = pi * w[i] / (ch * ch);
      s0 += sech2;
      s1 += sech2 * y[i];
      s2 += sech2 * y[i] * y[i];
    }
  }
  const double ww = w1 * (1.0 - w1);
  return Partials{s2, s1 / (2.0 * ww), 0.5 * s1, s0 / (4.0 * ww)};
}

double map_H(double theta, const PopulationMap& pm) { return pm.H(theta); }
double map_Gw(double theta, double w1, const PopulationMap& pm) { return pm.Gw(theta, w1); }
double map_Gtheta(double theta, double w1, const PopulationMap& pm) { return pm.Gtheta(theta, w1); }

double shrink_s(double theta_norm, double w1, const PopulationMap& pm) {
  require(theta_norm > 0.0, "shrink_s: theta_norm > 0");
  return pm.s(theta_norm, w1);
}

double ReducedState::star_parallel(double star_norm) const { return std::cos(angle) * star_norm; }
double ReducedState::star_perp(double star_norm) const { return std::sin(angle) * star_norm; }

ReducedState popem2_step_reduced(const ReducedState& state, double star_norm, double w1_star,
                                 int quad_nodes) {
  require(state.angle >= 0.0 && state.angle < std::numbers::pi / 2, "reduced step: angle in [0, pi/2)");
  require(star_norm > 0.0, "reduced step: |theta*| > 0");
  if (!(state.theta_norm >= 1e-12))
    throw DegenerateDirectionError("reduced step: |theta| underflow");
  const double par = state.star_parallel(star_norm), perp = state.star_perp(star_norm);
  PopulationMap pm(par, w1_star, quad_nodes);
  auto v = pm.evaluate(state.theta_norm, state.w1);
  const double t1 = v.gtheta, t2 = perp * v.s;
  ReducedState out;
  out.theta_norm = std::hypot(t1, t2);
  out.angle = std::abs(std::atan2(t2, t1) - state.angle);
  if (out.angle > std::numbers::pi) out.angle = 2 * std::numbers::pi - out.angle;
  out.w1 = v.gw;
  out.iteration = state.iteration + 1;
  return out;
}

JacobianReport jacobian_at_truth(const PopulationMap& pm) {
  require(pm.theta_star() > 0.0, "jacobian_at_truth: theta* > 0");
  auto p = pm.partials(pm.theta_star(), pm.w1_star());
  JacobianReport rep;
  rep.entries << p.gtheta_theta, p.gtheta_w, p.gw_theta, p.gw_w;
  const double tr = p.gtheta_theta + p.gw_w;
  const double det = p.gtheta_theta * p.gw_w - p.gtheta_w * p.gw_theta;
  double disc = 0.25 * tr * tr - det;
  if (disc < -1e-12 * std::max(1.0, tr * tr)) throw Error("jacobian_at_truth: complex eigenvalues");
  disc = std::sqrt(std::max(disc, 0.0));
  rep.eigenvalues = {0.5 * tr - disc, 0.5 * tr + disc};
  rep.spectral_radius = std::max(std::abs(rep.eigenvalues[0]), std::abs(rep.eigenvalues[1]));
  return rep;
}

PopState popem_step(PopVariant variant, const PopState& state, const Vector& theta_star,
                    double w1_star, int quad_nodes) {
  require(state.theta.size() == theta_star.size(), "popem_step: dimension mismatch");
  const double w = variant == PopVariant::EM1 ? w1_star : state.w1;
  PopState out;
  out.iteration = state.iteration + 1;
  const double norm = state.theta.norm();
  if (norm == 0.0) {
    // tanh(c) = 2w - 1 for every y, so the update is (2w - 1) E[y]
    out.theta = (2 * w - 1) * (2 * w1_star - 1) * theta_star;
    out.w1 = variant == PopVariant::EM1 ? w1_star : w;
    return out;
  }
  // rotate: e1 along theta, theta* = par e1 + perp_vec
  const Vector e1 = state.theta / norm;
  const double par = theta_star.dot(e1);
  const Vector perp_vec = theta_star - par * e1;
  PopulationMap pm(par, w1_star, quad_nodes);
  auto v = pm.evaluate(norm, w);
  out.theta = v.gtheta * e1 + v.s * perp_vec;
  out.w1 = variant == PopVariant::EM1 ? w1_star : v.gw;
  return out;
}

PopTrajectory popem_trajectory(PopVariant variant, const PopState& initial, const Vector& theta_star,
                               double w1_star, int quad_nodes, int max_iter, double tol) {
  require(max_iter >= 1 && tol > 0.0, "popem_trajectory: max_iter >= 1, tol > 0");
  PopTrajectory tr;
  PopState cur = initial;
  if (variant == PopVariant::EM1) cur.w1 = w1_star;
  tr.states.push_back(cur);
  for (int it = 0; it < max_iter; ++it) {
    PopState next = popem_step(variant, cur, theta_star, w1_star, quad_nodes);
    double delta = std::max((next.theta - cur.theta).lpNorm<Eigen::Infinity>(), std::abs(next.w1 - cur.w1));
    cur = std::move(next);
    tr.states.push_back(cur);
    if (delta < tol) {
      tr.converged = true;
      tr.stop_reason = StopReason::Tolerance;
      break;
    }
  }
  return tr;
}

double angle_between(const Vector& a, const Vector& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  // Kahan's form keeps full relative accuracy near 0 and pi
  const Vector u = nb * a, v = na * b;
  return 2.0 * std::atan2((u - v).norm(), (u + v).norm());
}

double distance_to_truth(PopVariant variant, const PopState& s, const Vector& theta_star,
                         double w1_star) {
  double plus = std::sqrt((s.theta - theta_star).squaredNorm() + std::pow(s.w1 - w1_star, 2));
  if (variant == PopVariant::EM1) return (s.theta - theta_star).norm();
  double minus = std::sqrt((s.theta + theta_star).squaredNorm() + std::pow(s.w1 - (1 - w1_star), 2));
  return std::min(plus, minus);
}

void write_trajectory_csv(std::ostream& os, PopVariant variant, const PopTrajectory& traj,
                          const Vector& theta_star, double w1_star) {
  os << "t,theta_norm,angle_rad,w1,dist_to_truth\n";
  os.precision(17);
  for (const auto& s : traj.states)
    os << s.iteration << ',' << s.theta.norm() << ',' << angle_between(s.theta, theta_star) << ','
       << s.w1 << ',' << distance_to_truth(variant, s, theta_star, w1_star) << '\n';
}

namespace {

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LinePopulationEm::LinePopulationEm(const GaussianMixture& truth, int quad_nodes)
    : truth_(truth), quad_(quad_nodes) {
  require(truth.dim() == 1, "LinePopulationEm: one-dimensional truth");
}

EmState LinePopulationEm::step(const EmState& s) const {
  require(s.means.rows() == 2 && s.means.cols() == 1, "LinePopulationEm: two 1D components");
  const double m1 = s.means(0, 0), m2 = s.means(1, 0);
  const double w1 = s.weights(0), w2 = s.weights(1);
  // log-odds of component 1: alpha + beta y
  const double beta = m1 - m2;
  const double alpha = std::log(w1) - std::log(w2) - 0.5 * (m1 * m1 - m2 * m2);
  std::optional<Kink> kink;
  if (beta != 0.0) kink = Kink{-alpha / beta, 1.0 / std::abs(beta)};
  thread_local std::vector<double> y, w;
  double r1 = 0, r1y = 0, r2 = 0, r2y = 0;
  for (int j = 0; j < truth_.k(); ++j) {
    const double pj = truth_.weights()(j);
    quad_.points(truth_.means()(j, 0), kink, y, w);
    for (std::size_t i = 0; i < y.size(); ++i) {
      double l = alpha + beta * y[i];
      double a = pj * w[i] * logistic(l), b = pj * w[i] * logistic(-l);
      r1 += a;
      r1y += a * y[i];
      r2 += b;
      r2y += b * y[i];
    }
  }
  if (!(r1 >= 1e-300) || !(r2 >= 1e-300))
    throw DegenerateComponentError("population EM: component with vanishing responsibility");
  EmState out = s;
  out.means(0, 0) = r1y / r1;
  out.means(1, 0) = r2y / r2;
  if (s.variant == ModelVariant::FreeWeights) {
    out.weights(0) = r1 / (r1 + r2);
    out.weights(1) = r2 / (r1 + r2);
  }
  out.iteration = s.iteration + 1;
  return out;
}

BasicRunResult<EmState> LinePopulationEm::run(const EmState& initial, int max_iter, double tol) const {
  require(max_iter >= 1 && tol > 0.0, "LinePopulationEm::run: max_iter >= 1, tol > 0");
  BasicRunResult<EmState> res;
  EmState cur = initial;
  for (int it = 0; it < max_iter; ++it) {
    EmState next = step(cur);
    double delta = std::max((next.means - cur.means).lpNorm<Eigen::Infinity>(),
                            (next.weights - cur.weights).lpNorm<Eigen::Infinity>());
    cur = std::move(next);
    if (delta < tol) {
      res.converged = true;
      res.stop_reason = StopReason::Tolerance;
      break;
    }
  }
  res.final_state = std::move(cur);
  return res;
}

}  // namespace overem
