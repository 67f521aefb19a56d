#include "overem/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "overem/population.hpp"

namespace overem {

namespace {

double logaddexp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void check_truth(const Vector& theta, double w1, const SymmetricTruth& truth) {
  require(theta.size() == truth.theta_star.size(), "landscape: dimension mismatch");
  require(w1 >= 0.0 && w1 <= 1.0, "landscape: w1 in [0,1]");
  require(truth.w1_star > 0.0 && truth.w1_star < 1.0, "landscape: w1* in (0,1)");
}

}  // namespace

double pop_loglik(const Vector& theta, double w1, const SymmetricTruth& truth, int quad_nodes) {
  check_truth(theta, w1, truth);
  const double d = double(theta.size());
  const double n = theta.norm();
  double base = -0.5 * d * std::log(2 * std::numbers::pi) -
                0.5 * (d + truth.theta_star.squaredNorm()) - 0.5 * n * n;
  if (n == 0.0) return base;
  const double par = truth.theta_star.dot(theta) / n;
  PopulationMap pm(par, truth.w1_star, quad_nodes);
  const double lw1 = std::log(w1), lw2 = std::log1p(-w1);
  double e = pm.expect([&](double u) { return logaddexp(lw1 + n * u, lw2 - n * u); },
                       PopulationMap::kink_of(n, w1));
  return base + e;
}

double Gradient::max_norm() const {
  return std::max(mean.size() ? mean.lpNorm<Eigen::Infinity>() : 0.0, std::abs(weight));
}

Gradient pop_grad(const Vector& theta, double w1, const SymmetricTruth& truth, int quad_nodes) {
  check_truth(theta, w1, truth);
  require(w1 > 0.0 && w1 < 1.0, "pop_grad: w1 in (0,1)");
  PopState s{theta, w1, 0};
  PopState next = popem_step(PopVariant::EM2, s, truth.theta_star, truth.w1_star, quad_nodes);
  Gradient g;
  g.mean = next.theta - theta;
  // E[(e^a - e^-a) / (w1 e^a + w2 e^-a)] = E[r/w1 - (1-r)/w2] with r the first responsibility
  g.weight = (next.w1 - w1) / (w1 * (1.0 - w1));
  return g;
}

OriginHessian hessian_at_origin(const SymmetricTruth& truth, int quad_nodes) {
  const Vector& t = truth.theta_star;
  const int d = int(t.size());
  OriginHessian h;
  h.closed_form = Matrix::Zero(d + 1, d + 1);
  h.closed_form.topLeftCorner(d, d) = t * t.transpose();
  const double c = 2 * (2 * truth.w1_star - 1);
  h.closed_form.topRightCorner(d, 1) = c * t;
  h.closed_form.bottomLeftCorner(1, d) = c * t.transpose();

  auto f = [&](const Vector& x) { return pop_loglik(x.head(d), x(d), truth, quad_nodes); };
  Vector x0 = Vector::Zero(d + 1);
  x0(d) = 0.5;
  const double step = 1e-3;
  h.finite_difference.resize(d + 1, d + 1);
  const double f0 = f(x0);
  for (int i = 0; i <= d; ++i) {
    Vector e = Vector::Zero(d + 1);
    e(i) = step;
    h.finite_difference(i, i) = (f(x0 + e) - 2 * f0 + f(x0 - e)) / (step * step);
    for (int j = i + 1; j <= d; ++j) {
      Vector g = Vector::Zero(d + 1);
      g(j) = step;
      double v = (f(x0 + e + g) - f(x0 + e - g) - f(x0 - e + g) + f(x0 - e - g)) / (4 * step * step);
      h.finite_difference(i, j) = h.finite_difference(j, i) = v;
    }
  }
  return h;
}

const char* to_string(StationaryKind k) {
  switch (k) {
    case StationaryKind::GlobalMaxCandidate: return "GlobalMaxCandidate";
    case StationaryKind::Saddle: return "Saddle";
    case StationaryKind::NotStationary: return "NotStationary";
  }
  return "?";
}

namespace {

struct Residual {
  const SymmetricTruth& truth;
  int nodes;
  int d;

  Vector operator()(const Vector& x) const {
    Gradient g = pop_grad(x.head(d), x(d), truth, nodes);
    Vector r(d + 1);
    r.head(d) = g.mean;
    r(d) = g.weight;
    return r;
  }

  Matrix jacobian(const Vector& x) const {
    const double h = 1e-6;
    Matrix j(d + 1, d + 1);
    for (int i = 0; i <= d; ++i) {
      Vector e = Vector::Zero(d + 1);
      e(i) = h;
      j.col(i) = ((*this)(x + e) - (*this)(x - e)) / (2 * h);
    }
    return 0.5 * (j + j.transpose());
  }
};

// keeps the finite-difference Jacobian inside [0, 1]
bool weight_ok(double w) { return w > 1e-5 && w < 1 - 1e-5; }

}  // namespace

std::vector<StationaryReport> scan_stationary_points(const SymmetricTruth& truth, int grid,
                                                     int quad_nodes) {
  const int d = int(truth.theta_star.size());
  require(d == 1 || d == 2, "scan_stationary_points: d must be 1 or 2");
  require(grid >= 5, "scan_stationary_points: grid >= 5");
  Residual F{truth, quad_nodes, d};
  const double bound = std::sqrt(1 + truth.theta_star.squaredNorm()) + 1.0;
  auto theta_at = [&](int i) { return -bound + 2 * bound * i / (grid - 1); };
  auto w_at = [&](int i) { return (i + 0.5) / grid; };

  // residual on the grid; index = ((i0 * grid + i1) * grid + iw) for d = 2
  const int cells = d == 1 ? grid * grid : grid * grid * grid;
  std::vector<double> res(cells);
  auto point = [&](int idx) {
    Vector x(d + 1);
    int iw = idx % grid, rest = idx / grid;
    x(d) = w_at(iw);
    for (int c = d - 1; c >= 0; --c) {
      x(c) = theta_at(rest % grid);
      rest /= grid;
    }
    return x;
  };
  for (int idx = 0; idx < cells; ++idx) res[idx] = F(point(idx)).lpNorm<Eigen::Infinity>();

  // grid local minima of the residual seed Newton
  std::vector<int> seeds;
  for (int idx = 0; idx < cells; ++idx) {
    int coords[3], rest = idx;
    for (int c = d; c >= 0; --c) {
      coords[c] = rest % grid;
      rest /= grid;
    }
    bool is_min = true;
    const int nb = d == 1 ? 9 : 27;
    for (int k = 0; k < nb && is_min; ++k) {
      int off[3] = {k % 3 - 1, (k / 3) % 3 - 1, k / 9 - 1};
      int nidx = 0;
      bool inside = true, self = true;
      for (int c = 0; c <= d; ++c) {
        int v = coords[c] + off[c];
        if (off[c] != 0) self = false;
        if (v < 0 || v >= grid) inside = false;
        nidx = nidx * grid + v;
      }
      if (!self && inside && res[nidx] < res[idx]) is_min = false;
    }
    if (is_min) seeds.push_back(idx);
  }

  std::vector<StationaryReport> out;
  auto duplicate = [&](const Vector& x, bool stationary) {
    for (const auto& r : out) {
      if ((r.classification != StationaryKind::NotStationary) != stationary) continue;
      Vector y(d + 1);
      y.head(d) = r.theta;
      y(d) = r.w1;
      if ((x - y).lpNorm<Eigen::Infinity>() < 1e-5) return true;
    }
    return false;
  };

  for (int idx : seeds) {
    Vector x = point(idx);
    Vector r = F(x);
    double rn = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 50 && rn > 1e-13; ++it) {
      Vector dx = F.jacobian(x).colPivHouseholderQr().solve(-r);
      if (!dx.allFinite()) break;
      double t = 1.0;
      bool moved = false;
      while (t > 1e-6) {
        Vector xn = x + t * dx;
        if (weight_ok(xn(d))) {
          Vector rn_vec = F(xn);
          double rnn = rn_vec.lpNorm<Eigen::Infinity>();
          if (rnn < rn) {
            x = xn;
            r = rn_vec;
            rn = rnn;
            moved = true;
            break;
          }
        }
        t *= 0.5;
      }
      if (!moved) break;
    }
    StationaryReport rep;
    rep.theta = x.head(d);
    rep.w1 = x(d);
    rep.gradient_norm = rn;
    const bool stationary = rn <= 10 * kStationaryTol;
    if (duplicate(x, stationary)) continue;
    if (stationary) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(F.jacobian(x), Eigen::EigenvaluesOnly);
      rep.hessian_eigs = es.eigenvalues();
      rep.classification = es.eigenvalues().maxCoeff() < 0 ? StationaryKind::GlobalMaxCandidate
                                                           : StationaryKind::Saddle;
    } else {
      rep.theta = point(idx).head(d);
      rep.w1 = point(idx)(d);
      rep.gradient_norm = res[idx];
    }
    out.push_back(rep);
  }
  return out;
}

void write_landscape_raster(std::ostream& os, const SymmetricTruth& truth, int grid, int quad_nodes) {
  require(truth.theta_star.size() == 1, "landscape raster: d = 1 only");
  require(grid >= 2, "landscape raster: grid >= 2");
  const double bound = std::sqrt(1 + truth.theta_star.squaredNorm()) + 1.0;
  os << "theta,w1,loglik,grad_norm\n";
  os.precision(17);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      Vector th(1);
      th(0) = -bound + 2 * bound * i / (grid - 1);
      double w = (j + 0.5) / grid;
      Gradient g = pop_grad(th, w, truth, quad_nodes);
      os << th(0) << ',' << w << ',' << pop_loglik(th, w, truth, quad_nodes) << ','
         << std::hypot(g.mean.norm(), g.weight) << '\n';
    }
}

}  // namespace overem
