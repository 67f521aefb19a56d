#include "overem/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "overem/core.hpp"

namespace overem {

namespace {

Rule build_hermite(int n) {
  // Golub-Welsch on the Jacobi matrix of He_k, then polish each node with
  // Newton on the orthonormal recurrence.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(n - 1);
  for (int i = 1; i < n; ++i) off(i - 1) = std::sqrt(double(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      double p0 = 1.0, p1 = x;  // orthonormal psi_0, psi_1
      for (int k = 1; k < n; ++k) {
        double p2 = (x * p1 - std::sqrt(double(k)) * p0) / std::sqrt(double(k + 1));
        p0 = p1;
        p1 = p2;
      }
      // p1 = psi_n, p0 = psi_{n-1}; psi_n' = sqrt(n) psi_{n-1}
      double dx = p1 / (std::sqrt(double(n)) * p0);
      if (std::isfinite(dx)) x -= dx;
    }
    double p0 = 1.0, p1 = x;
    double sum = 1.0 + (n > 1 ? x * x : 0.0);
    for (int k = 1; k + 1 < n; ++k) {
      double p2 = (x * p1 - std::sqrt(double(k)) * p0) / std::sqrt(double(k + 1));
      p0 = p1;
      p1 = p2;
      sum += p1 * p1;
    }
    r.x[i] = x;
    r.w[i] = 1.0 / sum;
  }
  double total = 0.0;
  for (double w : r.w) total += w;
  for (double& w : r.w) w /= total;
  return r;
}

Rule build_legendre(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.x[i] = x;
    r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

template <Rule (*Build)(int)>
const Rule& cached(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<Rule>> rules;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = rules[n];
  if (!slot) slot = std::make_unique<Rule>(Build(n));
  return *slot;
}

constexpr double kHalfWindow = 12.0;

}  // namespace

const Rule& gauss_hermite(int n) {
  require(n >= 1, "gauss_hermite: n >= 1");
  return cached<build_hermite>(n);
}

const Rule& gauss_legendre(int n) {
  require(n >= 1, "gauss_legendre: n >= 1");
  return cached<build_legendre>(n);
}

NormalExpectation::NormalExpectation(int nodes)
    : nodes_(nodes), panel_order_(std::clamp(nodes / 10, 8, 20)) {
  require(nodes >= 2, "NormalExpectation: nodes >= 2");
  gh_ = &gauss_hermite(nodes_);
  gl_ = &gauss_legendre(panel_order_);
}

void NormalExpectation::points(double mu, std::optional<Kink> kink, std::vector<double>& y,
                               std::vector<double>& w) const {
  y.clear();
  w.clear();
  if (!kink || !(kink->width < 2.0) || !std::isfinite(kink->at)) {
    for (std::size_t i = 0; i < gh_->x.size(); ++i) {
      y.push_back(mu + gh_->x[i]);
      w.push_back(gh_->w[i]);
    }
    return;
  }
  const double lo = mu - kHalfWindow, hi = mu + kHalfWindow;
  thread_local std::vector<double> edges;
  edges.clear();
  for (int j = 0; j <= int(2 * kHalfWindow); ++j) edges.push_back(lo + j);
  const double c = kink->at;
  if (c > lo && c < hi) edges.push_back(c);
  for (double d = std::max(0.25 * kink->width, 1e-12); d < 2 * kHalfWindow; d *= 2.0) {
    if (c - d > lo && c - d < hi) edges.push_back(c - d);
    if (c + d > lo && c + d < hi) edges.push_back(c + d);
  }
  std::sort(edges.begin(), edges.end());
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    double a = edges[p], b = edges[p + 1];
    if (b - a < 1e-14) continue;
    double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < gl_->x.size(); ++i) {
      double yy = mid + half * gl_->x[i];
      double z = yy - mu;
      y.push_back(yy);
      w.push_back(half * gl_->w[i] * norm * std::exp(-0.5 * z * z));
    }
  }
}

}  // namespace overem
