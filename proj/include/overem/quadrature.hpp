#pragma once

#include <optional>
#include <vector>

namespace overem {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

// Probabilists' Gauss-Hermite: sum w_i f(x_i) ~ E f(Z), Z ~ N(0,1). Weights sum to 1.
// Rules are built once per size and cached.
const Rule& gauss_hermite(int n);
// Gauss-Legendre on [-1, 1].
const Rule& gauss_legendre(int n);

// A logistic-like step in the integrand: centre and width (1/slope).
struct Kink {
  double at;
  double width;
};

// E[f(mu + Z)] for Z ~ N(0,1), integrand written in terms of y = mu + Z.
//
// Smooth integrands (no kink, or width >= 2) use Gauss-Hermite with `nodes` points.
// A sharp step ruins Gauss-Hermite convergence (tanh(theta*y) for theta = 5 already
// loses 1e-5 at 150 nodes), so for those we switch to composite Gauss-Legendre
// on [mu - 12, mu + 12]: unit panels plus breakpoints graded geometrically
// toward the step.
class NormalExpectation {
 public:
  explicit NormalExpectation(int nodes = 150);

  int nodes() const { return nodes_; }
  int panel_order() const { return panel_order_; }

  // Abscissae y_i and weights w_i with sum_i w_i f(y_i) ~ E f(mu + Z).
  void points(double mu, std::optional<Kink> kink, std::vector<double>& y,
              std::vector<double>& w) const;

  template <class F>
  double operator()(double mu, std::optional<Kink> kink, F&& f) const {
    thread_local std::vector<double> y, w;
    points(mu, kink, y, w);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * f(y[i]);
    return s;
  }

 private:
  int nodes_;
  int panel_order_;
  const Rule* gh_;
  const Rule* gl_;
};

}  // namespace overem
