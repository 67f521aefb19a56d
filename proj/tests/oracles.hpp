#pragma once
// Reference computations for the tests. None of these call the library's quadrature.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace oracle {

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }

// Composite Simpson of f on [a, b].
template <class F>
double simpson(F&& f, double a, double b, int panels = 400000) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Composite Simpson of f(y) * (w1 phi(y - a) + (1 - w1) phi(y + a)) on [-L, L].
template <class F>
double simpson_mixture(F&& f, double a, double w1, double L = 40.0, int panels = 400000) {
  auto g = [&](double y) { return f(y) * (w1 * phi(y - a) + (1 - w1) * phi(y + a)); };
  return simpson(g, -L, L, panels);
}

// Composite Simpson of f(y) phi(y - mu).
template <class F>
double simpson_normal(F&& f, double mu, double L = 40.0, int panels = 400000) {
  return simpson_mixture(f, mu, 1.0, L, panels);
}

struct McResult {
  double mean;
  double stderr_;
};

// Plain Monte Carlo of E f(y), y ~ w1 N(a, 1) + (1 - w1) N(-a, 1).
template <class F>
McResult mc_mixture(F&& f, double a, double w1, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    double y = (u(eng) < w1 ? a : -a) + z(eng);
    double v = f(y);
    s += v;
    s2 += v * v;
  }
  double m = s / samples;
  double var = s2 / samples - m * m;
  return {m, std::sqrt(var / samples)};
}

}  // namespace oracle
