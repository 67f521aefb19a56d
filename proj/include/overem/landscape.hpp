#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "overem/core.hpp"

namespace overem {

// Truth of the symmetric two-component model in R^d.
struct SymmetricTruth {
  Vector theta_star;
  double w1_star = 0.5;
};

// Expected log-density E log(w1 phi(y - theta) + w2 phi(y + theta)) under the truth.
// Only the coordinate of y along theta matters once E|y|^2 = d + |theta*|^2 is pulled out,
// so this is a one-dimensional integral.
double pop_loglik(const Vector& theta, double w1, const SymmetricTruth& truth, int quad_nodes = 150);

struct Gradient {
  Vector mean;    // G_theta(theta, w1) - theta
  double weight;  // d/dw1 of pop_loglik
  double max_norm() const;
};

Gradient pop_grad(const Vector& theta, double w1, const SymmetricTruth& truth, int quad_nodes = 150);

struct OriginHessian {
  Matrix closed_form;        // [[t t^T, 2(w1*-w2*) t], [2(w1*-w2*) t^T, 0]]
  Matrix finite_difference;  // of pop_loglik at (0, 1/2), step 1e-3
};

OriginHessian hessian_at_origin(const SymmetricTruth& truth, int quad_nodes = 150);

enum class StationaryKind { GlobalMaxCandidate, Saddle, NotStationary };
const char* to_string(StationaryKind k);

struct StationaryReport {
  Vector theta;
  double w1 = 0.5;
  double gradient_norm = 0.0;
  StationaryKind classification = StationaryKind::NotStationary;
  std::optional<Vector> hessian_eigs;
};

constexpr double kStationaryTol = 1e-8;

// Grid scan over |theta_i| <= sqrt(1 + |theta*|^2) + 1, w1 in (0, 1); local minima of the
// residual are refined by damped Newton. Saddle covers every stationary point that is not
// a strict local maximum. d must be 1 or 2.
std::vector<StationaryReport> scan_stationary_points(const SymmetricTruth& truth, int grid = 60,
                                                     int quad_nodes = 150);

// d = 1 raster: theta, w1, loglik, grad_norm
void write_landscape_raster(std::ostream& os, const SymmetricTruth& truth, int grid,
                            int quad_nodes = 150);

}  // namespace overem
