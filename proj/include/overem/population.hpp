#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "overem/em.hpp"
#include "overem/quadrature.hpp"

namespace overem {

// Population EM maps for the truth w1* N(theta*, 1) + (1 - w1*) N(-theta*, 1), by quadrature.
//
// Expectations are split per component: w1* E g(theta* + z) + w2* E g(-theta* + z).
// Any finite theta* and w1* in (0,1) are accepted; (theta*, w1*) and (-theta*, 1 - w1*)
// describe the same truth and give identical maps.
class PopulationMap {
 public:
  PopulationMap(double theta_star, double w1_star, int quad_nodes = 150);

  double theta_star() const { return theta_star_; }
  double w1_star() const { return w1_star_; }
  int quad_nodes() const { return quad_.nodes(); }

  struct Values {
    double gtheta;  // E tanh(theta y + c) y
    double gw;      // E (1 + tanh(theta y + c)) / 2
    double s;       // transverse factor
  };
  Values evaluate(double theta, double w1) const;

  double H(double theta) const { return evaluate(theta, w1_star_).gtheta; }
  double Gtheta(double theta, double w1) const { return evaluate(theta, w1).gtheta; }
  double Gw(double theta, double w1) const { return evaluate(theta, w1).gw; }
  double s(double theta_norm, double w1) const { return evaluate(theta_norm, w1).s; }

  // Partial derivatives of (G_theta, G_w), for w1 in (0,1).
  struct Partials {
    double gtheta_theta, gtheta_w, gw_theta, gw_w;
  };
  Partials partials(double theta, double w1) const;

  // E_{f*} f(y) with an optional step location hint.
  template <class F>
  double expect(F&& f, std::optional<Kink> kink = std::nullopt) const {
    return w1_star_ * quad_(theta_star_, kink, f) + (1.0 - w1_star_) * quad_(-theta_star_, kink, f);
  }

  // Step location of tanh(theta y + c(w1)), if any.
  static std::optional<Kink> kink_of(double theta, double w1);

  const NormalExpectation& quadrature() const { return quad_; }

 private:
  double theta_star_;
  double w1_star_;
  NormalExpectation quad_;
};

double map_H(double theta, const PopulationMap& pm);
double map_Gw(double theta, double w1, const PopulationMap& pm);
double map_Gtheta(double theta, double w1, const PopulationMap& pm);
double shrink_s(double theta_norm, double w1, const PopulationMap& pm);

// Population EM2 iterate reduced to (|theta|, angle to theta*, w1).
struct ReducedState {
  double theta_norm = 1.0;
  double angle = 0.0;
  double w1 = 0.5;
  int iteration = 0;

  double star_parallel(double star_norm) const;
  double star_perp(double star_norm) const;
};

ReducedState popem2_step_reduced(const ReducedState& state, double star_norm, double w1_star,
                                 int quad_nodes = 150);

struct JacobianReport {
  Eigen::Matrix2d entries;
  std::array<double, 2> eigenvalues;  // ascending
  double spectral_radius = 0.0;
};

JacobianReport jacobian_at_truth(const PopulationMap& pm);

// Full-vector population iteration in R^d.
enum class PopVariant { EM1, EM2 };

struct PopState {
  Vector theta;
  double w1 = 0.5;
  int iteration = 0;
};

struct PopTrajectory {
  std::vector<PopState> states;  // initial state first
  bool converged = false;
  StopReason stop_reason = StopReason::MaxIterations;
};

// EM1 keeps w1 = w1_star and updates theta only.
PopState popem_step(PopVariant variant, const PopState& state, const Vector& theta_star,
                    double w1_star, int quad_nodes = 150);

PopTrajectory popem_trajectory(PopVariant variant, const PopState& initial, const Vector& theta_star,
                               double w1_star, int quad_nodes = 150, int max_iter = 2000,
                               double tol = 1e-12);

// Angle between theta and theta* in [0, pi]; 0 when theta = 0.
double angle_between(const Vector& a, const Vector& b);

// Distance to the target: EM1 -> (theta*, w1*); EM2 -> nearer of (theta*, w1*) and (-theta*, w2*).
double distance_to_truth(PopVariant variant, const PopState& s, const Vector& theta_star,
                         double w1_star);

// CSV: t, theta_norm, angle_rad, w1, dist_to_truth
void write_trajectory_csv(std::ostream& os, PopVariant variant, const PopTrajectory& traj,
                          const Vector& theta_star, double w1_star);

// Population EM for a general two-component estimate against a one-dimensional truth
// with any number of components. Means are free (not mirrored).
class LinePopulationEm {
 public:
  LinePopulationEm(const GaussianMixture& truth, int quad_nodes = 150);
  EmState step(const EmState& s) const;
  BasicRunResult<EmState> run(const EmState& initial, int max_iter, double tol) const;

 private:
  GaussianMixture truth_;
  NormalExpectation quad_;
};

}  // namespace overem
