#pragma once

#include <cstdint>
#include <vector>

#include "overem/mixture.hpp"

namespace overem {

enum class ModelVariant { KnownWeights, FreeWeights };
enum class StopReason { Tolerance, MaxIterations };

// General k-component iterate. means: k x d.
struct EmState {
  Matrix means;
  Vector weights;
  int iteration = 0;
  ModelVariant variant = ModelVariant::FreeWeights;
};

// Two-component symmetric iterate: components +theta and -theta, weights (w1, 1 - w1).
struct SymmetricState {
  Vector theta;
  double w1 = 0.5;
  int iteration = 0;
  ModelVariant variant = ModelVariant::FreeWeights;
};

template <class State>
struct BasicRunResult {
  State final_state;
  std::vector<State> trajectory;  // empty unless recorded
  bool converged = false;
  StopReason stop_reason = StopReason::MaxIterations;
};

using RunResult = BasicRunResult<EmState>;
using SymmetricRunResult = BasicRunResult<SymmetricState>;

struct InitSpec {
  enum class Scheme { FromSample, FromRectangle, Explicit };
  enum class Weights { Uniform, Explicit };

  Scheme scheme = Scheme::FromSample;
  Vector lo, hi;   // FromRectangle
  Matrix means;    // Explicit
  Weights weight_init = Weights::Uniform;
  Vector weights;  // Weights::Explicit

  static InitSpec from_sample();
  static InitSpec from_rectangle(Vector lo, Vector hi);
  static InitSpec explicit_means(Matrix means);
  InitSpec with_weights(Vector w) const;
};

// c(w1) = log(w1 / (1 - w1)) / 2, so tanh(c) = 2 w1 - 1. Infinite at w1 in {0, 1}.
double half_log_odds(double w1);

// Posterior component probabilities, n x k, computed in log space.
Matrix responsibilities(const Matrix& means, const Vector& weights, const PointMatrix& points);

EmState em_step_known_weights(const EmState& state, const Dataset& data, const Vector& truth_weights);
EmState em_step_free_weights(const EmState& state, const Dataset& data);
SymmetricState em_step_known_weights(const SymmetricState& state, const Dataset& data, double w1_star);
SymmetricState em_step_free_weights(const SymmetricState& state, const Dataset& data);

// KnownWeights states carry the true weights and keep them fixed.
EmState em_step(const EmState& state, const Dataset& data);
SymmetricState em_step(const SymmetricState& state, const Dataset& data);

RunResult run_em(const EmState& initial, const Dataset& data, int max_iter = 2000, double tol = 1e-9,
                 bool record_trajectory = false);
SymmetricRunResult run_em(const SymmetricState& initial, const Dataset& data, int max_iter = 2000,
                          double tol = 1e-9, bool record_trajectory = false);

// data may be null unless scheme == FromSample.
EmState initialize(const InitSpec& spec, ModelVariant variant, int k, const Dataset* data,
                   std::uint64_t seed);

}  // namespace overem
