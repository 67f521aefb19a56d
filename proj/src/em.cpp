#include "overem/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "overem/rng.hpp"

namespace overem {

double half_log_odds(double w1) { return 0.5 * (std::log(w1) - std::log1p(-w1)); }

InitSpec InitSpec::from_sample() { return InitSpec{}; }

InitSpec InitSpec::from_rectangle(Vector lo, Vector hi) {
  require(lo.size() == hi.size() && lo.size() >= 1, "rectangle: lo/hi size mismatch");
  for (Eigen::Index i = 0; i < lo.size(); ++i) require(lo(i) < hi(i), "rectangle: lo < hi");
  InitSpec s;
  s.scheme = Scheme::FromRectangle;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

InitSpec InitSpec::explicit_means(Matrix means) {
  InitSpec s;
  s.scheme = Scheme::Explicit;
  s.means = std::move(means);
  return s;
}

InitSpec InitSpec::with_weights(Vector w) const {
  InitSpec s = *this;
  s.weight_init = Weights::Explicit;
  s.weights = std::move(w);
  return s;
}

Matrix responsibilities(const Matrix& means, const Vector& weights, const PointMatrix& points) {
  require(points.cols() == means.cols(), "responsibilities: dimension mismatch");
  // the -|y|^2/2 term is common to every component and drops out
  Matrix logits = points * means.transpose();
  Eigen::RowVectorXd offset =
      (weights.array().log() - 0.5 * means.rowwise().squaredNorm().array()).transpose();
  logits.rowwise() += offset;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double mx = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - mx).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

namespace {

void check_shapes(const EmState& s, const Dataset& data) {
  require(data.n() >= 1, "em step: empty dataset");
  require(s.means.cols() == data.dim(), "em step: dimension mismatch");
  require(s.weights.size() == s.means.rows(), "em step: one weight per mean");
}

EmState general_step(const EmState& s, const Dataset& data, const Vector& resp_weights,
                     bool update_weights) {
  check_shapes(s, data);
  // same arithmetic as responsibilities(), on whole columns so exp vectorizes
  Eigen::ArrayXXd r = (data.points * s.means.transpose()).array();
  Eigen::ArrayXd offset = resp_weights.array().log() - 0.5 * s.means.rowwise().squaredNorm().array();
  r.rowwise() += offset.transpose();
  Eigen::ArrayXd mx = r.rowwise().maxCoeff();
  r.colwise() -= mx;
  r = r.exp();
  Eigen::ArrayXd inv = r.rowwise().sum().inverse();
  r.colwise() *= inv;
  Vector mass = r.colwise().sum().transpose().matrix();
  Matrix acc = r.matrix().transpose() * data.points;
  for (Eigen::Index j = 0; j < mass.size(); ++j)
    if (!(mass(j) >= 1e-300))
      throw DegenerateComponentError("em step: component " + std::to_string(j) +
                                     " has vanishing responsibility");
  EmState out = s;
  out.means = acc;
  out.means.array().colwise() /= mass.array();
  if (update_weights) out.weights = mass / double(data.n());
  out.iteration = s.iteration + 1;
  return out;
}

// One pass over the data for the symmetric maps: theta <- mean tanh(<y,theta> + c) y,
// w <- mean (1 + tanh(<y,theta> + c)) / 2.
void symmetric_pass(const Vector& theta, double w1, const Dataset& data, Vector& theta_out,
                    double& w_out) {
  require(data.n() >= 1, "em step: empty dataset");
  require(theta.size() == data.dim(), "em step: dimension mismatch");
  const double c = half_log_odds(w1);
  Vector proj = data.points * theta;
  theta_out = Vector::Zero(theta.size());
  double wsum = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    double t = std::tanh(proj(i) + c);
    theta_out += t * data.points.row(i).transpose();
    wsum += 0.5 * (1.0 + t);
  }
  theta_out /= double(data.n());
  w_out = wsum / double(data.n());
}

}  // namespace

EmState em_step_known_weights(const EmState& state, const Dataset& data, const Vector& truth_weights) {
  require(truth_weights.size() == state.means.rows(), "em step: one weight per mean");
  return general_step(state, data, truth_weights, false);
}

EmState em_step_free_weights(const EmState& state, const Dataset& data) {
  return general_step(state, data, state.weights, true);
}

SymmetricState em_step_known_weights(const SymmetricState& state, const Dataset& data,
                                     double w1_star) {
  SymmetricState out = state;
  double unused;
  symmetric_pass(state.theta, w1_star, data, out.theta, unused);
  out.iteration = state.iteration + 1;
  return out;
}

SymmetricState em_step_free_weights(const SymmetricState& state, const Dataset& data) {
  SymmetricState out = state;
  symmetric_pass(state.theta, state.w1, data, out.theta, out.w1);
  out.iteration = state.iteration + 1;
  return out;
}

EmState em_step(const EmState& state, const Dataset& data) {
  return state.variant == ModelVariant::KnownWeights
             ? em_step_known_weights(state, data, state.weights)
             : em_step_free_weights(state, data);
}

SymmetricState em_step(const SymmetricState& state, const Dataset& data) {
  return state.variant == ModelVariant::KnownWeights
             ? em_step_known_weights(state, data, state.w1)
             : em_step_free_weights(state, data);
}

namespace {

double change(const EmState& a, const EmState& b) {
  return std::max((a.means - b.means).lpNorm<Eigen::Infinity>(),
                  (a.weights - b.weights).lpNorm<Eigen::Infinity>());
}

double change(const SymmetricState& a, const SymmetricState& b) {
  return std::max((a.theta - b.theta).lpNorm<Eigen::Infinity>(), std::abs(a.w1 - b.w1));
}

template <class State>
BasicRunResult<State> run_loop(const State& initial, const Dataset& data, int max_iter, double tol,
                               bool record) {
  require(max_iter >= 1, "run_em: max_iter >= 1");
  require(tol > 0.0, "run_em: tol > 0");
  BasicRunResult<State> res;
  State cur = initial;
  if (record) res.trajectory.push_back(cur);
  for (int it = 0; it < max_iter; ++it) {
    State next = em_step(cur, data);
    double delta = change(cur, next);
    cur = std::move(next);
    if (record) res.trajectory.push_back(cur);
    if (delta < tol) {
      res.converged = true;
      res.stop_reason = StopReason::Tolerance;
      break;
    }
  }
  res.final_state = std::move(cur);
  return res;
}

}  // namespace

RunResult run_em(const EmState& initial, const Dataset& data, int max_iter, double tol,
                 bool record_trajectory) {
  return run_loop(initial, data, max_iter, tol, record_trajectory);
}

SymmetricRunResult run_em(const SymmetricState& initial, const Dataset& data, int max_iter, double tol,
                          bool record_trajectory) {
  return run_loop(initial, data, max_iter, tol, record_trajectory);
}

EmState initialize(const InitSpec& spec, ModelVariant variant, int k, const Dataset* data,
                   std::uint64_t seed) {
  require(k >= 1, "initialize: k >= 1");
  Rng rng(seed);
  EmState s;
  s.variant = variant;
  switch (spec.scheme) {
    case InitSpec::Scheme::FromSample: {
      require(data != nullptr, "initialize: FromSample needs a dataset");
      require(data->n() >= k, "initialize: FromSample needs n >= k");
      // partial Fisher-Yates: k distinct rows
      std::vector<int> idx(data->n());
      std::iota(idx.begin(), idx.end(), 0);
      s.means.resize(k, data->dim());
      for (int j = 0; j < k; ++j) {
        std::size_t pick = j + rng.index(idx.size() - j);
        std::swap(idx[j], idx[pick]);
        s.means.row(j) = data->points.row(idx[j]);
      }
      break;
    }
    case InitSpec::Scheme::FromRectangle: {
      const Eigen::Index d = spec.lo.size();
      s.means.resize(k, d);
      for (int j = 0; j < k; ++j)
        for (Eigen::Index c = 0; c < d; ++c) s.means(j, c) = rng.uniform(spec.lo(c), spec.hi(c));
      break;
    }
    case InitSpec::Scheme::Explicit:
      require(spec.means.rows() == k, "initialize: explicit means must have k rows");
      s.means = spec.means;
      break;
  }
  if (spec.weight_init == InitSpec::Weights::Uniform) {
    s.weights = Vector::Constant(k, 1.0 / k);
  } else {
    require(spec.weights.size() == k, "initialize: explicit weights must have k entries");
    require(std::abs(spec.weights.sum() - 1.0) <= 1e-10, "initialize: weights must sum to 1");
    s.weights = spec.weights;
  }
  return s;
}

}  // namespace overem
