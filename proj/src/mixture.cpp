#include "overem/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "overem/rng.hpp"

namespace overem {

GaussianMixture::GaussianMixture(Matrix means, Vector weights)
    : means_(std::move(means)), weights_(std::move(weights)) {
  require(means_.rows() >= 1 && means_.cols() >= 1, "mixture: need k >= 1 and d >= 1");
  require(weights_.size() == means_.rows(), "mixture: one weight per mean");
  require(std::abs(weights_.sum() - 1.0) <= 1e-12, "mixture: weights must sum to 1");
  for (double w : weights_) require(w > 0.0 && w < 1.0 + 1e-15, "mixture: weights in (0,1)");
  require(means_.allFinite(), "mixture: means must be finite");
}

GaussianMixture GaussianMixture::symmetric(const Vector& theta, double w1) {
  require(w1 > 0.0 && w1 < 1.0, "symmetric mixture: w1 in (0,1)");
  Matrix m(2, theta.size());
  m.row(0) = theta.transpose();
  m.row(1) = -theta.transpose();
  Vector w(2);
  w << w1, 1.0 - w1;
  return GaussianMixture(m, w);
}

Dataset sample(const GaussianMixture& model, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample: n >= 1");
  Rng rng(seed);
  const int k = model.k(), d = model.dim();
  std::vector<double> cum(k);
  std::partial_sum(model.weights().begin(), model.weights().end(), cum.begin());
  Dataset out;
  out.seed = seed;
  out.points.resize(Eigen::Index(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform() * cum.back();
    int j = int(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    j = std::min(j, k - 1);
    for (int c = 0; c < d; ++c) out.points(Eigen::Index(i), c) = model.means()(j, c) + rng.normal();
  }
  return out;
}

double log_likelihood(const Matrix& means, const Vector& weights, const PointMatrix& points) {
  require(points.cols() == means.cols(), "log_likelihood: dimension mismatch");
  const int k = int(means.rows());
  const double d = double(means.cols());
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi);
  Vector logw = weights.array().log();
  std::vector<double> terms(k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      terms[j] = logw(j) - 0.5 * (points.row(i) - means.row(j)).squaredNorm();
      mx = std::max(mx, terms[j]);
    }
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(terms[j] - mx);
    total += mx + std::log(s);
  }
  return total / double(points.rows()) + log_norm;
}

double log_likelihood(const GaussianMixture& model, const Dataset& data) {
  return log_likelihood(model.means(), model.weights(), data.points);
}

Matrix fisher_information_means(const GaussianMixture& model, std::size_t mc_samples,
                                std::uint64_t seed) {
  require(mc_samples >= 10'000, "fisher_information_means: mc_samples >= 1e4");
  const int k = model.k(), d = model.dim();
  const Matrix& mu = model.means();
  Vector logw = model.weights().array().log();
  Dataset ds = sample(model, mc_samples, seed);
  Matrix info = Matrix::Zero(k * d, k * d);
  Vector score(k * d), r(k);
  for (Eigen::Index i = 0; i < ds.points.rows(); ++i) {
    auto y = ds.points.row(i);
    for (int j = 0; j < k; ++j) r(j) = logw(j) - 0.5 * (y - mu.row(j)).squaredNorm();
    r = (r.array() - r.maxCoeff()).exp();
    r /= r.sum();
    for (int j = 0; j < k; ++j) score.segment(j * d, d) = r(j) * (y - mu.row(j)).transpose();
    info.selfadjointView<Eigen::Lower>().rankUpdate(score);
  }
  info = info.selfadjointView<Eigen::Lower>();
  info /= double(mc_samples);
  Eigen::SelfAdjointEigenSolver<Matrix> es(info, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw SingularFisherError("Fisher information estimate is singular (condition number > 1e12)");
  return info;
}

ErrorReport weighted_permutation_error(const Matrix& estimate_means, const GaussianMixture& truth) {
  const int k = truth.k();
  require(estimate_means.rows() == k && estimate_means.cols() == truth.dim(),
          "weighted_permutation_error: shape mismatch");
  require(k <= 10, "weighted_permutation_error: k > 10 not supported");
  // cost[i][j]: weighted distance if estimate row j plays truth component i
  Matrix cost(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      cost(i, j) = truth.weights()(i) * (estimate_means.row(j) - truth.means().row(i)).squaredNorm();
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  ErrorReport best;
  best.error = std::numeric_limits<double>::infinity();
  do {
    double e = 0.0;
    for (int i = 0; i < k; ++i) e += cost(i, perm[i]);
    if (e < best.error) {
      best.error = e;
      best.best_permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double success_threshold(const GaussianMixture& truth, SampleSize n, std::size_t mc_samples,
                         std::uint64_t seed) {
  if (n.is_infinite()) return kPopulationThreshold;
  const int k = truth.k(), d = truth.dim();
  Matrix info = fisher_information_means(truth, mc_samples, seed);
  Matrix inv = info.ldlt().solve(Matrix::Identity(k * d, k * d));
  double tr = 0.0;
  for (int j = 0; j < k; ++j)
    for (int c = 0; c < d; ++c) tr += truth.weights()(j) * inv(j * d + c, j * d + c);
  return 4.0 * tr / double(n.value());
}

}  // namespace overem
