#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "overem/core.hpp"

namespace overem {

// Mixture of k unit-covariance Gaussians in R^d. Means are stored one per row.
class GaussianMixture {
 public:
  GaussianMixture(Matrix means, Vector weights);

  // w1 N(theta, I) + (1 - w1) N(-theta, I)
  static GaussianMixture symmetric(const Vector& theta, double w1);

  int dim() const { return int(means_.cols()); }
  int k() const { return int(means_.rows()); }
  const Matrix& means() const { return means_; }
  const Vector& weights() const { return weights_; }

 private:
  Matrix means_;
  Vector weights_;
};

struct Dataset {
  PointMatrix points;
  std::uint64_t seed = 0;

  int n() const { return int(points.rows()); }
  int dim() const { return int(points.cols()); }
};

struct ErrorReport {
  double error = 0.0;
  // best_permutation[i] is the estimate row matched to truth component i
  std::vector<int> best_permutation;
};

// Sample size, possibly infinite (population limit).
class SampleSize {
 public:
  static SampleSize finite(std::size_t n) {
    require(n >= 1, "SampleSize: n >= 1");
    return SampleSize(n);
  }
  static SampleSize infinite() { return SampleSize(0); }
  bool is_infinite() const { return n_ == 0; }
  std::size_t value() const { return n_; }
  bool operator==(const SampleSize&) const = default;

 private:
  explicit SampleSize(std::size_t n) : n_(n) {}
  std::size_t n_;
};

Dataset sample(const GaussianMixture& model, std::size_t n, std::uint64_t seed);

// Average log-density, including the (2 pi)^{-d/2} constant.
double log_likelihood(const GaussianMixture& model, const Dataset& data);
double log_likelihood(const Matrix& means, const Vector& weights, const PointMatrix& points);

// Monte-Carlo Fisher information for the stacked means (weights held at truth).
// Layout: component-major, [theta_1; theta_2; ...].
Matrix fisher_information_means(const GaussianMixture& model, std::size_t mc_samples,
                                std::uint64_t seed);

ErrorReport weighted_permutation_error(const Matrix& estimate_means, const GaussianMixture& truth);

constexpr double kPopulationThreshold = 1e-7;
constexpr std::size_t kFisherSamples = 1'000'000;

// 4 Tr(W I^{-1}) / n for finite n, 1e-7 for the population limit.
double success_threshold(const GaussianMixture& truth, SampleSize n,
                         std::size_t mc_samples = kFisherSamples, std::uint64_t seed = 20240611);

}  // namespace overem
