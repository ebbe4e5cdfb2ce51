#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "sli/expr.hpp"

namespace sli {

/// Piecewise-linear path t -> w_t in R^d, sampled on a strictly increasing mesh
/// starting at the origin.
struct DriverPath {
  Eigen::VectorXd times;   // N+1
  Eigen::MatrixXd values;  // (N+1) x d, row k is w(t_k)

  int steps() const { return static_cast<int>(times.size()) - 1; }
  int dim() const { return static_cast<int>(values.cols()); }
  double horizon() const { return times[times.size() - 1]; }

  Eigen::VectorXd operator()(double t) const;
  Eigen::VectorXd increment(int k) const { return (values.row(k + 1) - values.row(k)).transpose(); }
  double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }

  /// Throws MeshMismatch / Evaluation on broken invariants.
  void validate() const;
};

/// 0 = t_0 < ... < t_N = T, equally spaced.
Eigen::VectorXd uniform_mesh(double horizon, int steps);

struct FbmSpec {
  double hurst = 0.5;
  double horizon = 1.0;
  int steps = 1024;
  std::uint64_t seed = 0;
  int dim = 1;

  void validate() const;
};

/// Exact fBm on a uniform mesh: Cholesky factor of the fractional Gaussian
/// noise covariance, computed once and reused for every sample. Cost is
/// O(N^3) to set up and O(N^2 d) per path; H = 1/2 skips the factorization.
class FbmSampler {
 public:
  explicit FbmSampler(const FbmSpec& spec);

  DriverPath sample(std::uint64_t seed) const;
  DriverPath sample(std::mt19937_64& rng) const;

  const FbmSpec& spec() const { return spec_; }
  /// Covariance of the increments, N x N.
  Eigen::MatrixXd increment_covariance() const;

 private:
  FbmSpec spec_;
  Eigen::VectorXd mesh_;
  Eigen::MatrixXd factor_;  // lower triangular; empty when H = 1/2
  double white_scale_ = 0.0;
};

DriverPath sample_fbm(const FbmSpec& spec);

/// R(s,t) = (s^2H + t^2H - |t-s|^2H) / 2.
double fbm_covariance(double hurst, double s, double t);

/// w + eps h on a common mesh.
DriverPath shift(const DriverPath& w, const DriverPath& h, double eps);

/// Samples t -> (f_1(t), ..., f_d(t)) - f(t_0) on the mesh. Expressions are
/// functions of the single variable t.
DriverPath smooth_driver(const std::vector<Expression>& formula, const Eigen::VectorXd& times);

/// Independent stream for replicate `index` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// CSV with header t,w1,...,wd.
void write_csv(const DriverPath& path, std::ostream& out);
DriverPath read_csv(std::istream& in);

}  // namespace sli
