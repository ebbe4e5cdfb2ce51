#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <vector>

namespace sli {

/// Truncated tensor series over R^d: levels 0..depth, level k stored as a flat
/// d^k vector with the first letter most significant.
template <typename Scalar>
class TensorSeries {
 public:
  using Level = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  TensorSeries() = default;
  TensorSeries(int dim, int depth) : dim_(dim), depth_(depth), levels_(depth + 1) {
    Eigen::Index size = 1;
    for (int k = 0; k <= depth; ++k, size *= dim) levels_[k] = Level::Zero(size);
    levels_[0][0] = Scalar(1);
  }

  static TensorSeries identity(int dim, int depth) { return TensorSeries(dim, depth); }

  /// exp(v) = sum v^{(x)k} / k!, the signature of a straight segment with increment v.
  template <typename Derived>
  static TensorSeries exp(const Eigen::MatrixBase<Derived>& v, int depth) {
    TensorSeries s(static_cast<int>(v.size()), depth);
    for (int k = 1; k <= depth; ++k) s.levels_[k] = outer(s.levels_[k - 1], v.template cast<Scalar>()) / Scalar(k);
    return s;
  }

  int dim() const { return dim_; }
  int depth() const { return depth_; }
  const Level& level(int k) const { return levels_[k]; }
  Level& level(int k) { return levels_[k]; }

  /// Coefficient of the word (i_1,...,i_k), 0-based letters.
  Scalar operator()(std::initializer_list<int> word) const {
    Eigen::Index idx = 0;
    for (int i : word) idx = idx * dim_ + i;
    return levels_[word.size()][idx];
  }

  /// Truncated tensor product; with signatures this is Chen concatenation.
  friend TensorSeries operator*(const TensorSeries& a, const TensorSeries& b) {
    assert(a.dim_ == b.dim_ && a.depth_ == b.depth_);
    TensorSeries c(a.dim_, a.depth_);
    c.levels_[0][0] = Scalar(0);
    for (int k = 0; k <= a.depth_; ++k) {
      for (int i = 0; i <= k; ++i) c.levels_[k] += outer(a.levels_[i], b.levels_[k - i]);
    }
    return c;
  }

  friend TensorSeries operator-(const TensorSeries& a, const TensorSeries& b) {
    TensorSeries c = a;
    for (int k = 0; k <= a.depth_; ++k) c.levels_[k] -= b.levels_[k];
    return c;
  }

  /// Inverse in the truncated algebra (requires level 0 = 1):
  /// x^{-1} = sum_j (1 - x)^j.
  TensorSeries inverse() const {
    TensorSeries u = identity(dim_, depth_) - *this;  // level 0 vanishes
    TensorSeries power = identity(dim_, depth_), sum = identity(dim_, depth_);
    for (int j = 1; j <= depth_; ++j) {
      power = power * u;
      for (int k = 0; k <= depth_; ++k) sum.levels_[k] += power.levels_[k];
    }
    return sum;
  }

  /// Largest absolute coefficient difference over all levels.
  Scalar distance(const TensorSeries& other) const {
    Scalar m(0);
    for (int k = 0; k <= depth_; ++k) m = std::max(m, (levels_[k] - other.levels_[k]).cwiseAbs().maxCoeff());
    return m;
  }

 private:
  // Flat Kronecker product a (x) b.
  static Level outer(const Level& a, const Level& b) {
    Level out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
    return out;
  }

  int dim_ = 0;
  int depth_ = 0;
  std::vector<Level> levels_;
};

/// Signature of the piecewise-linear path through the rows of `points`.
template <typename Scalar = double>
TensorSeries<Scalar> path_signature(const Eigen::MatrixXd& points, int depth) {
  TensorSeries<Scalar> s = TensorSeries<Scalar>::identity(static_cast<int>(points.cols()), depth);
  for (Eigen::Index k = 0; k + 1 < points.rows(); ++k)
    s = s * TensorSeries<Scalar>::exp((points.row(k + 1) - points.row(k)).transpose(), depth);
  return s;
}

}  // namespace sli
