#include "sli/driver.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "sli/error.hpp"

namespace sli {

Eigen::VectorXd DriverPath::operator()(double t) const {
  const int n = steps();
  if (t <= times[0]) return values.row(0).transpose();
  if (t >= times[n]) return values.row(n).transpose();
  const auto it = std::upper_bound(times.data(), times.data() + n + 1, t);
  const int k = static_cast<int>(it - times.data()) - 1;
  const double s = (t - times[k]) / (times[k + 1] - times[k]);
  return ((1 - s) * values.row(k) + s * values.row(k + 1)).transpose();
}

void DriverPath::validate() const {
  if (times.size() < 2) throw Error(ErrorKind::MeshMismatch, "a driver needs at least one segment");
  if (values.rows() != times.size())
    throw Error(ErrorKind::MeshMismatch, "driver has " + std::to_string(values.rows()) + " values for " +
                                             std::to_string(times.size()) + " mesh times");
  for (int k = 0; k < steps(); ++k)
    if (!(times[k + 1] > times[k])) throw Error(ErrorKind::MeshMismatch, "mesh times are not strictly increasing");
  if (!values.allFinite()) throw Error(ErrorKind::Evaluation, "driver values are not finite");
  if (values.row(0).cwiseAbs().maxCoeff() != 0.0) throw Error(ErrorKind::Evaluation, "driver does not start at 0");
}

Eigen::VectorXd uniform_mesh(double horizon, int steps) {
  if (steps < 1 || !(horizon > 0)) throw Error(ErrorKind::Config, "mesh needs steps >= 1 and horizon > 0");
  Eigen::VectorXd t(steps + 1);
  for (int k = 0; k <= steps; ++k) t[k] = horizon * k / steps;
  t[steps] = horizon;
  return t;
}

void FbmSpec::validate() const {
  if (!(hurst > 0.25 && hurst < 1.0)) throw Error(ErrorKind::Config, "Hurst parameter must lie in (1/4, 1)");
  if (!(horizon > 0)) throw Error(ErrorKind::Config, "horizon must be positive");
  if (steps < 1) throw Error(ErrorKind::Config, "steps must be >= 1");
  if (dim < 1) throw Error(ErrorKind::Config, "dimension must be >= 1");
}

double fbm_covariance(double hurst, double s, double t) {
  const double h2 = 2 * hurst;
  return 0.5 * (std::pow(std::abs(s), h2) + std::pow(std::abs(t), h2) - std::pow(std::abs(t - s), h2));
}

FbmSampler::FbmSampler(const FbmSpec& spec) : spec_(spec) {
  spec_.validate();
  mesh_ = uniform_mesh(spec_.horizon, spec_.steps);
  const double dt = spec_.horizon / spec_.steps;
  white_scale_ = std::pow(dt, spec_.hurst);
  if (spec_.hurst == 0.5) return;
  Eigen::LLT<Eigen::MatrixXd> llt(increment_covariance());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::Covariance, "Cholesky factorization of the increment covariance failed");
  factor_ = llt.matrixL();
}

Eigen::MatrixXd FbmSampler::increment_covariance() const {
  const int n = spec_.steps;
  const double h2 = 2 * spec_.hurst;
  const double scale = 0.5 * std::pow(spec_.horizon / n, h2);
  // Stationary increments: the covariance is Toeplitz in |i - j|.
  Eigen::VectorXd gamma(n);
  for (int k = 0; k < n; ++k)
    gamma[k] = scale * (std::pow(k + 1.0, h2) + std::pow(std::abs(k - 1.0), h2) - 2 * std::pow(double(k), h2));
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = gamma[std::abs(i - j)];
  return c;
}

DriverPath FbmSampler::sample(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  return sample(rng);
}

DriverPath FbmSampler::sample(std::mt19937_64& rng) const {
  const int n = spec_.steps, d = spec_.dim;
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(n, d);
  for (int a = 0; a < d; ++a)
    for (int k = 0; k < n; ++k) z(k, a) = normal(rng);
  const Eigen::MatrixXd inc =
      factor_.size() ? Eigen::MatrixXd(factor_.triangularView<Eigen::Lower>() * z) : Eigen::MatrixXd(white_scale_ * z);
  DriverPath p;
  p.times = mesh_;
  p.values = Eigen::MatrixXd::Zero(n + 1, d);
  for (int k = 0; k < n; ++k) p.values.row(k + 1) = p.values.row(k) + inc.row(k);
  return p;
}

DriverPath sample_fbm(const FbmSpec& spec) { return FbmSampler(spec).sample(spec.seed); }

DriverPath shift(const DriverPath& w, const DriverPath& h, double eps) {
  if (w.times.size() != h.times.size() || w.dim() != h.dim() || w.times != h.times)
    throw Error(ErrorKind::MeshMismatch, "shift direction lives on a different mesh");
  DriverPath out = w;
  out.values += eps * h.values;
  return out;
}

DriverPath smooth_driver(const std::vector<Expression>& formula, const Eigen::VectorXd& times) {
  const int d = static_cast<int>(formula.size());
  if (d == 0) throw Error(ErrorKind::Config, "smooth driver needs at least one component");
  for (const auto& f : formula)
    if (f.arity() > 1) throw Error(ErrorKind::Config, "smooth driver components must depend on t only");
  const Program prog(formula);
  DriverPath p;
  p.times = times;
  p.values.resize(times.size(), d);
  std::vector<double> out(d), work;
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    const double t = times[k];
    prog.eval(std::span<const double>(&t, 1), out, work);
    for (int a = 0; a < d; ++a) p.values(k, a) = out[a];
  }
  const Eigen::RowVectorXd start = p.values.row(0);
  p.values.rowwise() -= start;
  p.validate();
  return p;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 applied twice, so nearby (master, index) pairs decorrelate.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ (index + 0x632be59bd9b4e019ULL));
}

void write_csv(const DriverPath& path, std::ostream& out) {
  out << "t";
  for (int a = 0; a < path.dim(); ++a) out << ",w" << a + 1;
  out << '\n';
  out.precision(17);
  for (int k = 0; k <= path.steps(); ++k) {
    out << path.times[k];
    for (int a = 0; a < path.dim(); ++a) out << ',' << path.values(k, a);
    out << '\n';
  }
}

DriverPath read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t", 0) != 0) throw Error(ErrorKind::Io, "missing CSV header t,w1,...");
  const int d = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (d < 1) throw Error(ErrorKind::Io, "CSV header has no path columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::vector<double> row;
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Io, "bad CSV number '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != d + 1) throw Error(ErrorKind::Io, "CSV row has the wrong number of columns");
    rows.push_back(std::move(row));
  }
  DriverPath p;
  p.times.resize(rows.size());
  p.values.resize(rows.size(), d);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    p.times[k] = rows[k][0];
    for (int a = 0; a < d; ++a) p.values(k, a) = rows[k][a + 1];
  }
  p.validate();
  return p;
}

}  // namespace sli
