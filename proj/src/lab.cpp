#include "sli/lab.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "sli/error.hpp"
#include "sli/parallel.hpp"

namespace sli {

void ExperimentSpec::validate() const {
  const int n = static_cast<int>(system.x0.size());
  if (system.fields.empty()) throw Error(ErrorKind::Config, "experiment needs driving fields");
  for (const auto& v : system.fields)
    if (v.dim() != n) throw Error(ErrorKind::Config, "field dimension differs from x0");
  if (forms.empty()) throw Error(ErrorKind::Config, "experiment needs at least one form");
  for (const auto& f : forms)
    if (f.dim() != n) throw Error(ErrorKind::Config, "form dimension differs from x0");
  for (const auto& b : event) {
    if (b.dim() != n || b.upper.size() != n) throw Error(ErrorKind::Config, "event region dimension differs from x0");
    if (!(b.lower.array() < b.upper.array()).all()) throw Error(ErrorKind::Config, "event regions must be nonempty boxes");
  }
  if (replicates < 1) throw Error(ErrorKind::Config, "replicates must be >= 1");
  if (system.steps < 1 || system.substeps < 1) throw Error(ErrorKind::Config, "steps and substeps must be >= 1");
  if (!(kernel_tol >= 0) || !(atom_tol >= 0)) throw Error(ErrorKind::Config, "tolerances must be nonnegative");
}

long SampleSet::conditional_count() const {
  return std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.event; });
}

std::vector<double> SampleSet::conditional_values() const {
  std::vector<double> v;
  for (const auto& s : samples)
    if (s.event) v.push_back(s.value);
  return v;
}

bool visits_in_order(const Trajectory& traj, const std::vector<Box>& regions) {
  std::size_t k = 0;
  for (int i = 0; i <= traj.steps() && k < regions.size(); ++i) {
    const auto x = traj.x_at(traj.fine_index(i));
    while (k < regions.size() && regions[k].contains(x)) ++k;
  }
  return k == regions.size();
}

SampleSet run_conditional_samples(const ExperimentSpec& spec) {
  spec.validate();
  const SystemSpec& sys = spec.system;
  const System system(sys.fields);
  const FbmSampler sampler(
      {.hurst = sys.hurst, .horizon = sys.horizon, .steps = sys.steps, .dim = static_cast<int>(sys.fields.size())});
  const bool zero = std::all_of(spec.forms.begin(), spec.forms.end(), [](const OneForm& f) { return f.is_zero(); });

  SampleSet set;
  set.samples.resize(spec.replicates);
  parallel_for(spec.replicates, spec.workers, [&](long i) {
    Sample& s = set.samples[i];
    s.replicate = i;
    s.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    const Trajectory traj =
        solve(system, sys.x0, sampler.sample(s.seed), {.substeps = sys.substeps, .jacobian = spec.compute_kernel});
    s.event = visits_in_order(traj, spec.event);
    s.endpoint = traj.endpoint();
    if (zero) return;
    if (spec.compute_kernel) {
      const KernelParts parts = kernel_parts(spec.forms, system, traj);
      s.value = parts.integral.value;
      s.kernel_sup = parts.kernel.sup_norm();
    } else {
      s.value = spec.forms.size() == 1 ? line_integral(spec.forms[0], traj)
                                       : iterated_line_integral(spec.forms, traj).value;
    }
  });
  return set;
}

SampleSet run_conditional_samples_checked(const ExperimentSpec& spec) {
  SampleSet set = run_conditional_samples(spec);
  if (const long c = set.conditional_count(); c < kMinConditionalSamples)
    throw Error(ErrorKind::InsufficientSamples, std::to_string(c) + " of " + std::to_string(spec.replicates) +
                                                    " replicates satisfy the event (need " +
                                                    std::to_string(kMinConditionalSamples) + ")");
  return set;
}

namespace {

std::vector<Atom> clusters(std::vector<double> v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<Atom> out;
  const double n = static_cast<double>(v.size());
  std::size_t begin = 0;
  double sum = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i + 1 == v.size() || v[i + 1] - v[i] > tol) {
      const long count = static_cast<long>(i + 1 - begin);
      out.push_back({sum / count, count / n, count, v[begin], v[i]});
      begin = i + 1;
      sum = 0;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Atom& a, const Atom& b) { return a.count > b.count; });
  return out;
}

}  // namespace

std::vector<Atom> atom_test(std::vector<double> samples, double atom_tol) {
  if (static_cast<long>(samples.size()) < kMinConditionalSamples)
    throw Error(ErrorKind::InsufficientSamples, "atom test needs at least 30 samples, got " + std::to_string(samples.size()));
  const double threshold = 3.0 / std::sqrt(static_cast<double>(samples.size()));
  std::vector<Atom> all = clusters(std::move(samples), atom_tol);
  std::erase_if(all, [&](const Atom& a) { return a.mass <= threshold; });
  return all;
}

double max_cluster_mass(std::vector<double> samples, double atom_tol) {
  if (samples.empty()) return 0.0;
  return clusters(std::move(samples), atom_tol).front().mass;
}

double kernel_vanishing_rate(const SampleSet& set, double kernel_tol) {
  long total = 0, vanishing = 0;
  for (const auto& s : set.samples) {
    if (!s.event) continue;
    ++total;
    if (s.kernel_sup <= kernel_tol) ++vanishing;
  }
  if (total == 0) throw Error(ErrorKind::InsufficientSamples, "no replicate satisfies the event");
  return static_cast<double>(vanishing) / total;
}

ResidualSeries consalldeg_residual(const OneForm& phi, const System& system, const Trajectory& traj,
                                   const Word& word) {
  if (!traj.has_jacobian) throw Error(ErrorKind::Config, "residual needs a trajectory with the Jacobian");
  const int n = traj.n, fine = traj.fine_count();
  for (int a : word.letters)
    if (a < 0 || a >= system.d()) throw Error(ErrorKind::Index, "word letter out of range");
  ResidualSeries r;
  r.times = traj.fine_times;
  r.values = Eigen::VectorXd::Zero(fine);
  if (phi.is_zero()) return r;

  PsiTable psi(phi, system.fields());
  std::vector<Expression> comps = phi.components;
  const VectorField v = bracket_of_word(system.fields(), word);
  comps.insert(comps.end(), v.components.begin(), v.components.end());
  comps.push_back(psi(word));
  const Program prog(comps);
  const KernelParts parts = kernel_parts({phi}, system, traj);
  std::vector<double> out(comps.size()), tape;
  for (int j = 0; j < fine; ++j) {
    const auto x = traj.x_at(j);
    prog.eval(std::span<const double>(x.data(), n), out, tape);
    const Eigen::RowVectorXd row =
        parts.rho.row(j) * traj.phi_inv_at(j) + Eigen::Map<const Eigen::RowVectorXd>(out.data(), n);
    r.values[j] = row.dot(Eigen::Map<const Eigen::VectorXd>(out.data() + n, n)) + out[2 * n];
  }
  return r;
}

int wedge_rank(const std::vector<Expression>& fs, const Eigen::VectorXd& x, double rank_tol) {
  const int n = static_cast<int>(x.size()), m = static_cast<int>(fs.size());
  if (m < 2) return 0;
  std::vector<Eigen::RowVectorXd> grads;
  for (const auto& f : fs) grads.push_back(differential(f, n)(x));
  Eigen::MatrixXd rows(m - 1, n * (n - 1) / 2);
  for (int k = 0; k + 1 < m; ++k) {
    int c = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) rows(k, c++) = grads[k][i] * grads[k + 1][j] - grads[k][j] * grads[k + 1][i];
  }
  if (rows.cols() == 0 || rows.cwiseAbs().maxCoeff() == 0) return 0;
  return numerical_rank(rows, rank_tol);
}

ExactPairResult exactform_pair_experiment(const std::vector<Expression>& fs, ExperimentSpec spec) {
  if (fs.empty()) throw Error(ErrorKind::Config, "need at least one function");
  const int n = static_cast<int>(spec.system.x0.size());
  ExactPairResult r;
  r.wedge_rank = wedge_rank(fs, spec.system.x0);
  const int m = static_cast<int>(fs.size());
  if (r.wedge_rank < m - 1)
    throw Error(ErrorKind::IndependenceFailure, "the wedges df_k ^ df_k+1 have rank " + std::to_string(r.wedge_rank) +
                                                    " < " + std::to_string(m - 1) + " at x0");
  spec.forms.clear();
  for (const auto& f : fs) spec.forms.push_back(differential(f, n));
  r.samples = run_conditional_samples_checked(spec);
  r.atoms = atom_test(r.samples.conditional_values(), spec.atom_tol);
  return r;
}

void write_csv(const SampleSet& set, std::ostream& out) {
  out << "replicate,seed,F,event,kernel_sup\n";
  out.precision(17);
  for (const auto& s : set.samples)
    out << s.replicate << ',' << s.seed << ',' << s.value << ',' << (s.event ? 1 : 0) << ',' << s.kernel_sup << '\n';
}

}  // namespace sli
