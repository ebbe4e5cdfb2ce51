#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sli/integrals.hpp"
#include "sli/nondeg.hpp"

namespace sli {

/// The driven system: dX = V(X) dw, X_0 = x0, w an fBm with Hurst index H on
/// [0, horizon] sampled on `steps` equal segments.
struct SystemSpec {
  Fields fields;
  Eigen::VectorXd x0;
  double hurst = 0.5;
  double horizon = 1.0;
  int steps = 1024;
  int substeps = 4;
};

struct ExperimentSpec {
  SystemSpec system;
  /// F is the line integral of forms[0], or the iterated integral of all of
  /// them when there are several.
  std::vector<OneForm> forms;
  /// The path must visit these open boxes in order (at mesh times). Empty:
  /// every replicate counts.
  std::vector<Box> event;
  long replicates = 10000;
  std::uint64_t seed = 0;
  int workers = 0;
  bool compute_kernel = true;
  double kernel_tol = 1e-8;  // sup |k| <= kernel_tol counts as a vanishing kernel
  double atom_tol = 1e-7;    // linkage distance for atom clusters

  /// Throws Config.
  void validate() const;
};

struct Sample {
  long replicate = 0;
  std::uint64_t seed = 0;
  double value = 0;       // F
  bool event = false;
  double kernel_sup = 0;  // sup_t |k(t)|, 0 when kernels are off
  Eigen::VectorXd endpoint;
};

struct SampleSet {
  std::vector<Sample> samples;  // replicate order

  long conditional_count() const;
  /// F over the samples whose event flag is set.
  std::vector<double> conditional_values() const;
};

inline constexpr long kMinConditionalSamples = 30;

/// Simulates every replicate (replicate i uses derive_seed(seed, i)); the
/// result does not depend on the worker count.
SampleSet run_conditional_samples(const ExperimentSpec& spec);

/// Same as above, then throws InsufficientSamples when fewer than 30
/// replicates satisfy the event.
SampleSet run_conditional_samples_checked(const ExperimentSpec& spec);

/// True when the mesh points visit the open boxes in the given order; one
/// point may serve consecutive boxes that overlap.
bool visits_in_order(const Trajectory& traj, const std::vector<Box>& regions);

struct Atom {
  double value = 0;  // cluster mean
  double mass = 0;   // fraction of all samples
  long count = 0;
  double lower = 0, upper = 0;
};

/// Single-linkage clusters of the sorted samples (neighbours within atom_tol)
/// whose mass exceeds 3/sqrt(N), heaviest first. Throws InsufficientSamples
/// below 30 samples.
std::vector<Atom> atom_test(std::vector<double> samples, double atom_tol);

/// Mass of the heaviest cluster, reported or not.
double max_cluster_mass(std::vector<double> samples, double atom_tol);

/// Fraction of conditional samples with kernel sup-norm <= kernel_tol.
/// Throws InsufficientSamples when no sample is conditional.
double kernel_vanishing_rate(const SampleSet& set, double kernel_tol);

/// (eta Phi_t^{-1} + phi) V_I + psi_I along the trajectory (fine points),
/// eta_t = zeta_T - zeta_t. For a single letter this is the Malliavin kernel
/// column of that field.
struct ResidualSeries {
  Eigen::VectorXd times;
  Eigen::VectorXd values;

  double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

ResidualSeries consalldeg_residual(const OneForm& phi, const System& system, const Trajectory& traj,
                                   const Word& word);

/// Rank of the stacked coefficient vectors of df_k ^ df_{k+1}, k = 1..m-1, at x.
int wedge_rank(const std::vector<Expression>& fs, const Eigen::VectorXd& x, double rank_tol = 1e-8);

struct ExactPairResult {
  SampleSet samples;
  std::vector<Atom> atoms;  // over the conditional samples
  int wedge_rank = 0;
};

/// F = int...int df_1 ... df_m over the experiment's system and event, after
/// checking that the wedges df_k ^ df_{k+1} are independent at x0 (throws
/// IndependenceFailure). The experiment's forms are replaced by the df_k.
ExactPairResult exactform_pair_experiment(const std::vector<Expression>& fs, ExperimentSpec spec);

/// CSV with header replicate,seed,F,event,kernel_sup.
void write_csv(const SampleSet& set, std::ostream& out);

}  // namespace sli
