#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sli/driver.hpp"
#include "sli/geometry.hpp"

namespace sli {

/// Driving fields V_1..V_d compiled together with their Jacobians DV_alpha.
class System {
 public:
  explicit System(Fields fields);

  /// Per-thread scratch space.
  struct Workspace {
    std::vector<double> out, tape;
  };

  int n() const { return n_; }
  int d() const { return d_; }
  const Fields& fields() const { return fields_; }

  /// Columns V_alpha(x), n x d.
  void fields_at(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::MatrixXd> v,
                 Workspace& work) const;
  /// V(x) u and sum_alpha DV_alpha(x) u^alpha.
  void velocity(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& u,
                Eigen::Ref<Eigen::VectorXd> dx, Eigen::Ref<Eigen::MatrixXd> dv, Workspace& work) const;

 private:
  Fields fields_;
  int n_ = 0, d_ = 0;
  Program program_;  // V^i_alpha, then d_j V^i_alpha
};

struct SolveOptions {
  int substeps = 4;
  double blowup = 1e8;  // abort when |X|_inf exceeds this
  bool jacobian = true;
};

/// Solution of the RDE along a piecewise-linear driver. Besides the mesh values
/// it keeps every substep boundary ("fine" points) and every RK4 stage, so that
/// auxiliary integrals can be propagated afterwards with the same scheme as if
/// they had been part of the system.
struct Trajectory {
  int n = 0, d = 0, substeps = 0;
  bool has_jacobian = false;
  Eigen::VectorXd times;       // mesh, N+1
  Eigen::VectorXd fine_times;  // N*substeps + 1
  Eigen::MatrixXd x;           // n x fine
  Eigen::MatrixXd phi;         // n x (n*fine), block j is Phi at fine point j
  Eigen::MatrixXd phi_inv;
  Eigen::MatrixXd velocity;    // d x N, dw/dt on each segment
  // RK4 stages: 4 per substep at offsets 0, h/2, h/2, h.
  Eigen::MatrixXd stage_x;
  Eigen::MatrixXd stage_xdot;  // V(X) dw/dt at each stage
  Eigen::MatrixXd stage_phi;
  Eigen::MatrixXd stage_phi_inv;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  int fine_count() const { return static_cast<int>(fine_times.size()); }
  int substep_count() const { return fine_count() - 1; }
  double substep_length(int j) const { return fine_times[j + 1] - fine_times[j]; }
  int segment_of(int substep) const { return substep / substeps; }
  int fine_index(int mesh_index) const { return mesh_index * substeps; }

  auto x_at(int j) const { return x.col(j); }
  auto phi_at(int j) const { return phi.middleCols(n * j, n); }
  auto phi_inv_at(int j) const { return phi_inv.middleCols(n * j, n); }
  auto u_of(int substep) const { return velocity.col(segment_of(substep)); }
  auto stage_x_at(int substep, int s) const { return stage_x.col(4 * substep + s); }
  auto stage_xdot_at(int substep, int s) const { return stage_xdot.col(4 * substep + s); }
  auto stage_phi_at(int substep, int s) const { return stage_phi.middleCols(n * (4 * substep + s), n); }
  auto stage_phi_inv_at(int substep, int s) const { return stage_phi_inv.middleCols(n * (4 * substep + s), n); }

  Eigen::VectorXd endpoint() const { return x.col(x.cols() - 1); }
  /// max_j |Phi Phi^{-1} - I|_inf over fine points.
  double inverse_drift() const;
};

Trajectory solve(const System& system, const Eigen::VectorXd& x0, const DriverPath& driver,
                 const SolveOptions& options = {});

/// RK4 weights and stage time offsets (fractions of the substep).
inline constexpr std::array<double, 4> kRk4Weights{1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6};
inline constexpr std::array<double, 4> kRk4Offsets{0.0, 0.5, 0.5, 1.0};

/// Local flow of the linear system dY = Y A(s) ds over one substep, starting
/// from the identity, with A evaluated at the cached stages:
/// a(substep, stage, out) fills A.
using StageMatrix = std::function<void(int substep, int stage, Eigen::MatrixXd& out)>;
Eigen::MatrixXd local_flow(const Trajectory& traj, int substep, int size, const StageMatrix& a);

/// Cumulative integrals int_0^t g ds sampled at the fine points, with g
/// evaluated at the stages (RK4 quadrature). Columns are fine points.
using StageVector = std::function<void(int substep, int stage, Eigen::VectorXd& out)>;
Eigen::MatrixXd cumulative_integral(const Trajectory& traj, int size, const StageVector& g);

struct PullbackComparison {
  Eigen::MatrixXd direct;    // Phi_t^{-1} W(X_t), n x (N+1)
  Eigen::MatrixXd integral;  // W(x_0) + int_0^t Phi^{-1}[V_alpha, W](X) dw^alpha
  double relative_residual() const;
};

PullbackComparison pullback_path(const Trajectory& traj, const System& system, const VectorField& w);

/// CSV with header t,x1..xn,det_phi.
void write_csv(const Trajectory& traj, std::ostream& out);

}  // namespace sli
