#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sli/rde.hpp"
#include "sli/tensor.hpp"

namespace sli {

/// int_0^T phi(dX_t), integrated with the solver's stages.
double line_integral(const OneForm& phi, const Trajectory& traj);

/// The iterated integral of phi_1..phi_m over the ordered simplex, with the
/// partial integrals G^k_t (over [0,t], forms 1..k-1) and H^k_t (over [t,T],
/// forms k+1..m) at every fine point. Columns of g and h are fine points,
/// rows are k = 1..m.
struct IteratedIntegral {
  double value = 0.0;
  Eigen::MatrixXd g;
  Eigen::MatrixXd h;
};

IteratedIntegral iterated_line_integral(const std::vector<OneForm>& forms, const Trajectory& traj);

/// Signature of the interpolated driver, or of the solved path through its
/// fine points.
TensorSeries<double> signature(const DriverPath& path, int depth);
TensorSeries<double> signature(const Trajectory& traj, int depth);

/// Row k_alpha(t) with D_h F = int_0^T k_alpha(t) dh^alpha_t, sampled at the
/// trajectory's fine points (rows: fine points, columns: alpha).
struct MalliavinKernel {
  Eigen::VectorXd times;
  Eigen::MatrixXd rows;

  double sup_norm() const { return rows.size() ? rows.cwiseAbs().maxCoeff() : 0.0; }
  /// int k dh for a direction on the trajectory's mesh (trapezoid on fine points).
  double pair(const DriverPath& h) const;
};

/// Kernel of F = int phi(dX):
/// ((zeta_T - zeta_t) Phi_t^{-1} + phi(X_t)) V_alpha(X_t).
MalliavinKernel malliavin_kernel(const OneForm& phi, const System& system, const Trajectory& traj);

/// Kernel of the iterated integral of phi_1..phi_m:
/// sum_k (int_t^T G^k H^k dzeta^k Phi_t^{-1} + G^k_t H^k_t phi_k(X_t)) V_alpha(X_t).
MalliavinKernel malliavin_kernel_iterated(const std::vector<OneForm>& forms, const System& system,
                                          const Trajectory& traj);

/// Everything the kernels are made of, for diagnostics: eta_t = rho_t (the
/// tail integral of G H dzeta), G^k H^k, rows in fine-point order.
struct KernelParts {
  IteratedIntegral integral;
  Eigen::MatrixXd rho;  // fine x n
  MalliavinKernel kernel;
};

KernelParts kernel_parts(const std::vector<OneForm>& forms, const System& system, const Trajectory& traj);

/// Central difference (F(w + eps h) - F(w - eps h)) / (2 eps), with one
/// Richardson step (eps and eps/2) when `richardson` is set.
double finite_difference(const std::function<double(const DriverPath&)>& functional, const DriverPath& w,
                         const DriverPath& h, double eps, bool richardson = true);

}  // namespace sli
