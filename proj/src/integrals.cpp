#include "sli/integrals.hpp"

#include <cmath>

#include "sli/error.hpp"

namespace sli {

namespace {

// phi_k components (m*n values), then d(phi_k . V_alpha) (m*d*n values) when
// a system is given.
Program compile_forms(const std::vector<OneForm>& forms, const System* system, int n) {
  std::vector<Expression> out;
  for (const auto& f : forms) {
    if (f.dim() != n) throw Error(ErrorKind::Config, "one-form dimension differs from the trajectory");
    out.insert(out.end(), f.components.begin(), f.components.end());
  }
  if (system)
    for (const auto& f : forms)
      for (const auto& v : system->fields()) {
        const Expression p = pairing(f, v);
        for (int j = 0; j < n; ++j) out.push_back(p.diff(j));
      }
  return Program(out);
}

struct Tables {
  int m = 0, n = 0, block = 0, size = 0;
  std::vector<Eigen::MatrixXd> forward;   // product of local flows over [0, t_j]
  std::vector<Eigen::MatrixXd> backward;  // over [t_j, T]
};

// Local flows of dY = Y A with A = [[N, E_1..E_n], [0, N, ...], ...]: N carries
// phi_k(dX) on the superdiagonal, E_c the c-th component of dzeta^k.
Tables build_tables(const std::vector<OneForm>& forms, const System* system, const Trajectory& traj, bool with_rho) {
  Tables t;
  t.m = static_cast<int>(forms.size());
  t.n = traj.n;
  t.block = t.m + 1;
  const int blocks = with_rho ? t.n + 1 : 1;
  t.size = t.block * blocks;
  if (with_rho && (!traj.has_jacobian || !system)) throw Error(ErrorKind::Config, "kernels need a trajectory with its Jacobian");

  const int n = t.n, d = traj.d, m = t.m;
  const Program prog = compile_forms(forms, system, traj.n);
  std::vector<double> out(prog.size()), tape;

  auto stage_matrix = [&](int j, int st, Eigen::MatrixXd& a) {
    a.setZero();
    const auto x = traj.stage_x_at(j, st);
    const Eigen::VectorXd u = traj.u_of(j);
    prog.eval(std::span<const double>(x.data(), n), out, tape);
    const auto xdot = traj.stage_xdot_at(j, st);
    for (int k = 0; k < m; ++k) {
      const double nk = Eigen::Map<const Eigen::RowVectorXd>(out.data() + k * n, n).dot(xdot);
      for (int b = 0; b < blocks; ++b) a(b * t.block + k, b * t.block + k + 1) = nk;
    }
    if (!with_rho) return;
    const auto phi = traj.stage_phi_at(j, st);
    for (int k = 0; k < m; ++k) {
      Eigen::RowVectorXd grad = Eigen::RowVectorXd::Zero(n);
      for (int al = 0; al < d; ++al)
        grad += u[al] * Eigen::Map<const Eigen::RowVectorXd>(out.data() + m * n + (k * d + al) * n, n);
      const Eigen::RowVectorXd e = grad * phi;
      for (int c = 0; c < n; ++c) a(k, (c + 1) * t.block + k + 1) = e[c];
    }
  };

  const int subs = traj.substep_count();
  std::vector<Eigen::MatrixXd> local(subs);
  for (int j = 0; j < subs; ++j) local[j] = local_flow(traj, j, t.size, stage_matrix);
  t.forward.resize(subs + 1);
  t.backward.resize(subs + 1);
  t.forward[0] = Eigen::MatrixXd::Identity(t.size, t.size);
  for (int j = 0; j < subs; ++j) t.forward[j + 1] = t.forward[j] * local[j];
  t.backward[subs] = Eigen::MatrixXd::Identity(t.size, t.size);
  for (int j = subs - 1; j >= 0; --j) t.backward[j] = local[j] * t.backward[j + 1];
  return t;
}

IteratedIntegral from_tables(const Tables& t) {
  IteratedIntegral r;
  const int fine = static_cast<int>(t.forward.size());
  r.value = t.forward.back()(0, t.m);
  r.g.resize(t.m, fine);
  r.h.resize(t.m, fine);
  for (int j = 0; j < fine; ++j)
    for (int k = 1; k <= t.m; ++k) {
      r.g(k - 1, j) = t.forward[j](0, k - 1);
      r.h(k - 1, j) = t.backward[j](k, t.m);
    }
  return r;
}

}  // namespace

double line_integral(const OneForm& phi, const Trajectory& traj) {
  if (phi.is_zero()) return 0.0;
  const int n = traj.n;
  if (phi.dim() != n) throw Error(ErrorKind::Config, "one-form dimension differs from the trajectory");
  const Program prog(phi.components);
  std::vector<double> out(n), tape;
  double total = 0.0;
  for (int j = 0; j < traj.substep_count(); ++j) {
    double acc = 0.0;
    for (int st = 0; st < 4; ++st) {
      const auto x = traj.stage_x_at(j, st);
      prog.eval(std::span<const double>(x.data(), n), out, tape);
      acc += kRk4Weights[st] * Eigen::Map<const Eigen::RowVectorXd>(out.data(), n).dot(traj.stage_xdot_at(j, st));
    }
    total += traj.substep_length(j) * acc;
  }
  return total;
}

IteratedIntegral iterated_line_integral(const std::vector<OneForm>& forms, const Trajectory& traj) {
  if (forms.empty()) throw Error(ErrorKind::Config, "iterated integral needs at least one form");
  return from_tables(build_tables(forms, nullptr, traj, false));
}

TensorSeries<double> signature(const DriverPath& path, int depth) { return path_signature(path.values, depth); }

TensorSeries<double> signature(const Trajectory& traj, int depth) {
  return path_signature(Eigen::MatrixXd(traj.x.transpose()), depth);
}

double MalliavinKernel::pair(const DriverPath& h) const {
  const int fine = static_cast<int>(times.size());
  const int steps = h.steps();
  if ((fine - 1) % steps != 0 || h.dim() != rows.cols())
    throw Error(ErrorKind::MeshMismatch, "shift direction does not match the kernel mesh");
  const int s = (fine - 1) / steps;
  double total = 0.0;
  for (int k = 0; k < steps; ++k) {
    if (std::abs(h.times[k] - times[k * s]) > 1e-12 * std::max(1.0, std::abs(times[k * s])))
      throw Error(ErrorKind::MeshMismatch, "shift direction does not match the kernel mesh");
    const Eigen::RowVectorXd hdot = (h.values.row(k + 1) - h.values.row(k)) / (h.times[k + 1] - h.times[k]);
    for (int j = k * s; j < (k + 1) * s; ++j)
      total += 0.5 * (rows.row(j) + rows.row(j + 1)).dot(hdot) * (times[j + 1] - times[j]);
  }
  return total;
}

KernelParts kernel_parts(const std::vector<OneForm>& forms, const System& system, const Trajectory& traj) {
  if (forms.empty()) throw Error(ErrorKind::Config, "kernel needs at least one form");
  const Tables t = build_tables(forms, &system, traj, true);
  const int n = traj.n, d = traj.d, m = t.m, fine = traj.fine_count();
  KernelParts parts;
  parts.integral = from_tables(t);
  parts.rho.resize(fine, n);
  parts.kernel.times = traj.fine_times;
  parts.kernel.rows.resize(fine, d);

  std::vector<Expression> comps;
  for (const auto& f : forms) comps.insert(comps.end(), f.components.begin(), f.components.end());
  const Program prog(comps);
  std::vector<double> out(comps.size()), tape;
  System::Workspace work;
  Eigen::MatrixXd v(n, d);
  for (int j = 0; j < fine; ++j) {
    const Eigen::MatrixXd& p = t.forward[j];
    const Eigen::MatrixXd& q = t.backward[j];
    Eigen::RowVectorXd rho(n);
    for (int c = 0; c < n; ++c)
      rho[c] = p.block(0, 0, 1, t.block).row(0).dot(q.block(0, (c + 1) * t.block + m, t.block, 1).col(0));
    parts.rho.row(j) = rho;
    const auto x = traj.x_at(j);
    prog.eval(std::span<const double>(x.data(), n), out, tape);
    Eigen::RowVectorXd form = Eigen::RowVectorXd::Zero(n);
    for (int k = 1; k <= m; ++k)
      form += p(0, k - 1) * q(k, m) * Eigen::Map<const Eigen::RowVectorXd>(out.data() + (k - 1) * n, n);
    system.fields_at(x, v, work);
    parts.kernel.rows.row(j) = (rho * traj.phi_inv_at(j) + form) * v;
  }
  return parts;
}

MalliavinKernel malliavin_kernel(const OneForm& phi, const System& system, const Trajectory& traj) {
  if (phi.is_zero()) {
    MalliavinKernel k;
    k.times = traj.fine_times;
    k.rows = Eigen::MatrixXd::Zero(traj.fine_count(), traj.d);
    return k;
  }
  return kernel_parts({phi}, system, traj).kernel;
}

MalliavinKernel malliavin_kernel_iterated(const std::vector<OneForm>& forms, const System& system,
                                          const Trajectory& traj) {
  return kernel_parts(forms, system, traj).kernel;
}

double finite_difference(const std::function<double(const DriverPath&)>& functional, const DriverPath& w,
                         const DriverPath& h, double eps, bool richardson) {
  auto central = [&](double e) { return (functional(shift(w, h, e)) - functional(shift(w, h, -e))) / (2 * e); };
  const double d1 = central(eps);
  if (!richardson) return d1;
  return (4 * central(eps / 2) - d1) / 3;
}

}  // namespace sli
