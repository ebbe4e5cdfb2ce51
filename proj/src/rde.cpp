#include "sli/rde.hpp"

#include <cmath>
#include <ostream>

#include "sli/error.hpp"

namespace sli {

System::System(Fields fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw Error(ErrorKind::Config, "system needs at least one driving field");
  n_ = fields_.front().dim();
  d_ = static_cast<int>(fields_.size());
  std::vector<Expression> outputs;
  for (const auto& v : fields_) {
    if (v.dim() != n_) throw Error(ErrorKind::Config, "driving fields have different dimensions");
    for (int i = 0; i < n_; ++i) outputs.push_back(v[i]);
  }
  for (const auto& v : fields_)
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) outputs.push_back(v[i].diff(j));
  program_ = Program(outputs);
}

void System::fields_at(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::MatrixXd> v,
                       Workspace& work) const {
  work.out.resize(program_.size());
  program_.eval(std::span<const double>(x.data(), n_), work.out, work.tape);
  for (int a = 0; a < d_; ++a)
    for (int i = 0; i < n_; ++i) v(i, a) = work.out[a * n_ + i];
}

void System::velocity(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& u,
                      Eigen::Ref<Eigen::VectorXd> dx, Eigen::Ref<Eigen::MatrixXd> dv, Workspace& work) const {
  work.out.resize(program_.size());
  program_.eval(std::span<const double>(x.data(), n_), work.out, work.tape);
  const double* out = work.out.data();
  dx.setZero();
  dv.setZero();
  for (int a = 0; a < d_; ++a) {
    const double ua = u[a];
    if (ua == 0.0) continue;
    for (int i = 0; i < n_; ++i) dx[i] += out[a * n_ + i] * ua;
    const double* jac = out + n_ * d_ + a * n_ * n_;
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) dv(i, j) += jac[j * n_ + i] * ua;
  }
}

double Trajectory::inverse_drift() const {
  if (!has_jacobian) return 0.0;
  double worst = 0.0;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  for (int j = 0; j < fine_count(); ++j)
    worst = std::max(worst, (phi_at(j) * phi_inv_at(j) - id).cwiseAbs().maxCoeff());
  return worst;
}

Trajectory solve(const System& system, const Eigen::VectorXd& x0, const DriverPath& driver,
                 const SolveOptions& options) {
  driver.validate();
  const int n = system.n(), d = system.d();
  if (x0.size() != n) throw Error(ErrorKind::Config, "initial point has the wrong dimension");
  if (driver.dim() != d) throw Error(ErrorKind::Config, "driver dimension differs from the number of fields");
  if (options.substeps < 1) throw Error(ErrorKind::Config, "substeps must be >= 1");

  const int steps = driver.steps(), s = options.substeps, subs = steps * s;
  const bool jac = options.jacobian;
  Trajectory tr;
  tr.n = n;
  tr.d = d;
  tr.substeps = s;
  tr.has_jacobian = jac;
  tr.times = driver.times;
  tr.fine_times.resize(subs + 1);
  tr.x.resize(n, subs + 1);
  tr.velocity.resize(d, steps);
  tr.stage_x.resize(n, 4 * subs);
  tr.stage_xdot.resize(n, 4 * subs);
  if (jac) {
    tr.phi.resize(n, n * (subs + 1));
    tr.phi_inv.resize(n, n * (subs + 1));
    tr.stage_phi.resize(n, 4 * n * subs);
    tr.stage_phi_inv.resize(n, 4 * n * subs);
  }

  System::Workspace work;
  Eigen::VectorXd x = x0, y(n), dx(n), kx(n), sum_x(n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n), q = p;
  Eigen::MatrixXd py(n, n), qy(n, n), kp(n, n), kq(n, n), sum_p(n, n), sum_q(n, n), a(n, n);
  tr.x.col(0) = x;
  tr.fine_times[0] = driver.times[0];
  if (jac) {
    tr.phi.leftCols(n) = p;
    tr.phi_inv.leftCols(n) = q;
  }

  int j = 0;
  for (int k = 0; k < steps; ++k) {
    const double t0 = driver.times[k], dt = driver.times[k + 1] - t0, h = dt / s;
    const Eigen::VectorXd u = driver.increment(k) / dt;
    tr.velocity.col(k) = u;
    for (int m = 0; m < s; ++m, ++j) {
      y = x;
      py = p;
      qy = q;
      sum_x.setZero();
      sum_p.setZero();
      sum_q.setZero();
      for (int st = 0; st < 4; ++st) {
        if (st > 0) {
          const double c = kRk4Offsets[st] * h;
          y = x + c * kx;
          if (jac) {
            py = p + c * kp;
            qy = q + c * kq;
          }
        }
        tr.stage_x.col(4 * j + st) = y;
        system.velocity(y, u, kx, a, work);
        tr.stage_xdot.col(4 * j + st) = kx;
        sum_x += kRk4Weights[st] * kx;
        if (jac) {
          tr.stage_phi.middleCols(n * (4 * j + st), n) = py;
          tr.stage_phi_inv.middleCols(n * (4 * j + st), n) = qy;
          kp.noalias() = a * py;
          kq.noalias() = -qy * a;
          sum_p += kRk4Weights[st] * kp;
          sum_q += kRk4Weights[st] * kq;
        }
      }
      x += h * sum_x;
      if (jac) {
        p += h * sum_p;
        q += h * sum_q;
      }
      if (!x.allFinite() || x.cwiseAbs().maxCoeff() > options.blowup)
        throw Error(ErrorKind::BlowUp, "solution left the ball of radius " + std::to_string(options.blowup) +
                                           " near t = " + std::to_string(t0 + (m + 1) * h));
      tr.x.col(j + 1) = x;
      tr.fine_times[j + 1] = m + 1 == s ? driver.times[k + 1] : t0 + (m + 1) * h;
      if (jac) {
        tr.phi.middleCols(n * (j + 1), n) = p;
        tr.phi_inv.middleCols(n * (j + 1), n) = q;
      }
    }
  }
  return tr;
}

Eigen::MatrixXd local_flow(const Trajectory& traj, int substep, int size, const StageMatrix& a) {
  const double h = traj.substep_length(substep);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(size, size);
  Eigen::MatrixXd y = id, k = Eigen::MatrixXd::Zero(size, size), sum = k, am(size, size);
  for (int st = 0; st < 4; ++st) {
    if (st > 0) y = id + kRk4Offsets[st] * h * k;
    a(substep, st, am);
    k.noalias() = y * am;
    sum += kRk4Weights[st] * k;
  }
  return id + h * sum;
}

Eigen::MatrixXd cumulative_integral(const Trajectory& traj, int size, const StageVector& g) {
  Eigen::MatrixXd out(size, traj.fine_count());
  out.col(0).setZero();
  Eigen::VectorXd v(size), acc(size);
  for (int j = 0; j < traj.substep_count(); ++j) {
    acc.setZero();
    for (int st = 0; st < 4; ++st) {
      g(j, st, v);
      acc += kRk4Weights[st] * v;
    }
    out.col(j + 1) = out.col(j) + traj.substep_length(j) * acc;
  }
  return out;
}

double PullbackComparison::relative_residual() const {
  const double scale = std::max(direct.cwiseAbs().maxCoeff(), 1e-300);
  return (direct - integral).cwiseAbs().maxCoeff() / scale;
}

PullbackComparison pullback_path(const Trajectory& traj, const System& system, const VectorField& w) {
  if (!traj.has_jacobian) throw Error(ErrorKind::Config, "pullback needs a trajectory solved with its Jacobian");
  const int n = traj.n, d = traj.d;
  std::vector<Expression> outputs = w.components;
  for (const auto& v : system.fields()) {
    const VectorField b = lie_bracket(v, w);
    outputs.insert(outputs.end(), b.components.begin(), b.components.end());
  }
  const Program prog(outputs);
  std::vector<double> out(outputs.size()), tape;
  auto eval_at = [&](const Eigen::VectorXd& x) {
    prog.eval(std::span<const double>(x.data(), n), out, tape);
  };

  const Eigen::MatrixXd integrals = cumulative_integral(traj, n, [&](int j, int st, Eigen::VectorXd& v) {
    eval_at(traj.stage_x_at(j, st));
    const Eigen::VectorXd u = traj.u_of(j);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < d; ++a)
      for (int i = 0; i < n; ++i) b[i] += out[n * (a + 1) + i] * u[a];
    v = traj.stage_phi_inv_at(j, st) * b;
  });

  PullbackComparison r;
  r.direct.resize(n, traj.steps() + 1);
  r.integral.resize(n, traj.steps() + 1);
  eval_at(traj.x_at(0));
  const Eigen::VectorXd w0 = Eigen::Map<const Eigen::VectorXd>(out.data(), n);
  for (int k = 0; k <= traj.steps(); ++k) {
    const int j = traj.fine_index(k);
    eval_at(traj.x_at(j));
    r.direct.col(k) = traj.phi_inv_at(j) * Eigen::Map<const Eigen::VectorXd>(out.data(), n);
    r.integral.col(k) = w0 + integrals.col(j);
  }
  return r;
}

void write_csv(const Trajectory& traj, std::ostream& out) {
  out << "t";
  for (int i = 0; i < traj.n; ++i) out << ",x" << i + 1;
  if (traj.has_jacobian) out << ",det_phi";
  out << '\n';
  out.precision(17);
  for (int k = 0; k <= traj.steps(); ++k) {
    const int j = traj.fine_index(k);
    out << traj.times[k];
    for (int i = 0; i < traj.n; ++i) out << ',' << traj.x(i, j);
    if (traj.has_jacobian) out << ',' << traj.phi_at(j).determinant();
    out << '\n';
  }
}

}  // namespace sli
