#include "sli/reconstruct.hpp"

#include <algorithm>
#include <cmath>

#include "sli/error.hpp"
#include "sli/integrals.hpp"
#include "sli/parallel.hpp"

namespace sli {

const char* to_string(Regime r) { return r == Regime::Elliptic ? "elliptic" : "step2"; }

Regime regime_from_string(const std::string& s) {
  if (s == "elliptic") return Regime::Elliptic;
  if (s == "step2") return Regime::Step2;
  throw Error(ErrorKind::Config, "unknown regime '" + s + "' (expected elliptic or step2)");
}

double Cube::chart_norm(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  const std::vector<double> point(p.data(), p.data() + p.size());
  double m = 0;
  for (const auto& c : chart) m = std::max(m, std::abs(c.eval(point)));
  return m;
}

int CubeGrid::locate(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  int index = 0, stride = 1;
  for (int i = 0; i < dim(); ++i) {
    const double u = (p[i] - origin[i]) / epsilon;
    if (!(u >= 0) || u >= counts[i]) return -1;
    index += static_cast<int>(std::floor(u)) * stride;
    stride *= counts[i];
  }
  const Cube& c = cubes[index];
  if (!c.box.contains(p)) return -1;
  return c.chart_norm(p) < 1.0 ? index : -1;
}

bool CubeGrid::adjacent(int a, int b) const {
  if (a == b) return false;
  for (int i = 0; i < dim(); ++i)
    if (std::abs(cubes[a].label[i] - cubes[b].label[i]) > 1) return false;
  return true;
}

std::string CubeGrid::label_string(int index) const {
  std::string s = "(";
  for (int i = 0; i < dim(); ++i) s += (i ? "," : "") + std::to_string(cubes[index].label[i]);
  return s + ")";
}

Fields heisenberg_fields() {
  const Expression x = Expression::variable(0), y = Expression::variable(1);
  return {VectorField({1.0, 0.0, -y}), VectorField({0.0, 1.0, x})};
}

std::vector<Expression> heisenberg_straightening(const Eigen::Vector3d& c, double s) {
  const Expression x = Expression::variable(0), y = Expression::variable(1), z = Expression::variable(2);
  // |z - z_c| <= b + |x| |y - y_c| < s/2 + (|x_c| + s) a_y < s keeps the
  // support inside the cube.
  const double a = s, b = s / 2, ay = s / (2 * (1 + std::abs(c[0]) + s));
  return {(y - c[1]) / ay, (x - c[0]) / a, (z - c[2] - x * (y - c[1])) / b};
}

CubeGrid build_grid(const Box& bounds, double epsilon, double delta, Regime regime) {
  const int n = bounds.dim();
  if (n < 2 || bounds.upper.size() != n) throw Error(ErrorKind::Config, "grid bounds need dimension >= 2");
  if (!(epsilon > delta && delta > 0)) throw Error(ErrorKind::Config, "need eps > delta > 0");
  if (regime == Regime::Step2 && n != 3) throw Error(ErrorKind::Config, "the step-two regime is three-dimensional");
  CubeGrid g;
  g.bounds = bounds;
  g.epsilon = epsilon;
  g.delta = delta;
  g.regime = regime;
  g.origin.resize(n);
  for (int i = 0; i < n; ++i) {
    const double width = bounds.upper[i] - bounds.lower[i];
    const int count = static_cast<int>(std::floor(width / epsilon + 1e-9));
    if (count < 1) throw Error(ErrorKind::DegenerateCube, "bounds narrower than one cube along axis " + std::to_string(i + 1));
    g.counts.push_back(count);
    g.origin[i] = bounds.lower[i] + (width - count * epsilon) / 2;
  }
  if (regime == Regime::Elliptic) {
    for (int i = 0; i < n; ++i) g.fields.push_back(VectorField::coordinate(n, i));
  } else {
    g.fields = heisenberg_fields();
    g.lambda = sard_lambda_select(0.0, 0.0).lambda;
  }

  long total = 1;
  for (int c : g.counts) total *= c;
  const double s = g.half_side();
  for (long k = 0; k < total; ++k) {
    Cube cube;
    Eigen::VectorXd center(n);
    long rest = k;
    for (int i = 0; i < n; ++i) {
      cube.label.push_back(static_cast<int>(rest % g.counts[i]));
      rest /= g.counts[i];
      center[i] = g.origin[i] + (cube.label[i] + 0.5) * epsilon;
    }
    cube.box = Box::cube(center, s);
    if (regime == Regime::Elliptic) {
      for (int i = 0; i < n; ++i) cube.chart.push_back((Expression::variable(i) - center[i]) / s);
      cube.form = construct_elliptic_bump(cube.box);
    } else {
      cube.chart = heisenberg_straightening(center, s);
      const Expression c1 = h_lambda(cube.chart[0], g.lambda) * bump(cube.chart[1]) * bump(cube.chart[2]);
      cube.form = construct_step2(c1, 0.0, g.fields[0], g.fields[1]);
    }
    g.cubes.push_back(std::move(cube));
  }
  return g;
}

double extended_signature(const Trajectory& traj, const RouteWord& word, const CubeGrid& grid) {
  if (word.empty()) return 1.0;
  std::vector<OneForm> forms;
  for (int z : word) {
    if (z < 0 || z >= grid.size()) throw Error(ErrorKind::Index, "cube index out of range");
    forms.push_back(grid.cubes[z].form);
  }
  return iterated_line_integral(forms, traj).value;
}

namespace {

// Running value of a word's iterated integral: (substep, value after it),
// changing only on substeps where the last letter's form is active.
using Series = std::vector<std::pair<int, double>>;

// Per-cube RK4 increments of phi_z(dX) on the substeps where they are nonzero.
std::vector<Series> cube_increments(const Trajectory& traj, const CubeGrid& grid) {
  std::vector<Series> inc(grid.size());
  std::vector<Program> programs;
  for (const auto& c : grid.cubes) programs.emplace_back(c.form.components);
  std::vector<double> out(traj.n), tape;
  for (int j = 0; j < traj.substep_count(); ++j) {
    int zs[4];
    double acc[4] = {0, 0, 0, 0};
    for (int st = 0; st < 4; ++st) {
      const auto x = traj.stage_x_at(j, st);
      zs[st] = grid.locate(x);
      if (zs[st] < 0) continue;
      programs[zs[st]].eval(std::span<const double>(x.data(), traj.n), out, tape);
      acc[st] = kRk4Weights[st] * Eigen::Map<const Eigen::RowVectorXd>(out.data(), traj.n).dot(traj.stage_xdot_at(j, st));
    }
    for (int st = 0; st < 4; ++st) {
      if (zs[st] < 0) continue;
      bool first = true;
      for (int q = 0; q < st; ++q) first = first && zs[q] != zs[st];
      if (!first) continue;
      double sum = 0;
      for (int q = st; q < 4; ++q)
        if (zs[q] == zs[st]) sum += acc[q];
      sum *= traj.substep_length(j);
      if (sum != 0.0) inc[zs[st]].emplace_back(j, sum);
    }
  }
  return inc;
}

// I_{wz}: sum over z's substeps of I_w(before the substep) times the increment.
Series extend(const Series& w, const Series& z) {
  Series r;
  std::size_t k = 0;
  double before = 0, total = 0;
  for (const auto& [j, a] : z) {
    while (k < w.size() && w[k].first < j) before = w[k++].second;
    if (before == 0.0) continue;
    total += before * a;
    r.emplace_back(j, total);
  }
  return r;
}

double final_value(const Series& s) { return s.empty() ? 0.0 : s.back().second; }

struct Candidate {
  RouteWord word;
  Series series;
};

}  // namespace

RouteResult recover_route(const Trajectory& traj, const CubeGrid& grid, const RouteOptions& options) {
  if (traj.n != grid.dim()) throw Error(ErrorKind::Config, "trajectory and grid dimensions differ");
  RouteResult result;
  const std::vector<Series> inc = cube_increments(traj, grid);

  double scale = 0;
  for (int j = 0; j < traj.fine_count(); ++j)
    scale = std::max(scale, (traj.x_at(j) - traj.x_at(0)).cwiseAbs().maxCoeff());
  std::vector<char> entered(grid.size(), 0);
  for (int j = 0; j < traj.substep_count(); ++j)
    for (int st = 0; st < 4; ++st)
      if (const int z = grid.locate(traj.stage_x_at(j, st)); z >= 0) entered[z] = 1;
  std::vector<Series> singles(grid.size());
  for (int z = 0; z < grid.size(); ++z) {
    double total = 0;
    for (const auto& [j, a] : inc[z]) singles[z].emplace_back(j, total += a);
    if (!entered[z]) result.noise = std::max(result.noise, std::abs(final_value(singles[z])));
  }
  // Words the path does not visit in order are exactly zero (products of
  // exact zeros), so the default floor only has to sit above underflow.
  result.signif_tol = options.signif_tol > 0 ? options.signif_tol : kDefaultSignifTol;
  result.path_scale = scale;
  result.signif_tol = std::max(result.signif_tol, 10 * result.noise);
  const double tol = result.signif_tol;

  std::vector<Candidate> level;
  for (int z = 0; z < grid.size(); ++z) {
    ++result.evaluated;
    if (std::abs(final_value(singles[z])) > tol) level.push_back({{z}, singles[z]});
  }
  std::vector<Candidate> best = level;
  while (!level.empty()) {
    if (static_cast<int>(level.front().word.size()) >= options.max_length) {
      result.truncated = true;
      break;
    }
    std::vector<std::pair<std::size_t, int>> jobs;
    for (std::size_t w = 0; w < level.size(); ++w)
      for (int z = 0; z < grid.size(); ++z)
        if (grid.adjacent(level[w].word.back(), z)) jobs.emplace_back(w, z);
    std::vector<Series> out(jobs.size());
    parallel_for(static_cast<long>(jobs.size()), options.workers, [&](long i) {
      out[i] = extend(level[jobs[i].first].series, inc[jobs[i].second]);
    });
    result.evaluated += static_cast<long>(jobs.size());
    std::vector<Candidate> next;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!(std::abs(final_value(out[i])) > tol)) continue;
      RouteWord w = level[jobs[i].first].word;
      w.push_back(jobs[i].second);
      next.push_back({std::move(w), std::move(out[i])});
    }
    if (static_cast<long>(next.size()) > options.max_words) {
      result.truncated = true;
      break;
    }
    if (!next.empty()) best = next;
    level = std::move(next);
  }

  if (best.empty()) {
    result.signature = 1.0;
    return result;
  }
  std::size_t pick = 0;
  for (std::size_t i = 0; i < best.size(); ++i) {
    result.maximal.emplace_back(best[i].word, final_value(best[i].series));
    if (std::abs(final_value(best[i].series)) > std::abs(final_value(best[pick].series))) pick = i;
  }
  result.word = best[pick].word;
  result.signature = final_value(best[pick].series);
  result.ambiguous = best.size() > 1;
  if (result.ambiguous && options.throw_on_ambiguous)
    throw Error(ErrorKind::AmbiguousRoute, std::to_string(best.size()) + " words of maximal length " +
                                               std::to_string(result.word.size()) + " survive");
  return result;
}

RouteWord true_route(const Trajectory& traj, const CubeGrid& grid) {
  RouteWord r;
  for (int j = 0; j < traj.fine_count(); ++j) {
    const int z = grid.locate(traj.x_at(j));
    if (z >= 0 && (r.empty() || r.back() != z)) r.push_back(z);
  }
  return r;
}

bool clean_crossings(const Trajectory& traj, const CubeGrid& grid, double depth) {
  int current = -1;
  double deepest = 2;
  for (int j = 0; j < traj.fine_count(); ++j) {
    const int z = grid.locate(traj.x_at(j));
    if (z < 0) continue;
    if (z != current) {
      if (current >= 0 && deepest > depth) return false;
      current = z;
      deepest = 2;
    }
    deepest = std::min(deepest, grid.cubes[z].chart_norm(traj.x_at(j)));
  }
  return current < 0 || deepest <= depth;
}

}  // namespace sli
