#include <cmath>
#include <functional>
#include <ostream>
#include <random>

#include "commands.hpp"
#include "sli/error.hpp"
#include "sli/integrals.hpp"

namespace sli::cli {

namespace {

struct Check {
  const char* name;
  std::function<bool()> run;
};

Eigen::VectorXd random_point(std::mt19937_64& rng, int n, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p[i] = u(rng);
  return p;
}

Fields parse_fields(std::initializer_list<std::initializer_list<const char*>> rows, int n) {
  Fields f;
  for (const auto& row : rows) {
    std::vector<Expression> c;
    for (const char* s : row) c.push_back(parse(s, n));
    f.emplace_back(std::move(c));
  }
  return f;
}

std::vector<Check> checks(int workers) {
  return {
      {"heisenberg bracket is 2 d/dz",
       [] {
         const Fields v = heisenberg_fields();
         const VectorField b = lie_bracket(v[0], v[1]);
         std::mt19937_64 rng(1);
         for (int k = 0; k < 50; ++k)
           if ((b(random_point(rng, 3, 2)) - Eigen::Vector3d(0, 0, 2)).norm() != 0) return false;
         return true;
       }},
      {"bracket antisymmetry and Jacobi",
       [] {
         const Fields f = parse_fields({{"1", "x*y", "sin(z)"}, {"z^2", "1", "x"}, {"y", "cos(x)", "1 + x*z"}}, 3);
         const VectorField ab = lie_bracket(f[0], f[1]), ba = lie_bracket(f[1], f[0]);
         const VectorField jac = lie_bracket(f[0], lie_bracket(f[1], f[2])) +
                                 lie_bracket(f[1], lie_bracket(f[2], f[0])) +
                                 lie_bracket(f[2], lie_bracket(f[0], f[1]));
         std::mt19937_64 rng(2);
         for (int k = 0; k < 50; ++k) {
           const Eigen::VectorXd p = random_point(rng, 3, 1);
           if ((ab(p) + ba(p)).norm() > 1e-9 || jac(p).norm() > 1e-9) return false;
         }
         return true;
       }},
      {"Cartan identity",
       [] {
         const OneForm phi({parse("x*y + z", 3), parse("sin(x*z)", 3), parse("y^2 - x", 3)});
         const VectorField v = parse_fields({{"1 + y", "x*z", "cos(y)"}}, 3)[0];
         const OneForm a = interior_derivative(phi, v), b = interior_derivative_by_pairs(phi, v);
         std::mt19937_64 rng(3);
         for (int k = 0; k < 50; ++k) {
           const Eigen::VectorXd p = random_point(rng, 3, 1);
           if ((a(p) - b(p)).norm() > 1e-9) return false;
         }
         return true;
       }},
      {"heisenberg coframe duality",
       [] {
         const Frame f = frame_from_words(heisenberg_fields(), {{Word{0}, Word{1}}, {Word{0, 1}}}, Eigen::Vector3d::Zero());
         std::mt19937_64 rng(4);
         for (int k = 0; k < 50; ++k) {
           const Eigen::VectorXd p = random_point(rng, 3, 2);
           if ((coframe_at(f, p) * frame_matrix(f, p) - Eigen::Matrix3d::Identity()).norm() > 1e-12) return false;
         }
         return growth_vector(heisenberg_fields(), Eigen::Vector3d::Zero(), 3) == std::vector<int>{2, 3};
       }},
      {"Chen identity and time reversal",
       [] {
         std::mt19937_64 rng(5);
         Eigen::MatrixXd pts(9, 2);
         for (int k = 0; k < 9; ++k) pts.row(k) = random_point(rng, 2, 1).transpose();
         const auto whole = path_signature(pts, 4);
         const auto split = path_signature(pts.topRows(5), 4) * path_signature(pts.bottomRows(5), 4);
         const auto back = path_signature(Eigen::MatrixXd(pts.colwise().reverse()), 4);
         return whole.distance(split) <= 1e-9 && (whole * back).distance(TensorSeries<double>::identity(2, 4)) <= 1e-9;
       }},
      {"Malliavin kernel matches finite differences",
       [] {
         const Fields f = parse_fields({{"1", "0.3*x"}, {"0.2*y", "1 + 0.1*x^2"}}, 2);
         const System sys(f);
         const OneForm phi({parse("cos(x) + y", 2), parse("x*y", 2)});
         const Eigen::Vector2d x0(0.1, -0.2);
         const DriverPath w = sample_fbm({.horizon = 0.5, .steps = 256, .seed = 7, .dim = 2});
         const DriverPath h = smooth_driver({parse("sin(3*t)", VariableSet::time()), parse("t^2", VariableSet::time())},
                                            w.times);
         const MalliavinKernel k = malliavin_kernel(phi, sys, solve(sys, x0, w));
         const double fd = finite_difference([&](const DriverPath& p) { return line_integral(phi, solve(sys, x0, p)); },
                                             w, h, 1e-4);
         return std::abs(k.pair(h) - fd) <= 1e-3 * std::max(1.0, std::abs(fd));
       }},
      {"step-two constructor kills dphi(V1,V2)",
       [] {
         const Fields v = heisenberg_fields();
         const OneForm phi = construct_step2(parse("x*y + sin(z)", 3), parse("x^2 - z*y", 3), v[0], v[1]);
         const Program prog(std::vector<Expression>{two_form(phi, v[0], v[1])});
         std::mt19937_64 rng(6);
         for (int k = 0; k < 100; ++k) {
           const Eigen::VectorXd p = random_point(rng, 3, 1);
           if (std::abs(prog(std::vector<double>(p.data(), p.data() + 3))[0]) > 1e-10) return false;
         }
         return true;
       }},
      {"criterion verdicts",
       [workers] {
         CriterionOptions o;
         o.workers = workers;
         const Grid g = Grid::uniform(Box::symmetric(2, 1.0), 41);
         const auto closed = criterion_elliptic(differential(parse("bump(x)*bump(y)", 2), 2), g, o);
         const auto ellip = criterion_elliptic(construct_elliptic_bump(Box::symmetric(2, 1.0)), g, o);
         const Fields v = heisenberg_fields();
         const auto heis = criterion_step2(construct_step2(0.0, parse("x^2*y", 3), v[0], v[1]), v[0], v[1],
                                           Grid::uniform(Box::symmetric(3, 1.0), 12), o);
         return closed.verdict == Verdict::Violated && ellip.verdict == Verdict::Satisfied &&
                heis.verdict == Verdict::Satisfied;
       }},
      {"Sard selection with f = g = 0",
       [workers] {
         CriterionOptions o;
         o.workers = workers;
         const SardSelection s = sard_lambda_select(0.0, 0.0, Grid::uniform(Box::symmetric(3, 1.0), 12), {}, o);
         for (double f : s.fractions)
           if (!(f <= s.zero_measure_tol)) return false;
         return s.lambda > 0;
       }},
      {"samples independent of worker count",
       [] {
         ExperimentSpec s;
         s.system.fields = {VectorField::coordinate(2, 0), VectorField::coordinate(2, 1)};
         s.system.x0 = Eigen::Vector2d(0.3, 0.2);
         s.system.steps = 64;
         s.forms = {construct_elliptic_bump(Box::symmetric(2, 1.0))};
         s.replicates = 12;
         s.workers = 1;
         const SampleSet a = run_conditional_samples(s);
         s.workers = 3;
         const SampleSet b = run_conditional_samples(s);
         for (std::size_t i = 0; i < a.samples.size(); ++i)
           if (a.samples[i].value != b.samples[i].value || a.samples[i].kernel_sup != b.samples[i].kernel_sup)
             return false;
         return true;
       }},
      {"route of a smooth path",
       [] {
         const CubeGrid g = build_grid(Box::symmetric(2, 2.0), 1.0, 0.1, Regime::Elliptic);
         const System sys({VectorField::coordinate(2, 0), VectorField::coordinate(2, 1)});
         const DriverPath w = smooth_driver({parse("3*t", VariableSet::time()), parse("0.2*sin(t)", VariableSet::time())},
                                            uniform_mesh(1.0, 512));
         const Trajectory traj = solve(sys, Eigen::Vector2d(-1.5, 0.5), w, {.substeps = 2, .jacobian = false});
         const RouteWord truth = true_route(traj, g);
         return truth.size() == 4 && recover_route(traj, g).word == truth;
       }},
  };
}

}  // namespace

int run_selftest(const RunOptions& options, std::ostream& log) {
  int failures = 0;
  for (const auto& c : checks(options.workers)) {
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      log << "  error: " << e.what() << "\n";
    }
    log << (ok ? "PASS " : "FAIL ") << c.name << "\n";
    failures += !ok;
  }
  log << (failures ? "selftest failed: " + std::to_string(failures) + " check(s)\n" : "selftest passed\n");
  return failures ? kNegative : kOk;
}

}  // namespace sli::cli
