// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "commands.hpp"
#include "random_systems.hpp"
#include "sli/error.hpp"
#include "sli/integrals.hpp"
#include "sli/lab.hpp"
#include "sli/nondeg.hpp"
#include "sli/reconstruct.hpp"

using namespace sli;
using sli::testing::as_std;
using sli::testing::RandomSystems;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Accumulates named sub-checks of one criterion.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failed_.push_back(what);
    ++count_;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  bool ok() const { return failed_.empty(); }
  std::string summary() const {
    std::ostringstream s;
    s << count_ - failed_.size() << "/" << count_ << " checks";
    if (!notes_.empty()) s << "; " << notes_;
    for (const auto& f : failed_) s << "\n    failed: " << f;
    return s.str();
  }

 private:
  std::vector<std::string> failed_;
  std::string notes_;
  int count_ = 0;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

VectorField field(std::initializer_list<const char*> comps) {
  const int n = static_cast<int>(comps.size());
  std::vector<Expression> c;
  for (const char* s : comps) c.push_back(parse(s, n));
  return VectorField(std::move(c));
}

Fields heisenberg() { return {field({"1", "0", "-y"}), field({"0", "1", "x"})}; }
Fields identity(int n) {
  Fields f;
  for (int i = 0; i < n; ++i) f.push_back(VectorField::coordinate(n, i));
  return f;
}

double at(const Expression& e, const Eigen::VectorXd& p) { return e.eval(as_std(p)); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------

void geometry(Report& r) {
  const auto start = std::chrono::steady_clock::now();
  RandomSystems gen(101);
  const int n = 3;
  double cartan = 0, antisym = 0, jacobi = 0, geo_i = 0, geo_ii = 0, duality = 0;
  for (int k = 0; k < 100; ++k) {
    const OneForm phi = gen.form(n);
    const VectorField x = gen.field(n), y = gen.field(n), z = gen.field(n);
    const Eigen::VectorXd p = gen.point(n);

    const OneForm d_ix = differential(pairing(phi, x), n);
    const OneForm lie = lie_derivative(phi, x);
    for (const VectorField& w : {x, y, z}) {
      const double lhs = at(pairing(d_ix, w), p) + exterior_derivative_pair(phi, x, w, p);
      cartan = std::max(cartan, std::abs(lhs - at(pairing(lie, w), p)));
      // (L_X phi)(W) = X(phi(W)) - phi([X,W]).
      const Expression xphiw = pairing(differential(pairing(phi, w), n), x);
      geo_ii = std::max(geo_ii, std::abs(at(pairing(lie, w), p) - at(xphiw, p) + at(pairing(phi, lie_bracket(x, w)), p)));
    }
    antisym = std::max(antisym, (lie_bracket(x, y)(p) + lie_bracket(y, x)(p)).cwiseAbs().maxCoeff());
    const Eigen::VectorXd jac =
        lie_bracket(x, lie_bracket(y, z))(p) + lie_bracket(y, lie_bracket(z, x))(p) + lie_bracket(z, lie_bracket(x, y))(p);
    jacobi = std::max(jacobi, jac.cwiseAbs().maxCoeff());
    geo_i = std::max(geo_i, (interior_derivative(phi, x)(p) - interior_derivative_by_pairs(phi, x)(p)).cwiseAbs().maxCoeff());
  }
  const Frame engel = build_frame({field({"1", "0", "0.7*x2", "0"}), field({"0", "1", "-0.4*x1", "0.9*x1^2"})},
                                  Eigen::Vector4d(0.2, 0.1, 0, 0), 4);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector4d p = engel.base_point + gen.point(4, 0.5 * std::min(engel.radius, 1.0));
    duality = std::max(duality, (coframe_at(engel, p) * frame_matrix(engel, p) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.check(cartan <= 1e-9, "Cartan identity " + sci(cartan));
  r.check(antisym <= 1e-9, "antisymmetry " + sci(antisym));
  r.check(jacobi <= 1e-9, "Jacobi " + sci(jacobi));
  r.check(geo_i <= 1e-9, "i(V)dphi two ways " + sci(geo_i));
  r.check(geo_ii <= 1e-9, "Lie derivative " + sci(geo_ii));
  r.check(duality <= 1e-9, "coframe duality " + sci(duality));
  r.check(secs < 10, "runtime " + std::to_string(secs) + " s");
  r.note("max err " + sci(std::max({cartan, antisym, jacobi, geo_i, geo_ii, duality})) + ", " + std::to_string(secs).substr(0, 4) + " s");
}

void heisenberg_truths(Report& r) {
  const Fields v = heisenberg();
  const VectorField b = lie_bracket(v[0], v[1]);
  bool symbolic = true;
  for (int i = 0; i < 3; ++i) symbolic = symbolic && b[i].is_constant() && b[i].constant_value() == (i == 2 ? 2.0 : 0.0);
  r.check(symbolic, "[V1,V2] = 2 d/dz symbolically");

  const Frame f = build_frame(v, Eigen::Vector3d::Zero(), 3);
  r.check(f.growth == std::vector<int>{2, 3}, "growth vector (2,3)");
  RandomSystems gen(102);
  double display = 0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d p = gen.point(3, 3.0);
    Eigen::Matrix3d expected;
    expected << 1, 0, 0, 0, 1, 0, p[1] / 2, -p[0] / 2, 0.5;
    display = std::max(display, (coframe_at(f, p) - expected).cwiseAbs().maxCoeff());
  }
  r.check(display <= 1e-12, "coframe display " + sci(display));

  double worst = 0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const DriverPath w = sample_fbm(FbmSpec{0.5, 1.0, 1024, seed, 2});
    const Trajectory tr = solve(System(v), Eigen::Vector3d::Zero(), w);
    double area = 0;
    for (int k = 0; k < w.steps(); ++k) {
      const Eigen::VectorXd a = w.values.row(k), c = w.values.row(k + 1);
      area += 0.5 * (a[0] + c[0]) * (c[1] - a[1]) - 0.5 * (a[1] + c[1]) * (c[0] - a[0]);
    }
    worst = std::max(worst, std::abs(tr.endpoint()[2] - area) / std::abs(area));
  }
  r.check(worst <= 1e-8, "Levy area rel err " + sci(worst));
  r.note("Levy area rel err " + sci(worst));
}

double coefficient(const TensorSeries<double>& s, const std::vector<int>& word) {
  Eigen::Index idx = 0;
  for (int i : word) idx = idx * s.dim() + i;
  return s.level(static_cast<int>(word.size()))[idx];
}

void shuffles(const std::vector<int>& u, const std::vector<int>& v, std::vector<int>& prefix,
              std::vector<std::vector<int>>& out) {
  if (u.empty() && v.empty()) return out.push_back(prefix);
  if (!u.empty()) {
    prefix.push_back(u[0]);
    shuffles({u.begin() + 1, u.end()}, v, prefix, out);
    prefix.pop_back();
  }
  if (!v.empty()) {
    prefix.push_back(v[0]);
    shuffles(u, {v.begin() + 1, v.end()}, prefix, out);
    prefix.pop_back();
  }
}

void signatures(Report& r) {
  const int depth = 4;
  const DriverPath w = sample_fbm(FbmSpec{0.5, 1.0, 300, 103, 3});
  const TensorSeries<double> s = signature(w, depth);
  double chen = 0;
  for (int k = 1; k < w.steps(); k += 11) {
    const auto a = path_signature(Eigen::MatrixXd(w.values.topRows(k + 1)), depth);
    const auto b = path_signature(Eigen::MatrixXd(w.values.bottomRows(w.steps() + 1 - k)), depth);
    chen = std::max(chen, (a * b).distance(s));
  }
  const auto back = path_signature(Eigen::MatrixXd(w.values.colwise().reverse()), depth);
  const double reversal = std::max((back * s).distance(TensorSeries<double>::identity(3, depth)), s.inverse().distance(back));

  double shuffle = 0;
  const std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs{
      {{0}, {1}}, {{0}, {1, 2}}, {{2, 2}, {0}}, {{0, 1}, {1, 0}}, {{2, 0}, {1, 1}}, {{1}, {0, 2, 1}}, {{0, 2}, {2, 1}}};
  for (const auto& [u, v] : pairs) {
    std::vector<std::vector<int>> words;
    std::vector<int> prefix;
    shuffles(u, v, prefix, words);
    double sum = 0;
    for (const auto& word : words) sum += coefficient(s, word);
    shuffle = std::max(shuffle, std::abs(coefficient(s, u) * coefficient(s, v) - sum));
  }

  // A straight line sampled on an irregular mesh against v^{(x)k}/k! by index loops.
  const Eigen::Vector3d v(0.7, -1.1, 0.4);
  DriverPath line;
  line.times = uniform_mesh(1.0, 5);
  Eigen::VectorXd frac(6);
  frac << 0, 0.1, 0.15, 0.6, 0.8, 1.0;
  line.values = frac * v.transpose();
  const TensorSeries<double> ls = signature(line, depth);
  double expo = 0;
  for (int i = 0; i < 3; ++i) {
    expo = std::max(expo, std::abs(ls({i}) - v[i]));
    for (int j = 0; j < 3; ++j) {
      expo = std::max(expo, std::abs(ls({i, j}) - v[i] * v[j] / 2));
      for (int k = 0; k < 3; ++k) {
        expo = std::max(expo, std::abs(ls({i, j, k}) - v[i] * v[j] * v[k] / 6));
        for (int l = 0; l < 3; ++l) expo = std::max(expo, std::abs(ls({i, j, k, l}) - v[i] * v[j] * v[k] * v[l] / 24));
      }
    }
  }
  r.check(chen <= 1e-9, "Chen " + sci(chen));
  r.check(reversal <= 1e-9, "time reversal " + sci(reversal));
  r.check(shuffle <= 1e-9, "shuffle " + sci(shuffle));
  r.check(expo <= 1e-12, "straight line vs exponential " + sci(expo));
  r.note("Chen " + sci(chen) + ", reversal " + sci(reversal) + ", shuffle " + sci(shuffle) + ", line " + sci(expo));
}

void kernels(Report& r) {
  RandomSystems gen(104);
  double single = 0, iterated = 0;
  const Expression t = Expression::variable(0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 2;
    const System sys({gen.field(n, 0.5), gen.field(n, 0.5)});
    const Eigen::VectorXd x0 = gen.point(n, 0.2);
    const std::vector<OneForm> forms{gen.form(n), gen.form(n)};
    const DriverPath w = sample_fbm(FbmSpec{0.5, 0.5, 512, 400 + std::uint64_t(trial), 2});
    std::vector<Expression> hc;
    for (int a = 0; a < 2; ++a)
      hc.push_back(gen.uniform(-1, 1) * sin(gen.integer(1, 3) * std::numbers::pi * t) + gen.uniform(-1, 1) * pow(t, 2));
    const DriverPath h = smooth_driver(hc, w.times);
    const Trajectory tr = solve(sys, x0, w);
    const double eps = 1e-4 * std::max(1.0, w.sup_norm());
    const double fd1 = finite_difference([&](const DriverPath& p) { return line_integral(forms[0], solve(sys, x0, p)); }, w, h, eps);
    const double fd2 = finite_difference(
        [&](const DriverPath& p) { return iterated_line_integral(forms, solve(sys, x0, p)).value; }, w, h, eps);
    single = std::max(single, std::abs(malliavin_kernel(forms[0], sys, tr).pair(h) - fd1) / std::abs(fd1));
    iterated = std::max(iterated, std::abs(malliavin_kernel_iterated(forms, sys, tr).pair(h) - fd2) / std::abs(fd2));
  }
  double pullback = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const System sys({gen.field(3), gen.field(3)});
    const DriverPath w = sample_fbm(FbmSpec{0.5, 0.5, 1024, 500 + std::uint64_t(trial), 2});
    const Trajectory tr = solve(sys, gen.point(3, 0.2), shift(w, w, -0.6));
    pullback = std::max(pullback, pullback_path(tr, sys, gen.field(3)).relative_residual());
  }
  r.check(single <= 1e-3, "single kernel vs FD " + sci(single));
  r.check(iterated <= 1e-3, "iterated kernel vs FD " + sci(iterated));
  r.check(pullback <= 1e-6, "pullback residual " + sci(pullback));
  r.note("FD rel err " + sci(single) + " / " + sci(iterated) + ", pullback " + sci(pullback));
}

double hbump(double u) { return std::abs(u) < 1 ? std::exp(-1 / (1 - u * u)) : 0.0; }
double hbump_d(double u) { return std::abs(u) < 1 ? -2 * u / ((1 - u * u) * (1 - u * u)) * hbump(u) : 0.0; }

void constructors(Report& r) {
  RandomSystems gen(105);
  const Fields v = heisenberg();
  double step2 = 0;
  for (int k = 0; k < 100; ++k) {
    const OneForm phi = construct_step2(gen.polynomial(3), gen.polynomial(3), v[0], v[1]);
    step2 = std::max(step2, std::abs(exterior_derivative_pair(phi, v[0], v[1], gen.point(3))));
  }

  const Fields engel{field({"1", "0", "0", "0"}), field({"0", "1", "x1", "x3"})};
  const Frame f = build_frame(engel, Eigen::Vector4d::Zero(), 4);
  r.check(f.step() == 3, "test system has step three");
  const GeneralForm g = construct_general(f, {parse("x1*x2 + x4", 4), parse("cos(x3) - x1^2 + x2*x4", 4)});
  std::vector<Expression> pairs;
  for (const Word& w : f.words)
    if (w.length() >= 2) pairs.push_back(two_form(g.form, engel[w.head()], f.columns[f.column_of(w.tail())]));
  const Program prog(pairs);
  double general = 0;
  for (int k = 0; k < 100; ++k)
    for (double value : prog(as_std(gen.point(4, 0.5)))) general = std::max(general, std::abs(value));

  const OneForm ellip = construct_elliptic_bump(Box::symmetric(2, 1));
  const Fields e = identity(2);
  double closed = 0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd p = gen.point(2, 0.99);
    const double hy = hbump(p[1]);
    const double expected = -hbump(p[0]) * hbump_d(p[1]) * (1 + 2 * hy * hy) * std::exp(hy * hy);
    closed = std::max(closed, std::abs(exterior_derivative_pair(ellip, e[0], e[1], p) - expected));
  }
  r.check(step2 <= 1e-10, "step-two dphi(V1,V2) " + sci(step2));
  r.check(general <= 1e-8, "general constructor " + sci(general));
  r.check(closed <= 1e-9, "elliptic example dphi " + sci(closed));
  r.note("step2 " + sci(step2) + ", general " + sci(general) + ", example " + sci(closed));
}

void verdicts(Report& r) {
  const Fields v = heisenberg();
  const Frame hf = frame_from_words(v, {{Word{0}, Word{1}}, {Word{0, 1}}}, Eigen::Vector3d::Zero());
  const Grid cube = Grid::uniform(Box::symmetric(3, 1), 16);
  const OneForm closed2 = differential(parse("bump(x)*bump(y)", 2), 2);
  const OneForm closed3 = differential(parse("bump(x)*bump(y)*bump(z)*(1 + x*y)", 3), 3);
  r.check(criterion_elliptic(closed2, Grid::uniform(Box::symmetric(2, 1), 41)).verdict == Verdict::Violated,
          "closed form, elliptic");
  r.check(criterion_general(closed3, hf, cube).verdict == Verdict::Violated, "closed form, general");
  r.check(criterion_step2(closed3, v[0], v[1], cube).verdict == Verdict::Violated, "closed form, step two");

  const OneForm ellip = construct_elliptic_bump(Box::symmetric(2, 1));
  std::vector<double> fractions;
  bool satisfied = true;
  for (int per_axis : {41, 81, 161, 321}) {
    const CriterionReport rep = criterion_elliptic(ellip, Grid::uniform(Box::symmetric(2, 1), per_axis));
    satisfied = satisfied && rep.verdict == Verdict::Satisfied;
    fractions.push_back(rep.fraction_zero);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < fractions.size(); ++i) decreasing = decreasing && fractions[i] < fractions[i - 1];
  r.check(satisfied, "elliptic example satisfied at every refinement");
  r.check(decreasing && fractions.back() <= 0.01, "fraction_zero decreases to " + sci(fractions.back()));

  const OneForm heis = construct_step2(0.0, parse("x^2*y", 3), v[0], v[1]);
  r.check(criterion_step2(heis, v[0], v[1], cube).verdict == Verdict::Satisfied, "Heisenberg c2 = x^2 y, step two");
  r.check(criterion_general(heis, hf, cube).verdict == Verdict::Satisfied, "Heisenberg c2 = x^2 y, general");
  r.note("example fraction_zero " + sci(fractions.front()) + " -> " + sci(fractions.back()));
}

void sard(Report& r) {
  const Fields v = heisenberg();
  const SardSelection s = sard_lambda_select(0.0, 0.0, {}, {}, {}, {}, std::make_pair(v[0], v[1]));
  bool all = !s.candidates.empty();
  for (double f : s.fractions) all = all && f <= s.zero_measure_tol;
  r.check(all, "every lambda candidate passes");
  r.check(s.form.has_value(), "a form is emitted");
  if (s.form) {
    const CriterionReport rep = criterion_step2(*s.form, v[0], v[1], Grid::uniform(Box::symmetric(3, 1), 20));
    r.check(rep.verdict == Verdict::Satisfied, "emitted form passes the step-two criterion");
    r.note(std::to_string(s.candidates.size()) + " candidates, lambda " + std::to_string(s.lambda) +
           ", fraction_zero " + sci(rep.fraction_zero));
  }
}

void density(Report& r, int workers) {
  const Expression x = Expression::variable(0), y = Expression::variable(1);
  const Expression f = bump(2 * x) * bump(2 * y);
  {
    ExperimentSpec s;
    s.system.fields = identity(2);
    s.system.x0 = Eigen::Vector2d(1.5, 0.0);
    s.system.substeps = 8;
    s.forms = {differential(f, 2)};
    s.replicates = 10000;
    s.seed = 20240601;
    s.workers = workers;
    s.compute_kernel = false;
    const SampleSet set = run_conditional_samples(s);
    const auto atoms = atom_test(set.conditional_values(), s.atom_tol);
    // X_T ~ N(x0, I): probability of ending outside (-1/2, 1/2)^2.
    double inside = 1;
    for (int i = 0; i < 2; ++i) inside *= normal_cdf(0.5 - s.system.x0[i]) - normal_cdf(-0.5 - s.system.x0[i]);
    const double p = 1 - inside, n = static_cast<double>(s.replicates);
    const double sigma = std::sqrt(p * (1 - p) / n);
    const double f0 = at(f, s.system.x0);
    const bool found = !atoms.empty() && std::abs(atoms[0].value + f0) <= s.atom_tol;
    r.check(found, "exact form: atom at -f(x0)");
    if (found) {
      const double z = std::abs(atoms[0].mass - p) / sigma;
      r.check(z <= 3, "atom mass " + std::to_string(atoms[0].mass) + " vs " + std::to_string(p) + " (" + std::to_string(z) + " sigma)");
      r.note("exact form atom mass " + std::to_string(atoms[0].mass).substr(0, 6) + " vs " + std::to_string(p).substr(0, 6) +
             " (" + std::to_string(z).substr(0, 4) + " sigma)");
    }
  }
  {
    ExperimentSpec s;
    s.system.fields = identity(2);
    s.system.x0 = Eigen::Vector2d(0.3, 0.2);
    s.forms = {construct_elliptic_bump(Box::symmetric(2, 1))};
    s.event = {Box::symmetric(2, 1)};
    s.replicates = 10000;
    s.seed = 20240602;
    s.workers = workers;
    const SampleSet set = run_conditional_samples_checked(s);
    const std::vector<double> values = set.conditional_values();
    const auto atoms = atom_test(values, s.atom_tol);
    const double rate = kernel_vanishing_rate(set, s.kernel_tol);
    const double cluster = max_cluster_mass(values, s.atom_tol);
    r.check(atoms.empty(), "elliptic example: no atom above 3/sqrt(N) (largest cluster " + sci(cluster) + ")");
    r.check(rate <= 0.01, "elliptic example: kernel vanishing rate " + sci(rate));
    r.note("example N=" + std::to_string(values.size()) + ", largest cluster " + sci(cluster) + ", vanishing rate " + sci(rate));
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void reconstruction(Report& r, const fs::path& work) {
  int smooth = 0, matched = 0;
  for (const auto& e : fs::directory_iterator(SLI_CONFIGS)) {
    const std::string name = e.path().stem().string();
    if (!name.starts_with("reconstruct_")) continue;
    const cli::RunConfig c = cli::load_config(e.path().string());
    const fs::path out = work / name;
    std::ostringstream log;
    cli::run_command("reconstruct", c, {.workers = 1, .output_directory = out.string()}, log);
    const json route = json::parse(slurp(out / "route.json"));
    const json& sum = route["summary"];
    if (c.driver.kind == "smooth") {
      ++smooth;
      const json& rep = route["replicates"][0];
      const bool ok = rep["match"].get<bool>() && rep["true_route"].size() <= 5 && !rep["true_route"].empty();
      matched += ok;
      r.check(ok, name + ": recovered word equals the true route");
    } else {
      const long clean = sum["clean"], clean_matches = sum["clean_matches"];
      r.check(clean > 0 && clean_matches == clean,
              name + ": clean replicates " + std::to_string(clean_matches) + "/" + std::to_string(clean));
      r.note(name + " match fraction " + std::to_string(sum["match_fraction"].get<double>()).substr(0, 5) + ", clean " +
             std::to_string(clean_matches) + "/" + std::to_string(clean));
    }
  }
  r.check(smooth >= 3, "bundled smooth cases present");
  r.note(std::to_string(matched) + "/" + std::to_string(smooth) + " smooth cases exact");
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") files[e.path().filename().string()] = slurp(e.path());
  return files;
}

void reproducibility(Report& r, const fs::path& work) {
  const std::string bin = SLI_BINARY, configs = SLI_CONFIGS;
  // Density runs use the bundled configs with fewer replicates to keep the suite short.
  std::vector<std::pair<std::string, fs::path>> runs{
      {"criterion", fs::path(configs) / "heisenberg_criterion.json"},
      {"criterion", fs::path(configs) / "closed_form.json"},
      {"construct", fs::path(configs) / "construct_sard.json"},
      {"construct", fs::path(configs) / "construct_general.json"},
      {"reconstruct", fs::path(configs) / "reconstruct_loop.json"},
      {"reconstruct", fs::path(configs) / "reconstruct_brownian.json"},
      {"simulate", fs::path(configs) / "simulate_heisenberg.json"},
  };
  for (const char* name : {"density_ellip", "density_deg1exact"}) {
    json doc = json::parse(slurp(fs::path(configs) / (std::string(name) + ".json")), nullptr, true, true);
    doc["mc"]["replicates"] = 200;
    const fs::path p = work / (std::string(name) + "_small.json");
    std::ofstream(p) << doc.dump(2);
    runs.emplace_back("density", p);
  }
  int identical = 0;
  for (const auto& [command, config] : runs) {
    const std::string tag = command + " " + config.filename().string();
    const fs::path a = work / ("repro_" + config.stem().string() + "_1"), b = work / ("repro_" + config.stem().string() + "_3"),
                   m = work / ("repro_" + config.stem().string() + "_manifest");
    const int ca = shell(bin + " " + command + " " + config.string() + " -w 1 -o " + a.string());
    const int cb = shell(bin + " " + command + " " + config.string() + " -w 3 -o " + b.string());
    const int cm = shell(bin + " " + command + " " + (a / "manifest.json").string() + " -w 2 -o " + m.string());
    const auto first = outputs(a);
    const bool ok = ca != cli::kFailure && ca == cb && ca == cm && !first.empty() && first == outputs(b) && first == outputs(m);
    identical += ok;
    r.check(ok, tag + ": identical across workers 1, 3 and a manifest rerun");
  }
  r.note(std::to_string(identical) + "/" + std::to_string(runs.size()) + " runs bitwise identical");
}

}  // namespace

int main() {
  const int workers = 0;
  const fs::path work = fs::temp_directory_path() / ("sli_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<void(Report&)>>> criteria{
      {"geometry identities", geometry},
      {"Heisenberg ground truths", heisenberg_truths},
      {"signature identities", signatures},
      {"Malliavin kernel and pullback", kernels},
      {"constructor postconditions", constructors},
      {"criterion verdicts", verdicts},
      {"Sard selection", sard},
      {"density diagnostics", [&](Report& r) { density(r, workers); }},
      {"route reconstruction", [&](Report& r) { reconstruction(r, work); }},
      {"reproducibility", [&](Report& r) { reproducibility(r, work); }},
  };
  int failures = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Report r;
    const auto start = std::chrono::steady_clock::now();
    try {
      run(r);
    } catch (const std::exception& e) {
      r.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (r.ok() ? "PASS" : "FAIL") << " criterion " << index << ": " << name << " (" << r.summary() << ") ["
              << std::fixed;
    std::cout.precision(1);
    std::cout << secs << " s]" << std::endl;
    std::cout.unsetf(std::ios::fixed);
    failures += !r.ok();
  }
  fs::remove_all(work);
  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}
