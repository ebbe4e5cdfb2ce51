#include <doctest.h>

#include <cmath>
#include <numbers>

#include "random_systems.hpp"
#include "sli/error.hpp"
#include "sli/integrals.hpp"

using namespace sli;
using sli::testing::RandomSystems;

namespace {

VectorField field(std::initializer_list<const char*> comps) {
  const int n = static_cast<int>(comps.size());
  std::vector<Expression> c;
  for (const char* s : comps) c.push_back(parse(s, n));
  return VectorField(std::move(c));
}

OneForm form(std::initializer_list<const char*> comps) {
  const int n = static_cast<int>(comps.size());
  std::vector<Expression> c;
  for (const char* s : comps) c.push_back(parse(s, n));
  return OneForm(std::move(c));
}

Fields identity_fields(int n) {
  Fields f;
  for (int i = 0; i < n; ++i) f.push_back(VectorField::coordinate(n, i));
  return f;
}

DriverPath circle(int steps) {
  const VariableSet t = VariableSet::time();
  return smooth_driver({parse("cos(2*pi*t) - 1", t), parse("sin(2*pi*t)", t)}, uniform_mesh(1.0, steps));
}

// Smooth shift direction h^a(t) = c_a sin(k_a pi t) + e_a t^2 on a mesh.
DriverPath direction(RandomSystems& gen, const Eigen::VectorXd& mesh, int d) {
  std::vector<Expression> comps;
  const Expression t = Expression::variable(0);
  for (int a = 0; a < d; ++a)
    comps.push_back(gen.uniform(-1, 1) * sin(gen.integer(1, 3) * std::numbers::pi * t) +
                    gen.uniform(-1, 1) * pow(t, 2));
  return smooth_driver(comps, mesh);
}

// Words of the shuffle product of u and v (letters as vectors).
void shuffles(const std::vector<int>& u, const std::vector<int>& v, std::vector<int>& prefix,
              std::vector<std::vector<int>>& out) {
  if (u.empty() && v.empty()) {
    out.push_back(prefix);
    return;
  }
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

double coefficient(const TensorSeries<double>& s, const std::vector<int>& word) {
  Eigen::Index idx = 0;
  for (int i : word) idx = idx * s.dim() + i;
  return s.level(static_cast<int>(word.size()))[idx];
}

}  // namespace

TEST_CASE("line integral of an exact form telescopes") {
  RandomSystems gen(31);
  for (int trial = 0; trial < 5; ++trial) {
    const System sys({gen.field(3, 0.5), gen.field(3, 0.5)});
    const Expression f = gen.polynomial(3);
    const DriverPath w = sample_fbm(FbmSpec{0.5, 0.5, 512, 200 + std::uint64_t(trial), 2});
    const Trajectory tr = solve(sys, gen.point(3, 0.3), w);
    const double value = line_integral(differential(f, 3), tr);
    const auto as_std = [](const Eigen::VectorXd& x) { return sli::testing::as_std(x); };
    const double exact = f.eval(as_std(tr.endpoint())) - f.eval(as_std(tr.x_at(0)));
    CHECK(std::abs(value - exact) <= 1e-8 * std::max(1.0, std::abs(exact)));
  }
  const Trajectory tr = solve(System(identity_fields(2)), Eigen::Vector2d(1, 0), circle(64));
  CHECK(line_integral(OneForm::zero(2), tr) == 0.0);
}

TEST_CASE("area form along the unit circle") {
  const OneForm area = form({"-y/2", "x/2"});
  // The solved path is the inscribed polygon; its area is (N/2) sin(2 pi / N).
  for (int steps : {1024, 4096}) {
    const Trajectory tr = solve(System(identity_fields(2)), Eigen::Vector2d(1, 0), circle(steps));
    const double value = line_integral(area, tr);
    const double polygon = 0.5 * steps * std::sin(2 * std::numbers::pi / steps);
    CHECK(std::abs(value - polygon) <= 1e-12);
    if (steps == 4096) CHECK(std::abs(value - std::numbers::pi) <= 1e-6 * std::numbers::pi);
  }
}

TEST_CASE("iterated integrals") {
  const System ident(identity_fields(2));
  SUBCASE("one form reduces to the line integral") {
    RandomSystems gen(32);
    const OneForm phi = gen.form(2);
    const Trajectory tr = solve(ident, Eigen::Vector2d(0.1, 0.2), sample_fbm(FbmSpec{0.5, 1.0, 256, 9, 2}));
    const IteratedIntegral it = iterated_line_integral({phi}, tr);
    CHECK(it.value == doctest::Approx(line_integral(phi, tr)).epsilon(1e-12));
    CHECK(it.g.row(0).cwiseEqual(1.0).all());
    CHECK(it.h.row(0).cwiseEqual(1.0).all());
  }
  SUBCASE("a form whose support is never visited") {
    const OneForm near = form({"bump(x)*bump(y)", "0"});
    const OneForm far = form({"bump(x - 5)", "bump(y - 5)"});
    const Trajectory tr = solve(ident, Eigen::Vector2d(0, 0), circle(128));
    CHECK(iterated_line_integral({near, far}, tr).value == 0.0);
    CHECK(iterated_line_integral({far, near}, tr).value == 0.0);
  }
  SUBCASE("dx then dy along a segment gives ab/2") {
    const double a = 1.7, b = -0.6;
    DriverPath w;
    w.times = uniform_mesh(1.0, 3);
    w.values = w.times * Eigen::RowVector2d(a, b);
    const Trajectory tr = solve(ident, Eigen::Vector2d(0.4, 0.4), w);
    const double value = iterated_line_integral({form({"1", "0"}), form({"0", "1"})}, tr).value;
    // Oracle: brute-force sum over the simplex s < t on a K x K grid, half weight on the diagonal.
    const int K = 400;
    double oracle = 0;
    for (int i = 0; i < K; ++i)
      for (int j = i; j < K; ++j) oracle += (i == j ? 0.5 : 1.0) * (a / K) * (b / K);
    CHECK(value == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(value == doctest::Approx(a * b / 2).epsilon(1e-12));
  }
  SUBCASE("G and H agree with the shorter iterated integrals") {
    RandomSystems gen(33);
    const std::vector<OneForm> forms{gen.form(2), gen.form(2), gen.form(2)};
    const Trajectory tr = solve(ident, Eigen::Vector2d(0, 0), sample_fbm(FbmSpec{0.5, 1.0, 128, 10, 2}));
    const IteratedIntegral it = iterated_line_integral(forms, tr);
    const double total = it.value;
    CHECK(it.g(0, 0) == 1.0);
    CHECK(it.h(2, 0) == 1.0);
    // H^1_0 and G^3_T are the iterated integrals of the shorter words.
    CHECK(it.h(0, 0) == doctest::Approx(iterated_line_integral({forms[1], forms[2]}, tr).value).epsilon(1e-10));
    CHECK(it.g(2, tr.fine_count() - 1) ==
          doctest::Approx(iterated_line_integral({forms[0], forms[1]}, tr).value).epsilon(1e-10));
    CHECK(total == doctest::Approx(iterated_line_integral({forms[0], forms[1], forms[2]}, tr).value));
  }
}

TEST_CASE("signatures") {
  const int depth = 4;
  SUBCASE("straight line is the tensor exponential") {
    const Eigen::Vector3d v(0.7, -1.1, 0.4);
    DriverPath w;
    w.times = uniform_mesh(1.0, 7);
    Eigen::VectorXd frac(8);
    frac << 0, 0.05, 0.2, 0.21, 0.5, 0.77, 0.9, 1.0;
    w.values = frac * v.transpose();
    const TensorSeries<double> s = signature(w, depth);
    // v^{(x)k}/k! by explicit index loops.
    double worst = 0;
    for (int i = 0; i < 3; ++i) {
      worst = std::max(worst, std::abs(s({i}) - v[i]));
      for (int j = 0; j < 3; ++j) {
        worst = std::max(worst, std::abs(s({i, j}) - v[i] * v[j] / 2));
        for (int k = 0; k < 3; ++k) {
          worst = std::max(worst, std::abs(s({i, j, k}) - v[i] * v[j] * v[k] / 6));
          for (int l = 0; l < 3; ++l) worst = std::max(worst, std::abs(s({i, j, k, l}) - v[i] * v[j] * v[k] * v[l] / 24));
        }
      }
    }
    CHECK(s.level(0)[0] == 1.0);
    CHECK(worst <= 1e-12);
  }
  const DriverPath w = sample_fbm(FbmSpec{0.5, 1.0, 200, 11, 3});
  SUBCASE("Chen identity at every split point") {
    const TensorSeries<double> full = signature(w, depth);
    double worst = 0;
    for (int k = 1; k < w.steps(); k += 7) {
      const auto a = path_signature(Eigen::MatrixXd(w.values.topRows(k + 1)), depth);
      const auto b = path_signature(Eigen::MatrixXd(w.values.bottomRows(w.steps() + 1 - k)), depth);
      worst = std::max(worst, (a * b).distance(full));
    }
    CHECK(worst <= 1e-10);
  }
  SUBCASE("time reversal gives the inverse") {
    const TensorSeries<double> s = signature(w, depth);
    const auto r = path_signature(Eigen::MatrixXd(w.values.colwise().reverse()), depth);
    const auto id = TensorSeries<double>::identity(3, depth);
    CHECK((r * s).distance(id) <= 1e-9);
    CHECK((s * r).distance(id) <= 1e-9);
    CHECK(s.inverse().distance(r) <= 1e-9);
  }
  SUBCASE("shuffle identities") {
    const TensorSeries<double> s = signature(w, depth);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(s({i}) * s({j}) - s({i, j}) - s({j, i})) <= 1e-10);
    double worst = 0;
    const std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs{
        {{0}, {1, 2}}, {{2, 2}, {0}}, {{0, 1}, {1, 0}}, {{2, 0}, {1, 1}}, {{1}, {0, 2, 1}}};
    for (const auto& [u, v] : pairs) {
      std::vector<std::vector<int>> words;
      std::vector<int> prefix;
      shuffles(u, v, prefix, words);
      double sum = 0;
      for (const auto& word : words) sum += coefficient(s, word);
      worst = std::max(worst, std::abs(coefficient(s, u) * coefficient(s, v) - sum));
    }
    CHECK(worst <= 1e-9);
  }
  SUBCASE("Levy area of a planar loop is the enclosed area") {
    const DriverPath loop = circle(300);
    const auto s = signature(loop, 2);
    const Trajectory tr = solve(System(identity_fields(2)), Eigen::Vector2d(0, 0), loop);
    const double area = line_integral(form({"-y/2", "x/2"}), tr);
    CHECK(0.5 * (s({0, 1}) - s({1, 0})) == doctest::Approx(area).epsilon(1e-8));
    CHECK(signature(tr, 2).distance(s) <= 1e-12);
  }
}

TEST_CASE("Malliavin kernel") {
  SUBCASE("zero form") {
    RandomSystems gen(34);
    const System sys({gen.field(2, 0.3), gen.field(2, 0.3)});
    const Trajectory tr = solve(sys, Eigen::Vector2d(0, 0), circle(32));
    CHECK(malliavin_kernel(OneForm::zero(2), sys, tr).sup_norm() == 0.0);
  }
  SUBCASE("exact forms: chain rule through the Jacobian") {
    RandomSystems gen(35);
    const System sys({gen.field(3, 0.5), gen.field(3, 0.5)});
    const Expression f = gen.polynomial(3);
    const Trajectory tr = solve(sys, gen.point(3, 0.2), sample_fbm(FbmSpec{0.5, 0.5, 256, 12, 2}));
    const MalliavinKernel k = malliavin_kernel(differential(f, 3), sys, tr);
    const int last = tr.fine_count() - 1;
    Eigen::RowVectorXd grad(3);
    for (int i = 0; i < 3; ++i) grad[i] = f.diff(i).eval(sli::testing::as_std(tr.endpoint()));
    double worst = 0;
    System::Workspace work;
    Eigen::MatrixXd v(3, 2);
    for (int j = 0; j <= last; ++j) {
      sys.fields_at(tr.x_at(j), v, work);
      const Eigen::RowVectorXd expect = grad * tr.phi_at(last) * tr.phi_inv_at(j) * v;
      worst = std::max(worst, (k.rows.row(j) - expect).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-8 * std::max(1.0, k.sup_norm()));
  }
  SUBCASE("finite differences, single and iterated") {
    RandomSystems gen(36);
    double worst_single = 0, worst_iterated = 0;
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + trial % 2;
      const System sys({gen.field(n, 0.5), gen.field(n, 0.5)});
      const Eigen::VectorXd x0 = gen.point(n, 0.2);
      const std::vector<OneForm> forms{gen.form(n), gen.form(n)};
      const DriverPath w = sample_fbm(FbmSpec{0.5, 0.5, 512, 300 + std::uint64_t(trial), 2});
      const DriverPath h = direction(gen, w.times, 2);
      const Trajectory tr = solve(sys, x0, w);

      auto single = [&](const DriverPath& p) { return line_integral(forms[0], solve(sys, x0, p)); };
      auto iterated = [&](const DriverPath& p) { return iterated_line_integral(forms, solve(sys, x0, p)).value; };
      const double eps = 1e-4 * std::max(1.0, w.sup_norm());
      const double fd1 = finite_difference(single, w, h, eps);
      const double fd2 = finite_difference(iterated, w, h, eps);
      const double k1 = malliavin_kernel(forms[0], sys, tr).pair(h);
      const double k2 = malliavin_kernel_iterated(forms, sys, tr).pair(h);
      worst_single = std::max(worst_single, std::abs(k1 - fd1) / std::abs(fd1));
      worst_iterated = std::max(worst_iterated, std::abs(k2 - fd2) / std::abs(fd2));
    }
    CHECK(worst_single <= 1e-3);
    CHECK(worst_iterated <= 1e-3);
  }
  SUBCASE("one form: the iterated kernel reduces to the single one") {
    RandomSystems gen(37);
    const System sys({gen.field(2, 0.5), gen.field(2, 0.5)});
    const OneForm phi = gen.form(2);
    const Trajectory tr = solve(sys, Eigen::Vector2d(0.1, 0), sample_fbm(FbmSpec{0.5, 0.5, 128, 13, 2}));
    CHECK((malliavin_kernel(phi, sys, tr).rows - malliavin_kernel_iterated({phi}, sys, tr).rows).cwiseAbs().maxCoeff() ==
          0.0);
  }
  SUBCASE("disjoint supports that the path never visits") {
    const System sys({field({"1", "0"}), field({"0", "1"})});
    const Trajectory tr = solve(sys, Eigen::Vector2d(0, 0), circle(64));
    const std::vector<OneForm> forms{form({"bump(x - 5)", "0"}), form({"0", "bump(y + 5)"})};
    CHECK(malliavin_kernel_iterated(forms, sys, tr).sup_norm() == 0.0);
  }
  SUBCASE("mesh mismatch") {
    const System sys({field({"1", "0"}), field({"0", "1"})});
    const Trajectory tr = solve(sys, Eigen::Vector2d(0, 0), circle(64));
    const MalliavinKernel k = malliavin_kernel(form({"-y", "x"}), sys, tr);
    CHECK_THROWS_AS(k.pair(circle(48)), Error);
  }
}
