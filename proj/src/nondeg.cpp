#include "sli/nondeg.hpp"

#include <cmath>

#include "sli/error.hpp"
#include "sli/parallel.hpp"

namespace sli {

bool Box::contains(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  for (int i = 0; i < dim(); ++i)
    if (!(p[i] > lower[i] && p[i] < upper[i])) return false;
  return true;
}

Box Box::cube(const Eigen::VectorXd& center, double half_side) {
  return {center.array() - half_side, center.array() + half_side};
}

Grid Grid::uniform(const Box& box, int per_axis) {
  if (per_axis < 1) throw Error(ErrorKind::Config, "grid needs at least one cell per axis");
  return {box, std::vector<int>(box.dim(), per_axis)};
}

long Grid::size() const {
  long s = 1;
  for (int c : counts) s *= c;
  return counts.empty() ? 0 : s;
}

int Grid::side() const {
  int s = 0;
  for (int c : counts) s = std::max(s, c);
  return s;
}

Eigen::VectorXd Grid::point(long index) const {
  Eigen::VectorXd p(dim());
  for (int i = 0; i < dim(); ++i) {
    const long k = index % counts[i];
    index /= counts[i];
    p[i] = box.lower[i] + (k + 0.5) * (box.upper[i] - box.lower[i]) / counts[i];
  }
  return p;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Satisfied:
      return "satisfied";
    case Verdict::Violated:
      return "violated";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

namespace {

// A group is zero at a point when max |values| <= rel * max |scales|; the
// scales are the summands the values are made of.
struct Group {
  std::string label;
  std::vector<Expression> values;
  std::vector<Expression> scales;
};

struct Tally {
  std::vector<Expression> support;  // empty: every point is in the support
  std::vector<Group> groups;
  std::optional<Expression> determinant;  // checked against 1e-12 at every point
};

CriterionReport run_tally(const std::string& name, const Grid& grid, const Tally& t, const CriterionOptions& o) {
  std::vector<Expression> outputs = t.support;
  std::vector<std::pair<int, int>> spans;  // (values begin, scales begin)
  for (const auto& g : t.groups) {
    const int vb = static_cast<int>(outputs.size());
    outputs.insert(outputs.end(), g.values.begin(), g.values.end());
    const int sb = static_cast<int>(outputs.size());
    outputs.insert(outputs.end(), g.scales.begin(), g.scales.end());
    spans.emplace_back(vb, sb);
  }
  const int det_slot = static_cast<int>(outputs.size());
  if (t.determinant) outputs.push_back(*t.determinant);
  const Program prog(outputs);
  const int arity = std::max(prog.arity(), grid.dim());
  const int groups = static_cast<int>(t.groups.size());
  const int support_size = static_cast<int>(t.support.size());

  const int workers = resolve_workers(o.workers);
  const int chunks = std::max(1, 4 * workers);
  std::vector<long> support(chunks, 0);
  std::vector<std::vector<long>> zeros(chunks, std::vector<long>(groups, 0));
  if (o.record_points && groups > 63) throw Error(ErrorKind::Config, "point records support at most 63 groups");
  std::vector<std::uint64_t> masks(o.record_points ? grid.size() : 0);  // bit 63: support, bit g: group g zero
  parallel_chunks(grid.size(), workers, chunks, [&](long begin, long end, int c) {
    std::vector<double> point(arity, 0.0), out(outputs.size()), tape;
    for (long i = begin; i < end; ++i) {
      const Eigen::VectorXd p = grid.point(i);
      for (int k = 0; k < grid.dim(); ++k) point[k] = p[k];
      prog.eval(point, out, tape);
      if (t.determinant && !(std::abs(out[det_slot]) >= 1e-12))
        throw Error(ErrorKind::SingularFrame, "frame degenerates inside the grid box");
      bool in_support = support_size == 0;
      for (int k = 0; k < support_size && !in_support; ++k) in_support = out[k] != 0.0;
      if (!in_support) continue;
      ++support[c];
      if (o.record_points) masks[i] |= std::uint64_t{1} << 63;
      for (int g = 0; g < groups; ++g) {
        const auto [vb, sb] = spans[g];
        double vmax = 0, smax = 0;
        for (int k = vb; k < sb; ++k) vmax = std::max(vmax, std::abs(out[k]));
        const int se = g + 1 < groups ? spans[g + 1].first : (t.determinant ? det_slot : static_cast<int>(out.size()));
        for (int k = sb; k < se; ++k) smax = std::max(smax, std::abs(out[k]));
        if (!(vmax > o.point_rel_tol * smax)) {
          ++zeros[c][g];
          if (o.record_points) masks[i] |= std::uint64_t{1} << g;
        }
      }
    }
  });

  CriterionReport r;
  r.criterion = name;
  r.grid = grid;
  r.grid_points = grid.size();
  r.point_rel_tol = o.point_rel_tol;
  r.zero_measure_tol = o.zero_measure_tol > 0 ? o.zero_measure_tol : 2.0 / std::max(1, grid.side());
  std::vector<long> zero_total(groups, 0);
  for (int c = 0; c < chunks; ++c) {
    r.support_points += support[c];
    for (int g = 0; g < groups; ++g) zero_total[g] += zeros[c][g];
  }
  for (const auto& g : t.groups) r.group_labels.push_back(g.label);
  r.fraction_zero = 1.0;
  r.zero_points = r.support_points;
  int best = 0;
  for (int g = 0; g < groups; ++g) {
    const double f = r.support_points ? static_cast<double>(zero_total[g]) / r.support_points : 1.0;
    r.per_group.push_back(f);
    if (f < r.fraction_zero || g == 0) {
      r.fraction_zero = f;
      r.zero_points = zero_total[g];
      best = g;
    }
  }
  if (o.record_points) {
    r.point_flags.resize(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i)
      r.point_flags[i] = !(masks[i] >> 63) ? 0 : ((masks[i] >> best) & 1) ? 2 : 1;
  }
  if (r.support_points == 0)
    r.verdict = Verdict::Violated;
  else if (r.support_points < o.min_points)
    r.verdict = Verdict::Inconclusive;
  else
    r.verdict = r.fraction_zero <= r.zero_measure_tol ? Verdict::Satisfied : Verdict::Violated;
  return r;
}

// Summands of i(V)theta = V theta - d(theta.V) + theta.DV, per component.
std::vector<std::vector<Expression>> interior_summands(const OneForm& theta, const VectorField& v) {
  const int n = theta.dim();
  const Expression tv = pairing(theta, v);
  std::vector<std::vector<Expression>> s(n);
  for (int j = 0; j < n; ++j) {
    Expression tdv;
    for (int i = 0; i < n; ++i) tdv += theta[i] * v[i].diff(j);
    s[j] = {apply(v, theta[j]), -tv.diff(j), tdv};
  }
  return s;
}

// Summands of L_V theta = V theta + theta.DV.
std::vector<std::vector<Expression>> lie_summands(const OneForm& theta, const VectorField& v) {
  const int n = theta.dim();
  std::vector<std::vector<Expression>> s(n);
  for (int j = 0; j < n; ++j) {
    Expression tdv;
    for (int i = 0; i < n; ++i) tdv += theta[i] * v[i].diff(j);
    s[j] = {apply(v, theta[j]), tdv};
  }
  return s;
}

// Summands of dtheta(X,Y) = X(theta Y) - Y(theta X) - theta([X,Y]).
std::vector<Expression> pair_summands(const OneForm& theta, const VectorField& x, const VectorField& y) {
  return {apply(x, pairing(theta, y)), -apply(y, pairing(theta, x)), -pairing(theta, lie_bracket(x, y))};
}

Expression frame_determinant(const Frame& frame) {
  const int n = frame.dim();
  std::vector<std::vector<Expression>> w(n, std::vector<Expression>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[i][j] = frame.columns[j][i];
  return determinant(w);
}

Frame step2_frame(const VectorField& v1, const VectorField& v2) {
  const int n = v1.dim();
  if (n != 3 || v2.dim() != 3) throw Error(ErrorKind::Config, "step-two constructions need n = 3 and two fields");
  return frame_from_words({v1, v2}, {{Word{0}, Word{1}}, {Word{0, 1}}}, Eigen::VectorXd::Zero(3));
}

}  // namespace

PsiTable::PsiTable(OneForm phi, Fields fields) : phi_(std::move(phi)), brackets_(std::move(fields)) {}

const Expression& PsiTable::operator()(const Word& word) {
  if (auto it = table_.find(word); it != table_.end()) return it->second;
  if (word.length() == 0) throw Error(ErrorKind::Index, "psi of the empty word");
  const int d = static_cast<int>(brackets_.fields().size());
  for (int l : word.letters)
    if (l < 0 || l >= d) throw Error(ErrorKind::Index, "word letter out of range");
  Expression value;
  if (word.length() > 1) {
    const Word tail = word.tail();
    const VectorField vi = brackets_.fields()[word.head()];
    const Expression rest = (*this)(tail);
    value = two_form(phi_, vi, brackets_(tail)) + apply(vi, rest);
  }
  return table_.emplace(word, value).first->second;
}

PsiTable psi_table(const OneForm& phi, const Fields& fields, int max_length) {
  PsiTable table(phi, fields);
  const int d = static_cast<int>(fields.size());
  std::vector<Word> layer{Word{}};
  for (int len = 1; len <= max_length; ++len) {
    std::vector<Word> next;
    for (const auto& w : layer)
      for (int i = 0; i < d; ++i) {
        Word v = Word::cons(i, w);
        table(v);
        next.push_back(std::move(v));
      }
    layer = std::move(next);
  }
  return table;
}

OneForm xi_form(const OneForm& phi, const Frame& frame) {
  const int n = frame.dim();
  OneForm xi = OneForm::zero(n);
  if (frame.step() <= 1) return xi;
  PsiTable psi(phi, frame.fields);
  const std::vector<OneForm> omega = coframe_forms(frame);
  for (int c = 0; c < n; ++c) {
    const Word& w = frame.words[c];
    if (w.length() < 2) continue;
    const Expression& p = psi(w);
    if (!p.is_zero()) xi = xi - p * omega[c];
  }
  return xi;
}

Eigen::RowVectorXd xi_at(const OneForm& phi, const Frame& frame, const Eigen::VectorXd& x) {
  const int n = frame.dim();
  PsiTable psi(phi, frame.fields);
  Eigen::RowVectorXd theta(n);
  const std::vector<double> p(x.data(), x.data() + x.size());
  for (int c = 0; c < n; ++c) theta[c] = frame.words[c].length() < 2 ? 0.0 : psi(frame.words[c]).eval(p);
  return -theta * coframe_at(frame, x);
}

CriterionReport criterion_elliptic(const OneForm& phi, const Grid& grid, const CriterionOptions& options) {
  const int n = phi.dim();
  Tally t;
  t.support = phi.components;
  Group g{"dphi", {}, {}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Expression a = phi[j].diff(i), b = phi[i].diff(j);
      g.values.push_back(a - b);
      g.scales.push_back(a);
      g.scales.push_back(b);
    }
  t.groups.push_back(std::move(g));
  return run_tally("elliptic", grid, t, options);
}

CriterionReport criterion_general(const OneForm& phi, const Frame& frame, const Grid& grid,
                                  const CriterionOptions& options) {
  const int n = phi.dim();
  if (frame.dim() != n) throw Error(ErrorKind::Config, "frame and form dimensions differ");
  const OneForm xi = xi_form(phi, frame);
  Tally t;
  t.support = phi.components;
  if (frame.step() > 1) t.determinant = frame_determinant(frame);
  for (std::size_t a = 0; a < frame.fields.size(); ++a) {
    const VectorField& v = frame.fields[a];
    Group g{"alpha=" + std::to_string(a + 1), {}, {}};
    const auto is = interior_summands(phi, v);
    const auto ls = lie_summands(xi, v);
    for (int j = 0; j < n; ++j) {
      Expression value;
      for (const auto& s : is[j]) value += s;
      for (const auto& s : ls[j]) value -= s;
      g.values.push_back(value);
      g.scales.insert(g.scales.end(), is[j].begin(), is[j].end());
      g.scales.insert(g.scales.end(), ls[j].begin(), ls[j].end());
    }
    t.groups.push_back(std::move(g));
  }
  return run_tally("general", grid, t, options);
}

CriterionReport criterion_step2(const OneForm& phi, const VectorField& v1, const VectorField& v2, const Grid& grid,
                                const CriterionOptions& options) {
  const Frame frame = step2_frame(v1, v2);
  const std::vector<OneForm> omega = coframe_forms(frame);
  const OneForm modified = phi + two_form(phi, v1, v2) * omega[2];
  Tally t;
  t.support = phi.components;
  t.determinant = frame_determinant(frame);
  Group g{"frame pairs", {}, {}};
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      const auto s = pair_summands(modified, frame.columns[a], frame.columns[b]);
      g.values.push_back(s[0] + s[1] + s[2]);
      g.scales.insert(g.scales.end(), s.begin(), s.end());
    }
  t.groups.push_back(std::move(g));
  return run_tally("step2", grid, t, options);
}

OneForm construct_elliptic_bump(const Box& cube) {
  const int n = cube.dim();
  if (n < 2 || cube.upper.size() != n) throw Error(ErrorKind::Config, "elliptic bump needs dimension >= 2");
  for (int i = 0; i < n; ++i)
    if (!(cube.upper[i] > cube.lower[i]) || !std::isfinite(cube.upper[i] - cube.lower[i]))
      throw Error(ErrorKind::DegenerateCube, "cube side along axis " + std::to_string(i + 1) + " is not positive");
  auto unit = [&](int i) {
    const double w = cube.upper[i] - cube.lower[i];
    return (2.0 / w) * Expression::variable(i) - (cube.upper[i] + cube.lower[i]) / w;
  };
  const Expression hx = bump(unit(0)), hy = bump(unit(1));
  Expression c = (2.0 / (cube.upper[0] - cube.lower[0])) * hx * hy * exp(hy * hy);
  for (int i = 2; i < n; ++i) c = c * bump(unit(i));
  OneForm phi = OneForm::zero(n);
  phi.components[0] = c;
  return phi;
}

OneForm construct_step2(const Expression& c1, const Expression& c2, const VectorField& v1, const VectorField& v2) {
  const Frame frame = step2_frame(v1, v2);
  const std::vector<OneForm> omega = coframe_forms(frame);
  if (c1.is_zero() && c2.is_zero()) return OneForm::zero(3);
  const Expression c3 = apply(v1, c2) - apply(v2, c1);
  return c1 * omega[0] + c2 * omega[1] + c3 * omega[2];
}

GeneralForm construct_general(const Frame& frame, const std::vector<Expression>& seeds) {
  if (frame.layers.empty() || seeds.size() != frame.layers[0].size())
    throw Error(ErrorKind::Config, "need one seed per first-layer word");
  GeneralForm r;
  r.coframe = coframe_forms(frame);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (frame.layers[0][i].length() != 1) throw Error(ErrorKind::Config, "first frame layer must hold single letters");
    r.coefficients[frame.layers[0][i]] = seeds[i];
  }
  for (std::size_t k = 1; k < frame.layers.size(); ++k)
    for (const Word& w : frame.layers[k]) {
      const Word head{w.head()}, tail = w.tail();
      const auto ci = r.coefficients.find(head), cj = r.coefficients.find(tail);
      if (ci == r.coefficients.end() || cj == r.coefficients.end())
        throw Error(ErrorKind::IrregularPoint, "word " + w.str() + " is not built from I_1 x I_{k-1}");
      const VectorField& vj = frame.columns[frame.column_of(tail)];
      r.coefficients[w] = apply(frame.fields[w.head()], cj->second) - apply(vj, ci->second);
    }
  r.form = OneForm::zero(frame.dim());
  for (int c = 0; c < frame.dim(); ++c) {
    const Expression& coef = r.coefficients.at(frame.words[c]);
    if (!coef.is_zero()) r.form = r.form + coef * r.coframe[c];
  }
  return r;
}

namespace {

struct ExpcondTerms {
  Expression value;
  std::vector<Expression> summands;
};

ExpcondTerms expcond_terms(const Frame& frame, const GeneralForm& table, int alpha, const Word& j) {
  if (alpha < 0 || alpha >= static_cast<int>(frame.fields.size())) throw Error(ErrorKind::Index, "alpha out of range");
  const auto ca = table.coefficients.find(Word{alpha});
  const auto cj = table.coefficients.find(j);
  if (ca == table.coefficients.end() || cj == table.coefficients.end())
    throw Error(ErrorKind::Index, "coefficient table lacks c_alpha or c_J");
  const VectorField& va = frame.fields[alpha];
  const VectorField& vj = frame.columns[frame.column_of(j)];
  const VectorField br = lie_bracket(va, vj);
  const Expression t1 = apply(va, cj->second), t2 = apply(vj, ca->second);
  ExpcondTerms r{t1 - t2, {t1, t2}};
  for (int c = 0; c < frame.dim(); ++c) {
    const Expression term = table.coefficients.at(frame.words[c]) * pairing(table.coframe[c], br);
    r.value -= term;
    r.summands.push_back(term);
  }
  return r;
}

}  // namespace

Expression expcond_value(const Frame& frame, const GeneralForm& table, int alpha, const Word& j) {
  return expcond_terms(frame, table, alpha, j).value;
}

CriterionReport check_expcond(const Frame& frame, const GeneralForm& table, int alpha, const Word& j,
                              const Grid& grid, const CriterionOptions& options) {
  ExpcondTerms terms = expcond_terms(frame, table, alpha, j);
  Tally t;
  t.groups.push_back({"alpha=" + std::to_string(alpha + 1) + ",J=" + j.str(), {terms.value}, terms.summands});
  return run_tally("expcond", grid, t, options);
}

CriterionReport heisenberg_condition(const Expression& c1, const Expression& c2, const Grid& grid,
                                     const CriterionOptions& options) {
  if (grid.dim() != 2 && grid.dim() != 3) throw Error(ErrorKind::Config, "Heisenberg grids are 2- or 3-dimensional");
  if (c1.arity() > 2 || c2.arity() > 2) throw Error(ErrorKind::Config, "c_1, c_2 must not depend on z");
  const Expression c1xy = c1.diff(0).diff(1), c1yy = c1.diff(1).diff(1);
  const Expression c2xx = c2.diff(0).diff(0), c2xy = c2.diff(0).diff(1);
  const Expression a = c2xx - c1xy, b = c2xy - c1yy;
  const Expression x = Expression::variable(0), y = Expression::variable(1);
  const Expression c3 = c2.diff(0) - c1.diff(1);
  Tally t;
  t.support = {c1 + 0.5 * y * c3, c2 - 0.5 * x * c3, 0.5 * c3};
  t.groups.push_back({"product", {a * b}, {c1xy * c1yy, c1xy * c2xy, c2xx * c1yy, c2xx * c2xy}});
  return run_tally("heisenberg", grid, t, options);
}

Expression h_lambda(const Expression& u, double lambda) { return inside(u, exp(-lambda / (1.0 - u * u))); }

Expression sard_quadratic(const Expression& f, const Expression& g, double lambda) {
  const Expression x = Expression::variable(0);
  const Expression s = 1.0 - x * x;
  return 4.0 * lambda * lambda * x * x - 2.0 * lambda * s * (1.0 + 3.0 * x * x + x * s * f) + pow(s, 4) * g;
}

std::vector<double> default_lambda_candidates() {
  std::vector<double> c;
  for (int k = -4; k <= 8; ++k) c.push_back(std::ldexp(1.0, k));
  return c;
}

SardSelection sard_lambda_select(const Expression& f, const Expression& g, const std::optional<Grid>& grid,
                                 std::vector<double> candidates, const CriterionOptions& options,
                                 std::optional<Expression> eta,
                                 std::optional<std::pair<VectorField, VectorField>> fields) {
  if (f.arity() > 3 || g.arity() > 3) throw Error(ErrorKind::Config, "f and g are functions of (x, y, z)");
  if (candidates.empty()) candidates = default_lambda_candidates();
  const Grid cube = grid ? *grid : Grid::uniform(Box::symmetric(3, 1.0), 24);
  SardSelection r;
  r.candidates = candidates;
  const Expression x = Expression::variable(0);
  const Expression s = 1.0 - x * x;
  double best = 2.0;
  for (double lambda : candidates) {
    if (!(lambda > 0)) throw Error(ErrorKind::Config, "lambda candidates must be positive");
    Tally t;
    t.groups.push_back({"Phi_lambda",
                        {sard_quadratic(f, g, lambda)},
                        {4.0 * lambda * lambda * x * x, 2.0 * lambda * s * (1.0 + 3.0 * x * x),
                         2.0 * lambda * s * x * s * f, pow(s, 4) * g}});
    const CriterionReport rep = run_tally("sard", cube, t, options);
    r.fractions.push_back(rep.fraction_zero);
    r.zero_measure_tol = rep.zero_measure_tol;
    if (rep.fraction_zero < best) {
      best = rep.fraction_zero;
      r.lambda = lambda;
    }
  }
  if (!(best <= r.zero_measure_tol)) {
    std::string msg = "every lambda candidate leaves a zero set of Phi_lambda above tolerance (best fraction " +
                      std::to_string(best) + ")";
    throw Error(ErrorKind::NoValidLambda, msg);
  }
  const Expression y = Expression::variable(1), z = Expression::variable(2);
  r.c1 = h_lambda(x, r.lambda) * (eta ? *eta : bump(y) * bump(z));
  if (fields) r.form = construct_step2(r.c1, 0.0, fields->first, fields->second);
  return r;
}

}  // namespace sli
