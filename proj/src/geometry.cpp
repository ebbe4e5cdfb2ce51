#include "sli/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sli/error.hpp"

namespace sli {

namespace {

void require_same_dim(int a, int b, const char* what) {
  if (a != b) throw Error(ErrorKind::Index, std::string(what) + ": dimension mismatch");
}

std::vector<double> to_std(const Eigen::VectorXd& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace

VectorField VectorField::coordinate(int n, int i) {
  VectorField v = zero(n);
  v.components[i] = 1.0;
  return v;
}

Eigen::VectorXd VectorField::operator()(const Eigen::VectorXd& x) const {
  const auto p = to_std(x);
  Eigen::VectorXd out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = components[i].eval(p);
  return out;
}

bool VectorField::is_zero() const {
  return std::all_of(components.begin(), components.end(), [](const Expression& e) { return e.is_zero(); });
}

Eigen::RowVectorXd OneForm::operator()(const Eigen::VectorXd& x) const {
  const auto p = to_std(x);
  Eigen::RowVectorXd out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = components[i].eval(p);
  return out;
}

bool OneForm::is_zero() const {
  return std::all_of(components.begin(), components.end(), [](const Expression& e) { return e.is_zero(); });
}

VectorField operator+(const VectorField& a, const VectorField& b) {
  require_same_dim(a.dim(), b.dim(), "vector field sum");
  VectorField r = a;
  for (int i = 0; i < a.dim(); ++i) r.components[i] += b[i];
  return r;
}

VectorField operator-(const VectorField& a, const VectorField& b) {
  require_same_dim(a.dim(), b.dim(), "vector field difference");
  VectorField r = a;
  for (int i = 0; i < a.dim(); ++i) r.components[i] -= b[i];
  return r;
}

VectorField operator*(const Expression& f, const VectorField& v) {
  VectorField r = v;
  for (auto& c : r.components) c = f * c;
  return r;
}

OneForm operator+(const OneForm& a, const OneForm& b) {
  require_same_dim(a.dim(), b.dim(), "one-form sum");
  OneForm r = a;
  for (int i = 0; i < a.dim(); ++i) r.components[i] += b[i];
  return r;
}

OneForm operator-(const OneForm& a, const OneForm& b) {
  require_same_dim(a.dim(), b.dim(), "one-form difference");
  OneForm r = a;
  for (int i = 0; i < a.dim(); ++i) r.components[i] -= b[i];
  return r;
}

OneForm operator*(const Expression& f, const OneForm& phi) {
  OneForm r = phi;
  for (auto& c : r.components) c = f * c;
  return r;
}

Expression apply(const VectorField& v, const Expression& f) {
  Expression r;
  for (int j = 0; j < v.dim(); ++j) {
    if (v[j].is_zero()) continue;
    r += v[j] * f.diff(j);
  }
  return r;
}

OneForm apply(const VectorField& v, const OneForm& phi) {
  require_same_dim(v.dim(), phi.dim(), "directional derivative of a form");
  OneForm r = phi;
  for (auto& c : r.components) c = apply(v, c);
  return r;
}

VectorField lie_bracket(const VectorField& v, const VectorField& w) {
  require_same_dim(v.dim(), w.dim(), "Lie bracket");
  VectorField r = VectorField::zero(v.dim());
  for (int i = 0; i < v.dim(); ++i) r.components[i] = apply(v, w[i]) - apply(w, v[i]);
  return r;
}

Expression pairing(const OneForm& phi, const VectorField& v) {
  require_same_dim(phi.dim(), v.dim(), "pairing");
  Expression r;
  for (int i = 0; i < phi.dim(); ++i) r += phi[i] * v[i];
  return r;
}

OneForm differential(const Expression& f, int n) {
  OneForm r = OneForm::zero(n);
  for (int i = 0; i < n; ++i) r.components[i] = f.diff(i);
  return r;
}

Expression two_form(const OneForm& phi, const VectorField& x, const VectorField& y) {
  return apply(x, pairing(phi, y)) - apply(y, pairing(phi, x)) - pairing(phi, lie_bracket(x, y));
}

double exterior_derivative_pair(const OneForm& phi, const VectorField& x, const VectorField& y,
                                const Eigen::VectorXd& p) {
  return two_form(phi, x, y).eval(to_std(p));
}

std::vector<std::vector<Expression>> exterior_derivative(const OneForm& phi) {
  const int n = phi.dim();
  std::vector<std::vector<Expression>> d(n, std::vector<Expression>(n));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      d[i][j] = phi[j].diff(i) - phi[i].diff(j);
      d[j][i] = -d[i][j];
    }
  return d;
}

OneForm lie_derivative(const OneForm& phi, const VectorField& v) {
  require_same_dim(phi.dim(), v.dim(), "Lie derivative");
  const int n = phi.dim();
  OneForm r = apply(v, phi);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) r.components[j] += phi[i] * v[i].diff(j);
  return r;
}

OneForm interior_derivative(const OneForm& phi, const VectorField& v) {
  return lie_derivative(phi, v) - differential(pairing(phi, v), phi.dim());
}

OneForm interior_derivative_by_pairs(const OneForm& phi, const VectorField& v) {
  const int n = phi.dim();
  OneForm r = OneForm::zero(n);
  for (int j = 0; j < n; ++j) r.components[j] = two_form(phi, v, VectorField::coordinate(n, j));
  return r;
}

// ---------------------------------------------------------------------------
// Words and brackets

Word Word::cons(int head, const Word& tail) {
  std::vector<int> l;
  l.reserve(tail.letters.size() + 1);
  l.push_back(head);
  l.insert(l.end(), tail.letters.begin(), tail.letters.end());
  return Word(std::move(l));
}

std::string Word::str() const {
  if (letters.empty()) return "()";
  if (letters.size() == 1) return "(" + std::to_string(letters[0] + 1) + ")";
  // (i1,(i2,...,(ik-1,ik)))
  std::string inner = std::to_string(letters.back() + 1);
  inner = "(" + std::to_string(letters[letters.size() - 2] + 1) + "," + inner + ")";
  for (std::size_t k = letters.size() - 2; k-- > 0;) inner = "(" + std::to_string(letters[k] + 1) + "," + inner + ")";
  return inner;
}

std::strong_ordering Word::operator<=>(const Word& other) const {
  if (auto c = letters.size() <=> other.letters.size(); c != 0) return c;
  return letters <=> other.letters;
}

VectorField bracket_of_word(const Fields& fields, const Word& word) {
  if (word.letters.empty()) throw Error(ErrorKind::Index, "empty word");
  for (int l : word.letters)
    if (l < 0 || l >= static_cast<int>(fields.size())) throw Error(ErrorKind::Index, "word letter out of range");
  VectorField acc = fields[word.letters.back()];
  for (std::size_t k = word.letters.size() - 1; k-- > 0;) acc = lie_bracket(fields[word.letters[k]], acc);
  return acc;
}

const VectorField& BracketTable::operator()(const Word& word) {
  if (auto it = cache_.find(word); it != cache_.end()) return it->second;
  if (word.letters.empty()) throw Error(ErrorKind::Index, "empty word");
  VectorField v;
  if (word.length() == 1) {
    if (word.head() < 0 || word.head() >= static_cast<int>(fields_.size()))
      throw Error(ErrorKind::Index, "word letter out of range");
    v = fields_[word.head()];
  } else {
    const VectorField inner = (*this)(word.tail());
    v = lie_bracket((*this)(Word{word.head()}), inner);
  }
  return cache_.emplace(word, std::move(v)).first->second;
}

Eigen::MatrixXd evaluate_columns(const std::vector<VectorField>& fields, const Eigen::VectorXd& x) {
  Eigen::MatrixXd m(x.size(), static_cast<Eigen::Index>(fields.size()));
  for (std::size_t j = 0; j < fields.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = fields[j](x);
  return m;
}

int numerical_rank(const Eigen::MatrixXd& m, double rank_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > rank_tol * s[0]) ++rank;
  return rank;
}

namespace {

std::vector<Word> words_of_length(int d, int k) {
  std::vector<Word> out;
  std::vector<int> letters(k, 0);
  for (;;) {
    out.emplace_back(letters);
    int pos = k - 1;
    while (pos >= 0 && ++letters[pos] == d) letters[pos--] = 0;
    if (pos < 0) break;
  }
  return out;
}

}  // namespace

namespace {

using BracketLevels = std::vector<std::vector<VectorField>>;

BracketLevels bracket_levels(const Fields& fields, int max_step) {
  const int d = static_cast<int>(fields.size());
  BracketTable table(fields);
  BracketLevels levels;
  for (int k = 1; k <= max_step; ++k) {
    std::vector<VectorField> level;
    for (const Word& w : words_of_length(d, k)) level.push_back(table(w));
    levels.push_back(std::move(level));
  }
  return levels;
}

std::vector<int> growth_from_levels(const BracketLevels& levels, const Eigen::VectorXd& x, double rank_tol) {
  const int n = static_cast<int>(x.size());
  std::vector<VectorField> span;
  std::vector<int> growth;
  for (const auto& level : levels) {
    span.insert(span.end(), level.begin(), level.end());
    const int rank = numerical_rank(evaluate_columns(span, x), rank_tol);
    growth.push_back(rank);
    if (rank == n) break;
  }
  return growth;
}

}  // namespace

std::vector<int> growth_vector(const Fields& fields, const Eigen::VectorXd& x, int max_step, double rank_tol) {
  return growth_from_levels(bracket_levels(fields, max_step), x, rank_tol);
}

int Frame::column_of(const Word& w) const {
  auto it = std::find(words.begin(), words.end(), w);
  if (it == words.end()) throw Error(ErrorKind::Index, "word " + w.str() + " not in frame");
  return static_cast<int>(it - words.begin());
}

namespace {

std::vector<Eigen::VectorXd> sample_sphere(const Eigen::VectorXd& center, double r) {
  const auto n = center.size();
  std::vector<Eigen::VectorXd> pts;
  for (Eigen::Index i = 0; i < n; ++i)
    for (double s : {-1.0, 1.0}) {
      Eigen::VectorXd p = center;
      p[i] += s * r;
      pts.push_back(p);
    }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 8; ++k) {
    Eigen::VectorXd u(n);
    for (Eigen::Index i = 0; i < n; ++i) u[i] = normal(rng);
    const double scale = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    pts.push_back(center + r * scale * u / u.norm());
  }
  return pts;
}

double safe_det(const Frame& f, const Eigen::VectorXd& x) {
  try {
    return frame_matrix(f, x).determinant();
  } catch (const Error&) {
    return 0.0;
  }
}

void choose_radius(Frame& frame, double rank_tol, int max_step) {
  const BracketLevels levels = bracket_levels(frame.fields, std::min(max_step, frame.step()));
  const double det0 = frame_matrix(frame, frame.base_point).determinant();
  for (int e = 4; e >= -20; --e) {
    const double r = std::ldexp(1.0, e);
    bool ok = true;
    for (const auto& p : sample_sphere(frame.base_point, r)) {
      if (safe_det(frame, p) / det0 < 0.5) {
        ok = false;
        break;
      }
      try {
        if (growth_from_levels(levels, p, rank_tol) != frame.growth) {
          ok = false;
          break;
        }
      } catch (const Error&) {
        ok = false;
        break;
      }
    }
    if (ok) {
      frame.radius = r;
      return;
    }
  }
  throw Error(ErrorKind::IrregularPoint, "growth vector or frame determinant varies on every sampled neighbourhood");
}

}  // namespace

Frame build_frame(const Fields& fields, const Eigen::VectorXd& base_point, int max_step, double rank_tol) {
  if (fields.empty()) throw Error(ErrorKind::Index, "no vector fields");
  const int n = static_cast<int>(base_point.size());
  for (const auto& v : fields) require_same_dim(v.dim(), n, "build_frame");

  Frame frame;
  frame.base_point = base_point;
  frame.fields = fields;
  frame.growth = growth_vector(fields, base_point, max_step, rank_tol);
  if (frame.growth.back() < n)
    throw Error(ErrorKind::HormanderFailure, "bracket span has rank " + std::to_string(frame.growth.back()) + " < " +
                                                 std::to_string(n) + " by step " + std::to_string(max_step));
  BracketTable table(fields);

  auto rank_with = [&](const VectorField& extra) {
    std::vector<VectorField> cols = frame.columns;
    cols.push_back(extra);
    return numerical_rank(evaluate_columns(cols, base_point), rank_tol);
  };

  int rank = 0;
  std::vector<Word> layer;
  for (int i = 0; i < static_cast<int>(fields.size()) && rank < n; ++i) {
    const Word w{i};
    if (const int r = rank_with(table(w)); r > rank) {
      rank = r;
      layer.push_back(w);
      frame.words.push_back(w);
      frame.columns.push_back(table(w));
    }
  }
  frame.layers.push_back(layer);

  while (rank < n && frame.step() < max_step) {
    std::vector<Word> candidates;
    for (const Word& i : frame.layers.front())
      for (const Word& j : frame.layers.back()) candidates.push_back(Word::cons(i.head(), j));
    std::sort(candidates.begin(), candidates.end());
    std::vector<Word> next;
    for (const Word& w : candidates) {
      if (rank == n) break;
      if (const int r = rank_with(table(w)); r > rank) {
        rank = r;
        next.push_back(w);
        frame.words.push_back(w);
        frame.columns.push_back(table(w));
      }
    }
    if (next.empty()) break;
    frame.layers.push_back(next);
  }
  std::vector<int> cumulative;
  int total = 0;
  for (const auto& l : frame.layers) cumulative.push_back(total += static_cast<int>(l.size()));
  if (rank < n || cumulative != frame.growth)
    throw Error(ErrorKind::IrregularPoint, "brackets of the form (i,J), i in I_1, do not follow the growth vector");

  choose_radius(frame, rank_tol, max_step);
  return frame;
}

Frame frame_from_words(const Fields& fields, std::vector<std::vector<Word>> layers, const Eigen::VectorXd& base_point) {
  Frame frame;
  frame.base_point = base_point;
  frame.fields = fields;
  frame.layers = std::move(layers);
  BracketTable table(fields);
  for (const auto& l : frame.layers)
    for (const auto& w : l) {
      frame.words.push_back(w);
      frame.columns.push_back(table(w));
    }
  if (frame.dim() != static_cast<int>(base_point.size()))
    throw Error(ErrorKind::SingularFrame, "frame must have exactly n words");
  frame.radius = std::numeric_limits<double>::infinity();
  return frame;
}

Eigen::MatrixXd frame_matrix(const Frame& frame, const Eigen::VectorXd& x) { return evaluate_columns(frame.columns, x); }

Eigen::MatrixXd coframe_at(const Frame& frame, const Eigen::VectorXd& x, double det_tol) {
  const Eigen::MatrixXd w = frame_matrix(frame, x);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(w);
  if (std::abs(lu.determinant()) < det_tol)
    throw Error(ErrorKind::SingularFrame, "|det W| below tolerance at evaluation point");
  return lu.inverse();
}

Expression determinant(const std::vector<std::vector<Expression>>& m) {
  const std::size_t n = m.size();
  if (n == 0) return 1.0;
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  Expression det;
  for (std::size_t i = 0; i < n; ++i) {
    if (m[i][0].is_zero()) continue;
    std::vector<std::vector<Expression>> minor;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == i) continue;
      minor.emplace_back(m[r].begin() + 1, m[r].end());
    }
    const Expression term = m[i][0] * determinant(minor);
    det = (i % 2 == 0) ? det + term : det - term;
  }
  return det;
}

std::vector<OneForm> coframe_forms(const Frame& frame) {
  const int n = frame.dim();
  std::vector<std::vector<Expression>> w(n, std::vector<Expression>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[i][j] = frame.columns[j][i];
  const Expression det = determinant(w);
  if (det.is_zero()) throw Error(ErrorKind::SingularFrame, "frame determinant vanishes identically");

  std::vector<OneForm> rows(n, OneForm::zero(n));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      // (W^{-1})_{i,k} = C_{k,i} / det, C the cofactor matrix.
      std::vector<std::vector<Expression>> minor;
      for (int r = 0; r < n; ++r) {
        if (r == k) continue;
        std::vector<Expression> row;
        for (int c = 0; c < n; ++c)
          if (c != i) row.push_back(w[r][c]);
        minor.push_back(std::move(row));
      }
      const Expression cof = ((i + k) % 2 == 0) ? determinant(minor) : -determinant(minor);
      rows[i].components[k] = cof / det;
    }
  return rows;
}

}  // namespace sli
