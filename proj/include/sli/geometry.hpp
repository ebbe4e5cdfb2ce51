#pragma once

#include <Eigen/Dense>
#include <compare>
#include <map>
#include <string>
#include <vector>

#include "sli/expr.hpp"

namespace sli {

/// V = V^i d/dx^i, an n x 1 column of coefficient functions.
struct VectorField {
  std::vector<Expression> components;

  VectorField() = default;
  explicit VectorField(std::vector<Expression> c) : components(std::move(c)) {}

  static VectorField zero(int n) { return VectorField(std::vector<Expression>(n)); }
  /// The coordinate field d/dx^i.
  static VectorField coordinate(int n, int i);

  int dim() const { return static_cast<int>(components.size()); }
  const Expression& operator[](int i) const { return components[i]; }
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  bool is_zero() const;
};

/// phi = phi_i dx^i, a 1 x n row of coefficient functions.
struct OneForm {
  std::vector<Expression> components;

  OneForm() = default;
  explicit OneForm(std::vector<Expression> c) : components(std::move(c)) {}

  static OneForm zero(int n) { return OneForm(std::vector<Expression>(n)); }

  int dim() const { return static_cast<int>(components.size()); }
  const Expression& operator[](int i) const { return components[i]; }
  Eigen::RowVectorXd operator()(const Eigen::VectorXd& x) const;
  bool is_zero() const;
};

using Fields = std::vector<VectorField>;

VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);
VectorField operator*(const Expression& f, const VectorField& v);
OneForm operator+(const OneForm& a, const OneForm& b);
OneForm operator-(const OneForm& a, const OneForm& b);
OneForm operator*(const Expression& f, const OneForm& phi);

/// Directional derivative Vf = V^i df/dx^i.
Expression apply(const VectorField& v, const Expression& f);
/// Componentwise directional derivative (V phi)_j = V(phi_j).
OneForm apply(const VectorField& v, const OneForm& phi);
/// [V,W]^i = V^j d_j W^i - W^j d_j V^i.
VectorField lie_bracket(const VectorField& v, const VectorField& w);
/// phi . V
Expression pairing(const OneForm& phi, const VectorField& v);
/// df
OneForm differential(const Expression& f, int n);
/// dphi(X,Y) = X(phi(Y)) - Y(phi(X)) - phi([X,Y]).
Expression two_form(const OneForm& phi, const VectorField& x, const VectorField& y);
double exterior_derivative_pair(const OneForm& phi, const VectorField& x, const VectorField& y,
                                const Eigen::VectorXd& p);
/// Coefficient matrix (dphi)_{ij} = d_i phi_j - d_j phi_i.
std::vector<std::vector<Expression>> exterior_derivative(const OneForm& phi);
/// i(V)dphi through the identity -d(phi.V) + V phi + phi.DV.
OneForm interior_derivative(const OneForm& phi, const VectorField& v);
/// i(V)dphi through the two-form evaluated against coordinate fields.
OneForm interior_derivative_by_pairs(const OneForm& phi, const VectorField& v);
/// L_V phi = V phi + phi.DV.
OneForm lie_derivative(const OneForm& phi, const VectorField& v);

/// A bracket word I = (i_1,...,i_k); letters are 0-based field indices.
/// Ordered by length, then lexicographically.
struct Word {
  std::vector<int> letters;

  Word() = default;
  Word(std::initializer_list<int> l) : letters(l) {}
  explicit Word(std::vector<int> l) : letters(std::move(l)) {}

  int length() const { return static_cast<int>(letters.size()); }
  int head() const { return letters.front(); }
  Word tail() const { return Word(std::vector<int>(letters.begin() + 1, letters.end())); }
  /// (i, J)
  static Word cons(int head, const Word& tail);
  /// 1-based nested notation, e.g. (1,(1,2)).
  std::string str() const;

  std::strong_ordering operator<=>(const Word& other) const;
  bool operator==(const Word& other) const = default;
};

/// Right-nested bracket V_I = [V_{i1},[V_{i2},...,[V_{ik-1},V_{ik}]]].
VectorField bracket_of_word(const Fields& fields, const Word& word);

/// Memoised V_I for a fixed family of fields.
class BracketTable {
 public:
  explicit BracketTable(Fields fields) : fields_(std::move(fields)) {}
  const VectorField& operator()(const Word& word);
  const Fields& fields() const { return fields_; }

 private:
  Fields fields_;
  std::map<Word, VectorField> cache_;
};

Eigen::MatrixXd evaluate_columns(const std::vector<VectorField>& fields, const Eigen::VectorXd& x);

/// Number of singular values above rank_tol times the largest one.
int numerical_rank(const Eigen::MatrixXd& m, double rank_tol);

/// dim D_1(x), dim D_2(x), ... up to max_step or until full rank.
std::vector<int> growth_vector(const Fields& fields, const Eigen::VectorXd& x, int max_step, double rank_tol = 1e-8);

/// Local frame {V_I : I in I_1 u ... u I_r} around a regular point, with
/// I_k contained in I_1 x I_{k-1}.
struct Frame {
  Eigen::VectorXd base_point;
  double radius = 0.0;
  std::vector<std::vector<Word>> layers;  // layers[k-1] = I_k
  std::vector<Word> words;                // column order of W
  std::vector<VectorField> columns;       // V_I, same order
  Fields fields;
  std::vector<int> growth;

  int step() const { return static_cast<int>(layers.size()); }
  int dim() const { return static_cast<int>(columns.size()); }
  int column_of(const Word& w) const;
};

Frame build_frame(const Fields& fields, const Eigen::VectorXd& base_point, int max_step, double rank_tol = 1e-8);

/// Frame from an explicit word list (no search), e.g. {V_1, V_2, [V_1,V_2]}.
Frame frame_from_words(const Fields& fields, std::vector<std::vector<Word>> layers, const Eigen::VectorXd& base_point);

/// W(x): columns V_I(x).
Eigen::MatrixXd frame_matrix(const Frame& frame, const Eigen::VectorXd& x);

/// Rows omega^I(x) of W(x)^{-1}. Throws SingularFrame when |det W(x)| < det_tol.
Eigen::MatrixXd coframe_at(const Frame& frame, const Eigen::VectorXd& x, double det_tol = 1e-12);

/// Symbolic coframe omega^I = rows of adj(W)/det(W).
std::vector<OneForm> coframe_forms(const Frame& frame);

/// Symbolic determinant by cofactor expansion.
Expression determinant(const std::vector<std::vector<Expression>>& m);

}  // namespace sli
