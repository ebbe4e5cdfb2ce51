#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sli/geometry.hpp"

namespace sli {

/// Axis-aligned box [lower, upper].
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd center() const { return (lower + upper) / 2; }
  /// Open-box membership.
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  static Box cube(const Eigen::VectorXd& center, double half_side);
  static Box symmetric(int n, double half_side) { return cube(Eigen::VectorXd::Zero(n), half_side); }
};

/// Cell-centred sample grid on a box, `counts[i]` cells along axis i.
struct Grid {
  Box box;
  std::vector<int> counts;

  static Grid uniform(const Box& box, int per_axis);

  int dim() const { return box.dim(); }
  long size() const;
  /// Largest per-axis count; zero_measure_tol defaults to 2 / side().
  int side() const;
  Eigen::VectorXd point(long index) const;
};

struct CriterionOptions {
  double point_rel_tol = 1e-9;   // |value| <= point_rel_tol * local scale counts as zero
  double zero_measure_tol = 0;   // 0: use 2 / grid side
  int min_points = 10;           // fewer support points (but some): inconclusive
  int workers = 0;               // 0: hardware concurrency
  bool record_points = false;    // fill CriterionReport::point_flags
};

enum class Verdict { Satisfied, Violated, Inconclusive };
const char* to_string(Verdict v);

struct CriterionReport {
  std::string criterion;
  Grid grid;
  long grid_points = 0;
  long support_points = 0;
  long zero_points = 0;           // for the best group
  double fraction_zero = 1.0;     // min over groups (alpha) of the zero fraction
  std::vector<double> per_group;  // zero fraction per alpha / pair set
  std::vector<std::string> group_labels;
  double zero_measure_tol = 0;
  double point_rel_tol = 0;
  Verdict verdict = Verdict::Violated;
  /// Per grid point when requested: 0 outside the support, 1 nonzero, 2 zero
  /// (for the group that decided fraction_zero).
  std::vector<std::uint8_t> point_flags;
};

/// psi_I for the words of a frame (and the tails they need):
/// psi_i = 0, psi_(i,J) = dphi(V_i, V_J) + V_i psi_J.
class PsiTable {
 public:
  PsiTable(OneForm phi, Fields fields);

  const Expression& operator()(const Word& word);
  const std::map<Word, Expression>& entries() const { return table_; }
  const OneForm& form() const { return phi_; }

 private:
  OneForm phi_;
  BracketTable brackets_;
  std::map<Word, Expression> table_;
};

/// Table for every word of length <= max_length over the fields' letters.
PsiTable psi_table(const OneForm& phi, const Fields& fields, int max_length);

/// Xi = -sum_{k>=2} sum_{I in I_k} psi_I omega^I, symbolic on the frame
/// neighbourhood. Zero for step-one frames.
OneForm xi_form(const OneForm& phi, const Frame& frame);
/// The same as -Theta W(x)^{-1} at one point. Throws SingularFrame.
Eigen::RowVectorXd xi_at(const OneForm& phi, const Frame& frame, const Eigen::VectorXd& x);

/// dphi != 0 a.e. on supp phi (all coordinate pairs below threshold = zero).
CriterionReport criterion_elliptic(const OneForm& phi, const Grid& grid, const CriterionOptions& options = {});

/// For some alpha, i(V_alpha)dphi - L_{V_alpha}Xi != 0 a.e. on supp phi.
/// Throws SingularFrame if the frame degenerates at a grid point.
CriterionReport criterion_general(const OneForm& phi, const Frame& frame, const Grid& grid,
                                  const CriterionOptions& options = {});

/// d(phi + dphi(V_1,V_2) omega^3) != 0 a.e. on supp phi, tested on the frame
/// pairs of {V_1, V_2, [V_1,V_2]}.
CriterionReport criterion_step2(const OneForm& phi, const VectorField& v1, const VectorField& v2, const Grid& grid,
                                const CriterionOptions& options = {});

/// h(x)h(y)exp(h(y)^2) dx with h = bump, moved affinely from [-1,1]^2 onto the
/// box's first two coordinates and windowed by bumps in the others.
/// Throws DegenerateCube.
OneForm construct_elliptic_bump(const Box& cube);

/// c_1 omega^1 + c_2 omega^2 + (V_1 c_2 - V_2 c_1) omega^3.
OneForm construct_step2(const Expression& c1, const Expression& c2, const VectorField& v1, const VectorField& v2);

struct GeneralForm {
  OneForm form;
  std::map<Word, Expression> coefficients;  // c_I
  std::vector<OneForm> coframe;             // omega^I in frame column order
};

/// phi = sum c_I omega^I with c_(i,J) = V_i c_J - V_J c_i; seeds follow the
/// order of I_1 in the frame.
GeneralForm construct_general(const Frame& frame, const std::vector<Expression>& seeds);

/// V_alpha c_J - V_J c_alpha - sum_K c_K omega^K([V_alpha, V_J]).
Expression expcond_value(const Frame& frame, const GeneralForm& table, int alpha, const Word& j);

/// expcond_value != 0 a.e. on the grid.
CriterionReport check_expcond(const Frame& frame, const GeneralForm& table, int alpha, const Word& j,
                              const Grid& grid, const CriterionOptions& options = {});

/// (-c1_xy + c2_xx)(-c1_yy + c2_xy) != 0 a.e. on the support of the
/// Heisenberg form built from (c1, c2). Grids of dimension 2 are read as z = 0.
CriterionReport heisenberg_condition(const Expression& c1, const Expression& c2, const Grid& grid,
                                     const CriterionOptions& options = {});

/// h_lambda(u) = exp(-lambda/(1-u^2)) on (-1,1), 0 outside.
Expression h_lambda(const Expression& u, double lambda);

/// Phi_lambda = 4x^2 l^2 - 2(1-x^2)(1+3x^2+x(1-x^2)f) l + (1-x^2)^4 g.
Expression sard_quadratic(const Expression& f, const Expression& g, double lambda);

struct SardSelection {
  double lambda = 0;
  std::vector<double> candidates;
  std::vector<double> fractions;  // zero fraction of Phi_lambda per candidate
  double zero_measure_tol = 0;
  Expression c1;                  // h_lambda(x) eta(y,z)
  std::optional<OneForm> form;    // step-two form with c_2 = 0, when fields are given
};

std::vector<double> default_lambda_candidates();

/// Picks the candidate whose Phi_lambda has the smallest zero fraction on the
/// grid (a cube grid over [-1,1]^3 by default), requiring it below
/// zero_measure_tol. Throws NoValidLambda.
SardSelection sard_lambda_select(const Expression& f, const Expression& g, const std::optional<Grid>& grid = {},
                                 std::vector<double> candidates = {}, const CriterionOptions& options = {},
                                 std::optional<Expression> eta = {},
                                 std::optional<std::pair<VectorField, VectorField>> fields = {});

}  // namespace sli
