#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sli/nondeg.hpp"
#include "sli/rde.hpp"

namespace sli {

enum class Regime { Elliptic, Step2 };
const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// One cell of the discretisation and its supported one-form. The chart
/// maps the form's support onto the open unit box (-1,1)^n: the cube itself in
/// the elliptic regime, a sheared box inside it in the step-two regime.
struct Cube {
  std::vector<int> label;  // lattice coordinates
  Box box;
  std::vector<Expression> chart;
  OneForm form;

  /// max_i |chart_i(p)|; < 1 exactly on the support region.
  double chart_norm(const Eigen::Ref<const Eigen::VectorXd>& p) const;
};

/// Cubes of side eps - delta on a lattice of pitch eps, so neighbours are
/// separated by gaps of width delta. The lattice is centred in `bounds`.
struct CubeGrid {
  Box bounds;
  double epsilon = 0, delta = 0;
  Regime regime = Regime::Elliptic;
  std::vector<int> counts;
  Eigen::VectorXd origin;  // lower corner of the lattice
  std::vector<Cube> cubes;
  Fields fields;           // the system the forms were built for
  double lambda = 0;       // step-two regime only

  int dim() const { return static_cast<int>(counts.size()); }
  int size() const { return static_cast<int>(cubes.size()); }
  double half_side() const { return (epsilon - delta) / 2; }
  /// Index of the cube whose support region contains p, or -1 (gap or outside).
  int locate(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  /// Lattice neighbours (Chebyshev distance 1), excluding the cube itself.
  bool adjacent(int a, int b) const;
  std::string label_string(int index) const;
};

/// Elliptic regime: the example bump form on every cube, for fields spanning
/// R^n. Step-two regime (n = 3, Heisenberg fields): c_1 = h_lambda(x~)
/// bump(y~) bump(z~), c_2 = 0 in straightened coordinates with V_2 along
/// d/dx~, lambda from the Sard selection. Throws NoValidLambda.
CubeGrid build_grid(const Box& bounds, double epsilon, double delta, Regime regime);

/// The Heisenberg fields d/dx - y d/dz, d/dy + x d/dz used by the step-two regime.
Fields heisenberg_fields();

/// Straightened coordinates (x~, y~, z~) for a Heisenberg cube with the given
/// centre and half side, as expressions in (x, y, z); V_2 x~ is constant and
/// V_2 y~ = V_2 z~ = 0.
std::vector<Expression> heisenberg_straightening(const Eigen::Vector3d& center, double half_side);

/// Sequence of cube indices.
using RouteWord = std::vector<int>;

/// Iterated integral of the word's forms along the path; 1 for the empty word.
double extended_signature(const Trajectory& traj, const RouteWord& word, const CubeGrid& grid);

inline constexpr double kDefaultSignifTol = 1e-30;

struct RouteOptions {
  double signif_tol = 0;  // 0: kDefaultSignifTol; always raised to 10x the quadrature noise
  int max_length = 16;
  long max_words = 100000;
  int workers = 0;
  bool throw_on_ambiguous = false;
};

struct RouteResult {
  RouteWord word;
  double signature = 1.0;
  bool ambiguous = false;
  bool truncated = false;  // max_length or max_words was hit
  double signif_tol = 0;
  double noise = 0;        // largest |single-cube signature| over cubes the path never enters
  double path_scale = 0;   // sup |X_t - X_0|
  long evaluated = 0;
  std::vector<std::pair<RouteWord, double>> maximal;  // every surviving word of maximal length
};

/// Breadth-first search for the longest word whose extended signature
/// exceeds signif_tol, extending by cubes adjacent to the last letter and
/// never repeating a letter immediately.
RouteResult recover_route(const Trajectory& traj, const CubeGrid& grid, const RouteOptions& options = {});

/// Cubes whose support regions the fine points visit, consecutive duplicates
/// (also across gap excursions) collapsed.
RouteWord true_route(const Trajectory& traj, const CubeGrid& grid);

/// Crossing-cleanliness: every letter of the discrete route (the fine points
/// between two changes of region, gap and outside points ignored) reaches the
/// region's core, chart norm <= depth. Grazing visits make the route
/// ill-conditioned: their forms are exponentially small there.
bool clean_crossings(const Trajectory& traj, const CubeGrid& grid, double depth = 0.5);

}  // namespace sli
