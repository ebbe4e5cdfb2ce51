#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sli/lab.hpp"
#include "sli/reconstruct.hpp"

namespace sli::cli {

using json = nlohmann::json;

struct SystemConfig {
  int n = 0;
  Fields fields;
  Eigen::VectorXd x0;
};

struct DriverConfig {
  std::string kind = "fbm";  // or "smooth"
  double hurst = 0.5;
  double horizon = 1.0;
  int steps = 1024;
  int substeps = 4;
  std::uint64_t seed = 0;
  std::vector<Expression> formula;  // smooth drivers, functions of t
};

/// One entry of [form] / [forms].
struct FormDirective {
  std::string kind;  // components, exact, elliptic_bump, step2, general, sard
  std::vector<Expression> exprs;  // components; {f}; {c1, c2}; seeds; {f, g}
  std::optional<Box> box;         // elliptic_bump
  std::vector<double> lambdas;    // sard candidates (empty: defaults)
  std::string path;               // for error messages
};

struct FrameConfig {
  int max_step = 4;
  double rank_tol = 1e-8;
  std::optional<Eigen::VectorXd> base_point;
};

struct CriterionConfig {
  std::string kind = "auto";  // auto, elliptic, general, step2
  Box box;
  int per_axis = 41;
  CriterionOptions options;
};

struct McConfig {
  long replicates = 10000;
  double kernel_tol = 1e-8;
  double atom_tol = 1e-7;
  bool compute_kernel = true;
  std::vector<Box> event;
  std::vector<Expression> exact;  // exact-form experiment: F = int df_1 ... df_m
};

struct GridConfig {
  Box bounds;
  double epsilon = 1.0;
  double delta = 0.1;
  Regime regime = Regime::Elliptic;
  double signif_tol = 0;
  int max_length = 16;
  double clean_depth = 0.5;
};

struct RunConfig {
  json document;  // as loaded (a manifest's embedded config when given a manifest)
  std::uint64_t hash = 0;
  std::optional<SystemConfig> system;
  DriverConfig driver;
  bool has_driver = false;
  std::vector<FormDirective> forms;
  FrameConfig frame;
  std::optional<CriterionConfig> criterion;
  std::optional<McConfig> mc;
  std::optional<GridConfig> grid;
  std::string output_directory;
};

/// Validates the whole document (unknown keys, types, expression syntax)
/// before anything is computed. Errors are Config errors naming the JSON
/// path of the offending key, e.g. "/driver/steps: expected an integer".
RunConfig parse_config(const json& document);

/// Reads a config file, or the config embedded in a manifest written by a
/// previous run.
RunConfig load_config(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex(std::uint64_t value);

}  // namespace sli::cli
