#include "commands.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <fstream>
#include <ostream>
#include <sstream>

#include "sli/error.hpp"
#include "sli/parallel.hpp"

namespace sli::cli {

namespace fs = std::filesystem;

std::string output_directory(const RunConfig& config, const RunOptions& options) {
  if (!options.output_directory.empty()) return options.output_directory;
  if (!config.output_directory.empty()) return config.output_directory;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return "sli-out";
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"criterion", "construct", "density", "reconstruct", "simulate"};
  return names;
}

namespace {

// Collects output files and writes the manifest last.
class Outputs {
 public:
  Outputs(std::string dir, const RunConfig& config) : dir_(std::move(dir)), config_(config) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir_ + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& body) {
    const fs::path p = fs::path(dir_) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    out << body;
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    files_[name] = hex(fnv1a(body));
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  /// CSV body prefixed by a comment line carrying the config hash.
  void write_csv(const std::string& name, const std::string& body) {
    write(name, "# config_hash=" + hex(config_.hash) + "\n" + body);
  }

  void manifest(const std::string& command, std::uint64_t seed, int workers) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["config_hash"] = hex(config_.hash);
    m["seed"] = seed;
    m["workers"] = workers;
    m["outputs"] = files_;
    m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
#ifdef __VERSION__
    m["compiler"] = __VERSION__;
#endif
    json doc;
    doc["manifest"] = m;
    doc["config"] = config_.document;
    const fs::path p = fs::path(dir_) / "manifest.json";
    std::ofstream out(p, std::ios::binary);
    out << doc.dump(2) << "\n";
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  const RunConfig& config_;
  std::map<std::string, std::string> files_;
};

void require(bool ok, const std::string& section, const std::string& command) {
  if (!ok) throw Error(ErrorKind::Config, "/" + section + ": required key is missing (needed by " + command + ")");
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json form_strings(const OneForm& phi) {
  json a = json::array();
  for (const auto& c : phi.components) a.push_back(c.str());
  return a;
}

Eigen::VectorXd base_point(const RunConfig& c) {
  if (c.frame.base_point) return *c.frame.base_point;
  if (c.criterion) return c.criterion->box.center();
  return c.system->x0;
}

Frame make_frame(const RunConfig& c) {
  return build_frame(c.system->fields, base_point(c), c.frame.max_step, c.frame.rank_tol);
}

struct BuiltForm {
  OneForm form;
  json info;
};

BuiltForm build_form(const FormDirective& d, const RunConfig& c, int workers) {
  const SystemConfig& sys = *c.system;
  auto need_pair = [&] {
    if (sys.fields.size() < 2) throw Error(ErrorKind::Config, d.path + ": " + d.kind + " needs two driving fields");
  };
  BuiltForm b;
  b.info["kind"] = d.kind;
  if (d.kind == "components") {
    b.form = OneForm(d.exprs);
  } else if (d.kind == "exact") {
    b.form = differential(d.exprs[0], sys.n);
  } else if (d.kind == "elliptic_bump") {
    b.form = construct_elliptic_bump(*d.box);
  } else if (d.kind == "step2") {
    need_pair();
    b.form = construct_step2(d.exprs[0], d.exprs[1], sys.fields[0], sys.fields[1]);
  } else if (d.kind == "general") {
    const Frame frame = make_frame(c);
    if (d.exprs.size() != frame.layers[0].size())
      throw Error(ErrorKind::Config, d.path + "/seeds: expected " + std::to_string(frame.layers[0].size()) + " seeds");
    b.form = construct_general(frame, d.exprs).form;
    b.info["growth"] = frame.growth;
  } else if (d.kind == "sard") {
    need_pair();
    if (sys.n != 3) throw Error(ErrorKind::Config, d.path + ": the Sard construction is three-dimensional");
    CriterionOptions o;
    o.workers = workers;
    const SardSelection s =
        sard_lambda_select(d.exprs[0], d.exprs[1], std::nullopt, d.lambdas, o, std::nullopt,
                           std::make_pair(sys.fields[0], sys.fields[1]));
    b.form = *s.form;
    b.info["lambda"] = s.lambda;
    b.info["candidates"] = s.candidates;
    b.info["zero_fractions"] = s.fractions;
    b.info["zero_measure_tol"] = s.zero_measure_tol;
  }
  b.info["components"] = form_strings(b.form);
  return b;
}

json report_json(const CriterionReport& r) {
  json j;
  j["criterion"] = r.criterion;
  j["verdict"] = to_string(r.verdict);
  j["fraction_zero"] = r.fraction_zero;
  j["grid_points"] = r.grid_points;
  j["support_points"] = r.support_points;
  j["zero_points"] = r.zero_points;
  j["zero_measure_tol"] = r.zero_measure_tol;
  j["point_rel_tol"] = r.point_rel_tol;
  json groups = json::object();
  for (std::size_t g = 0; g < r.per_group.size(); ++g) groups[r.group_labels[g]] = r.per_group[g];
  j["per_group"] = groups;
  j["grid"] = {{"lower", to_json(r.grid.box.lower)}, {"upper", to_json(r.grid.box.upper)}, {"counts", r.grid.counts}};
  return j;
}

std::string grid_csv(const CriterionReport& r) {
  std::ostringstream out;
  out.precision(17);
  for (int i = 0; i < r.grid.dim(); ++i) out << "x" << i + 1 << ",";
  out << "support,zero\n";
  for (long k = 0; k < r.grid.size(); ++k) {
    const Eigen::VectorXd p = r.grid.point(k);
    for (int i = 0; i < p.size(); ++i) out << p[i] << ",";
    const int f = r.point_flags[k];
    out << (f > 0 ? 1 : 0) << "," << (f == 2 ? 1 : 0) << "\n";
  }
  return out.str();
}

int cmd_criterion(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  require(c.system.has_value(), "system", "criterion");
  require(c.criterion.has_value(), "criterion", "criterion");
  if (c.forms.size() != 1) throw Error(ErrorKind::Config, "/form: criterion takes exactly one form");
  const SystemConfig& sys = *c.system;
  const CriterionConfig& k = *c.criterion;
  Outputs out(output_directory(c, o), c);

  const BuiltForm phi = build_form(c.forms[0], c, o.workers);
  CriterionOptions opts = k.options;
  opts.workers = o.workers;
  opts.record_points = true;
  const Grid grid = Grid::uniform(k.box, k.per_axis);

  std::string kind = k.kind;
  json frame_info;
  std::optional<Frame> frame;
  if (kind != "elliptic") {
    frame = make_frame(c);
    frame_info = {{"growth", frame->growth}, {"step", frame->step()}, {"base_point", to_json(frame->base_point)}};
    if (kind == "auto") {
      if (frame->step() == 1)
        kind = "elliptic";
      else if (frame->step() == 2 && sys.n == 3 && sys.fields.size() == 2)
        kind = "step2";
      else
        kind = "general";
    }
  }
  CriterionReport r;
  if (kind == "elliptic")
    r = criterion_elliptic(phi.form, grid, opts);
  else if (kind == "step2")
    r = criterion_step2(phi.form, sys.fields[0], sys.fields[1], grid, opts);
  else
    r = criterion_general(phi.form, *frame, grid, opts);

  json j = report_json(r);
  j["form"] = phi.info;
  if (!frame_info.is_null()) j["frame"] = frame_info;
  out.write_json("criterion.json", j);
  out.write_csv("criterion_grid.csv", grid_csv(r));
  out.manifest("criterion", 0, resolve_workers(o.workers));
  log << r.criterion << ": " << to_string(r.verdict) << " (fraction_zero " << r.fraction_zero << ", support "
      << r.support_points << "/" << r.grid_points << ")\n";
  return r.verdict == Verdict::Satisfied ? kOk : kNegative;
}

int cmd_construct(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  require(c.system.has_value(), "system", "construct");
  require(!c.forms.empty(), "form", "construct");
  Outputs out(output_directory(c, o), c);
  const SystemConfig& sys = *c.system;
  const Box box = c.criterion ? c.criterion->box : Box::symmetric(sys.n, 1.0);
  const Grid probe = Grid::uniform(box, sys.n <= 2 ? 21 : 9);

  json forms = json::array();
  for (const auto& d : c.forms) {
    BuiltForm b = build_form(d, c, o.workers);
    // Postconditions on a probe grid.
    std::vector<Expression> checks;
    if (d.kind == "step2" || d.kind == "sard") {
      checks.push_back(two_form(b.form, sys.fields[0], sys.fields[1]));
    } else if (d.kind == "general") {
      const Frame f = make_frame(c);
      for (const auto& w : f.words)
        if (w.length() >= 2) checks.push_back(two_form(b.form, sys.fields[w.head()], f.columns[f.column_of(w.tail())]));
    }
    if (!checks.empty()) {
      const Program prog(checks);
      std::vector<double> vals(checks.size()), tape, point(sys.n);
      double worst = 0;
      for (long i = 0; i < probe.size(); ++i) {
        const Eigen::VectorXd p = probe.point(i);
        std::copy(p.data(), p.data() + sys.n, point.begin());
        prog.eval(point, vals, tape);
        for (double v : vals) worst = std::max(worst, std::abs(v));
      }
      b.info["max_abs_dphi_constraint"] = worst;
      b.info["probe_points"] = probe.size();
    }
    log << d.path << ": " << d.kind << "\n";
    forms.push_back(b.info);
  }
  out.write_json("construct.json", {{"forms", forms}});
  out.manifest("construct", 0, resolve_workers(o.workers));
  return kOk;
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double pos = q * (sorted.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (pos - i) * (sorted[i + 1] - sorted[i]);
}

ExperimentSpec experiment_spec(const RunConfig& c, const RunOptions& o) {
  ExperimentSpec s;
  s.system = {c.system->fields, c.system->x0, c.driver.hurst, c.driver.horizon, c.driver.steps, c.driver.substeps};
  s.event = c.mc->event;
  s.replicates = c.mc->replicates;
  s.seed = c.driver.seed;
  s.workers = o.workers;
  s.compute_kernel = c.mc->compute_kernel;
  s.kernel_tol = c.mc->kernel_tol;
  s.atom_tol = c.mc->atom_tol;
  return s;
}

inline constexpr double kMaxVanishingRate = 0.01;

int cmd_density(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  require(c.system.has_value(), "system", "density");
  require(c.has_driver, "driver", "density");
  require(c.mc.has_value(), "mc", "density");
  if (c.driver.kind != "fbm") throw Error(ErrorKind::Config, "/driver/kind: density needs an fbm driver");
  const bool exact = !c.mc->exact.empty();
  if (exact == !c.forms.empty())
    throw Error(ErrorKind::Config, "/mc/exact: give either [form]/[forms] or mc.exact for density");
  Outputs out(output_directory(c, o), c);

  ExperimentSpec spec = experiment_spec(c, o);
  SampleSet set;
  json summary;
  std::vector<Atom> atoms;
  if (exact) {
    ExactPairResult r = exactform_pair_experiment(c.mc->exact, spec);
    set = std::move(r.samples);
    atoms = std::move(r.atoms);
    summary["wedge_rank"] = r.wedge_rank;
  } else {
    for (const auto& d : c.forms) spec.forms.push_back(build_form(d, c, o.workers).form);
    set = run_conditional_samples_checked(spec);
    atoms = atom_test(set.conditional_values(), spec.atom_tol);
  }

  std::vector<double> values = set.conditional_values();
  const long n = static_cast<long>(values.size());
  summary["replicates"] = spec.replicates;
  summary["conditional"] = n;
  summary["atom_tol"] = spec.atom_tol;
  summary["atom_threshold"] = 3.0 / std::sqrt(static_cast<double>(n));
  json atom_list = json::array();
  for (const auto& a : atoms)
    atom_list.push_back({{"value", a.value}, {"mass", a.mass}, {"count", a.count}, {"lower", a.lower}, {"upper", a.upper}});
  summary["atoms"] = atom_list;
  summary["max_cluster_mass"] = max_cluster_mass(values, spec.atom_tol);
  bool negative = !atoms.empty();
  if (spec.compute_kernel) {
    const double rate = kernel_vanishing_rate(set, spec.kernel_tol);
    summary["kernel_tol"] = spec.kernel_tol;
    summary["kernel_vanishing_rate"] = rate;
    summary["max_vanishing_rate"] = kMaxVanishingRate;
    negative = negative || rate > kMaxVanishingRate;
  }
  std::sort(values.begin(), values.end());
  json pct;
  for (double q : {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99}) {
    std::ostringstream key;
    key << "p" << static_cast<int>(std::lround(q * 100));
    pct[key.str()] = quantile(values, q);
  }
  summary["percentiles"] = pct;
  double mean = 0;
  for (double v : values) mean += v;
  summary["mean"] = n ? mean / n : 0.0;
  summary["density_surrogates_pass"] = !negative;

  std::ostringstream csv;
  write_csv(set, csv);
  out.write_csv("samples.csv", csv.str());
  out.write_json("summary.json", summary);
  out.manifest("density", spec.seed, resolve_workers(o.workers));
  log << "density: " << n << " conditional samples, " << atoms.size() << " atom(s)";
  if (spec.compute_kernel) log << ", kernel vanishing rate " << summary["kernel_vanishing_rate"].get<double>();
  log << "\n";
  return negative ? kNegative : kOk;
}

DriverPath make_driver(const RunConfig& c, std::uint64_t seed) {
  const int d = static_cast<int>(c.system->fields.size());
  if (c.driver.kind == "smooth") return smooth_driver(c.driver.formula, uniform_mesh(c.driver.horizon, c.driver.steps));
  return FbmSampler({.hurst = c.driver.hurst, .horizon = c.driver.horizon, .steps = c.driver.steps, .seed = seed, .dim = d})
      .sample(seed);
}

int cmd_reconstruct(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  require(c.system.has_value(), "system", "reconstruct");
  require(c.has_driver, "driver", "reconstruct");
  require(c.grid.has_value(), "grid", "reconstruct");
  const GridConfig& gc = *c.grid;
  if (gc.bounds.dim() != c.system->n) throw Error(ErrorKind::Config, "/grid/lower: dimension differs from the system");
  Outputs out(output_directory(c, o), c);
  const CubeGrid grid = build_grid(gc.bounds, gc.epsilon, gc.delta, gc.regime);
  const System system(c.system->fields);

  const bool smooth = c.driver.kind == "smooth";
  const long replicates = smooth ? 1 : (c.mc ? c.mc->replicates : 1);
  struct Row {
    std::uint64_t seed = 0;
    RouteWord truth;
    RouteResult result;
    bool clean = false;
  };
  std::vector<Row> rows(replicates);
  parallel_for(replicates, o.workers, [&](long i) {
    Row& r = rows[i];
    r.seed = smooth ? 0 : derive_seed(c.driver.seed, static_cast<std::uint64_t>(i));
    const Trajectory traj =
        solve(system, c.system->x0, make_driver(c, r.seed), {.substeps = c.driver.substeps, .jacobian = false});
    r.truth = true_route(traj, grid);
    r.result = recover_route(traj, grid, {.signif_tol = gc.signif_tol, .max_length = gc.max_length, .workers = 1});
    r.clean = clean_crossings(traj, grid, gc.clean_depth);
  });

  auto labels = [&](const RouteWord& w) {
    json a = json::array();
    for (int z : w) a.push_back(grid.cubes[z].label);
    return a;
  };
  json reps = json::array();
  long matches = 0, clean = 0, clean_matches = 0;
  for (long i = 0; i < replicates; ++i) {
    const Row& r = rows[i];
    const bool match = r.result.word == r.truth;
    matches += match;
    clean += r.clean;
    clean_matches += r.clean && match;
    reps.push_back({{"replicate", i},
                    {"seed", r.seed},
                    {"true_route", labels(r.truth)},
                    {"recovered", labels(r.result.word)},
                    {"match", match},
                    {"clean", r.clean},
                    {"ambiguous", r.result.ambiguous},
                    {"truncated", r.result.truncated},
                    {"signature", r.result.signature},
                    {"signif_tol", r.result.signif_tol}});
  }
  json report;
  report["grid"] = {{"counts", grid.counts},   {"epsilon", grid.epsilon}, {"delta", grid.delta},
                    {"regime", to_string(grid.regime)}, {"cubes", grid.size()}, {"lambda", grid.lambda}};
  report["replicates"] = reps;
  report["summary"] = {{"replicates", replicates},
                       {"matches", matches},
                       {"clean", clean},
                       {"clean_matches", clean_matches},
                       {"match_fraction", static_cast<double>(matches) / replicates},
                       {"clean_match_fraction", clean ? static_cast<double>(clean_matches) / clean : 1.0}};
  if (smooth) report["match"] = matches == 1;
  out.write_json("route.json", report);
  out.manifest("reconstruct", c.driver.seed, resolve_workers(o.workers));
  log << "reconstruct: " << matches << "/" << replicates << " routes recovered; clean " << clean_matches << "/" << clean
      << "\n";
  const bool ok = smooth ? matches == 1 : clean_matches == clean;
  return ok ? kOk : kNegative;
}

int cmd_simulate(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  require(c.system.has_value(), "system", "simulate");
  require(c.has_driver, "driver", "simulate");
  Outputs out(output_directory(c, o), c);
  const std::uint64_t seed = derive_seed(c.driver.seed, 0);
  const DriverPath w = make_driver(c, seed);
  const Trajectory traj = solve(System(c.system->fields), c.system->x0, w, {.substeps = c.driver.substeps});
  std::ostringstream a, b;
  write_csv(w, a);
  write_csv(traj, b);
  out.write_csv("driver.csv", a.str());
  out.write_csv("trajectory.csv", b.str());
  out.manifest("simulate", c.driver.seed, resolve_workers(o.workers));
  log << "simulate: " << w.steps() << " steps, endpoint";
  for (int i = 0; i < traj.n; ++i) log << " " << traj.endpoint()[i];
  log << "\n";
  return kOk;
}

}  // namespace

int run_command(const std::string& command, const RunConfig& config, const RunOptions& options, std::ostream& log) {
  if (command == "criterion") return cmd_criterion(config, options, log);
  if (command == "construct") return cmd_construct(config, options, log);
  if (command == "density") return cmd_density(config, options, log);
  if (command == "reconstruct") return cmd_reconstruct(config, options, log);
  if (command == "simulate") return cmd_simulate(config, options, log);
  throw Error(ErrorKind::Config, "unknown command '" + command + "'");
}

}  // namespace sli::cli
