#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sli/error.hpp"

namespace sli::cli {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

// Typed access to one JSON object; remembers which keys were read so that
// finish() can reject the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorKind::Config, (path_.empty() ? "/" : path_) + ": expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_ + "/" + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorKind::Config, at(key) + ": " + what);
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  bool has(const std::string& key) { return find(key) != nullptr; }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) fail(key, "required key is missing");
    return *v;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key, "expected a number");
    return v->get<double>();
  }

  long integer(const std::string& key, long fallback, long min) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(key, "expected an integer");
    const long x = v->get<long>();
    if (x < min) fail(key, "must be >= " + std::to_string(min));
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      fail(key, "expected a nonnegative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = require(key);
    return numbers_of(v, at(key));
  }

  static std::vector<double> numbers_of(const json& v, const std::string& where) {
    if (!v.is_array()) throw Error(ErrorKind::Config, where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw Error(ErrorKind::Config, where + "/" + std::to_string(i) + ": expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  Eigen::VectorXd vector(const std::string& key, int n) {
    const std::vector<double> v = numbers(key);
    if (n >= 0 && static_cast<int>(v.size()) != n) fail(key, "expected " + std::to_string(n) + " entries");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
  }

  Section section(const std::string& key) { return Section(require(key), at(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(key, "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Expression expression(const json& v, const std::string& where, const VariableSet& vars) {
  if (v.is_number()) return Expression(v.get<double>());
  if (!v.is_string()) throw Error(ErrorKind::Config, where + ": expected an expression string");
  try {
    return parse(v.get<std::string>(), vars);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, where + ": " + e.what());
  }
}

std::vector<Expression> expressions(const json& v, const std::string& where, const VariableSet& vars,
                                    int expected = -1) {
  if (!v.is_array()) throw Error(ErrorKind::Config, where + ": expected an array of expressions");
  if (expected >= 0 && static_cast<int>(v.size()) != expected)
    throw Error(ErrorKind::Config, where + ": expected " + std::to_string(expected) + " entries");
  std::vector<Expression> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expression(v[i], where + "/" + std::to_string(i), vars));
  return out;
}

Box box_of(Section& s, int n) {
  Box b{s.vector("lower", n), s.vector("upper", n)};
  if (b.lower.size() != b.upper.size()) s.fail("upper", "lower and upper differ in length");
  if (!(b.lower.array() < b.upper.array()).all()) s.fail("upper", "every upper bound must exceed the lower bound");
  return b;
}

SystemConfig parse_system(Section s) {
  SystemConfig c;
  c.n = static_cast<int>(s.integer("n", 0, 1));
  if (!s.has("n")) s.fail("n", "required key is missing");
  const VariableSet vars = VariableSet::coordinates(c.n);
  const std::string preset = s.string("preset", "");
  const json* fields = s.find("fields");
  if (!preset.empty() && fields) s.fail("fields", "give either a preset or explicit fields");
  if (preset == "identity") {
    for (int i = 0; i < c.n; ++i) c.fields.push_back(VectorField::coordinate(c.n, i));
  } else if (preset == "heisenberg") {
    if (c.n != 3) s.fail("preset", "the Heisenberg system is three-dimensional");
    c.fields = heisenberg_fields();
  } else if (!preset.empty()) {
    s.fail("preset", "unknown preset '" + preset + "' (expected identity or heisenberg)");
  } else {
    if (!fields) s.fail("fields", "required key is missing (or give a preset)");
    if (!fields->is_array() || fields->empty()) s.fail("fields", "expected a nonempty array of fields");
    for (std::size_t a = 0; a < fields->size(); ++a)
      c.fields.emplace_back(expressions((*fields)[a], s.at("fields") + "/" + std::to_string(a), vars, c.n));
  }
  if (s.has("d") && s.integer("d", 0, 1) != static_cast<long>(c.fields.size()))
    s.fail("d", "does not match the number of fields");
  c.x0 = s.has("x0") ? s.vector("x0", c.n) : Eigen::VectorXd::Zero(c.n);
  s.finish();
  return c;
}

DriverConfig parse_driver(Section s) {
  DriverConfig c;
  c.kind = s.string("kind", c.kind);
  if (c.kind != "fbm" && c.kind != "smooth") s.fail("kind", "expected fbm or smooth");
  c.hurst = s.number("hurst", c.hurst);
  if (!(c.hurst > 0 && c.hurst < 1)) s.fail("hurst", "must lie in (0, 1)");
  c.horizon = s.number("horizon", c.horizon);
  if (!(c.horizon > 0)) s.fail("horizon", "must be positive");
  c.steps = static_cast<int>(s.integer("steps", c.steps, 1));
  c.substeps = static_cast<int>(s.integer("substeps", c.substeps, 1));
  c.seed = s.unsigned_integer("seed", c.seed);
  if (const json* f = s.find("formula")) c.formula = expressions(*f, s.at("formula"), VariableSet::time());
  if (c.kind == "smooth" && c.formula.empty()) s.fail("formula", "smooth drivers need a formula per component");
  if (c.kind == "fbm" && !c.formula.empty()) s.fail("formula", "only smooth drivers take a formula");
  s.finish();
  return c;
}

FormDirective parse_form(Section s, int n) {
  const VariableSet vars = VariableSet::coordinates(n);
  FormDirective f;
  f.path = s.path();
  const bool has_c = s.has("components"), has_e = s.has("exact"), has_k = s.has("construct");
  if (has_c + has_e + has_k != 1) s.fail("construct", "give exactly one of components, exact, construct");
  if (has_c) {
    f.kind = "components";
    f.exprs = expressions(*s.find("components"), s.at("components"), vars, n);
  } else if (has_e) {
    f.kind = "exact";
    f.exprs = {expression(*s.find("exact"), s.at("exact"), vars)};
  } else {
    f.kind = s.string("construct", "");
    if (f.kind == "elliptic_bump") {
      f.box = box_of(s, n);
    } else if (f.kind == "step2") {
      f.exprs = {expression(s.require("c1"), s.at("c1"), vars), expression(s.require("c2"), s.at("c2"), vars)};
    } else if (f.kind == "general") {
      f.exprs = expressions(s.require("seeds"), s.at("seeds"), vars);
    } else if (f.kind == "sard") {
      const json* fj = s.find("f");
      const json* gj = s.find("g");
      f.exprs = {fj ? expression(*fj, s.at("f"), vars) : Expression(0.0),
                 gj ? expression(*gj, s.at("g"), vars) : Expression(0.0)};
      if (s.has("lambdas")) {
        f.lambdas = s.numbers("lambdas");
        for (double l : f.lambdas)
          if (!(l > 0)) s.fail("lambdas", "candidates must be positive");
      }
    } else {
      s.fail("construct", "unknown constructor '" + f.kind + "' (expected elliptic_bump, step2, general or sard)");
    }
  }
  s.finish();
  return f;
}

}  // namespace

RunConfig parse_config(const json& document) {
  RunConfig c;
  c.document = document;
  c.hash = fnv1a(document.dump());
  Section top(document, "");
  top.string("description", "");

  if (top.has("system")) c.system = parse_system(top.section("system"));
  const int n = c.system ? c.system->n : -1;
  auto need_system = [&](const std::string& key) {
    if (!c.system) top.fail(key, "needs a [system] section");
  };

  if (top.has("driver")) {
    c.driver = parse_driver(top.section("driver"));
    c.has_driver = true;
    if (c.driver.kind == "smooth" && c.system && static_cast<int>(c.driver.formula.size()) != static_cast<int>(c.system->fields.size()))
      top.fail("driver", "formula needs one entry per driving field");
  }

  if (top.has("form") && top.has("forms")) top.fail("forms", "give either form or forms");
  if (top.has("form")) {
    need_system("form");
    c.forms.push_back(parse_form(top.section("form"), n));
  } else if (const json* fs = top.find("forms")) {
    need_system("forms");
    if (!fs->is_array() || fs->empty()) top.fail("forms", "expected a nonempty array");
    for (std::size_t i = 0; i < fs->size(); ++i) c.forms.push_back(parse_form(Section((*fs)[i], "/forms/" + std::to_string(i)), n));
  }

  if (top.has("frame")) {
    need_system("frame");
    Section s = top.section("frame");
    c.frame.max_step = static_cast<int>(s.integer("max_step", c.frame.max_step, 1));
    c.frame.rank_tol = s.number("rank_tol", c.frame.rank_tol);
    if (!(c.frame.rank_tol > 0)) s.fail("rank_tol", "must be positive");
    if (s.has("base_point")) c.frame.base_point = s.vector("base_point", n);
    s.finish();
  }

  if (top.has("criterion")) {
    need_system("criterion");
    Section s = top.section("criterion");
    CriterionConfig k;
    k.kind = s.string("kind", k.kind);
    if (k.kind != "auto" && k.kind != "elliptic" && k.kind != "general" && k.kind != "step2")
      s.fail("kind", "expected auto, elliptic, general or step2");
    k.box = s.has("lower") || s.has("upper") ? box_of(s, n) : Box::symmetric(n, 1.0);
    k.per_axis = static_cast<int>(s.integer("per_axis", k.per_axis, 1));
    k.options.point_rel_tol = s.number("point_rel_tol", k.options.point_rel_tol);
    k.options.zero_measure_tol = s.number("zero_measure_tol", k.options.zero_measure_tol);
    k.options.min_points = static_cast<int>(s.integer("min_points", k.options.min_points, 1));
    if (!(k.options.point_rel_tol >= 0)) s.fail("point_rel_tol", "must be nonnegative");
    if (!(k.options.zero_measure_tol >= 0)) s.fail("zero_measure_tol", "must be nonnegative");
    s.finish();
    c.criterion = k;
  }

  if (top.has("mc")) {
    need_system("mc");
    Section s = top.section("mc");
    McConfig m;
    m.replicates = s.integer("replicates", m.replicates, 1);
    m.kernel_tol = s.number("kernel_tol", m.kernel_tol);
    m.atom_tol = s.number("atom_tol", m.atom_tol);
    if (!(m.kernel_tol >= 0)) s.fail("kernel_tol", "must be nonnegative");
    if (!(m.atom_tol >= 0)) s.fail("atom_tol", "must be nonnegative");
    m.compute_kernel = s.boolean("compute_kernel", m.compute_kernel);
    if (const json* ev = s.find("event")) {
      if (!ev->is_array()) s.fail("event", "expected an array of boxes");
      for (std::size_t i = 0; i < ev->size(); ++i) {
        Section b((*ev)[i], s.at("event") + "/" + std::to_string(i));
        m.event.push_back(box_of(b, n));
        b.finish();
      }
    }
    if (const json* ex = s.find("exact")) m.exact = expressions(*ex, s.at("exact"), VariableSet::coordinates(n));
    s.finish();
    c.mc = m;
  }

  if (top.has("grid")) {
    Section s = top.section("grid");
    GridConfig g;
    g.bounds = box_of(s, n);
    g.epsilon = s.number("epsilon", g.epsilon);
    g.delta = s.number("delta", g.delta);
    if (!(g.epsilon > g.delta && g.delta > 0)) s.fail("delta", "need epsilon > delta > 0");
    try {
      g.regime = regime_from_string(s.string("regime", "elliptic"));
    } catch (const Error&) {
      s.fail("regime", "expected elliptic or step2");
    }
    g.signif_tol = s.number("signif_tol", g.signif_tol);
    g.max_length = static_cast<int>(s.integer("max_length", g.max_length, 1));
    g.clean_depth = s.number("clean_depth", g.clean_depth);
    if (!(g.clean_depth > 0 && g.clean_depth <= 1)) s.fail("clean_depth", "must lie in (0, 1]");
    s.finish();
    c.grid = g;
  }

  if (top.has("output")) {
    Section s = top.section("output");
    c.output_directory = s.string("directory", "");
    s.finish();
  }
  top.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("manifest") && doc.contains("config")) return parse_config(doc["config"]);
  return parse_config(doc);
}

}  // namespace sli::cli
