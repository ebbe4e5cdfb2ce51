#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "sli/error.hpp"

using namespace sli;
using namespace sli::cli;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(json::parse(text, nullptr, true, true));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sli_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Output files of a run, excluding the manifest (which records the worker count).
std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") files[e.path().filename().string()] = slurp(e.path());
  return files;
}

int run(const std::string& command, const std::string& text, const fs::path& dir, int workers) {
  std::ostringstream log;
  return run_command(command, parse_config(json::parse(text, nullptr, true, true)),
                     {.workers = workers, .output_directory = dir.string()}, log);
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmall[][2] = {
    {"criterion",
     R"j({"system": {"n": 2, "preset": "identity"}, "form": {"exact": "bump(x)*bump(y)"},
         "criterion": {"kind": "elliptic", "per_axis": 21}})j"},
    {"construct", R"j({"system": {"n": 3, "preset": "heisenberg"}, "form": {"construct": "sard"}})j"},
    {"density",
     R"j({"system": {"n": 2, "preset": "identity", "x0": [0.3, 0.2]},
         "driver": {"steps": 128, "seed": 3},
         "form": {"construct": "elliptic_bump", "lower": [-1, -1], "upper": [1, 1]},
         "mc": {"replicates": 60, "event": [{"lower": [-1, -1], "upper": [1, 1]}]}})j"},
    {"reconstruct",
     R"j({"system": {"n": 2, "preset": "identity"}, "driver": {"horizon": 0.25, "steps": 256, "seed": 5},
         "grid": {"lower": [-1.5, -1.5], "upper": [1.5, 1.5]}, "mc": {"replicates": 20}})j"},
    {"simulate", R"j({"system": {"n": 3, "preset": "heisenberg"}, "driver": {"steps": 256, "seed": 9}})j"},
};

}  // namespace

TEST_CASE("config errors name the offending path") {
  CHECK(contains(config_error(R"j({"bogus": 1})j"), "/bogus: unknown key"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "identity", "x00": [0, 0]}})j"), "/system/x00: unknown key"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "identity"}, "driver": {"steps": 1.5}})j"),
                 "/driver/steps: expected an integer"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "identity"}, "form": {"exact": "x +* y"}})j"),
                 "/form/exact"));
  CHECK(contains(config_error(R"j({"form": {"exact": "x"}})j"), "/form"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "fields": [["1", "q"]]}})j"), "/system/fields/0/1"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "heisenberg"}})j"), "/system/preset"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "identity", "d": 3}})j"), "/system/d"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "identity"}, "driver": {"hurst": 1.2}})j"),
                 "/driver/hurst"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "identity"},
                                  "grid": {"lower": [0, 0], "upper": [1, 1], "epsilon": 0.1, "delta": 0.2}})j"),
                 "/grid/delta"));
  CHECK(contains(config_error(R"j({"system": {"n": 2, "preset": "identity"},
                                  "forms": [{"exact": "x"}, {"construct": "nope"}]})j"),
                 "/forms/1/construct"));

  // Missing sections are reported when the command runs.
  const fs::path dir = scratch("missing");
  CHECK_THROWS_WITH_AS(run("density", R"j({"system": {"n": 2, "preset": "identity"}, "form": {"exact": "x"}})j", dir, 1),
                       doctest::Contains("/driver"), Error);
  CHECK_THROWS_WITH_AS(run("criterion", R"j({"description": "nothing"})j", dir, 1), doctest::Contains("/system"), Error);
}

TEST_CASE("output directory precedence") {
  RunConfig c = parse_config(json::parse(R"j({"output": {"directory": "from-config"}})j"));
  ::setenv(kOutputEnv, "from-env", 1);
  CHECK(output_directory(c, {.workers = 1, .output_directory = "from-flag"}) == "from-flag");
  CHECK(output_directory(c, {}) == "from-config");
  c.output_directory.clear();
  CHECK(output_directory(c, {}) == "from-env");
  ::unsetenv(kOutputEnv);
  CHECK(output_directory(c, {}) == "sli-out");
}

TEST_CASE("every command is reproducible across worker counts and from its manifest") {
  for (const auto& [command, text] : kSmall) {
    CAPTURE(command);
    const fs::path a = scratch(std::string(command) + "_1"), b = scratch(std::string(command) + "_3"),
                   r = scratch(std::string(command) + "_rerun");
    const int code = run(command, text, a, 1);
    CHECK(run(command, text, b, 3) == code);
    const auto first = outputs(a);
    CHECK_FALSE(first.empty());
    CHECK(first == outputs(b));

    const json manifest = json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["manifest"]["command"] == command);
    CHECK(manifest["manifest"]["outputs"].size() == first.size());
    for (const auto& [name, body] : first) {
      CHECK(manifest["manifest"]["outputs"][name] == hex(fnv1a(body)));
      if (name.ends_with(".csv")) CHECK(body.starts_with("# config_hash=" + manifest["manifest"]["config_hash"].get<std::string>()));
    }

    std::ostringstream log;
    CHECK(run_command(command, load_config((a / "manifest.json").string()), {.workers = 2, .output_directory = r.string()},
                      log) == code);
    CHECK(outputs(r) == first);
    CHECK(json::parse(slurp(r / "manifest.json"))["config"] == manifest["config"]);
  }
}

TEST_CASE("command verdicts and exit codes") {
  const std::string bin = SLI_BINARY, configs = SLI_CONFIGS;
  const fs::path dir = scratch("exit");
  const std::string out = " -w 1 -o " + dir.string();
  CHECK(shell(bin + " criterion " + configs + "/heisenberg_criterion.json" + out) == kOk);
  CHECK(shell(bin + " criterion " + configs + "/closed_form.json" + out) == kNegative);
  CHECK(shell(bin + " criterion " + configs + "/ellip_exam.json" + out) == kOk);
  const json report = json::parse(slurp(dir / "criterion.json"));
  CHECK(report["verdict"] == "satisfied");
  CHECK(shell(bin + " reconstruct " + configs + "/reconstruct_loop.json" + out) == kOk);
  CHECK(json::parse(slurp(dir / "route.json"))["match"] == true);
  CHECK(shell(bin + " construct " + configs + "/construct_general.json" + out) == kOk);
  CHECK(json::parse(slurp(dir / "construct.json"))["forms"][0]["max_abs_dphi_constraint"].get<double>() <= 1e-8);

  std::ofstream(dir / "bad.json") << R"j({"system": {"n": 2, "preset": "identity"}, "oops": 1})j";
  CHECK(shell(bin + " criterion " + (dir / "bad.json").string() + out) == kFailure);
  CHECK(shell(bin + " criterion " + (dir / "absent.json").string() + out) == kFailure);
  CHECK(shell(bin + " frobnicate") == kFailure);
  CHECK(shell(bin + " selftest -w 1") == kOk);
}
