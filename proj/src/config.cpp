#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace cchsh {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::ConfigError, message, path);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) bad(join(path, it.key()), "unknown key");
  }
}

const json& expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  return j;
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "expected a finite number");
  return v;
}

double get_double(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  return as_double(obj.at(key), join(path, key));
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& j = obj.at(key);
  if (!j.is_number_integer()) bad(join(path, key), "expected an integer");
  return j.get<int>();
}

std::uint64_t get_u64(const json& obj, const std::string& path, const char* key,
                      std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& j = obj.at(key);
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad(join(path, key), "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& j = obj.at(key);
  if (!j.is_boolean()) bad(join(path, key), "expected a boolean");
  return j.get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& j = obj.at(key);
  if (!j.is_string()) bad(join(path, key), "expected a string");
  return j.get<std::string>();
}

std::vector<double> double_array(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<int> int_array(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of integers");
  std::vector<int> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) {
      bad(path + "[" + std::to_string(i) + "]", "expected an integer");
    }
    out.push_back(j[i].get<int>());
  }
  return out;
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const std::string& path) {
  const std::vector<double> v = double_array(j, path);
  if (v.size() != N) bad(path, "expected exactly " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i];
  return out;
}

AngleDistribution parse_distribution(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"kind", "bins", "angle", "density", "atoms"});
  const std::string kind = get_string(j, path, "kind", "");
  if (kind == "uniform") {
    return AngleDistribution::uniform(get_int(j, path, "bins", 64));
  }
  if (kind == "point_mass") {
    if (!j.contains("angle")) bad(join(path, "angle"), "point_mass needs an angle");
    return AngleDistribution::point_mass(as_double(j.at("angle"), join(path, "angle")),
                                         get_int(j, path, "bins", AngleDistribution::kMinBins));
  }
  if (kind == "bins") {
    if (!j.contains("density")) bad(join(path, "density"), "bins needs a density array");
    std::vector<double> density = double_array(j.at("density"), join(path, "density"));
    double total = 0.0;
    for (double d : density) {
      if (d < 0.0) bad(join(path, "density"), "density values must be non-negative");
      total += d;
    }
    if (total <= 0.0) bad(join(path, "density"), "density must have positive mass");
    // Scale so the circle integral is one; configs may give unnormalized bins.
    const double width = kTwoPi / static_cast<double>(density.size());
    for (double& d : density) d /= total * width;
    try {
      return AngleDistribution::from_bins(std::move(density));
    } catch (const Error& e) {
      bad(join(path, "density"), e.what());
    }
  }
  if (kind == "mixture") {
    std::vector<double> density;
    if (j.contains("density")) density = double_array(j.at("density"), join(path, "density"));
    std::vector<AngleAtom> atoms;
    if (j.contains("atoms")) {
      const json& arr = j.at("atoms");
      if (!arr.is_array()) bad(join(path, "atoms"), "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string apath = join(path, "atoms") + "[" + std::to_string(i) + "]";
        expect_object(arr[i], apath);
        check_keys(arr[i], apath, {"angle", "weight"});
        AngleAtom atom;
        atom.angle = get_double(arr[i], apath, "angle", 0.0);
        atom.weight = get_double(arr[i], apath, "weight", 0.0);
        atoms.push_back(atom);
      }
    }
    try {
      return AngleDistribution::mixture(std::move(density), std::move(atoms));
    } catch (const Error& e) {
      bad(path, e.what());
    }
  }
  bad(join(path, "kind"), "expected uniform, point_mass, bins, or mixture");
}

SpacetimeCfg parse_spacetime(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"kind", "mass", "softening", "center", "spin", "grid_path"});
  SpacetimeCfg cfg;
  cfg.kind = get_string(j, path, "kind", "minkowski");
  if (cfg.kind != "minkowski" && cfg.kind != "weak_field" && cfg.kind != "grid") {
    bad(join(path, "kind"), "expected minkowski, weak_field, or grid");
  }
  cfg.mass = get_double(j, path, "mass", cfg.mass);
  cfg.softening = get_double(j, path, "softening", cfg.softening);
  if (j.contains("center")) cfg.center = fixed_array<3>(j.at("center"), join(path, "center"));
  if (j.contains("spin")) cfg.spin = fixed_array<3>(j.at("spin"), join(path, "spin"));
  cfg.grid_path = get_string(j, path, "grid_path", "");
  if (cfg.kind == "weak_field") {
    if (cfg.mass <= 0.0) bad(join(path, "mass"), "weak_field mass must be positive");
    if (cfg.softening <= 0.0) bad(join(path, "softening"), "softening must be positive");
  }
  if (cfg.kind == "grid" && cfg.grid_path.empty()) {
    bad(join(path, "grid_path"), "grid spacetimes need a grid_path");
  }
  return cfg;
}

ExperimentConfig parse_scenario(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"p_O", "tau_E", "observer_speed", "dirs_a", "dirs_b", "step", "d_O", "frame_O"});
  ExperimentConfig cfg;
  if (j.contains("p_O")) cfg.p_O = fixed_array<4>(j.at("p_O"), join(path, "p_O"));
  cfg.tau_E = get_double(j, path, "tau_E", cfg.tau_E);
  if (cfg.tau_E <= 0.0) bad(join(path, "tau_E"), "emission time must be positive");
  cfg.observer_speed = get_double(j, path, "observer_speed", cfg.observer_speed);
  if (cfg.observer_speed <= 0.0 || cfg.observer_speed >= 1.0) {
    bad(join(path, "observer_speed"), "observer speed must lie in (0, 1)");
  }
  if (!j.contains("dirs_a")) bad(join(path, "dirs_a"), "missing analyzer directions");
  if (!j.contains("dirs_b")) bad(join(path, "dirs_b"), "missing analyzer directions");
  cfg.dirs_a = double_array(j.at("dirs_a"), join(path, "dirs_a"));
  cfg.dirs_b = double_array(j.at("dirs_b"), join(path, "dirs_b"));
  if (cfg.dirs_a.empty()) bad(join(path, "dirs_a"), "need at least one direction");
  if (cfg.dirs_b.empty()) bad(join(path, "dirs_b"), "need at least one direction");
  cfg.step = get_double(j, path, "step", cfg.step);
  if (cfg.step <= 0.0) bad(join(path, "step"), "integrator step must be positive");
  if (j.contains("d_O")) cfg.d_O = fixed_array<4>(j.at("d_O"), join(path, "d_O"));
  if (j.contains("frame_O")) {
    const json& f = j.at("frame_O");
    const std::string fpath = join(path, "frame_O");
    expect_object(f, fpath);
    check_keys(f, fpath, {"base", "e"});
    Frame frame;
    if (!f.contains("base") || !f.contains("e")) bad(fpath, "frame needs base and e");
    frame.base = fixed_array<4>(f.at("base"), join(fpath, "base"));
    const json& e = f.at("e");
    if (!e.is_array() || e.size() != 4) bad(join(fpath, "e"), "expected four basis vectors");
    for (int k = 0; k < 4; ++k) {
      frame.e[k] = fixed_array<4>(e[k], join(fpath, "e") + "[" + std::to_string(k) + "]");
    }
    cfg.frame_O = frame;
  }
  return cfg;
}

DynamicsCfg parse_dynamics(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"choice_a", "choice_b", "theta_v", "mc_samples", "nodes"});
  DynamicsCfg cfg;
  cfg.choice_a = get_int(j, path, "choice_a", 0);
  cfg.choice_b = get_int(j, path, "choice_b", 0);
  if (j.contains("theta_v")) cfg.theta_v = parse_distribution(j.at("theta_v"), join(path, "theta_v"));
  cfg.mc_samples = get_u64(j, path, "mc_samples", 0);
  cfg.nodes = get_int(j, path, "nodes", cfg.nodes);
  if (cfg.nodes < 8) bad(join(path, "nodes"), "need at least 8 quadrature nodes");
  return cfg;
}

InverseCfg parse_inverse(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"targets", "bins", "regularization", "max_iterations", "step_tolerance",
              "feasibility_tolerance", "scan_chsh", "scan_bins", "scan_restarts"});
  InverseCfg cfg;
  if (j.contains("targets")) {
    cfg.problem.targets = double_array(j.at("targets"), join(path, "targets"));
  }
  cfg.problem.bins = get_int(j, path, "bins", cfg.problem.bins);
  cfg.problem.regularization = get_double(j, path, "regularization", 0.0);
  cfg.solve.max_iterations = get_int(j, path, "max_iterations", cfg.solve.max_iterations);
  cfg.solve.step_tolerance = get_double(j, path, "step_tolerance", cfg.solve.step_tolerance);
  cfg.solve.feasibility_tolerance =
      get_double(j, path, "feasibility_tolerance", cfg.solve.feasibility_tolerance);
  cfg.scan_chsh = get_bool(j, path, "scan_chsh", false);
  cfg.scan_bins = get_int(j, path, "scan_bins", cfg.scan_bins);
  cfg.scan_restarts = get_int(j, path, "scan_restarts", cfg.scan_restarts);
  return cfg;
}

std::vector<AngleQuad> parse_quads(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of angle quadruples");
  std::vector<AngleQuad> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto q = fixed_array<4>(j[i], path + "[" + std::to_string(i) + "]");
    out.push_back({q[0], q[1], q[2], q[3]});
  }
  return out;
}

PsiCloudCfg parse_psi(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"mass_low", "mass_high", "center_low", "center_high", "spin_max", "softening",
              "bins", "n_draws"});
  PsiCloudCfg cfg;
  cfg.perturbation.mass_low = get_double(j, path, "mass_low", 0.0);
  cfg.perturbation.mass_high = get_double(j, path, "mass_high", 0.0);
  if (j.contains("center_low")) {
    cfg.perturbation.center_low = fixed_array<3>(j.at("center_low"), join(path, "center_low"));
  }
  if (j.contains("center_high")) {
    cfg.perturbation.center_high =
        fixed_array<3>(j.at("center_high"), join(path, "center_high"));
  }
  cfg.perturbation.spin_max = get_double(j, path, "spin_max", 0.0);
  cfg.perturbation.softening = get_double(j, path, "softening", cfg.perturbation.softening);
  cfg.perturbation.bins = get_int(j, path, "bins", cfg.perturbation.bins);
  cfg.n_draws = get_int(j, path, "n_draws", 0);
  return cfg;
}

SweepCfg parse_sweep(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"softening", "center", "spin", "masses", "choice_a", "choice_b", "quads",
              "quantum_targets", "mc_samples", "psi"});
  SweepCfg cfg;
  cfg.family.softening = get_double(j, path, "softening", cfg.family.softening);
  if (j.contains("center")) cfg.family.center = fixed_array<3>(j.at("center"), join(path, "center"));
  if (j.contains("spin")) cfg.family.spin = fixed_array<3>(j.at("spin"), join(path, "spin"));
  if (!j.contains("masses")) bad(join(path, "masses"), "missing mass grid");
  cfg.masses = double_array(j.at("masses"), join(path, "masses"));
  cfg.choice_a = get_int(j, path, "choice_a", 0);
  cfg.choice_b = get_int(j, path, "choice_b", 0);
  if (j.contains("quads")) cfg.quads = parse_quads(j.at("quads"), join(path, "quads"));
  if (j.contains("quantum_targets")) {
    cfg.quantum_targets = double_array(j.at("quantum_targets"), join(path, "quantum_targets"));
  }
  cfg.mc_samples = get_u64(j, path, "mc_samples", 0);
  if (j.contains("psi")) cfg.psi = parse_psi(j.at("psi"), join(path, "psi"));
  return cfg;
}

WorldviewsCfg parse_worldviews(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"dag_file", "dag_text", "fields", "truth", "chain", "observer_field",
              "measurement", "copies", "weights", "tolerance", "state_cap", "functor",
              "sieve_cap"});
  WorldviewsCfg cfg;
  cfg.dag_file = get_string(j, path, "dag_file", "");
  cfg.dag_text = get_string(j, path, "dag_text", "");
  if (cfg.dag_file.empty() == cfg.dag_text.empty()) {
    bad(path, "give exactly one of dag_file and dag_text");
  }
  if (!j.contains("fields")) bad(join(path, "fields"), "missing field list");
  const json& fields = j.at("fields");
  if (!fields.is_array() || fields.empty()) {
    bad(join(path, "fields"), "expected a non-empty array");
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string fpath = join(path, "fields") + "[" + std::to_string(i) + "]";
    expect_object(fields[i], fpath);
    check_keys(fields[i], fpath, {"name", "alphabet", "sizes"});
    WorldviewsCfg::FieldCfg f;
    f.name = get_string(fields[i], fpath, "name", "");
    if (f.name.empty()) bad(join(fpath, "name"), "field needs a name");
    f.alphabet = get_int(fields[i], fpath, "alphabet", 0);
    if (fields[i].contains("sizes")) {
      f.sizes = int_array(fields[i].at("sizes"), join(fpath, "sizes"));
    }
    cfg.fields.push_back(std::move(f));
  }
  if (!j.contains("truth")) bad(join(path, "truth"), "missing true configuration");
  const json& truth = j.at("truth");
  expect_object(truth, join(path, "truth"));
  for (auto it = truth.begin(); it != truth.end(); ++it) {
    cfg.truth.emplace_back(it.key(),
                           int_array(it.value(), join(path, "truth") + "." + it.key()));
  }
  if (j.contains("chain")) {
    const json& chain = j.at("chain");
    if (!chain.is_array()) bad(join(path, "chain"), "expected an array of point names");
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (!chain[i].is_string()) {
        bad(join(path, "chain") + "[" + std::to_string(i) + "]", "expected a point name");
      }
      cfg.chain.push_back(chain[i].get<std::string>());
    }
  }
  cfg.observer_field = get_string(j, path, "observer_field", "");
  if (j.contains("measurement")) {
    const json& m = j.at("measurement");
    const std::string mpath = join(path, "measurement");
    expect_object(m, mpath);
    check_keys(m, mpath, {"field_1", "field_2"});
    cfg.outcome_field_1 = get_string(m, mpath, "field_1", "");
    cfg.outcome_field_2 = get_string(m, mpath, "field_2", "");
    if (cfg.outcome_field_1.empty() || cfg.outcome_field_2.empty()) {
      bad(mpath, "measurement needs field_1 and field_2");
    }
  }
  if (j.contains("copies")) {
    const json& copies = j.at("copies");
    if (!copies.is_array()) bad(join(path, "copies"), "expected an array of copy rules");
    for (std::size_t i = 0; i < copies.size(); ++i) {
      const std::string cpath = join(path, "copies") + "[" + std::to_string(i) + "]";
      expect_object(copies[i], cpath);
      check_keys(copies[i], cpath, {"from_field", "from_point", "to_field", "to_point"});
      WorldviewsCfg::CopyRule rule;
      rule.from_field = get_string(copies[i], cpath, "from_field", "");
      rule.from_point = get_string(copies[i], cpath, "from_point", "");
      rule.to_field = get_string(copies[i], cpath, "to_field", "");
      rule.to_point = get_string(copies[i], cpath, "to_point", "");
      if (rule.from_field.empty() || rule.from_point.empty() || rule.to_field.empty() ||
          rule.to_point.empty()) {
        bad(cpath, "copy rules need from_field, from_point, to_field, to_point");
      }
      cfg.copies.push_back(std::move(rule));
    }
  }
  if (j.contains("weights")) cfg.weights = double_array(j.at("weights"), join(path, "weights"));
  cfg.tolerance = get_double(j, path, "tolerance", cfg.tolerance);
  cfg.state_cap = get_u64(j, path, "state_cap", cfg.state_cap);
  cfg.functor = get_bool(j, path, "functor", false);
  cfg.sieve_cap = get_int(j, path, "sieve_cap", cfg.sieve_cap);
  return cfg;
}

OutputCfg parse_output(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"directory", "formats"});
  OutputCfg cfg;
  cfg.directory = get_string(j, path, "directory", cfg.directory);
  if (j.contains("formats")) {
    const json& formats = j.at("formats");
    if (!formats.is_array()) bad(join(path, "formats"), "expected an array");
    cfg.json = false;
    cfg.csv = false;
    for (std::size_t i = 0; i < formats.size(); ++i) {
      const std::string fpath = join(path, "formats") + "[" + std::to_string(i) + "]";
      if (!formats[i].is_string()) bad(fpath, "expected a string");
      const std::string f = formats[i].get<std::string>();
      if (f == "json") {
        cfg.json = true;
      } else if (f == "csv") {
        cfg.csv = true;
      } else {
        bad(fpath, "expected json or csv");
      }
    }
    if (!cfg.json && !cfg.csv) bad(join(path, "formats"), "need at least one format");
  }
  return cfg;
}

}  // namespace

int default_threads() {
  if (const char* env = std::getenv("CCHSH_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

Config parse_config(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  expect_object(root, "config");
  check_keys(root, "",
             {"seed", "threads", "spacetime", "scenario", "dynamics", "inverse", "sweep",
              "worldviews", "output"});

  Config config;
  config.base_dir = base_dir;
  if (root.contains("seed")) config.seed = get_u64(root, "", "seed", 0);
  config.threads = get_int(root, "", "threads", default_threads());
  if (config.threads < 1) bad("threads", "thread count must be at least one");

  if (root.contains("spacetime")) {
    config.spacetime = parse_spacetime(root.at("spacetime"), "spacetime");
  }
  if (root.contains("scenario")) {
    config.scenario = parse_scenario(root.at("scenario"), "scenario");
    config.has_scenario = true;
  }
  if (root.contains("dynamics")) {
    config.dynamics = parse_dynamics(root.at("dynamics"), "dynamics");
  }
  if (root.contains("inverse")) {
    config.inverse = parse_inverse(root.at("inverse"), "inverse");
    config.has_inverse = true;
  }
  if (root.contains("sweep")) {
    config.sweep = parse_sweep(root.at("sweep"), "sweep");
    config.has_sweep = true;
  }
  if (root.contains("worldviews")) {
    config.worldviews = parse_worldviews(root.at("worldviews"), "worldviews");
    config.has_worldviews = true;
  }
  if (root.contains("output")) {
    config.output = parse_output(root.at("output"), "output");
  }
  return config;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read config file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_config(buffer.str(), dir.empty() ? "." : dir);
}

Spacetime make_spacetime(const SpacetimeCfg& cfg, const std::string& base_dir) {
  if (cfg.kind == "minkowski") return Spacetime::minkowski();
  if (cfg.kind == "weak_field") {
    return Spacetime::weak_field(cfg.mass, cfg.softening, cfg.center, cfg.spin);
  }
  std::filesystem::path p(cfg.grid_path);
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  return Spacetime::from_grid_csv(p.string());
}

SweepSpec make_sweep_spec(const Config& config) {
  if (!config.has_sweep) {
    throw Error(ErrorCode::ConfigError, "config has no sweep block", "sweep");
  }
  if (!config.has_scenario) {
    throw Error(ErrorCode::ConfigError, "sweeps need a scenario block", "scenario");
  }
  SweepSpec spec;
  spec.family = config.sweep.family;
  spec.masses = config.sweep.masses;
  spec.experiment = config.scenario;
  spec.choice_a = config.sweep.choice_a;
  spec.choice_b = config.sweep.choice_b;
  spec.theta_v = config.dynamics.theta_v;
  spec.quads = config.sweep.quads;
  spec.quantum_targets = config.sweep.quantum_targets;
  spec.mc_samples = config.sweep.mc_samples;
  spec.seed = config.seed;
  spec.threads = config.threads;
  return spec;
}

}  // namespace cchsh
