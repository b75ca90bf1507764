// cchsh - JSON run configuration
//
// One config file drives every subcommand. Blocks are optional unless the
// requested command needs them; parsing is strict, so a misspelled or
// unknown key is a ConfigError carrying the full field path rather than a
// silently ignored setting.

#ifndef CCHSH_CONFIG_HPP_
#define CCHSH_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distributions.hpp"
#include "inverse.hpp"
#include "scenario.hpp"
#include "sweep.hpp"
#include "worldviews.hpp"

namespace cchsh {

struct SpacetimeCfg {
  std::string kind = "minkowski";  // minkowski | weak_field | grid
  double mass = 1e-4;
  double softening = 0.05;
  std::array<double, 3> center = {0.0, 0.0, 0.0};
  std::array<double, 3> spin = {0.0, 0.0, 0.0};
  std::string grid_path;  // kind == grid, resolved against the config dir
};

struct DynamicsCfg {
  int choice_a = 0;
  int choice_b = 0;
  AngleDistribution theta_v = AngleDistribution::uniform();
  std::uint64_t mc_samples = 0;
  int nodes = 512;  // reference-angle quadrature resolution
};

struct InverseCfg {
  InverseProblem problem;
  SolveOptions solve;
  bool scan_chsh = false;  // also run the coordinate-ascent maximization
  int scan_bins = 128;
  int scan_restarts = 8;
};

struct PsiCloudCfg {
  PerturbationSpec perturbation;
  int n_draws = 0;  // zero skips the empirical offset distribution
};

struct SweepCfg {
  SpacetimeFamily family;
  std::vector<double> masses;
  int choice_a = 0;
  int choice_b = 0;
  std::vector<AngleQuad> quads;
  std::vector<double> quantum_targets;
  std::uint64_t mc_samples = 0;
  PsiCloudCfg psi;
};

struct WorldviewsCfg {
  std::string dag_file;  // exactly one of dag_file / dag_text
  std::string dag_text;
  struct FieldCfg {
    std::string name;
    int alphabet = 0;        // uniform size; zero means use the DAG's sizes
    std::vector<int> sizes;  // explicit per-point sizes win over both
  };
  std::vector<FieldCfg> fields;
  // True configuration, per field, per point in DAG order.
  std::vector<std::pair<std::string, std::vector<int>>> truth;
  std::vector<std::string> chain;  // point names; empty picks a maximal chain
  std::string observer_field;
  std::string outcome_field_1;  // both set: run the two-measurement analysis
  std::string outcome_field_2;
  // Copy dynamics: valid configurations must repeat the source cell's value
  // at the target cell. This is how a config wires a measurement device to
  // the value it records.
  struct CopyRule {
    std::string from_field, from_point;
    std::string to_field, to_point;
  };
  std::vector<CopyRule> copies;
  std::vector<double> weights;  // base measure at the chain start; empty = uniform
  double tolerance = 1e-9;
  std::uint64_t state_cap = kDefaultStateCap;
  bool functor = false;  // also map out the event algebras along the order
  int sieve_cap = 16;
};

struct OutputCfg {
  std::string directory = "out";
  bool json = true;
  bool csv = true;
};

struct Config {
  std::optional<std::uint64_t> seed;
  int threads = 1;

  bool has_scenario = false;
  bool has_inverse = false;
  bool has_sweep = false;
  bool has_worldviews = false;

  SpacetimeCfg spacetime;
  ExperimentConfig scenario;
  DynamicsCfg dynamics;
  InverseCfg inverse;
  SweepCfg sweep;
  WorldviewsCfg worldviews;
  OutputCfg output;

  std::string base_dir;  // directory of the config file, for relative paths
};

// Parses a config from JSON text. Unknown keys, wrong types, and
// out-of-range scalars all throw ConfigError with the offending field path.
Config parse_config(const std::string& json_text, const std::string& base_dir = ".");

// Reads and parses a config file; IoError when unreadable.
Config load_config(const std::string& path);

// Default thread count: the CCHSH_THREADS environment variable when set and
// positive, one otherwise. Applied before the config's own "threads" key.
int default_threads();

Spacetime make_spacetime(const SpacetimeCfg& cfg, const std::string& base_dir);

// Assembles the sweep module's spec from the config blocks: the family and
// grid from the sweep block, the experiment from the scenario block, the
// reference density from the dynamics block, seed and threads from the top.
SweepSpec make_sweep_spec(const Config& config);

}  // namespace cchsh

#endif  // CCHSH_CONFIG_HPP_
