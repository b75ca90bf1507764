#include "runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "angles.hpp"
#include "counter_rng.hpp"
#include "dynamics.hpp"
#include "metric.hpp"
#include "worldviews.hpp"

namespace cchsh {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json to_json(const OutcomeProbabilities& p) {
  return json{{"pp", p.pp}, {"pm", p.pm}, {"mp", p.mp}, {"mm", p.mm}};
}

json to_json(const Vec4& v) { return json::array({v[0], v[1], v[2], v[3]}); }

json to_json(const AngleDistribution& dist) {
  json atoms = json::array();
  for (const AngleAtom& a : dist.atoms()) {
    atoms.push_back(json{{"angle", a.angle}, {"weight", a.weight}});
  }
  return json{{"bins", dist.bin_count()},
              {"density", dist.density()},
              {"atoms", atoms},
              {"atom_mass", dist.atom_mass()}};
}

void csv_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

// Commas would split the error message across CSV columns.
std::string csv_safe(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n') c = ';';
  }
  return text;
}

void push_table_header(const char* prefix, std::vector<std::string>& header) {
  for (const char* cell : {"pp", "pm", "mp", "mm"}) {
    header.push_back(std::string(prefix) + "_" + cell);
  }
}

void push_table_cells(const OutcomeProbabilities& p, std::vector<std::string>& row) {
  row.push_back(num(p.pp));
  row.push_back(num(p.pm));
  row.push_back(num(p.mp));
  row.push_back(num(p.mm));
}

void require_scenario(const Config& config) {
  if (!config.has_scenario) {
    throw Error(ErrorCode::ConfigError, "this command needs a scenario block", "scenario");
  }
}

void check_choice(const Config& config) {
  const int na = static_cast<int>(config.scenario.dirs_a.size());
  const int nb = static_cast<int>(config.scenario.dirs_b.size());
  if (config.dynamics.choice_a < 0 || config.dynamics.choice_a >= na) {
    throw Error(ErrorCode::ConfigError, "analyzer choice outside the configured directions",
                "dynamics.choice_a");
  }
  if (config.dynamics.choice_b < 0 || config.dynamics.choice_b >= nb) {
    throw Error(ErrorCode::ConfigError, "analyzer choice outside the configured directions",
                "dynamics.choice_b");
  }
}

// ---------------------------------------------------------------------------
// worldview assembly shared by validate and the worldviews command

std::string load_dag_text(const WorldviewsCfg& cfg, const std::string& base_dir) {
  if (!cfg.dag_text.empty()) return cfg.dag_text;
  std::filesystem::path p(cfg.dag_file);
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read dag file: " + p.string(),
                "worldviews.dag_file");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<FieldSpec> make_field_specs(const WorldviewsCfg& cfg, const ParsedDag& parsed) {
  const int n = parsed.dag.size();
  std::vector<FieldSpec> specs;
  for (const auto& f : cfg.fields) {
    FieldSpec spec;
    spec.name = f.name;
    if (!f.sizes.empty()) {
      if (static_cast<int>(f.sizes.size()) != n) {
        throw Error(ErrorCode::ConfigError,
                    "field " + f.name + " needs one alphabet size per point",
                    "worldviews.fields");
      }
      spec.sizes = f.sizes;
    } else if (f.alphabet > 0) {
      spec.sizes.assign(n, f.alphabet);
    } else {
      spec.sizes = parsed.alphabet_sizes;
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

int point_by_name(const CausalDag& dag, const std::string& name, const char* field) {
  const auto& names = dag.names();
  for (int p = 0; p < dag.size(); ++p) {
    if (names[p] == name) return p;
  }
  throw Error(ErrorCode::ConfigError, "unknown point name: " + name, field);
}

FieldConfigSpace::Config assemble_truth(const WorldviewsCfg& cfg,
                                        const FieldConfigSpace& space) {
  FieldConfigSpace::Config truth(space.n_cells(), 0);
  std::vector<bool> covered(space.n_fields(), false);
  for (const auto& [name, values] : cfg.truth) {
    const int f = space.field_index(name);
    if (static_cast<int>(values.size()) != space.n_points()) {
      throw Error(ErrorCode::ConfigError, "truth for " + name + " needs one value per point",
                  "worldviews.truth." + name);
    }
    for (int p = 0; p < space.n_points(); ++p) truth[space.cell(f, p)] = values[p];
    covered[f] = true;
  }
  for (int f = 0; f < space.n_fields(); ++f) {
    if (!covered[f]) {
      throw Error(ErrorCode::ConfigError, "truth missing for field " + space.field(f).name,
                  "worldviews.truth");
    }
  }
  if (!space.valid(truth)) {
    throw Error(ErrorCode::ConfigError, "true configuration violates the validity rules",
                "worldviews.truth");
  }
  return truth;
}

void apply_copies(const WorldviewsCfg& cfg, FieldConfigSpace& space) {
  if (cfg.copies.empty()) return;
  std::vector<std::pair<int, int>> cells;
  for (const auto& rule : cfg.copies) {
    const int from = space.cell(space.field_index(rule.from_field),
                                point_by_name(space.dag(), rule.from_point, "worldviews.copies"));
    const int to = space.cell(space.field_index(rule.to_field),
                              point_by_name(space.dag(), rule.to_point, "worldviews.copies"));
    cells.emplace_back(from, to);
  }
  space.set_constraint(
      [cells](const CausalDag&, const FieldConfigSpace&, const FieldConfigSpace::Config& c) {
        for (const auto& [from, to] : cells) {
          if (c[to] != c[from]) return false;
        }
        return true;
      });
}

// Deepest-past greedy walk down from the maximal point with the largest
// causal past; always a maximal chain.
std::vector<int> default_chain(const CausalDag& dag) {
  int tip = 0;
  std::size_t tip_size = 0;
  for (int q : dag.maximal_points()) {
    const std::size_t size = dag.causal_past(q).size();
    if (size >= tip_size) {
      tip = q;
      tip_size = size;
    }
  }
  std::vector<int> chain{tip};
  int current = tip;
  for (;;) {
    int next = -1;
    std::size_t next_size = 0;
    for (int r : dag.causal_past(current)) {
      if (r == current) continue;
      const std::size_t size = dag.causal_past(r).size();
      if (size >= next_size) {
        next = r;
        next_size = size;
      }
    }
    if (next < 0) break;
    chain.insert(chain.begin(), next);
    current = next;
  }
  return chain;
}

std::vector<int> resolve_chain(const WorldviewsCfg& cfg, const CausalDag& dag) {
  if (cfg.chain.empty()) return default_chain(dag);
  std::vector<int> chain;
  for (const std::string& name : cfg.chain) {
    chain.push_back(point_by_name(dag, name, "worldviews.chain"));
  }
  return chain;
}

// ---------------------------------------------------------------------------
// commands

RunResult cmd_validate(const Config& config) {
  RunResult result;
  result.command = "validate";

  json report;
  report["command"] = "validate";
  report["code_version"] = kCodeVersion;
  report["blocks"] = json{{"scenario", config.has_scenario},
                          {"inverse", config.has_inverse},
                          {"sweep", config.has_sweep},
                          {"worldviews", config.has_worldviews}};

  if (config.has_scenario) {
    const Spacetime st = make_spacetime(config.spacetime, config.base_dir);
    const ExperimentGeometry geom = build_geometry(st, config.scenario);
    report["geometry"] = json{{"built", true},
                              {"spacetime", st.metric().name()},
                              {"p_E", to_json(geom.p_E)},
                              {"p_A", to_json(geom.p_A)},
                              {"p_B", to_json(geom.p_B)}};
  } else {
    report["geometry"] = json{{"built", false}};
  }

  if (config.has_worldviews) {
    const std::string text = load_dag_text(config.worldviews, config.base_dir);
    const ParsedDag parsed = parse_dag(text);
    FieldConfigSpace space(parsed.dag, make_field_specs(config.worldviews, parsed));
    if (!config.worldviews.observer_field.empty()) {
      space.set_observer_field(config.worldviews.observer_field);
    }
    apply_copies(config.worldviews, space);
    assemble_truth(config.worldviews, space);
    report["worldviews"] =
        json{{"points", parsed.dag.size()}, {"fields", space.n_fields()}};
  }

  report["valid"] = true;
  result.report_json = report.dump(2);
  result.summary = "config valid";
  return result;
}

RunResult cmd_geometry(const Config& config) {
  require_scenario(config);
  check_choice(config);
  const Spacetime st = make_spacetime(config.spacetime, config.base_dir);
  const ExperimentGeometry geom = build_geometry(st, config.scenario);
  const HolonomySplit holo = decompose_holonomy(st, geom);
  const AngleSet angles = extract_angles(st, geom, config.dynamics.choice_a,
                                         config.dynamics.choice_b, 0.0, &holo);

  json report;
  report["command"] = "geometry";
  report["code_version"] = kCodeVersion;
  report["spacetime"] = st.metric().name();
  report["events"] = json{{"p_O", to_json(geom.p_O)},     {"p_E", to_json(geom.p_E)},
                          {"p_A", to_json(geom.p_A)},     {"p_B", to_json(geom.p_B)},
                          {"p_alpha", to_json(geom.p_alpha)}, {"p_beta", to_json(geom.p_beta)}};
  report["proper_times"] = json{{"s_alpha", geom.s_alpha},
                                {"s_A", geom.s_A},
                                {"s_beta", geom.s_beta},
                                {"s_B", geom.s_B}};
  report["launch_speeds"] = json{{"A", geom.speed_A}, {"B", geom.speed_B}};
  report["null_residuals"] =
      json{{"alpha", geom.null_residual_alpha}, {"beta", geom.null_residual_beta}};
  report["holonomy"] = json{{"theta_A1", holo.theta_A1},
                            {"theta_A2", holo.theta_A2},
                            {"theta_B1", holo.theta_B1},
                            {"theta_B2", holo.theta_B2},
                            {"loop_A", holo.loop_A},
                            {"loop_B", holo.loop_B},
                            {"split_defect_A", holo.split_defect_A},
                            {"split_defect_B", holo.split_defect_B}};
  report["angles"] = json{{"theta_a", angles.theta_a},       {"theta_b", angles.theta_b},
                          {"theta_ab", angles.theta_ab},     {"theta_av", angles.theta_av},
                          {"theta_bv", angles.theta_bv},     {"theta_A", angles.theta_A},
                          {"theta_B", angles.theta_B},       {"phi_A", angles.phi_A},
                          {"phi_B", angles.phi_B},           {"psi_minus", angles.psi_minus},
                          {"theta_plus", angles.theta_plus}, {"theta_minus", angles.theta_minus},
                          {"phi_plus", angles.phi_plus}};

  std::string events_csv = "name,x0,x1,x2,x3\n";
  const std::pair<const char*, const Vec4*> events[] = {
      {"p_O", &geom.p_O},         {"p_E", &geom.p_E},   {"p_A", &geom.p_A},
      {"p_B", &geom.p_B},         {"p_alpha", &geom.p_alpha}, {"p_beta", &geom.p_beta}};
  for (const auto& [name, p] : events) {
    csv_row(events_csv, {name, num((*p)[0]), num((*p)[1]), num((*p)[2]), num((*p)[3])});
  }

  std::string holonomy_csv = "name,value\n";
  const std::pair<const char*, double> rows[] = {
      {"theta_A1", holo.theta_A1},           {"theta_A2", holo.theta_A2},
      {"theta_B1", holo.theta_B1},           {"theta_B2", holo.theta_B2},
      {"loop_A", holo.loop_A},               {"loop_B", holo.loop_B},
      {"split_defect_A", holo.split_defect_A}, {"split_defect_B", holo.split_defect_B},
      {"psi_minus", angles.psi_minus}};
  for (const auto& [name, value] : rows) csv_row(holonomy_csv, {name, num(value)});

  RunResult result;
  result.command = "geometry";
  result.report_json = report.dump(2);
  result.tables.emplace_back("events.csv", std::move(events_csv));
  result.tables.emplace_back("holonomy.csv", std::move(holonomy_csv));
  result.summary = "geometry built: psi_minus=" + num(angles.psi_minus) +
                   ", split defects A=" + num(holo.split_defect_A) +
                   " B=" + num(holo.split_defect_B);
  return result;
}

RunResult cmd_probabilities(const Config& config) {
  require_scenario(config);
  const bool mc_on = config.dynamics.mc_samples > 0;
  if (mc_on && !config.seed) {
    throw Error(ErrorCode::SeedRequired, "Monte Carlo probabilities need an explicit seed",
                "seed");
  }

  const Spacetime st = make_spacetime(config.spacetime, config.base_dir);
  const ExperimentGeometry geom = build_geometry(st, config.scenario);
  const HolonomySplit holo = decompose_holonomy(st, geom);

  PoOptions po_options;
  po_options.theta_v_nodes = config.dynamics.nodes;
  const ResponseFunction response = ResponseFunction::malus();

  json rows = json::array();
  std::string csv;
  {
    std::vector<std::string> header = {"theta_a", "theta_b", "theta_ab", "psi_minus"};
    push_table_header("simp", header);
    push_table_header("po", header);
    if (mc_on) {
      push_table_header("mc", header);
      push_table_header("mc_se", header);
    }
    csv_row(csv, header);
  }

  int row_index = 0;
  for (std::size_t ia = 0; ia < config.scenario.dirs_a.size(); ++ia) {
    for (std::size_t ib = 0; ib < config.scenario.dirs_b.size(); ++ib) {
      const AngleSet a = extract_angles(st, geom, ia, ib, 0.0, &holo);
      const auto psi = AngleDistribution::point_mass(a.psi_minus);
      const auto joint = JointAngleDistribution::correlated(
          AngleDistribution::point_mass(wrap_two_pi(a.theta_A1)), psi);
      const auto tilt_a = AngleDistribution::point_mass(wrap_two_pi(a.theta_A2));
      const auto tilt_b = AngleDistribution::point_mass(wrap_two_pi(a.theta_B2));

      OutcomeProbabilities simp;
      simp.pp = simp_probability(psi, +1, +1, a.theta_ab);
      simp.pm = simp_probability(psi, +1, -1, a.theta_ab);
      simp.mp = simp_probability(psi, -1, +1, a.theta_ab);
      simp.mm = simp_probability(psi, -1, -1, a.theta_ab);
      const OutcomeProbabilities po =
          po_probabilities(response, config.dynamics.theta_v, joint, tilt_a, tilt_b, a.theta_a,
                           a.theta_b, po_options);

      json row = json{{"theta_a", a.theta_a},     {"theta_b", a.theta_b},
                      {"theta_ab", a.theta_ab},   {"psi_minus", a.psi_minus},
                      {"simp", to_json(simp)},    {"po", to_json(po)}};
      std::vector<std::string> cells = {num(a.theta_a), num(a.theta_b), num(a.theta_ab),
                                        num(a.psi_minus)};
      push_table_cells(simp, cells);
      push_table_cells(po, cells);

      if (mc_on) {
        const std::uint64_t row_seed =
            counter_bits(*config.seed, static_cast<std::uint64_t>(row_index), 0xab1eULL);
        const McResult mc =
            mc_probability(row_seed, config.dynamics.mc_samples, response,
                           config.dynamics.theta_v, joint, a.theta_a, a.theta_b,
                           config.threads);
        row["mc"] = json{{"probabilities", to_json(mc.probabilities)},
                         {"standard_errors", to_json(mc.standard_errors)},
                         {"counts", mc.counts},
                         {"samples", mc.samples}};
        push_table_cells(mc.probabilities, cells);
        push_table_cells(mc.standard_errors, cells);
      }
      csv_row(csv, cells);
      rows.push_back(std::move(row));
      ++row_index;
    }
  }

  json report;
  report["command"] = "probabilities";
  report["code_version"] = kCodeVersion;
  report["spacetime"] = st.metric().name();
  report["psi_minus"] = wrap_pi(holo.theta_A1 - holo.theta_B1);
  report["mc_samples"] = config.dynamics.mc_samples;
  if (config.seed) report["seed"] = *config.seed;
  report["rows"] = std::move(rows);

  RunResult result;
  result.command = "probabilities";
  result.report_json = report.dump(2);
  result.tables.emplace_back("probabilities.csv", std::move(csv));
  result.summary = std::to_string(config.scenario.dirs_a.size() *
                                  config.scenario.dirs_b.size()) +
                   " analyzer pairs, psi_minus=" + num(wrap_pi(holo.theta_A1 - holo.theta_B1));
  return result;
}

RunResult cmd_inverse(const Config& config) {
  if (!config.has_inverse) {
    throw Error(ErrorCode::ConfigError, "config has no inverse block", "inverse");
  }
  const InverseSolution solution = solve_nnls(config.inverse.problem, config.inverse.solve);
  const FourierFeasibility bound = fourier_feasibility(
      config.inverse.problem.targets, config.inverse.solve.feasibility_tolerance);

  json report;
  report["command"] = "inverse";
  report["code_version"] = kCodeVersion;
  report["targets"] = config.inverse.problem.targets;
  report["bins"] = config.inverse.problem.bins;
  report["residual"] = solution.residual;
  report["feasible"] = solution.feasible;
  report["c2"] = solution.c2;
  report["s2"] = solution.s2;
  report["iterations"] = solution.iterations;
  report["step_norm"] = solution.step_norm;
  report["bound"] = json{{"residual_lower_bound", bound.residual_lower_bound},
                         {"feasible", bound.feasible},
                         {"on_boundary", bound.on_boundary},
                         {"c2", bound.c2},
                         {"s2", bound.s2}};

  std::string summary = "residual=" + num(solution.residual) +
                        " (lower bound " + num(bound.residual_lower_bound) + "), " +
                        (solution.feasible ? "feasible" : "infeasible");

  if (config.inverse.scan_chsh) {
    const ChshMaximum best = maximize_chsh(config.inverse.scan_bins,
                                           config.inverse.scan_restarts,
                                           config.seed.value_or(1));
    report["scan"] = json{{"s_value", best.s_value},
                          {"angles", json::array({best.angles.a, best.angles.a_alt,
                                                   best.angles.b, best.angles.b_alt})},
                          {"bins", best.bins},
                          {"rounds", best.rounds}};
    summary += "; max S=" + num(best.s_value);
  }

  std::string density_csv = "bin,angle,density\n";
  const auto& density = solution.density.density();
  const double width = solution.density.bin_width();
  for (std::size_t i = 0; i < density.size(); ++i) {
    csv_row(density_csv,
            {std::to_string(i), num(static_cast<double>(i) * width), num(density[i])});
  }

  RunResult result;
  result.command = "inverse";
  result.report_json = report.dump(2);
  result.tables.emplace_back("density.csv", std::move(density_csv));
  result.summary = std::move(summary);
  return result;
}

RunResult cmd_sweep(const Config& config) {
  const SweepSpec spec = make_sweep_spec(config);
  const SweepReport sweep = run_sweep(spec);

  json records = json::array();
  for (const GridpointRecord& rec : sweep.records) {
    json r;
    r["index"] = rec.index;
    r["mass"] = rec.mass;
    r["ok"] = rec.ok;
    if (!rec.ok) {
      r["error"] = rec.error;
      records.push_back(std::move(r));
      continue;
    }
    r["theta_A1"] = rec.theta_a1;
    r["theta_A2"] = rec.theta_a2;
    r["theta_B1"] = rec.theta_b1;
    r["theta_B2"] = rec.theta_b2;
    r["psi_minus"] = rec.psi_minus;
    r["simp"] = to_json(rec.simp);
    r["po"] = to_json(rec.po);
    r["mc_model"] = to_json(rec.mc_model);
    if (rec.mc_run) {
      r["mc"] = json{{"probabilities", to_json(rec.mc.probabilities)},
                     {"standard_errors", to_json(rec.mc.standard_errors)},
                     {"counts", rec.mc.counts},
                     {"samples", rec.mc.samples}};
    }
    r["e_values"] = rec.e_values;
    r["s_values"] = rec.s_values;
    r["quantum_mismatch"] = rec.quantum_mismatch;
    records.push_back(std::move(r));
  }

  json report;
  report["command"] = "sweep";
  report["code_version"] = sweep.code_version;
  report["config_hash"] = hex64(sweep.config_hash);
  report["seeded"] = sweep.seeded;
  if (sweep.seeded) report["seed"] = sweep.seed_used;
  report["records"] = std::move(records);

  // Flat table: one gridpoint per row, column count fixed by the quad and
  // target lists so failed rows stay aligned.
  const std::size_t n_quads = spec.quads.size();
  const std::size_t n_targets = spec.quantum_targets.size();
  std::string csv;
  {
    std::vector<std::string> header = {"index",    "mass",     "ok",       "theta_A1",
                                       "theta_A2", "theta_B1", "theta_B2", "psi_minus"};
    for (const char* t : {"simp", "po", "mc_model", "mc"}) {
      for (const char* cell : {"pp", "pm", "mp", "mm"}) {
        header.push_back(std::string(t) + "_" + cell);
      }
    }
    for (std::size_t q = 0; q < n_quads; ++q) header.push_back("s_" + std::to_string(q));
    for (std::size_t t = 0; t < n_targets; ++t) {
      header.push_back("mismatch_" + std::to_string(t));
    }
    header.push_back("error");
    csv_row(csv, header);
  }
  for (const GridpointRecord& rec : sweep.records) {
    std::vector<std::string> cells = {std::to_string(rec.index), num(rec.mass),
                                      rec.ok ? "1" : "0"};
    if (rec.ok) {
      for (double v : {rec.theta_a1, rec.theta_a2, rec.theta_b1, rec.theta_b2,
                       rec.psi_minus}) {
        cells.push_back(num(v));
      }
      for (const OutcomeProbabilities* t : {&rec.simp, &rec.po, &rec.mc_model}) {
        for (double v : {t->pp, t->pm, t->mp, t->mm}) cells.push_back(num(v));
      }
      if (rec.mc_run) {
        const OutcomeProbabilities& p = rec.mc.probabilities;
        for (double v : {p.pp, p.pm, p.mp, p.mm}) cells.push_back(num(v));
      } else {
        for (int k = 0; k < 4; ++k) cells.push_back("");
      }
      for (double s : rec.s_values) cells.push_back(num(s));
      for (double m : rec.quantum_mismatch) cells.push_back(num(m));
      cells.push_back("");
    } else {
      for (std::size_t k = 0; k < 5 + 16 + n_quads + n_targets; ++k) cells.push_back("");
      cells.push_back(csv_safe(rec.error));
    }
    csv_row(csv, cells);
  }

  RunResult result;
  result.command = "sweep";
  result.tables.emplace_back("sweep.csv", std::move(csv));

  int failed = 0;
  for (const GridpointRecord& rec : sweep.records) failed += rec.ok ? 0 : 1;
  result.summary = std::to_string(sweep.records.size()) + " gridpoints, " +
                   std::to_string(failed) + " failed, hash=" + hex64(sweep.config_hash);

  if (config.sweep.psi.n_draws > 0) {
    if (!config.seed) {
      throw Error(ErrorCode::SeedRequired, "the empirical offset cloud needs a seed", "seed");
    }
    const EmpiricalPsi cloud =
        empirical_psi_distribution(config.scenario, config.sweep.psi.perturbation,
                                   config.sweep.psi.n_draws, *config.seed, config.threads);
    report["psi_cloud"] = json{{"draws", cloud.draws},
                               {"failures", cloud.failures},
                               {"distribution", to_json(cloud.distribution)}};
    std::string cloud_csv = "bin,angle,density\n";
    const auto& density = cloud.distribution.density();
    const double width = cloud.distribution.bin_width();
    for (std::size_t i = 0; i < density.size(); ++i) {
      csv_row(cloud_csv,
              {std::to_string(i), num(static_cast<double>(i) * width), num(density[i])});
    }
    result.tables.emplace_back("psi_density.csv", std::move(cloud_csv));
    std::string samples_csv = "draw,psi_minus\n";
    for (std::size_t i = 0; i < cloud.samples.size(); ++i) {
      csv_row(samples_csv, {std::to_string(i), num(cloud.samples[i])});
    }
    result.tables.emplace_back("psi_samples.csv", std::move(samples_csv));
    result.summary += "; cloud " + std::to_string(cloud.samples.size()) + " draws, " +
                      std::to_string(cloud.failures) + " failed";
  }

  result.report_json = report.dump(2);
  return result;
}

RunResult cmd_worldviews(const Config& config) {
  if (!config.has_worldviews) {
    throw Error(ErrorCode::ConfigError, "config has no worldviews block", "worldviews");
  }
  const WorldviewsCfg& cfg = config.worldviews;
  const std::string text = load_dag_text(cfg, config.base_dir);
  const ParsedDag parsed = parse_dag(text);
  const CausalDag& dag = parsed.dag;

  FieldConfigSpace space(dag, make_field_specs(cfg, parsed));
  if (!cfg.observer_field.empty()) space.set_observer_field(cfg.observer_field);
  apply_copies(cfg, space);
  const FieldConfigSpace::Config truth = assemble_truth(cfg, space);
  const std::vector<int> chain = resolve_chain(cfg, dag);

  const Worldview start = build_worldview(dag, space, truth, chain.front(), cfg.state_cap);
  std::vector<double> base = cfg.weights;
  if (base.empty()) {
    base.assign(start.omega.size(), 1.0);
  } else if (base.size() != start.omega.size()) {
    throw Error(ErrorCode::ConfigError,
                "weights must have one entry per configuration at the chain start (" +
                    std::to_string(start.omega.size()) + ")",
                "worldviews.weights");
  }

  ConsistencyOptions options;
  options.tolerance = cfg.tolerance;
  options.state_cap = cfg.state_cap;
  const ConsistencyReport consistency =
      check_consistency(dag, space, truth, chain, base, options);

  json points = json::array();
  std::string omega_csv = "index,name,omega\n";
  for (int p = 0; p < dag.size(); ++p) {
    const Worldview view = build_worldview(dag, space, truth, p, cfg.state_cap);
    points.push_back(json{{"index", p}, {"name", dag.names()[p]},
                          {"omega", view.omega.size()}});
    csv_row(omega_csv,
            {std::to_string(p), dag.names()[p], std::to_string(view.omega.size())});
  }

  json chain_names = json::array();
  for (int p : chain) chain_names.push_back(dag.names()[p]);

  json counterexamples = json::array();
  for (const ConsistencyCounterexample& c : consistency.counterexamples) {
    counterexamples.push_back(json{{"condition", c.condition},
                                   {"description", c.description},
                                   {"lhs", c.lhs},
                                   {"rhs", c.rhs}});
  }

  json report;
  report["command"] = "worldviews";
  report["code_version"] = kCodeVersion;
  report["points"] = std::move(points);
  report["chain"] = std::move(chain_names);
  report["consistency"] = json{
      {"spacelike_independence", consistency.spacelike_independence},
      {"filtration_consistency", consistency.filtration_consistency},
      {"conditional_independence", consistency.conditional_independence},
      {"all_pass", consistency.all_pass()},
      {"checks", json::array({consistency.checks_condition1, consistency.checks_condition2,
                              consistency.checks_condition3})},
      {"zero_mass_conditionings", consistency.zero_mass_conditionings},
      {"counterexamples", std::move(counterexamples)}};

  if (!cfg.outcome_field_1.empty()) {
    const MeasurementReport m = measurement_scenario(dag, space, truth, cfg.outcome_field_1,
                                                     cfg.outcome_field_2, cfg.state_cap);
    report["measurement"] = json{{"p0", dag.names()[m.p0]},
                                 {"p1", dag.names()[m.p1]},
                                 {"p2", dag.names()[m.p2]},
                                 {"partitions_valid", m.partitions_valid},
                                 {"partitions_equal", m.partitions_equal},
                                 {"omega", m.omega_size},
                                 {"e1_plus", m.e1_plus.members.size()},
                                 {"e2_plus", m.e2_plus.members.size()}};
  }

  if (cfg.functor) {
    const EventAlgebraFunctor functor = event_algebra_functor(dag, space, truth, cfg.state_cap);
    report["functor"] = json{{"order_reversal_holds", functor.order_reversal_holds},
                             {"omega_sizes", functor.omega_sizes}};
  }

  RunResult result;
  result.command = "worldviews";
  result.report_json = report.dump(2);
  result.tables.emplace_back("omega_sizes.csv", std::move(omega_csv));
  result.summary = std::string("consistency ") +
                   (consistency.all_pass() ? "pass" : "FAIL") + " (" +
                   std::to_string(consistency.checks_condition1) + "/" +
                   std::to_string(consistency.checks_condition2) + "/" +
                   std::to_string(consistency.checks_condition3) + " checks), |Omega|=" +
                   std::to_string(start.omega.size()) + " at " + dag.names()[chain.front()];
  return result;
}

}  // namespace

RunResult run_command(const Config& config, const std::string& command) {
  if (command == "validate") return cmd_validate(config);
  if (command == "geometry") return cmd_geometry(config);
  if (command == "probabilities") return cmd_probabilities(config);
  if (command == "inverse") return cmd_inverse(config);
  if (command == "sweep") return cmd_sweep(config);
  if (command == "worldviews") return cmd_worldviews(config);
  throw Error(ErrorCode::ConfigError, "unknown command: " + command, "command");
}

void write_outputs(const RunResult& result, const std::string& directory, bool write_json,
                   bool write_csv) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create output directory: " + directory);
  }
  auto write_file = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(directory) / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
  };
  if (write_json) write_file("report.json", result.report_json + "\n");
  if (write_csv) {
    for (const auto& [name, content] : result.tables) write_file(name, content);
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
      return 2;
    case ErrorCode::DegenerateMetric:
    case ErrorCode::IntegrationDiverged:
    case ErrorCode::WrongCausalType:
    case ErrorCode::BaseMismatch:
    case ErrorCode::OrthogonalProjection:
    case ErrorCode::OpenLoop:
    case ErrorCode::ChartEscape:
    case ErrorCode::NoInterception:
      return 3;
    case ErrorCode::ResolutionTooLow:
    case ErrorCode::SeedRequired:
      return 4;
    case ErrorCode::NoConvergence:
    case ErrorCode::EmptyTargets:
      return 5;
    case ErrorCode::UnknownPoint:
    case ErrorCode::UnknownField:
    case ErrorCode::CycleDetected:
    case ErrorCode::StateSpaceTooLarge:
    case ErrorCode::PosetTooLarge:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::ZeroConditioningMass:
      return 6;
    case ErrorCode::TooManyFailures:
      return 7;
    case ErrorCode::Internal:
      return 1;
  }
  return 1;
}

std::string error_json(const Error& e) {
  json payload;
  payload["error"] = error_name(e.code());
  payload["message"] = e.what();
  if (!e.field().empty()) payload["field"] = e.field();
  payload["exit"] = exit_code_for(e.code());
  return payload.dump();
}

}  // namespace cchsh
