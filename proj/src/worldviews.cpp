#include "worldviews.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

namespace cchsh {

namespace {

constexpr int kMaxPoints = 64;

std::string point_label(const CausalDag& dag, int p) {
  const auto& names = dag.names();
  if (p >= 0 && p < static_cast<int>(names.size()) && !names[p].empty()) return names[p];
  return "p" + std::to_string(p);
}

void require_point(const CausalDag& dag, int p, const char* what) {
  if (p < 0 || p >= dag.size()) {
    throw Error(ErrorCode::UnknownPoint,
                std::string(what) + " refers to point " + std::to_string(p) + " outside [0, " +
                    std::to_string(dag.size()) + ")");
  }
}

}  // namespace

CausalDag CausalDag::from_edges(int n_points, std::span<const std::pair<int, int>> edges) {
  if (n_points <= 0) {
    throw Error(ErrorCode::ConfigError, "causal order needs at least one point", "dag");
  }
  if (n_points > kMaxPoints) {
    throw Error(ErrorCode::PosetTooLarge, "causal order limited to " +
                                              std::to_string(kMaxPoints) + " points, got " +
                                              std::to_string(n_points));
  }
  std::vector<std::vector<int>> succ(n_points);
  std::vector<int> indegree(n_points, 0);
  for (const auto& [p, q] : edges) {
    if (p < 0 || p >= n_points || q < 0 || q >= n_points) {
      throw Error(ErrorCode::UnknownPoint, "edge (" + std::to_string(p) + ", " +
                                               std::to_string(q) + ") leaves the point range");
    }
    if (p == q) {
      throw Error(ErrorCode::CycleDetected,
                  "self edge at point " + std::to_string(p) + " breaks irreflexivity");
    }
    succ[p].push_back(q);
    ++indegree[q];
  }

  // Kahn order; anything left over sits on a cycle.
  std::vector<int> order;
  order.reserve(n_points);
  std::vector<int> ready;
  for (int p = 0; p < n_points; ++p) {
    if (indegree[p] == 0) ready.push_back(p);
  }
  while (!ready.empty()) {
    const int p = ready.back();
    ready.pop_back();
    order.push_back(p);
    for (int q : succ[p]) {
      if (--indegree[q] == 0) ready.push_back(q);
    }
  }
  if (static_cast<int>(order.size()) != n_points) {
    throw Error(ErrorCode::CycleDetected, "edge list contains a causal cycle");
  }

  CausalDag dag;
  dag.past_.assign(n_points, 0);
  for (int p : order) {
    std::uint64_t past = std::uint64_t{1} << p;
    // order is topological, so predecessors are already complete; a second
    // pass over the edges keeps this O(E) per point without storing preds.
    for (int u = 0; u < n_points; ++u) {
      for (int q : succ[u]) {
        if (q == p) past |= dag.past_[u];
      }
    }
    dag.past_[p] = past;
  }
  dag.names_.resize(n_points);
  for (int p = 0; p < n_points; ++p) dag.names_[p] = "p" + std::to_string(p);
  return dag;
}

bool CausalDag::leq(int p, int q) const {
  require_point(*this, p, "leq");
  require_point(*this, q, "leq");
  return (past_[q] >> p) & 1u;
}

std::uint64_t CausalDag::past_mask(int p) const {
  require_point(*this, p, "past");
  return past_[p];
}

std::vector<int> CausalDag::causal_past(int p) const {
  const std::uint64_t mask = past_mask(p);
  std::vector<int> out;
  for (int q = 0; q < size(); ++q) {
    if ((mask >> q) & 1u) out.push_back(q);
  }
  return out;
}

std::vector<int> CausalDag::maximal_points() const {
  std::uint64_t has_future = 0;
  for (int q = 0; q < size(); ++q) {
    has_future |= past_[q] & ~(std::uint64_t{1} << q);
  }
  std::vector<int> out;
  for (int p = 0; p < size(); ++p) {
    if (!((has_future >> p) & 1u)) out.push_back(p);
  }
  return out;
}

bool CausalDag::is_chain(std::span<const int> points) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (!comparable(points[i], points[j])) return false;
    }
  }
  return true;
}

void CausalDag::set_names(std::vector<std::string> names) {
  if (static_cast<int>(names.size()) != size()) {
    throw Error(ErrorCode::ConfigError, "name list length does not match point count", "dag");
  }
  names_ = std::move(names);
}

ParsedDag parse_dag(const std::string& text) {
  std::unordered_map<std::string, int> index;
  std::vector<std::string> names;
  std::vector<std::pair<int, int>> edges;
  std::map<int, int> explicit_sizes;
  int default_size = 2;

  auto lookup = [&](const std::string& token) {
    auto it = index.find(token);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(names.size());
    index.emplace(token, id);
    names.push_back(token);
    return id;
  };
  auto parse_size = [](const std::string& token, int line_no) {
    int value = 0;
    const auto* begin = token.data();
    const auto* end = begin + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || value < 1 || value > 1'000'000) {
      throw Error(ErrorCode::ConfigError,
                  "line " + std::to_string(line_no) + ": alphabet size must be a positive integer",
                  "dag");
    }
    return value;
  };

  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::vector<std::string> tokens;
    for (std::string w; words >> w;) tokens.push_back(std::move(w));
    if (tokens.empty()) continue;

    if (tokens[0] == "point" && tokens.size() == 2) {
      lookup(tokens[1]);
    } else if (tokens[0] == "alphabet" && tokens.size() == 3) {
      const int size = parse_size(tokens[2], line_no);
      if (tokens[1] == "*") {
        default_size = size;
      } else {
        explicit_sizes[lookup(tokens[1])] = size;
      }
    } else if (tokens.size() == 2) {
      const int p = lookup(tokens[0]);
      const int q = lookup(tokens[1]);
      edges.emplace_back(p, q);
    } else {
      throw Error(ErrorCode::ConfigError,
                  "line " + std::to_string(line_no) +
                      ": expected an edge \"p q\", \"point p\", or \"alphabet p n\"",
                  "dag");
    }
  }
  if (names.empty()) {
    throw Error(ErrorCode::ConfigError, "empty causal order description", "dag");
  }

  ParsedDag parsed;
  parsed.dag = CausalDag::from_edges(static_cast<int>(names.size()), edges);
  parsed.dag.set_names(names);
  parsed.alphabet_sizes.assign(names.size(), default_size);
  for (const auto& [p, size] : explicit_sizes) parsed.alphabet_sizes[p] = size;
  return parsed;
}

FieldConfigSpace::FieldConfigSpace(const CausalDag& dag, std::vector<FieldSpec> fields)
    : dag_(&dag), fields_(std::move(fields)) {
  for (const auto& f : fields_) {
    if (f.name.empty()) {
      throw Error(ErrorCode::ConfigError, "field names must be non-empty", "fields");
    }
    if (static_cast<int>(f.sizes.size()) != dag.size()) {
      throw Error(ErrorCode::ConfigError,
                  "field '" + f.name + "' needs one alphabet size per point", "fields");
    }
    for (int size : f.sizes) {
      if (size < 1) {
        throw Error(ErrorCode::ConfigError,
                    "field '" + f.name + "' has an empty alphabet", "fields");
      }
    }
  }
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    for (std::size_t j = i + 1; j < fields_.size(); ++j) {
      if (fields_[i].name == fields_[j].name) {
        throw Error(ErrorCode::ConfigError,
                    "duplicate field name '" + fields_[i].name + "'", "fields");
      }
    }
  }
  rebuild_strides();
}

FieldConfigSpace FieldConfigSpace::uniform(const CausalDag& dag, const std::string& field_name,
                                           int alphabet_size) {
  FieldSpec spec;
  spec.name = field_name;
  spec.sizes.assign(dag.size(), alphabet_size);
  std::vector<FieldSpec> fields;
  fields.push_back(std::move(spec));
  return FieldConfigSpace(dag, std::move(fields));
}

int FieldConfigSpace::field_index(const std::string& name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return static_cast<int>(i);
  }
  throw Error(ErrorCode::UnknownField, "no field named '" + name + "'");
}

void FieldConfigSpace::add_field(FieldSpec field) {
  std::vector<FieldSpec> all = fields_;
  all.push_back(std::move(field));
  *this = FieldConfigSpace(*dag_, std::move(all));
}

void FieldConfigSpace::set_observer_field(const std::string& name) {
  const int f = field_index(name);
  for (int p = 0; p < n_points(); ++p) {
    if (fields_[f].sizes[p] != 2) {
      throw Error(ErrorCode::ShapeMismatch,
                  "observer indicator '" + name + "' must be binary everywhere");
    }
  }
  observer_field_ = f;
}

void FieldConfigSpace::set_constraint(Constraint constraint) {
  constraint_ = std::move(constraint);
}

void FieldConfigSpace::rebuild_strides() {
  strides_.assign(n_cells(), 1);
  unsigned __int128 total = 1;
  for (int c = 0; c < n_cells(); ++c) {
    strides_[c] = static_cast<std::uint64_t>(total);
    total *= static_cast<unsigned>(fields_[c / n_points()].sizes[c % n_points()]);
    if (total > static_cast<unsigned __int128>(UINT64_MAX)) {
      throw Error(ErrorCode::StateSpaceTooLarge,
                  "configuration codes do not fit in 64 bits");
    }
  }
}

std::uint64_t FieldConfigSpace::encode(const Config& config) const {
  if (static_cast<int>(config.size()) != n_cells()) {
    throw Error(ErrorCode::ConfigError, "configuration length does not match the cell count");
  }
  std::uint64_t code = 0;
  for (int c = 0; c < n_cells(); ++c) {
    const int size = fields_[c / n_points()].sizes[c % n_points()];
    if (config[c] < 0 || config[c] >= size) {
      throw Error(ErrorCode::ConfigError, "configuration value out of alphabet range");
    }
    code += static_cast<std::uint64_t>(config[c]) * strides_[c];
  }
  return code;
}

FieldConfigSpace::Config FieldConfigSpace::decode(std::uint64_t code) const {
  Config config(n_cells(), 0);
  for (int c = n_cells() - 1; c >= 0; --c) {
    config[c] = static_cast<int>(code / strides_[c]);
    code %= strides_[c];
  }
  for (int c = 0; c < n_cells(); ++c) {
    const int size = fields_[c / n_points()].sizes[c % n_points()];
    if (config[c] >= size) {
      throw Error(ErrorCode::ConfigError, "configuration code out of range");
    }
  }
  return config;
}

bool FieldConfigSpace::in_alphabets(const Config& config) const {
  if (static_cast<int>(config.size()) != n_cells()) return false;
  for (int c = 0; c < n_cells(); ++c) {
    const int size = fields_[c / n_points()].sizes[c % n_points()];
    if (config[c] < 0 || config[c] >= size) return false;
  }
  return true;
}

bool FieldConfigSpace::valid(const Config& config) const {
  if (!in_alphabets(config)) return false;
  if (observer_field_) {
    std::vector<int> support;
    for (int p = 0; p < n_points(); ++p) {
      if (config[cell(*observer_field_, p)] == 1) support.push_back(p);
    }
    if (!dag_->is_chain(support)) return false;
  }
  if (constraint_ && !constraint_(*dag_, *this, config)) return false;
  return true;
}

Worldview build_worldview(const CausalDag& dag, const FieldConfigSpace& space,
                          const FieldConfigSpace::Config& true_config, int p,
                          std::size_t state_cap) {
  require_point(dag, p, "worldview");
  if (!space.in_alphabets(true_config)) {
    throw Error(ErrorCode::ConfigError, "true configuration leaves the alphabets");
  }
  if (!space.valid(true_config)) {
    throw Error(ErrorCode::ConfigError, "true configuration violates the validity constraint");
  }

  const std::uint64_t past = dag.past_mask(p);
  std::vector<int> free_cells;
  std::size_t count = 1;
  for (int f = 0; f < space.n_fields(); ++f) {
    for (int q = 0; q < space.n_points(); ++q) {
      if ((past >> q) & 1u) continue;
      free_cells.push_back(space.cell(f, q));
      const std::size_t size = static_cast<std::size_t>(space.cell_size(f, q));
      if (count > state_cap / size + 1) {
        throw Error(ErrorCode::StateSpaceTooLarge,
                    "sample space at " + point_label(dag, p) + " exceeds the cap of " +
                        std::to_string(state_cap) + " configurations");
      }
      count *= size;
    }
  }
  if (count > state_cap) {
    throw Error(ErrorCode::StateSpaceTooLarge,
                "sample space at " + point_label(dag, p) + " exceeds the cap of " +
                    std::to_string(state_cap) + " configurations");
  }

  Worldview wv;
  wv.space = &space;
  wv.point = p;

  // Odometer over the free cells; everything on the past keeps its true value.
  FieldConfigSpace::Config config = true_config;
  for (int c : free_cells) config[c] = 0;
  while (true) {
    if (space.valid(config)) wv.omega.push_back(space.encode(config));
    std::size_t i = 0;
    for (; i < free_cells.size(); ++i) {
      const int c = free_cells[i];
      const int size = space.cell_size(c / space.n_points(), c % space.n_points());
      if (config[c] + 1 < size) {
        ++config[c];
        break;
      }
      config[c] = 0;
    }
    if (i == free_cells.size()) break;
  }
  std::sort(wv.omega.begin(), wv.omega.end());
  return wv;
}

Event event(const Worldview& worldview, const std::string& field_name,
            std::span<const int> region, std::span<const int> values) {
  const FieldConfigSpace& space = *worldview.space;
  const int f = space.field_index(field_name);
  if (region.size() != values.size()) {
    throw Error(ErrorCode::ConfigError, "event region and value lists differ in length");
  }
  Event out;
  for (std::size_t i = 0; i < region.size(); ++i) {
    require_point(space.dag(), region[i], "event region");
    out.support_mask |= std::uint64_t{1} << region[i];
  }
  for (std::uint64_t code : worldview.omega) {
    const auto config = space.decode(code);
    bool match = true;
    for (std::size_t i = 0; i < region.size(); ++i) {
      if (config[space.cell(f, region[i])] != values[i]) {
        match = false;
        break;
      }
    }
    if (match) out.members.push_back(code);
  }
  return out;
}

Event event_and(const Event& a, const Event& b) {
  Event out;
  out.support_mask = a.support_mask | b.support_mask;
  std::set_intersection(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
                        std::back_inserter(out.members));
  return out;
}

Event event_or(const Event& a, const Event& b) {
  Event out;
  out.support_mask = a.support_mask | b.support_mask;
  std::set_union(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
                 std::back_inserter(out.members));
  return out;
}

Event event_not(const Worldview& worldview, const Event& a) {
  Event out;
  out.support_mask = a.support_mask;
  std::set_difference(worldview.omega.begin(), worldview.omega.end(), a.members.begin(),
                      a.members.end(), std::back_inserter(out.members));
  return out;
}

namespace {

double total_weight(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::ConfigError, "measure weights must be finite and non-negative");
    }
    total += w;
  }
  return total;
}

double member_mass(const Worldview& worldview, std::span<const double> weights, const Event& e) {
  if (weights.size() != worldview.omega.size()) {
    throw Error(ErrorCode::ConfigError, "weight vector does not align with the sample space");
  }
  double mass = 0.0;
  std::size_t i = 0;
  for (std::uint64_t code : e.members) {
    while (i < worldview.omega.size() && worldview.omega[i] < code) ++i;
    if (i == worldview.omega.size()) break;
    if (worldview.omega[i] == code) mass += weights[i];
  }
  return mass;
}

}  // namespace

double event_probability(const Worldview& worldview, std::span<const double> weights,
                         const Event& e) {
  const double total = total_weight(weights);
  if (total <= 0.0) {
    throw Error(ErrorCode::ZeroConditioningMass, "measure has zero total mass");
  }
  return member_mass(worldview, weights, e) / total;
}

double conditional_probability(const Worldview& worldview, std::span<const double> weights,
                               const Event& a, const Event& given) {
  const double total = total_weight(weights);
  if (total <= 0.0) {
    throw Error(ErrorCode::ZeroConditioningMass, "measure has zero total mass");
  }
  const double mass_given = member_mass(worldview, weights, given);
  if (mass_given <= 0.0) {
    throw Error(ErrorCode::ZeroConditioningMass, "conditioning event has zero mass");
  }
  return member_mass(worldview, weights, event_and(a, given)) / mass_given;
}

ChainMeasures derive_chain_measures(const CausalDag& dag, const FieldConfigSpace& space,
                                    const FieldConfigSpace::Config& true_config,
                                    std::span<const int> chain,
                                    std::span<const double> base_weights,
                                    std::size_t state_cap) {
  if (chain.empty()) {
    throw Error(ErrorCode::ConfigError, "observer chain is empty", "chain");
  }
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (chain[i] == chain[i + 1] || !dag.leq(chain[i], chain[i + 1])) {
      throw Error(ErrorCode::ConfigError, "observer chain must be strictly causally ordered",
                  "chain");
    }
  }

  ChainMeasures out;
  out.views.reserve(chain.size());
  for (int p : chain) out.views.push_back(build_worldview(dag, space, true_config, p, state_cap));
  const Worldview& base = out.views.front();
  if (base_weights.size() != base.omega.size()) {
    throw Error(ErrorCode::ConfigError, "base weights do not align with the first sample space");
  }
  (void)total_weight(base_weights);

  out.weights.emplace_back(base_weights.begin(), base_weights.end());
  for (std::size_t i = 1; i < chain.size(); ++i) {
    const Worldview& view = out.views[i];
    std::vector<double> restricted(view.omega.size(), 0.0);
    std::size_t j = 0;
    for (std::size_t k = 0; k < view.omega.size(); ++k) {
      while (j < base.omega.size() && base.omega[j] < view.omega[k]) ++j;
      if (j < base.omega.size() && base.omega[j] == view.omega[k]) restricted[k] = base_weights[j];
    }
    out.weights.push_back(std::move(restricted));
  }
  return out;
}

namespace {

// Singleton events (one field value at one point) are the test family for the
// consistency conditions; cache them per worldview.
struct SingletonEvents {
  const Worldview* view;
  std::vector<Event> events;  // indexed by cell-major (field, point, value)
  std::vector<int> offsets;

  SingletonEvents(const Worldview& wv) : view(&wv) {
    const FieldConfigSpace& space = *wv.space;
    offsets.assign(space.n_cells() + 1, 0);
    for (int c = 0; c < space.n_cells(); ++c) {
      offsets[c + 1] = offsets[c] + space.cell_size(c / space.n_points(), c % space.n_points());
    }
    events.resize(offsets.back());
    for (int f = 0; f < space.n_fields(); ++f) {
      for (int p = 0; p < space.n_points(); ++p) {
        const int c = space.cell(f, p);
        for (int v = 0; v < space.cell_size(f, p); ++v) {
          const int point[] = {p};
          const int value[] = {v};
          events[offsets[c] + v] = event(wv, space.field(f).name, point, value);
        }
      }
    }
  }

  const Event& at(int f, int p, int v) const {
    const int c = f * (view->space->n_points()) + p;
    return events[offsets[c] + v];
  }
};

std::string value_clause(const FieldConfigSpace& space, const CausalDag& dag, int f, int p,
                         int v) {
  return space.field(f).name + "(" + point_label(dag, p) + ") = " + std::to_string(v);
}

}  // namespace

ConsistencyReport check_consistency(const CausalDag& dag, const FieldConfigSpace& space,
                                    const FieldConfigSpace::Config& true_config,
                                    std::span<const int> chain, const ChainMeasures& measures,
                                    const ConsistencyOptions& options) {
  if (chain.empty() || measures.views.size() != chain.size() ||
      measures.weights.size() != chain.size()) {
    throw Error(ErrorCode::ConfigError, "chain and measures must align", "chain");
  }
  if (!dag.is_chain(chain)) {
    throw Error(ErrorCode::ConfigError, "observer points must form a chain", "chain");
  }

  ConsistencyReport report;
  const Worldview& ambient = measures.views.front();
  const std::span<const double> w0(measures.weights.front());
  if (total_weight(w0) <= 0.0) {
    throw Error(ErrorCode::ZeroConditioningMass, "base measure has zero total mass");
  }
  const SingletonEvents singles(ambient);
  const int n = dag.size();

  // Spacelike pairs drive conditions 1 and 3.
  std::vector<std::pair<int, int>> spacelike;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (!dag.comparable(u, v)) spacelike.emplace_back(u, v);
    }
  }

  auto fail = [&](int condition, std::string description, double lhs, double rhs) {
    if (condition == 1) report.spacelike_independence = false;
    if (condition == 2) report.filtration_consistency = false;
    if (condition == 3) report.conditional_independence = false;
    report.counterexamples.push_back({condition, std::move(description), lhs, rhs});
  };

  for (const auto& [u, v] : spacelike) {
    // Joint-past event for condition 3: every field pinned to its true value
    // on J-(u) and J-(v) jointly.
    const std::uint64_t joint = dag.past_mask(u) & dag.past_mask(v);
    std::vector<int> region;
    for (int q = 0; q < n; ++q) {
      if ((joint >> q) & 1u) region.push_back(q);
    }
    Event joint_event{std::vector<std::uint64_t>(ambient.omega), 0};
    for (int f = 0; f < space.n_fields(); ++f) {
      std::vector<int> values;
      values.reserve(region.size());
      for (int q : region) values.push_back(true_config[space.cell(f, q)]);
      joint_event = event_and(joint_event, event(ambient, space.field(f).name, region, values));
    }
    const double joint_mass = event_probability(ambient, w0, joint_event);
    const bool joint_usable = joint_mass > 0.0;
    if (!joint_usable) ++report.zero_mass_conditionings;

    for (int f = 0; f < space.n_fields(); ++f) {
      for (int g = 0; g < space.n_fields(); ++g) {
        for (int a = 0; a < space.cell_size(f, u); ++a) {
          for (int b = 0; b < space.cell_size(g, v); ++b) {
            const Event& A = singles.at(f, u, a);
            const Event& B = singles.at(g, v, b);
            const std::string clause = value_clause(space, dag, f, u, a) + " and " +
                                       value_clause(space, dag, g, v, b);

            ++report.checks_condition1;
            const double pa = event_probability(ambient, w0, A);
            const double pb = event_probability(ambient, w0, B);
            const double pab = event_probability(ambient, w0, event_and(A, B));
            if (std::abs(pab - pa * pb) > options.tolerance) {
              fail(1, "P(" + clause + ") differs from the product", pab, pa * pb);
            }

            if (joint_usable) {
              ++report.checks_condition3;
              const double ca = conditional_probability(ambient, w0, A, joint_event);
              const double cb = conditional_probability(ambient, w0, B, joint_event);
              const double cab =
                  conditional_probability(ambient, w0, event_and(A, B), joint_event);
              if (std::abs(cab - ca * cb) > options.tolerance) {
                fail(3, "P(" + clause + " | joint past) differs from the product", cab, ca * cb);
              }
            }
          }
        }
      }
    }
  }

  // Condition 2: along the chain, the later measure must equal the earlier
  // one conditioned on the knowledge gained in between.
  for (std::size_t i = 0; i < chain.size(); ++i) {
    for (std::size_t j = i + 1; j < chain.size(); ++j) {
      const Worldview& early = measures.views[i];
      const Worldview& late = measures.views[j];
      const std::span<const double> wi(measures.weights[i]);
      const std::span<const double> wj(measures.weights[j]);

      double early_total = 0.0;
      for (double w : wi) early_total += w;
      double late_total = 0.0;
      for (double w : wj) late_total += w;
      if (early_total <= 0.0 || late_total <= 0.0) {
        ++report.zero_mass_conditionings;
        continue;
      }

      const Event gained{std::vector<std::uint64_t>(late.omega), dag.past_mask(chain[j])};
      const double gained_mass = event_probability(early, wi, gained);
      if (gained_mass <= 0.0) {
        ++report.zero_mass_conditionings;
        continue;
      }

      const std::uint64_t late_past = dag.past_mask(chain[j]);
      for (int f = 0; f < space.n_fields(); ++f) {
        for (int q = 0; q < n; ++q) {
          if ((late_past >> q) & 1u) continue;
          for (int v = 0; v < space.cell_size(f, q); ++v) {
            const int point[] = {q};
            const int value[] = {v};
            const Event A = event(late, space.field(f).name, point, value);
            ++report.checks_condition2;
            const double later = event_probability(late, wj, A);
            const double conditioned = conditional_probability(early, wi, A, gained);
            if (std::abs(later - conditioned) > options.tolerance) {
              fail(2,
                   "P_" + point_label(dag, chain[j]) + "(" + value_clause(space, dag, f, q, v) +
                       ") differs from P_" + point_label(dag, chain[i]) +
                       " conditioned on the gained past",
                   later, conditioned);
            }
          }
        }
      }
    }
  }

  return report;
}

ConsistencyReport check_consistency(const CausalDag& dag, const FieldConfigSpace& space,
                                    const FieldConfigSpace::Config& true_config,
                                    std::span<const int> chain,
                                    std::span<const double> base_weights,
                                    const ConsistencyOptions& options) {
  const ChainMeasures measures =
      derive_chain_measures(dag, space, true_config, chain, base_weights, options.state_cap);
  return check_consistency(dag, space, true_config, chain, measures, options);
}

MeasurementReport measurement_scenario(const CausalDag& dag, const FieldConfigSpace& space,
                                       const FieldConfigSpace::Config& true_config,
                                       const std::string& outcome_field_1,
                                       const std::string& outcome_field_2,
                                       std::size_t state_cap) {
  const auto maximal = dag.maximal_points();
  if (maximal.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch,
                "measurement shape needs exactly two maximal points, found " +
                    std::to_string(maximal.size()));
  }
  const int p1 = maximal[0];
  const int p2 = maximal[1];
  const std::uint64_t common = dag.past_mask(p1) & dag.past_mask(p2);
  if (common == 0) {
    throw Error(ErrorCode::ShapeMismatch, "measurement points share no causal past");
  }
  int p0 = -1;
  for (int m = 0; m < dag.size(); ++m) {
    if (((common >> m) & 1u) && (common & ~dag.past_mask(m)) == 0) {
      p0 = m;
      break;
    }
  }
  if (p0 < 0) {
    throw Error(ErrorCode::ShapeMismatch, "joint past has no latest point");
  }

  const int f1 = space.field_index(outcome_field_1);
  const int f2 = space.field_index(outcome_field_2);
  if (space.cell_size(f1, p1) != 2 || space.cell_size(f2, p2) != 2) {
    throw Error(ErrorCode::ShapeMismatch, "outcome fields must be binary at the readout points");
  }

  const Worldview wv = build_worldview(dag, space, true_config, p0, state_cap);
  MeasurementReport report;
  report.p0 = p0;
  report.p1 = p1;
  report.p2 = p2;
  report.omega_size = wv.omega.size();
  const int r1[] = {p1};
  const int r2[] = {p2};
  const int plus[] = {1};
  const int minus[] = {0};
  report.e1_plus = event(wv, outcome_field_1, r1, plus);
  report.e1_minus = event(wv, outcome_field_1, r1, minus);
  report.e2_plus = event(wv, outcome_field_2, r2, plus);
  report.e2_minus = event(wv, outcome_field_2, r2, minus);

  auto partitions = [&](const Event& pos, const Event& neg) {
    return event_and(pos, neg).members.empty() &&
           event_or(pos, neg).members.size() == wv.omega.size();
  };
  report.partitions_valid =
      partitions(report.e1_plus, report.e1_minus) && partitions(report.e2_plus, report.e2_minus);
  report.partitions_equal = report.e1_plus.members == report.e2_plus.members;
  return report;
}

Poset Poset::from_relation(int n, std::span<const std::pair<int, int>> pairs) {
  const CausalDag dag = CausalDag::from_edges(n, pairs);
  Poset poset;
  poset.below.resize(n);
  for (int p = 0; p < n; ++p) poset.below[p] = dag.past_mask(p);
  return poset;
}

Poset Poset::from_dag(const CausalDag& dag) {
  Poset poset;
  poset.below.resize(dag.size());
  for (int p = 0; p < dag.size(); ++p) poset.below[p] = dag.past_mask(p);
  return poset;
}

Poset Poset::reversed() const {
  Poset rev;
  rev.below.assign(size(), 0);
  for (int a = 0; a < size(); ++a) {
    for (int b = 0; b < size(); ++b) {
      if (leq(b, a)) rev.below[b] |= std::uint64_t{1} << a;
    }
  }
  return rev;
}

SieveAlgebra::SieveAlgebra(const Poset& poset, int element, int size_cap) {
  if (element < 0 || element >= poset.size()) {
    throw Error(ErrorCode::UnknownPoint, "sieve base element outside the poset");
  }
  for (int x = 0; x < poset.size(); ++x) {
    if (poset.leq(x, element)) elements_.push_back(x);
  }
  const int k = static_cast<int>(elements_.size());
  if (k > size_cap || k > 31) {
    throw Error(ErrorCode::PosetTooLarge, "down-set of the base element has " +
                                              std::to_string(k) + " elements, cap is " +
                                              std::to_string(std::min(size_cap, 31)));
  }

  down_.assign(k, 0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (poset.leq(elements_[j], elements_[i])) down_[i] |= std::uint32_t{1} << j;
    }
  }
  full_ = k == 0 ? 0 : (std::uint32_t{1} << k) - 1;

  for (std::uint32_t mask = 0; mask <= full_; ++mask) {
    bool closed = true;
    for (int i = 0; i < k && closed; ++i) {
      if ((mask >> i) & 1u) closed = (down_[i] & ~mask) == 0;
    }
    if (closed) sieves_.push_back(mask);
  }
}

bool SieveAlgebra::is_sieve(std::uint32_t mask) const {
  if (mask & ~full_) return false;
  for (std::size_t i = 0; i < down_.size(); ++i) {
    if ((mask >> i) & 1u) {
      if (down_[i] & ~mask) return false;
    }
  }
  return true;
}

void SieveAlgebra::require_sieve(std::uint32_t mask, const char* role) const {
  if (!is_sieve(mask)) {
    throw Error(ErrorCode::ConfigError,
                std::string(role) + " operand is not a sieve of this algebra");
  }
}

std::uint32_t SieveAlgebra::meet(std::uint32_t a, std::uint32_t b) const {
  require_sieve(a, "meet");
  require_sieve(b, "meet");
  return a & b;
}

std::uint32_t SieveAlgebra::join(std::uint32_t a, std::uint32_t b) const {
  require_sieve(a, "join");
  require_sieve(b, "join");
  return a | b;
}

std::uint32_t SieveAlgebra::implies(std::uint32_t a, std::uint32_t b) const {
  require_sieve(a, "implication");
  require_sieve(b, "implication");
  std::uint32_t out = 0;
  for (std::size_t i = 0; i < down_.size(); ++i) {
    if ((down_[i] & a & ~b) == 0) out |= std::uint32_t{1} << i;
  }
  return out;
}

EventAlgebraFunctor event_algebra_functor(const CausalDag& dag, const FieldConfigSpace& space,
                                          const FieldConfigSpace::Config& true_config,
                                          std::size_t state_cap) {
  EventAlgebraFunctor out;
  out.algebra_poset = Poset::from_dag(dag).reversed();

  std::vector<Worldview> views;
  views.reserve(dag.size());
  for (int p = 0; p < dag.size(); ++p) {
    views.push_back(build_worldview(dag, space, true_config, p, state_cap));
    out.omega_sizes.push_back(views.back().omega.size());
  }

  out.order_reversal_holds = true;
  for (int p = 0; p < dag.size(); ++p) {
    for (int q = 0; q < dag.size(); ++q) {
      if (p == q || !dag.leq(p, q)) continue;
      const bool contained = std::includes(views[p].omega.begin(), views[p].omega.end(),
                                           views[q].omega.begin(), views[q].omega.end());
      if (!contained) out.order_reversal_holds = false;
    }
  }
  return out;
}

}  // namespace cchsh
