// cchsh - finite causal orders, per-point sample spaces, and sieve algebras
//
// The continuum story is discretized onto a finite DAG of spacetime points.
// Each point carries finite value alphabets for a collection of named fields;
// a global configuration assigns one value to every (field, point) cell. What
// an observer sitting at p can know is the restriction of the true
// configuration to the causal past J-(p), so the sample space at p is the set
// of global configurations that agree with the truth there. Those sets nest
// against the causal order: moving forward can only shrink them, and the
// event algebras (full power sets here) shrink along. Sieve algebras over the
// resulting algebra poset supply the intuitionistic logic layer.
//
// Everything is immutable after construction and all operations are pure, so
// instances can be used freely across threads.

#ifndef CCHSH_WORLDVIEWS_HPP_
#define CCHSH_WORLDVIEWS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace cchsh {

// Finite strict partial order of spacetime points. Points are dense indices;
// names are kept for parsing and reporting. Pasts are reflexive down-sets
// stored as bitmasks, which caps the size at 64 points (PosetTooLarge above).
class CausalDag {
 public:
  // Builds from a covering (or any generating) edge list; the stored relation
  // is the transitive closure. Throws CycleDetected if the closure would need
  // p < p, UnknownPoint for edge endpoints outside [0, n).
  static CausalDag from_edges(int n_points, std::span<const std::pair<int, int>> edges);

  int size() const { return static_cast<int>(past_.size()); }

  // Reflexive order: leq(p, p) is true.
  bool leq(int p, int q) const;
  bool comparable(int p, int q) const { return leq(p, q) || leq(q, p); }

  // Reflexive causal past J-(p) as a bitmask over point indices.
  std::uint64_t past_mask(int p) const;
  // Same set as a sorted list of points.
  std::vector<int> causal_past(int p) const;

  // Points with empty strict future, in index order.
  std::vector<int> maximal_points() const;
  // True if every pair in the set is comparable.
  bool is_chain(std::span<const int> points) const;

  const std::vector<std::string>& names() const { return names_; }
  void set_names(std::vector<std::string> names);

 private:
  std::vector<std::uint64_t> past_;
  std::vector<std::string> names_;
};

// Text form: one edge per line as "p q" (p precedes q), point names being
// arbitrary non-whitespace tokens. Extra directives: "point a" declares an
// isolated point, "alphabet a 3" sets the alphabet size used for point a,
// "alphabet * 3" sets the default, and "#" starts a comment. Points appear
// in order of first mention.
struct ParsedDag {
  CausalDag dag;
  std::vector<int> alphabet_sizes;
};
ParsedDag parse_dag(const std::string& text);

// One named field: a value alphabet per point. A configuration of the whole
// space assigns a value to every (field, point) cell.
struct FieldSpec {
  std::string name;
  std::vector<int> sizes;
};

// The configuration space of all fields over a DAG, with an optional validity
// constraint. Constraints model dynamics (a measurement outcome copying a
// source value, an observer indicator whose support must be a worldline);
// sample spaces only ever contain valid configurations.
class FieldConfigSpace {
 public:
  using Config = std::vector<int>;
  using Constraint = std::function<bool(const CausalDag&, const FieldConfigSpace&, const Config&)>;

  FieldConfigSpace(const CausalDag& dag, std::vector<FieldSpec> fields);

  // Uniform alphabet for a single field over every point.
  static FieldConfigSpace uniform(const CausalDag& dag, const std::string& field_name,
                                  int alphabet_size);

  const CausalDag& dag() const { return *dag_; }
  int n_fields() const { return static_cast<int>(fields_.size()); }
  int n_points() const { return dag_->size(); }
  const FieldSpec& field(int f) const { return fields_[f]; }
  // Index of the named field; throws UnknownField.
  int field_index(const std::string& name) const;

  // Adds another field after construction.
  void add_field(FieldSpec field);

  // Marks a binary field as the observer indicator; valid configurations must
  // then light it up along a chain. Throws ShapeMismatch if any alphabet of
  // the field is not {0, 1}.
  void set_observer_field(const std::string& name);
  std::optional<int> observer_field() const { return observer_field_; }

  // Extra validity predicate on top of the observer-chain rule.
  void set_constraint(Constraint constraint);

  // Flat cell index of (field, point) in a configuration vector.
  int cell(int f, int p) const { return f * n_points() + p; }
  int n_cells() const { return n_fields() * n_points(); }
  int cell_size(int f, int p) const { return fields_[f].sizes[p]; }

  // Mixed-radix packing of a configuration into a single code. Codes order
  // the same way independent of which point's worldview produced them, so
  // sample spaces at different points intersect directly.
  std::uint64_t encode(const Config& config) const;
  Config decode(std::uint64_t code) const;

  // Alphabet-range check plus the validity constraints.
  bool in_alphabets(const Config& config) const;
  bool valid(const Config& config) const;

 private:
  const CausalDag* dag_;
  std::vector<FieldSpec> fields_;
  std::vector<std::uint64_t> strides_;
  std::optional<int> observer_field_;
  Constraint constraint_;

  void rebuild_strides();
};

// An event is a set of configurations, stored as sorted codes. The support is
// the point set the defining condition touched; spacelike separation of
// supports is what the consistency conditions quantify over.
struct Event {
  std::vector<std::uint64_t> members;
  std::uint64_t support_mask = 0;
};

// Sample space at a point: all valid configurations that agree with the true
// one on the causal past. The space pointer must outlive the worldview.
struct Worldview {
  const FieldConfigSpace* space = nullptr;
  int point = -1;
  std::vector<std::uint64_t> omega;
};

inline constexpr std::size_t kDefaultStateCap = 1'000'000;

// Enumerates the sample space at p. The enumeration runs over the free cells
// (points outside J-(p)); StateSpaceTooLarge if their count product exceeds
// the cap. Throws ConfigError if true_config itself is out of range or
// invalid.
Worldview build_worldview(const CausalDag& dag, const FieldConfigSpace& space,
                          const FieldConfigSpace::Config& true_config, int p,
                          std::size_t state_cap = kDefaultStateCap);

// The subset of the worldview where the named field takes the given values on
// the region. Region and values must have equal length.
Event event(const Worldview& worldview, const std::string& field_name,
            std::span<const int> region, std::span<const int> values);

// Set algebra on events (members only; supports are unioned).
Event event_and(const Event& a, const Event& b);
Event event_or(const Event& a, const Event& b);
Event event_not(const Worldview& worldview, const Event& a);

// Probability of an event under weights aligned with worldview.omega.
double event_probability(const Worldview& worldview, std::span<const double> weights,
                         const Event& e);
// P(a | given); throws ZeroConditioningMass when the conditioning event has
// no mass.
double conditional_probability(const Worldview& worldview, std::span<const double> weights,
                               const Event& a, const Event& given);

// Per-point measures along an observer chain, each aligned with the worldview
// at that point.
struct ChainMeasures {
  std::vector<Worldview> views;
  std::vector<std::vector<double>> weights;
};

// Restricts one base measure (given at the chain's first point) to every
// later point by conditioning on its sample space. Zero-mass restrictions
// leave an all-zero weight vector; check_consistency reports them.
ChainMeasures derive_chain_measures(const CausalDag& dag, const FieldConfigSpace& space,
                                    const FieldConfigSpace::Config& true_config,
                                    std::span<const int> chain,
                                    std::span<const double> base_weights,
                                    std::size_t state_cap = kDefaultStateCap);

struct ConsistencyCounterexample {
  int condition = 0;
  std::string description;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct ConsistencyReport {
  // 1: events on spacelike supports are independent.
  bool spacelike_independence = true;
  // 2: later measures are the earlier ones conditioned on the gained past.
  bool filtration_consistency = true;
  // 3: spacelike events decouple after conditioning on their joint past.
  bool conditional_independence = true;
  std::vector<ConsistencyCounterexample> counterexamples;
  int zero_mass_conditionings = 0;
  int checks_condition1 = 0;
  int checks_condition2 = 0;
  int checks_condition3 = 0;
  bool all_pass() const {
    return spacelike_independence && filtration_consistency && conditional_independence;
  }
};

struct ConsistencyOptions {
  double tolerance = 1e-9;
  std::size_t state_cap = kDefaultStateCap;
};

// Exhaustive check of the three conditions over singleton-support events.
// The chain must be totally ordered and given in causal order; measures are
// per chain point, aligned with the worldviews built there.
ConsistencyReport check_consistency(const CausalDag& dag, const FieldConfigSpace& space,
                                    const FieldConfigSpace::Config& true_config,
                                    std::span<const int> chain, const ChainMeasures& measures,
                                    const ConsistencyOptions& options = {});

// Convenience: derives the chain measures from one base measure first.
ConsistencyReport check_consistency(const CausalDag& dag, const FieldConfigSpace& space,
                                    const FieldConfigSpace::Config& true_config,
                                    std::span<const int> chain,
                                    std::span<const double> base_weights,
                                    const ConsistencyOptions& options = {});

struct MeasurementReport {
  int p0 = -1;
  int p1 = -1;
  int p2 = -1;
  Event e1_plus, e1_minus, e2_plus, e2_minus;
  bool partitions_valid = false;
  bool partitions_equal = false;
  std::size_t omega_size = 0;
};

// Locates the two-measurement shape (exactly two maximal points with a
// greatest common lower bound p0), reads the two binary outcome fields at the
// maximal points, and compares the induced partitions of the sample space at
// p0. Throws ShapeMismatch when the DAG or the fields do not fit.
MeasurementReport measurement_scenario(const CausalDag& dag, const FieldConfigSpace& space,
                                       const FieldConfigSpace::Config& true_config,
                                       const std::string& outcome_field_1,
                                       const std::string& outcome_field_2,
                                       std::size_t state_cap = kDefaultStateCap);

// Bare finite poset, reflexive down-sets as masks. Used for the algebra-side
// order, which runs opposite to the causal one.
struct Poset {
  std::vector<std::uint64_t> below;

  static Poset from_relation(int n, std::span<const std::pair<int, int>> pairs);
  static Poset from_dag(const CausalDag& dag);

  int size() const { return static_cast<int>(below.size()); }
  bool leq(int a, int b) const { return (below[b] >> a) & 1u; }
  Poset reversed() const;
};

inline constexpr int kDefaultSieveCap = 16;

// All sieves at one poset element: down-closed subsets of its down-set,
// closed under the Heyting operations. Sieves are bitmasks over the local
// element list.
class SieveAlgebra {
 public:
  SieveAlgebra(const Poset& poset, int element, int size_cap = kDefaultSieveCap);

  // Poset elements underlying the algebra, in index order.
  const std::vector<int>& elements() const { return elements_; }
  const std::vector<std::uint32_t>& sieves() const { return sieves_; }
  std::size_t count() const { return sieves_.size(); }

  bool is_sieve(std::uint32_t mask) const;

  std::uint32_t top() const { return full_; }
  std::uint32_t bottom() const { return 0; }
  std::uint32_t meet(std::uint32_t a, std::uint32_t b) const;
  std::uint32_t join(std::uint32_t a, std::uint32_t b) const;
  // Largest sieve whose meet with a lies inside b.
  std::uint32_t implies(std::uint32_t a, std::uint32_t b) const;
  std::uint32_t negate(std::uint32_t a) const { return implies(a, 0); }
  bool below_or_equal(std::uint32_t a, std::uint32_t b) const { return (a & ~b) == 0; }

 private:
  std::vector<int> elements_;
  std::vector<std::uint32_t> down_;  // down-sets restricted to the local list
  std::vector<std::uint32_t> sieves_;
  std::uint32_t full_ = 0;

  void require_sieve(std::uint32_t mask, const char* role) const;
};

// The event-algebra side of the causal order: one sample space per point,
// sizes recorded, and the order-reversal p <= q implying Omega_p contains
// Omega_q verified on every comparable pair.
struct EventAlgebraFunctor {
  Poset algebra_poset;  // the causal order reversed
  std::vector<std::size_t> omega_sizes;
  bool order_reversal_holds = false;
};

EventAlgebraFunctor event_algebra_functor(const CausalDag& dag, const FieldConfigSpace& space,
                                          const FieldConfigSpace::Config& true_config,
                                          std::size_t state_cap = kDefaultStateCap);

}  // namespace cchsh

#endif  // CCHSH_WORLDVIEWS_HPP_
