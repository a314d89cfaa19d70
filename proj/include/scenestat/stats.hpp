#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenestat/baseline.hpp"
#include "scenestat/core.hpp"
#include "scenestat/ingest.hpp"

namespace scenestat {

// A component of a relation instance (head label, predicate, tail label).
enum class Element { kHead, kEdge, kTail };

const char* to_string(Element e);
std::optional<Element> parse_element(std::string_view name);
// "edge|head,tail" style name; "edge|" for the unconditioned curve.
std::string curve_name(Element target, const std::vector<Element>& conditioning);

// Target-label counts per conditioning tuple, over relation instances.
// Tuples list the conditioning labels in the order given at construction.
class ConditionalTable {
 public:
  ConditionalTable(Element target, std::vector<Element> conditioning);

  Element target() const { return target_; }
  const std::vector<Element>& conditioning() const { return conditioning_; }
  const std::map<std::vector<int>, std::map<int, Count>>& counts() const {
    return counts_;
  }
  const std::map<int, Count>& marginal() const { return marginal_; }

  void add(const SceneGraph& graph);
  // Conditioning tuple and target label of one relation.
  std::vector<int> tuple_of(const SceneGraph& g, const Relation& r) const;
  int target_of(const SceneGraph& g, const Relation& r) const;

  void merge(const ConditionalTable& other);

 private:
  Element target_;
  std::vector<Element> conditioning_;
  std::map<std::vector<int>, std::map<int, Count>> counts_;
  std::map<int, Count> marginal_;
};

struct GuessCurve {
  Element target = Element::kEdge;
  std::vector<Element> conditioning;
  std::size_t instances = 0;
  std::vector<std::pair<int, double>> accuracy_at_k;  // k = 1..K
};

// For every relation in `eval`, ranks the candidate target labels by their
// train count under the relation's conditioning tuple, breaking ties by the
// train marginal and then by label index, and records where the true label
// lands. Tuples unseen in train rank by the marginal alone. Candidates are all
// object classes for head/tail and all non-BG predicates for edge.
GuessCurve guess_curve(const Dataset& train, const Dataset& eval,
                       Element target, std::vector<Element> conditioning,
                       int max_k);

// The twelve target/conditioning combinations covering every subset of the
// other two elements.
std::vector<std::pair<Element, std::vector<Element>>> standard_guess_curves();

struct TypeRow {
  std::string supertype;
  std::size_t class_count = 0;
  Count instance_count = 0;
  double fraction = 0;
};

struct TypeDistribution {
  std::vector<TypeRow> entities;
  std::vector<TypeRow> relations;
};

// Rows exist only for supertypes with at least one instance, sorted by
// instance count descending then name. Throws SchemaError on unmapped
// classes.
TypeDistribution type_distribution(const Dataset& dataset,
                                   const SupertypeMap& supertypes);

inline constexpr std::size_t kNumPredicateSupertypes = 4;
using SupertypeCounts = std::array<Count, kNumPredicateSupertypes>;

struct EdgeTypeMatrix {
  std::vector<std::string> entity_supertypes;  // row and column order
  std::map<std::pair<std::string, std::string>, SupertypeCounts> counts;

  // Distribution over predicate supertypes, indexed by PredicateSupertype;
  // nullopt for a cell with no relations.
  std::optional<std::array<double, kNumPredicateSupertypes>> cell(
      const std::string& head, const std::string& tail) const;
};

EdgeTypeMatrix edge_type_matrix(const Dataset& dataset,
                                const SupertypeMap& supertypes);

struct OverlapCeiling {
  Count overlapping = 0;
  Count total = 0;
  double fraction() const {
    return total == 0 ? 0.0
                      : static_cast<double>(overlapping) /
                            static_cast<double>(total);
  }
};

// Share of annotated relations whose head and tail boxes overlap: the recall
// bound for any predictor that only scores overlapping pairs.
OverlapCeiling overlap_recall_ceiling(const Dataset& dataset);

}  // namespace scenestat
