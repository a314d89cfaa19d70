#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scenestat/baseline.hpp"
#include "scenestat/core.hpp"
#include "scenestat/ingest.hpp"

namespace scenestat {

struct TripletType {
  ClassId head = 0;
  PredicateId predicate = kBackground;
  ClassId tail = 0;

  friend auto operator<=>(const TripletType&, const TripletType&) = default;
};

// Either an atomic triplet type or a reference to an earlier lexicon entry.
// Atomic elements order before motif symbols.
class MotifElement {
 public:
  static MotifElement atomic(TripletType t);
  static MotifElement motif(std::size_t lexicon_index);

  bool is_motif() const { return key_ >> 63; }
  TripletType triplet() const;
  std::size_t motif_index() const;
  std::uint64_t key() const { return key_; }

  friend auto operator<=>(const MotifElement&, const MotifElement&) = default;

 private:
  explicit MotifElement(std::uint64_t key) : key_(key) {}
  std::uint64_t key_;
};

struct Motif {
  MotifElement a;  // a <= b
  MotifElement b;
  double lift = 0;
  Count joint_count = 0;  // images containing both (two copies when a == b)
  Count count_a = 0;      // images containing a
  Count count_b = 0;
  std::size_t length = 0;  // edges
  std::size_t round = 0;   // 1-based extraction round

  friend bool operator==(const Motif&, const Motif&) = default;
};

struct MiningSettings {
  Count min_count = 50;
  double min_lift = 10.0;

  friend bool operator==(const MiningSettings&, const MiningSettings&) = default;
};

// Choices the mining procedure fixes; recorded alongside every lexicon.
inline constexpr const char* kCooccurrenceScope = "image";
inline constexpr const char* kProbabilityModel = "presence";
inline constexpr const char* kConflictOrder =
    "lift_desc,joint_count_desc,element_names_asc";

struct MotifLexicon {
  Vocab vocab;
  MiningSettings settings;
  std::vector<Motif> motifs;

  std::size_t length_of(const MotifElement& e) const;
  std::size_t max_length() const;
  // "man/wearing/shirt" for atoms, "(x + y)" for motifs.
  std::string name_of(const MotifElement& e) const;
  // Atomic triplets the element expands to, with multiplicities.
  std::map<TripletType, Count> expand(const MotifElement& e) const;
  // Plate style, e.g. "8×[flower —in→ vase]"; distinct triplets joined by
  // " + ".
  std::string plate_notation(const MotifElement& e) const;

  friend bool operator==(const MotifLexicon&, const MotifLexicon&) = default;
};

// Multiset of elements present in one image.
using ElementBag = std::map<MotifElement, Count>;

// Raw triplet types of a graph.
ElementBag triplet_bag(const SceneGraph& graph);

// Rewrites `bag` with lexicon motifs [first, last) in order: each motif
// replaces as many disjoint (a, b) instance pairs as the bag holds.
void apply_motifs(ElementBag& bag, const MotifLexicon& lexicon,
                  std::size_t first, std::size_t last);

// Every image's element multiset after rewriting by the full lexicon.
std::map<std::string, ElementBag> image_element_sets(
    const Dataset& dataset, const MotifLexicon& lexicon);

struct PairStatistic {
  MotifElement a;
  MotifElement b;
  Count count_a = 0;
  Count count_b = 0;
  Count joint = 0;
  double lift = 0;
};

// Pairs passing both thresholds over `bags`, in acceptance priority order.
std::vector<PairStatistic> admissible_pairs(const std::vector<ElementBag>& bags,
                                            const MotifLexicon& lexicon);

// Iterative mining: each round admits pairs of current elements that both
// appear in at least min_count images and co-occur at least min_lift times
// more often than independence predicts; the corpus is rewritten with the
// new motifs and mining repeats until a round admits nothing.
MotifLexicon mine_motifs(const Dataset& dataset,
                         const MiningSettings& settings = {});

struct CoverageRow {
  std::size_t min_length = 0;
  double fraction = 0;
};

// Fraction of images holding a motif of at least each length, for lengths
// 2 .. max(2, longest mined motif).
std::vector<CoverageRow> motif_coverage(const Dataset& dataset,
                                        const MotifLexicon& lexicon);

}  // namespace scenestat
