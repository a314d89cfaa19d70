#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scenestat/core.hpp"
#include "scenestat/ingest.hpp"

namespace scenestat {

using Count = std::int64_t;

// Empirical predicate distribution conditioned on the ordered label pair
// (head class, tail class), BG included. Only integer counts are stored;
// probabilities are derived on demand.
class FrequencyTable {
 public:
  using Key = std::pair<ClassId, ClassId>;

  FrequencyTable() = default;
  explicit FrequencyTable(Vocab vocab) : vocab_(std::move(vocab)) {}

  const Vocab& vocab() const { return vocab_; }
  const std::map<Key, std::vector<Count>>& counts() const { return counts_; }

  // Per-predicate counts for the pair; nullptr when never seen.
  const std::vector<Count>* find(ClassId head, ClassId tail) const;
  Count total(ClassId head, ClassId tail) const;

  // P(predicate | head, tail). Unseen pairs give P(BG) = 1.
  double probability(ClassId head, ClassId tail, PredicateId predicate) const;
  std::vector<double> distribution(ClassId head, ClassId tail) const;

  void add(ClassId head, ClassId tail, PredicateId predicate, Count n = 1);
  // Adds another table's counts. Vocabularies must match.
  void merge(const FrequencyTable& other);

  friend bool operator==(const FrequencyTable&,
                         const FrequencyTable&) = default;

 private:
  Vocab vocab_;
  std::map<Key, std::vector<Count>> counts_;
};

// Every ordered pair of distinct entities in each graph contributes one count:
// to each annotated predicate between them, or to BG when there is none.
FrequencyTable build_frequency_table(std::span<const SceneGraph> graphs,
                                     const Vocab& vocab);

inline constexpr double kDefaultNmsIou = 0.3;

// keep[p] lists the classes for which proposal p survived NMS, ascending.
struct NmsResult {
  std::vector<std::vector<ClassId>> keep;
};

// Greedy NMS run independently for every object class on that class's
// scores. A proposal is suppressed for class c when a higher-ranked proposal
// kept for c has IoU strictly above the threshold. Equal scores rank by
// proposal index.
NmsResult nms_per_class(const DetectionSet& detections,
                        double iou_threshold = kDefaultNmsIou);

struct Entity {
  Box box;
  ClassId label;
  double score;
};

// Each proposal surviving NMS for at least one class becomes an entity labeled
// with its highest-scoring surviving class. Proposal order is preserved.
std::vector<Entity> entities_after_nms(const DetectionSet& detections,
                                       const NmsResult& nms);

enum class Mode { kPredCls, kSGCls, kSGDet, kPhrDet, kPredDet };

const char* to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);

// PredCls: ground-truth boxes and labels.
struct LabeledBoxes {
  std::vector<Box> boxes;
  std::vector<ClassId> labels;
};

// SGCls: ground-truth boxes with a class distribution for each.
struct ScoredBoxes {
  std::vector<Box> boxes;
  std::vector<std::vector<double>> class_scores;
};

using PredictInput = std::variant<LabeledBoxes, ScoredBoxes, DetectionSet>;

struct PredictOptions {
  bool use_overlap = false;      // Freq-Overlap when true
  bool use_constraints = true;   // one predicate per ordered pair
  std::size_t k_max = 100;
  double nms_iou = kDefaultNmsIou;
  // Multiply entity confidences into triplet scores.
  bool use_entity_scores = true;
  // Rescale non-BG probabilities by 1 / (1 - P(BG)).
  bool renormalize_without_bg = false;
};

struct PredictedTriplet {
  std::size_t head = 0;  // entity index
  std::size_t tail = 0;
  PredicateId predicate = kBackground;
  double score = 0;
};

struct PredictedGraph {
  std::string image_id;
  std::vector<Entity> entities;
  std::vector<PredictedTriplet> triplets;  // score non-increasing

  std::vector<ScoredTriplet> scored_triplets() const;
};

// Freq / Freq-Overlap prediction for one image. Throws std::invalid_argument
// when the input alternative does not fit `mode` (PredCls needs LabeledBoxes,
// SGCls ScoredBoxes, SGDet a DetectionSet).
PredictedGraph predict(Mode mode, const PredictInput& input,
                       const FrequencyTable& table,
                       const PredictOptions& options = {});

// Sorts triplets by score descending, breaking ties by (head, tail,
// predicate).
void rank_triplets(std::vector<PredictedTriplet>& triplets);

enum class RoiOrder { kLeftRight, kConfidence, kSize, kRandom };

std::optional<RoiOrder> parse_roi_order(std::string_view name);
const char* to_string(RoiOrder order);

// Permutation of proposal indices. LeftRight: ascending box center x;
// Confidence: descending max class score; Size: descending area; Random:
// seeded shuffle. Ties keep original order.
std::vector<std::size_t> order_rois(const DetectionSet& detections,
                                    RoiOrder strategy, std::uint64_t seed = 0);

}  // namespace scenestat
