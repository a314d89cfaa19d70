#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenestat/baseline.hpp"
#include "scenestat/core.hpp"
#include "scenestat/ingest.hpp"

namespace scenestat {

inline constexpr double kDefaultMatchIou = 0.5;

struct EvalConfig {
  Mode mode = Mode::kPredCls;
  std::vector<int> ks = {20, 50, 100};
  double iou_threshold = kDefaultMatchIou;
  bool graph_constraints = true;

  // Throws std::invalid_argument unless ks are positive and strictly
  // increasing and the threshold lies in (0, 1].
  void validate() const;
};

using RecallMap = std::map<int, double>;

// Whether `pred` matches ground-truth relation `gt_rel` under the mode's box
// criterion: exact box identity for PredCls/SGCls/PredDet, per-box IoU for
// SGDet, union-box IoU for PhrDet. Labels must agree in every mode.
bool triplet_matches(const ScoredTriplet& pred, const SceneGraph& gt,
                     const Relation& gt_rel, const EvalConfig& config);

// Keeps the highest-ranked prediction per ordered (head box, tail box) pair.
std::vector<ScoredTriplet> apply_graph_constraints(
    std::span<const ScoredTriplet> ranked);

struct MatchResult {
  // Per ground-truth relation: 0-based rank of the prediction that consumed
  // it, if any.
  std::vector<std::optional<std::size_t>> matched_by;
  std::size_t matched_within(std::size_t top_k) const;
};

// Greedy one-to-one matching in rank order: each prediction consumes the
// first eligible unmatched ground-truth relation. Throws std::invalid_argument
// when `ranked` is not sorted by non-increasing score. Under graph
// constraints, duplicate pairs are dropped first.
MatchResult match_triplets(std::span<const ScoredTriplet> ranked,
                           const SceneGraph& gt, const EvalConfig& config);

// Recall at each K; nullopt when `gt` has no relations.
std::optional<RecallMap> recall_at_k(std::span<const ScoredTriplet> ranked,
                                     const SceneGraph& gt,
                                     const EvalConfig& config);

// Largest one-to-one matching between the top `top_k` predictions and the
// ground-truth relations under the same eligibility rule. Greedy matching
// can fall short of this; it never exceeds it.
std::size_t max_matching_size(std::span<const ScoredTriplet> ranked,
                              const SceneGraph& gt, const EvalConfig& config,
                              std::size_t top_k);

// PredDet input: a score for every predicate (BG entry ignored) of one
// ground-truth head/tail pair.
struct PairScores {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::vector<double> scores;
};

// Each ground-truth relation counts as recalled at K when its predicate ranks
// within the top K of its pair's scores (ties by predicate index). With graph
// constraints only the top predicate per pair is considered. Throws
// std::invalid_argument when a pair carries no ground-truth relation.
std::optional<RecallMap> evaluate_preddet(std::span<const PairScores> pairs,
                                          const SceneGraph& gt,
                                          const std::vector<int>& ks,
                                          bool graph_constraints = false);

// Per-pair predicate scores recovered from ranked predictions over the
// ground-truth boxes; predictions for pairs without a ground-truth relation
// are ignored.
std::vector<PairScores> pair_scores_from_predictions(
    std::span<const ScoredTriplet> ranked, const SceneGraph& gt,
    std::size_t num_predicates);

struct ImageResult {
  std::string image_id;
  std::size_t gt_relations = 0;
  std::optional<RecallMap> recall;
  bool has_predictions = false;
  // K values at which greedy matching found fewer matches than the optimum.
  std::vector<int> greedy_below_optimal;
};

struct ModeReport {
  EvalConfig config;
  std::vector<ImageResult> images;  // dataset order
  RecallMap recall;                 // mean over images with relations
  std::size_t images_scored = 0;
  std::size_t images_with_discrepancy = 0;
};

// Matching choices recorded in every report.
inline constexpr const char* kMatchingRule = "greedy_rank_order_first_eligible";
inline constexpr const char* kConsumptionRule = "one_to_one";

struct EvalReport {
  std::vector<ModeReport> modes;
  // Mean of R@50 and R@100 over PredCls, SGCls and SGDet, when all three are
  // present with both K values.
  std::optional<double> mean;
};

std::optional<double> mean_recall(const std::vector<ModeReport>& modes);

// predictions.jsonl: {"image_id", "boxes", "labels", "scores",
//                     "relations": [[head, tail, predicate, score]...]}
std::map<std::string, PredictedGraph> load_predictions(
    const std::filesystem::path& path, const Vocab& vocab);
PredictedGraph parse_prediction_line(const std::string& text,
                                     const Vocab& vocab,
                                     const std::string& file = {},
                                     std::size_t line = 0);
std::string format_prediction_line(const PredictedGraph& graph,
                                   const Vocab& vocab);

// Scores every graph in `dataset`; images without predictions score zero.
// Throws SchemaError for predictions naming images outside the dataset.
ModeReport evaluate_corpus(const std::map<std::string, PredictedGraph>& predictions,
                           const Dataset& dataset, const EvalConfig& config,
                           unsigned jobs = 1);
ModeReport evaluate_corpus(const std::filesystem::path& predictions_path,
                           const Dataset& dataset, const EvalConfig& config,
                           unsigned jobs = 1);

EvalReport make_report(std::vector<ModeReport> modes);

std::string report_to_json(const EvalReport& report, bool per_image = false);
// Fixed-width table, one column group per mode and one column per K, plus
// the mean.
std::string report_to_table(const EvalReport& report);

}  // namespace scenestat
