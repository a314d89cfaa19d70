#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenestat/core.hpp"

namespace scenestat {

enum class Split { kTrain, kDev, kTest };

const char* to_string(Split split);
std::optional<Split> parse_split(std::string_view name);

struct Dataset {
  Vocab vocab;
  std::vector<SceneGraph> graphs;  // corpus file order
  std::map<std::string, Split> splits;

  // Graphs assigned to `split`, in corpus order.
  std::vector<SceneGraph> graphs_in(Split split) const;
  // Copy of this dataset restricted to one split.
  Dataset subset(Split split) const;
  std::vector<std::string> image_ids_in(Split split) const;
  const SceneGraph* find(const std::string& image_id) const;
};

struct Proposal {
  Box box;
  std::vector<double> class_scores;  // probability over object classes
};

struct DetectionSet {
  std::string image_id;
  std::vector<Proposal> proposals;
};

enum class PredicateSupertype { kGeometric, kPossessive, kSemantic, kMisc };

const char* to_string(PredicateSupertype t);
std::optional<PredicateSupertype> parse_predicate_supertype(
    std::string_view name);

// Entity supertype names accepted in a supertype config.
const std::vector<std::string>& entity_supertype_names();

struct SupertypeMap {
  std::map<std::string, std::string> object_supertypes;
  std::map<std::string, PredicateSupertype> predicate_supertypes;
};

struct LoadOptions {
  unsigned jobs = 1;
};

// graphs.jsonl: one image per line,
//   {"image_id", "width", "height", "boxes": [[x1,y1,x2,y2]...],
//    "labels": [name...], "relations": [[head, tail, predicate_name]...]}
// vocab.json: {"object_classes": [...], "predicates": [...]}
// splits.json: {"train": [ids], "dev": [ids], "test": [ids]}; dev optional.
Dataset load_dataset(const std::filesystem::path& corpus_path,
                     const std::filesystem::path& vocab_path,
                     const std::filesystem::path& split_path,
                     const LoadOptions& options = {});

Vocab load_vocab(const std::filesystem::path& path);

// Parses one graphs.jsonl record. `file`/`line` only feed error messages.
SceneGraph parse_graph_line(const std::string& text, const Vocab& vocab,
                            const std::string& file = {},
                            std::size_t line = 0);
std::string format_graph_line(const SceneGraph& graph, const Vocab& vocab);

void save_dataset(const Dataset& dataset,
                  const std::filesystem::path& corpus_path,
                  const std::filesystem::path& vocab_path,
                  const std::filesystem::path& split_path);

// Moves `n` train images, chosen uniformly under `seed`, into dev. Any
// existing dev assignment is kept.
Dataset sample_dev_split(const Dataset& dataset, std::size_t n,
                         std::uint64_t seed);

// Score vectors within 1e-3 of summing to one are renormalized; anything
// further off is rejected.
inline constexpr double kScoreSumTolerance = 1e-3;

// detections.jsonl: {"image_id", "boxes": [[...]...],
//                    "class_scores": [[p_0 ... p_{C-1}]...]}
std::map<std::string, DetectionSet> load_detections(
    const std::filesystem::path& path, const Vocab& vocab);
DetectionSet parse_detection_line(const std::string& text, const Vocab& vocab,
                                  const std::string& file = {},
                                  std::size_t line = 0);

// {"objects": {class: supertype}, "predicates": {predicate: supertype}}
SupertypeMap load_supertype_map(const std::filesystem::path& path);

// Classes of `vocab` missing from `map` (BG excluded); empty when total.
std::vector<std::string> unmapped_classes(const SupertypeMap& map,
                                          const Vocab& vocab);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& data);

}  // namespace scenestat
