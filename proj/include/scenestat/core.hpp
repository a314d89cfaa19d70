#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scenestat {

using ClassId = int;      // index into Vocab::object_classes()
using PredicateId = int;  // index into Vocab::predicates(); 0 is BG

inline constexpr PredicateId kBackground = 0;
inline constexpr std::string_view kBackgroundName = "bg";

// Axis-aligned box in continuous pixel coordinates. Construction enforces
// x1 < x2, y1 < y2 and finite, non-negative coordinates, so every Box in
// circulation is valid.
class Box {
 public:
  Box(double x1, double y1, double x2, double y2);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }

  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1_ + x2_); }

  std::array<double, 4> coords() const { return {x1_, y1_, x2_, y2_}; }

  // True when the coordinates describe a valid box.
  static bool is_valid(double x1, double y1, double x2, double y2);

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);
Box union_box(const Box& a, const Box& b);
// Strictly positive intersection area; boxes sharing only an edge do not
// overlap.
bool boxes_overlap(const Box& a, const Box& b);
bool contains(const Box& outer, const Box& inner);

// Object and predicate label spaces. The background predicate always sits at
// index 0 under the name "bg".
class Vocab {
 public:
  Vocab() : Vocab({}, {}) {}
  // `predicates` lists the real predicates; a leading "bg" entry is accepted
  // and any other occurrence of "bg" is rejected.
  Vocab(std::vector<std::string> object_classes,
        std::vector<std::string> predicates);

  const std::vector<std::string>& object_classes() const { return objects_; }
  // Includes BG at index 0.
  const std::vector<std::string>& predicates() const { return predicates_; }

  std::size_t num_objects() const { return objects_.size(); }
  std::size_t num_predicates() const { return predicates_.size(); }

  std::optional<ClassId> object_index(std::string_view name) const;
  std::optional<PredicateId> predicate_index(std::string_view name) const;

  const std::string& object_name(ClassId id) const { return objects_.at(id); }
  const std::string& predicate_name(PredicateId id) const {
    return predicates_.at(id);
  }

  bool valid_object(ClassId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < objects_.size();
  }
  bool valid_predicate(PredicateId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < predicates_.size();
  }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.objects_ == b.objects_ && a.predicates_ == b.predicates_;
  }

 private:
  std::vector<std::string> objects_;
  std::vector<std::string> predicates_;
  std::unordered_map<std::string, ClassId> object_lookup_;
  std::unordered_map<std::string, PredicateId> predicate_lookup_;
};

struct Relation {
  std::size_t head = 0;
  std::size_t tail = 0;
  PredicateId predicate = kBackground;

  friend bool operator==(const Relation&, const Relation&) = default;
  friend auto operator<=>(const Relation&, const Relation&) = default;
};

struct ImageSize {
  double width = 0;
  double height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

struct SceneGraph {
  std::string image_id;
  ImageSize image_size;
  std::vector<Box> boxes;
  std::vector<ClassId> labels;  // parallel to boxes
  std::vector<Relation> relations;

  std::size_t num_entities() const { return boxes.size(); }

  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

struct ScoredTriplet {
  Box head_box;
  Box tail_box;
  ClassId head_label = 0;
  ClassId tail_label = 0;
  PredicateId predicate = kBackground;
  double score = 0;
};

struct Violation {
  std::string field;  // "labels", "relations", ...
  std::size_t index = 0;
  std::string message;
};

// Structural checks only: label/box parity, relation endpoints, self loops,
// BG storage, duplicate triples.
std::vector<Violation> validate_graph(const SceneGraph& graph);
// Adds label and predicate range checks against `vocab`.
std::vector<Violation> validate_graph(const SceneGraph& graph,
                                      const Vocab& vocab);

std::string to_string(const Violation& v);

}  // namespace scenestat
