#include "scenestat/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "scenestat/errors.hpp"

namespace scenestat {

SchemaError::SchemaError(const std::string& message, std::string file,
                         std::size_t line, std::string field)
    : std::runtime_error([&] {
        std::ostringstream os;
        if (!file.empty()) {
          os << file;
          if (line > 0) os << ':' << line;
          os << ": ";
        }
        if (!field.empty()) os << '[' << field << "] ";
        os << message;
        return os.str();
      }()),
      file_(std::move(file)),
      line_(line),
      field_(std::move(field)) {}

bool Box::is_valid(double x1, double y1, double x2, double y2) {
  for (double v : {x1, y1, x2, y2}) {
    if (!std::isfinite(v) || v < 0) return false;
  }
  return x1 < x2 && y1 < y2;
}

Box::Box(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!is_valid(x1, y1, x2, y2)) {
    std::ostringstream os;
    os << "invalid box (" << x1 << ", " << y1 << ", " << x2 << ", " << y2
       << ")";
    throw std::invalid_argument(os.str());
  }
}

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (w <= 0 || h <= 0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  // Distinct boxes never report a perfect match, even after rounding.
  return std::clamp(inter / uni, 0.0, std::nextafter(1.0, 0.0));
}

Box union_box(const Box& a, const Box& b) {
  return Box(std::min(a.x1(), b.x1()), std::min(a.y1(), b.y1()),
             std::max(a.x2(), b.x2()), std::max(a.y2(), b.y2()));
}

bool boxes_overlap(const Box& a, const Box& b) {
  return intersection_area(a, b) > 0;
}

bool contains(const Box& outer, const Box& inner) {
  return outer.x1() <= inner.x1() && outer.y1() <= inner.y1() &&
         outer.x2() >= inner.x2() && outer.y2() >= inner.y2();
}

Vocab::Vocab(std::vector<std::string> object_classes,
             std::vector<std::string> predicates)
    : objects_(std::move(object_classes)) {
  predicates_.reserve(predicates.size() + 1);
  predicates_.emplace_back(kBackgroundName);
  for (std::size_t i = 0; i < predicates.size(); ++i) {
    if (predicates[i] == kBackgroundName) {
      if (i == 0) continue;
      throw std::invalid_argument(
          "background predicate 'bg' may only appear first");
    }
    predicates_.push_back(std::move(predicates[i]));
  }
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (!object_lookup_.emplace(objects_[i], static_cast<ClassId>(i)).second) {
      throw std::invalid_argument("duplicate object class '" + objects_[i] +
                                  "'");
    }
  }
  for (std::size_t i = 0; i < predicates_.size(); ++i) {
    if (!predicate_lookup_.emplace(predicates_[i], static_cast<PredicateId>(i))
             .second) {
      throw std::invalid_argument("duplicate predicate '" + predicates_[i] +
                                  "'");
    }
  }
}

std::optional<ClassId> Vocab::object_index(std::string_view name) const {
  auto it = object_lookup_.find(std::string(name));
  if (it == object_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<PredicateId> Vocab::predicate_index(std::string_view name) const {
  auto it = predicate_lookup_.find(std::string(name));
  if (it == predicate_lookup_.end()) return std::nullopt;
  return it->second;
}

namespace {

void check_structure(const SceneGraph& g, std::vector<Violation>& out) {
  if (g.labels.size() != g.boxes.size()) {
    out.push_back({"labels", g.labels.size(),
                   "label count " + std::to_string(g.labels.size()) +
                       " differs from box count " +
                       std::to_string(g.boxes.size())});
  }
  const std::size_t n = g.boxes.size();
  std::set<Relation> seen;
  for (std::size_t i = 0; i < g.relations.size(); ++i) {
    const Relation& r = g.relations[i];
    if (r.head >= n) {
      out.push_back({"relations", i,
                     "head index " + std::to_string(r.head) + " out of range"});
    }
    if (r.tail >= n) {
      out.push_back({"relations", i,
                     "tail index " + std::to_string(r.tail) + " out of range"});
    }
    if (r.head == r.tail) {
      out.push_back({"relations", i, "self-loop on entity " +
                                         std::to_string(r.head)});
    }
    if (r.predicate == kBackground) {
      out.push_back({"relations", i, "relation stores the BG predicate"});
    }
    if (!seen.insert(r).second) {
      out.push_back({"relations", i, "duplicate relation triple"});
    }
  }
}

}  // namespace

std::vector<Violation> validate_graph(const SceneGraph& graph) {
  std::vector<Violation> out;
  check_structure(graph, out);
  return out;
}

std::vector<Violation> validate_graph(const SceneGraph& graph,
                                      const Vocab& vocab) {
  std::vector<Violation> out;
  check_structure(graph, out);
  for (std::size_t i = 0; i < graph.labels.size(); ++i) {
    if (!vocab.valid_object(graph.labels[i])) {
      out.push_back({"labels", i, "object class " +
                                      std::to_string(graph.labels[i]) +
                                      " out of range"});
    }
  }
  for (std::size_t i = 0; i < graph.relations.size(); ++i) {
    if (!vocab.valid_predicate(graph.relations[i].predicate)) {
      out.push_back({"relations", i,
                     "predicate " +
                         std::to_string(graph.relations[i].predicate) +
                         " out of range"});
    }
  }
  return out;
}

std::string to_string(const Violation& v) {
  return v.field + "[" + std::to_string(v.index) + "]: " + v.message;
}

}  // namespace scenestat
