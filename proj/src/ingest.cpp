#include "scenestat/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "scenestat/errors.hpp"
#include "scenestat/util.hpp"

namespace scenestat {

using nlohmann::json;

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

const char* to_string(PredicateSupertype t) {
  switch (t) {
    case PredicateSupertype::kGeometric: return "geometric";
    case PredicateSupertype::kPossessive: return "possessive";
    case PredicateSupertype::kSemantic: return "semantic";
    case PredicateSupertype::kMisc: return "misc";
  }
  return "?";
}

std::optional<PredicateSupertype> parse_predicate_supertype(
    std::string_view name) {
  if (name == "geometric") return PredicateSupertype::kGeometric;
  if (name == "possessive") return PredicateSupertype::kPossessive;
  if (name == "semantic") return PredicateSupertype::kSemantic;
  if (name == "misc") return PredicateSupertype::kMisc;
  return std::nullopt;
}

const std::vector<std::string>& entity_supertype_names() {
  static const std::vector<std::string> names = {
      "part",      "artifact", "person", "clothes",   "vehicle",  "flora",
      "location", "furniture", "animal", "structure", "building", "food"};
  return names;
}

std::vector<SceneGraph> Dataset::graphs_in(Split split) const {
  std::vector<SceneGraph> out;
  for (const auto& g : graphs) {
    auto it = splits.find(g.image_id);
    if (it != splits.end() && it->second == split) out.push_back(g);
  }
  return out;
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  out.vocab = vocab;
  out.graphs = graphs_in(split);
  for (const auto& g : out.graphs) out.splits.emplace(g.image_id, split);
  return out;
}

std::vector<std::string> Dataset::image_ids_in(Split split) const {
  std::vector<std::string> out;
  for (const auto& g : graphs) {
    auto it = splits.find(g.image_id);
    if (it != splits.end() && it->second == split) out.push_back(g.image_id);
  }
  return out;
}

const SceneGraph* Dataset::find(const std::string& image_id) const {
  for (const auto& g : graphs) {
    if (g.image_id == image_id) return &g;
  }
  return nullptr;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open file", path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << data;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_nonempty_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open file", path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back({number, std::move(text)});
  }
  return lines;
}

json parse_json(const std::string& text, const std::string& file,
                std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what(), file, line);
  }
}

// Location-carrying accessors for one record.
class Record {
 public:
  Record(const json& j, const std::string& file, std::size_t line)
      : j_(j), file_(file), line_(line) {
    if (!j_.is_object()) fail("record is not a JSON object");
  }

  [[noreturn]] void fail(const std::string& msg,
                         const std::string& field = {}) const {
    throw SchemaError(msg, file_, line_, field);
  }

  const json& get(const char* field) const {
    auto it = j_.find(field);
    if (it == j_.end()) fail("missing field", field);
    return *it;
  }

  const json& array(const char* field) const {
    const json& v = get(field);
    if (!v.is_array()) fail("expected an array", field);
    return v;
  }

  double number(const json& v, const std::string& field) const {
    if (!v.is_number()) fail("expected a number", field);
    double d = v.get<double>();
    if (!std::isfinite(d)) fail("non-finite number", field);
    return d;
  }

  std::string image_id() const {
    const json& v = get("image_id");
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    fail("image_id must be a string or integer", "image_id");
  }

  Box box(const json& v, const std::string& field) const {
    if (!v.is_array() || v.size() != 4) fail("box must be [x1,y1,x2,y2]", field);
    double c[4];
    for (int k = 0; k < 4; ++k) c[k] = number(v[k], field);
    if (!Box::is_valid(c[0], c[1], c[2], c[3])) {
      fail("invalid box geometry", field);
    }
    return Box(c[0], c[1], c[2], c[3]);
  }

  std::size_t index(const json& v, const std::string& field) const {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      fail("expected a non-negative integer", field);
    }
    return static_cast<std::size_t>(v.get<std::int64_t>());
  }

 private:
  const json& j_;
  const std::string& file_;
  std::size_t line_;
};

std::string field_at(const char* name, std::size_t i) {
  return std::string(name) + "[" + std::to_string(i) + "]";
}

}  // namespace

Vocab load_vocab(const std::filesystem::path& path) {
  const std::string file = path.string();
  json j = parse_json(read_file(path), file, 0);
  if (!j.is_object()) throw SchemaError("vocab must be a JSON object", file);
  auto names = [&](const char* field) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_array()) {
      throw SchemaError("expected a string array", file, 0, field);
    }
    std::vector<std::string> out;
    for (const auto& v : *it) {
      if (!v.is_string()) {
        throw SchemaError("expected a string array", file, 0, field);
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  try {
    return Vocab(names("object_classes"), names("predicates"));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what(), file);
  }
}

SceneGraph parse_graph_line(const std::string& text, const Vocab& vocab,
                            const std::string& file, std::size_t line) {
  json j = parse_json(text, file, line);
  Record rec(j, file, line);
  SceneGraph g;
  g.image_id = rec.image_id();
  g.image_size.width = rec.number(rec.get("width"), "width");
  g.image_size.height = rec.number(rec.get("height"), "height");

  const json& boxes = rec.array("boxes");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    g.boxes.push_back(rec.box(boxes[i], field_at("boxes", i)));
  }
  const json& labels = rec.array("labels");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto field = field_at("labels", i);
    if (!labels[i].is_string()) rec.fail("expected a class name", field);
    auto id = vocab.object_index(labels[i].get<std::string>());
    if (!id) {
      rec.fail("unknown object class '" + labels[i].get<std::string>() + "'",
               field);
    }
    g.labels.push_back(*id);
  }
  if (g.labels.size() != g.boxes.size()) {
    rec.fail("labels and boxes differ in length", "labels");
  }
  const json& relations = rec.array("relations");
  for (std::size_t i = 0; i < relations.size(); ++i) {
    const auto field = field_at("relations", i);
    const json& r = relations[i];
    if (!r.is_array() || r.size() != 3 || !r[2].is_string()) {
      rec.fail("relation must be [head, tail, predicate]", field);
    }
    Relation rel;
    rel.head = rec.index(r[0], field);
    rel.tail = rec.index(r[1], field);
    const std::string name = r[2].get<std::string>();
    auto pred = vocab.predicate_index(name);
    if (!pred) rec.fail("unknown predicate '" + name + "'", field);
    rel.predicate = *pred;
    g.relations.push_back(rel);
  }
  auto violations = validate_graph(g, vocab);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    rec.fail(v.message, field_at(v.field.c_str(), v.index));
  }
  return g;
}

std::string format_graph_line(const SceneGraph& graph, const Vocab& vocab) {
  json j;
  j["image_id"] = graph.image_id;
  j["width"] = graph.image_size.width;
  j["height"] = graph.image_size.height;
  j["boxes"] = json::array();
  for (const Box& b : graph.boxes) j["boxes"].push_back(b.coords());
  j["labels"] = json::array();
  for (ClassId c : graph.labels) j["labels"].push_back(vocab.object_name(c));
  j["relations"] = json::array();
  for (const Relation& r : graph.relations) {
    j["relations"].push_back(
        json::array({r.head, r.tail, vocab.predicate_name(r.predicate)}));
  }
  return j.dump();
}

Dataset load_dataset(const std::filesystem::path& corpus_path,
                     const std::filesystem::path& vocab_path,
                     const std::filesystem::path& split_path,
                     const LoadOptions& options) {
  Dataset ds;
  ds.vocab = load_vocab(vocab_path);

  const std::string corpus_file = corpus_path.string();
  auto lines = read_nonempty_lines(corpus_path);
  ds.graphs.resize(lines.size());
  parallel_for(lines.size(), options.jobs, [&](std::size_t i) {
    ds.graphs[i] = parse_graph_line(lines[i].text, ds.vocab, corpus_file,
                                    lines[i].number);
  });

  std::map<std::string, std::size_t> line_of;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    if (!line_of.emplace(ds.graphs[i].image_id, lines[i].number).second) {
      throw SchemaError("duplicate image_id '" + ds.graphs[i].image_id + "'",
                        corpus_file, lines[i].number, "image_id");
    }
  }

  const std::string split_file = split_path.string();
  json sj = parse_json(read_file(split_path), split_file, 0);
  if (!sj.is_object()) throw SchemaError("splits must be an object", split_file);
  for (auto it = sj.begin(); it != sj.end(); ++it) {
    auto split = parse_split(it.key());
    if (!split) {
      throw SchemaError("unknown split", split_file, 0, it.key());
    }
    if (!it->is_array()) {
      throw SchemaError("expected an id array", split_file, 0, it.key());
    }
    for (const auto& v : *it) {
      std::string id;
      if (v.is_string()) {
        id = v.get<std::string>();
      } else if (v.is_number_integer()) {
        id = std::to_string(v.get<std::int64_t>());
      } else {
        throw SchemaError("image ids must be strings or integers", split_file,
                          0, it.key());
      }
      if (!line_of.count(id)) {
        throw SchemaError("split references unknown image '" + id + "'",
                          split_file, 0, it.key());
      }
      if (!ds.splits.emplace(id, *split).second) {
        throw SchemaError("image '" + id + "' assigned to more than one split",
                          split_file, 0, it.key());
      }
    }
  }
  for (const auto& g : ds.graphs) {
    if (!ds.splits.count(g.image_id)) {
      throw SchemaError("image '" + g.image_id + "' has no split assignment",
                        split_file, 0);
    }
  }
  return ds;
}

void save_dataset(const Dataset& dataset,
                  const std::filesystem::path& corpus_path,
                  const std::filesystem::path& vocab_path,
                  const std::filesystem::path& split_path) {
  std::string corpus;
  for (const auto& g : dataset.graphs) {
    corpus += format_graph_line(g, dataset.vocab);
    corpus += '\n';
  }
  write_file(corpus_path, corpus);

  json vj;
  vj["object_classes"] = dataset.vocab.object_classes();
  const auto& preds = dataset.vocab.predicates();
  vj["predicates"] = std::vector<std::string>(preds.begin() + 1, preds.end());
  write_file(vocab_path, vj.dump(2) + "\n");

  json sj = {{"train", json::array()}, {"dev", json::array()},
             {"test", json::array()}};
  for (const auto& g : dataset.graphs) {
    sj[to_string(dataset.splits.at(g.image_id))].push_back(g.image_id);
  }
  write_file(split_path, sj.dump(2) + "\n");
}

Dataset sample_dev_split(const Dataset& dataset, std::size_t n,
                         std::uint64_t seed) {
  std::vector<std::string> train = dataset.image_ids_in(Split::kTrain);
  if (n > train.size()) {
    throw std::invalid_argument("cannot sample " + std::to_string(n) +
                                " dev images from " +
                                std::to_string(train.size()) + " train images");
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots end up a uniform sample.
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(
                           uniform_below(rng, train.size() - i));
    std::swap(train[i], train[j]);
  }
  Dataset out = dataset;
  for (std::size_t i = 0; i < n; ++i) out.splits[train[i]] = Split::kDev;
  return out;
}

DetectionSet parse_detection_line(const std::string& text, const Vocab& vocab,
                                  const std::string& file, std::size_t line) {
  json j = parse_json(text, file, line);
  Record rec(j, file, line);
  DetectionSet ds;
  ds.image_id = rec.image_id();
  const json& boxes = rec.array("boxes");
  const json& scores = rec.array("class_scores");
  if (boxes.size() != scores.size()) {
    rec.fail("boxes and class_scores differ in length", "class_scores");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto field = field_at("class_scores", i);
    Box box = rec.box(boxes[i], field_at("boxes", i));
    const json& s = scores[i];
    if (!s.is_array() || s.size() != vocab.num_objects()) {
      rec.fail("score vector length must equal the number of object classes (" +
                   std::to_string(vocab.num_objects()) + ")",
               field);
    }
    std::vector<double> probs;
    probs.reserve(s.size());
    double sum = 0;
    for (const auto& v : s) {
      double p = rec.number(v, field);
      if (p < 0) rec.fail("negative class score", field);
      probs.push_back(p);
      sum += p;
    }
    if (std::abs(sum - 1.0) > kScoreSumTolerance) {
      rec.fail("class scores sum to " + std::to_string(sum) + ", not 1", field);
    }
    for (double& p : probs) p /= sum;
    ds.proposals.push_back({box, std::move(probs)});
  }
  return ds;
}

std::map<std::string, DetectionSet> load_detections(
    const std::filesystem::path& path, const Vocab& vocab) {
  const std::string file = path.string();
  std::map<std::string, DetectionSet> out;
  for (const auto& line : read_nonempty_lines(path)) {
    DetectionSet ds = parse_detection_line(line.text, vocab, file, line.number);
    std::string id = ds.image_id;
    if (!out.emplace(id, std::move(ds)).second) {
      throw SchemaError("duplicate image_id '" + id + "'", file, line.number,
                        "image_id");
    }
  }
  return out;
}

SupertypeMap load_supertype_map(const std::filesystem::path& path) {
  const std::string file = path.string();
  json j = parse_json(read_file(path), file, 0);
  if (!j.is_object()) throw SchemaError("supertypes must be an object", file);
  SupertypeMap map;
  const auto& allowed = entity_supertype_names();
  if (auto it = j.find("objects"); it != j.end()) {
    if (!it->is_object()) throw SchemaError("expected an object", file, 0, "objects");
    for (auto e = it->begin(); e != it->end(); ++e) {
      if (!e->is_string() ||
          std::find(allowed.begin(), allowed.end(), e->get<std::string>()) ==
              allowed.end()) {
        throw SchemaError("unknown entity supertype", file, 0,
                          "objects." + e.key());
      }
      map.object_supertypes.emplace(e.key(), e->get<std::string>());
    }
  }
  if (auto it = j.find("predicates"); it != j.end()) {
    if (!it->is_object()) {
      throw SchemaError("expected an object", file, 0, "predicates");
    }
    for (auto e = it->begin(); e != it->end(); ++e) {
      auto t = e->is_string() ? parse_predicate_supertype(e->get<std::string>())
                              : std::nullopt;
      if (!t) {
        throw SchemaError("unknown relation supertype", file, 0,
                          "predicates." + e.key());
      }
      map.predicate_supertypes.emplace(e.key(), *t);
    }
  }
  return map;
}

std::vector<std::string> unmapped_classes(const SupertypeMap& map,
                                          const Vocab& vocab) {
  std::vector<std::string> out;
  for (const auto& name : vocab.object_classes()) {
    if (!map.object_supertypes.count(name)) out.push_back(name);
  }
  for (std::size_t p = 1; p < vocab.num_predicates(); ++p) {
    if (!map.predicate_supertypes.count(vocab.predicates()[p])) {
      out.push_back(vocab.predicates()[p]);
    }
  }
  return out;
}

}  // namespace scenestat
