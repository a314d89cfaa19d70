#include "scenestat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "scenestat/errors.hpp"
#include "scenestat/util.hpp"

namespace scenestat {

using nlohmann::json;

void EvalConfig::validate() const {
  if (ks.empty()) throw std::invalid_argument("at least one K is required");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] <= 0) throw std::invalid_argument("K values must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) {
      throw std::invalid_argument("K values must be strictly increasing");
    }
  }
  if (!(iou_threshold > 0 && iou_threshold <= 1)) {
    throw std::invalid_argument("IoU threshold must lie in (0, 1]");
  }
}

bool triplet_matches(const ScoredTriplet& pred, const SceneGraph& gt,
                     const Relation& gt_rel, const EvalConfig& config) {
  if (pred.predicate != gt_rel.predicate ||
      pred.head_label != gt.labels[gt_rel.head] ||
      pred.tail_label != gt.labels[gt_rel.tail]) {
    return false;
  }
  const Box& gh = gt.boxes[gt_rel.head];
  const Box& gtl = gt.boxes[gt_rel.tail];
  switch (config.mode) {
    case Mode::kPredCls:
    case Mode::kSGCls:
    case Mode::kPredDet:
      return pred.head_box == gh && pred.tail_box == gtl;
    case Mode::kSGDet:
      return iou(pred.head_box, gh) >= config.iou_threshold &&
             iou(pred.tail_box, gtl) >= config.iou_threshold;
    case Mode::kPhrDet:
      return iou(union_box(pred.head_box, pred.tail_box),
                 union_box(gh, gtl)) >= config.iou_threshold;
  }
  return false;
}

std::vector<ScoredTriplet> apply_graph_constraints(
    std::span<const ScoredTriplet> ranked) {
  std::set<std::pair<std::array<double, 4>, std::array<double, 4>>> seen;
  std::vector<ScoredTriplet> out;
  for (const auto& t : ranked) {
    if (seen.emplace(t.head_box.coords(), t.tail_box.coords()).second) {
      out.push_back(t);
    }
  }
  return out;
}

std::size_t MatchResult::matched_within(std::size_t top_k) const {
  return static_cast<std::size_t>(
      std::count_if(matched_by.begin(), matched_by.end(),
                    [&](const auto& r) { return r && *r < top_k; }));
}

namespace {

void require_sorted(std::span<const ScoredTriplet> ranked) {
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    if (ranked[i].score > ranked[i - 1].score) {
      throw std::invalid_argument("predictions are not sorted by score (rank " +
                                  std::to_string(i) + ")");
    }
  }
}

std::vector<ScoredTriplet> prepared(std::span<const ScoredTriplet> ranked,
                                    const EvalConfig& config) {
  require_sorted(ranked);
  if (config.graph_constraints) return apply_graph_constraints(ranked);
  return {ranked.begin(), ranked.end()};
}

MatchResult greedy_match(std::span<const ScoredTriplet> preds,
                         const SceneGraph& gt, const EvalConfig& config) {
  MatchResult result;
  result.matched_by.assign(gt.relations.size(), std::nullopt);
  for (std::size_t r = 0; r < preds.size(); ++r) {
    for (std::size_t g = 0; g < gt.relations.size(); ++g) {
      if (result.matched_by[g]) continue;
      if (triplet_matches(preds[r], gt, gt.relations[g], config)) {
        result.matched_by[g] = r;
        break;
      }
    }
  }
  return result;
}

}  // namespace

MatchResult match_triplets(std::span<const ScoredTriplet> ranked,
                           const SceneGraph& gt, const EvalConfig& config) {
  const auto preds = prepared(ranked, config);
  return greedy_match(preds, gt, config);
}

std::optional<RecallMap> recall_at_k(std::span<const ScoredTriplet> ranked,
                                     const SceneGraph& gt,
                                     const EvalConfig& config) {
  const MatchResult m = match_triplets(ranked, gt, config);
  if (gt.relations.empty()) return std::nullopt;
  RecallMap out;
  for (int k : config.ks) {
    out[k] = static_cast<double>(m.matched_within(static_cast<std::size_t>(k))) /
             static_cast<double>(gt.relations.size());
  }
  return out;
}

std::size_t max_matching_size(std::span<const ScoredTriplet> ranked,
                              const SceneGraph& gt, const EvalConfig& config,
                              std::size_t top_k) {
  auto preds = prepared(ranked, config);
  if (preds.size() > top_k) preds.erase(preds.begin() + static_cast<std::ptrdiff_t>(top_k), preds.end());
  const std::size_t num_gt = gt.relations.size();
  std::vector<std::vector<std::size_t>> adj(preds.size());
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (triplet_matches(preds[p], gt, gt.relations[g], config)) {
        adj[p].push_back(g);
      }
    }
  }
  // Kuhn's augmenting paths.
  std::vector<std::ptrdiff_t> owner(num_gt, -1);
  std::vector<char> visited;
  auto augment = [&](auto&& self, std::size_t p) -> bool {
    for (std::size_t g : adj[p]) {
      if (visited[g]) continue;
      visited[g] = 1;
      if (owner[g] < 0 ||
          self(self, static_cast<std::size_t>(owner[g]))) {
        owner[g] = static_cast<std::ptrdiff_t>(p);
        return true;
      }
    }
    return false;
  };
  std::size_t size = 0;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    visited.assign(num_gt, 0);
    if (augment(augment, p)) ++size;
  }
  return size;
}

std::optional<RecallMap> evaluate_preddet(std::span<const PairScores> pairs,
                                          const SceneGraph& gt,
                                          const std::vector<int>& ks,
                                          bool graph_constraints) {
  std::map<std::pair<std::size_t, std::size_t>, const PairScores*> by_pair;
  for (const auto& ps : pairs) {
    const bool is_gt_pair = std::any_of(
        gt.relations.begin(), gt.relations.end(), [&](const Relation& r) {
          return r.head == ps.head && r.tail == ps.tail;
        });
    if (!is_gt_pair) {
      throw std::invalid_argument("scores supplied for pair (" +
                                  std::to_string(ps.head) + ", " +
                                  std::to_string(ps.tail) +
                                  ") without a ground-truth relation");
    }
    if (!by_pair.emplace(std::make_pair(ps.head, ps.tail), &ps).second) {
      throw std::invalid_argument("pair scored twice");
    }
  }
  if (gt.relations.empty()) return std::nullopt;

  // Rank (0-based) of each ground-truth predicate within its pair.
  std::vector<std::optional<std::size_t>> rank(gt.relations.size());
  for (std::size_t i = 0; i < gt.relations.size(); ++i) {
    const Relation& r = gt.relations[i];
    auto it = by_pair.find({r.head, r.tail});
    if (it == by_pair.end()) continue;
    const auto& s = it->second->scores;
    if (static_cast<std::size_t>(r.predicate) >= s.size()) continue;
    const double mine = s[r.predicate];
    if (std::isnan(mine) || mine == -std::numeric_limits<double>::infinity()) {
      continue;
    }
    std::size_t ahead = 0;
    for (std::size_t p = 1; p < s.size(); ++p) {
      if (static_cast<PredicateId>(p) == r.predicate) continue;
      if (s[p] > mine || (s[p] == mine && static_cast<PredicateId>(p) < r.predicate)) {
        ++ahead;
      }
    }
    rank[i] = ahead;
  }
  RecallMap out;
  for (int k : ks) {
    const std::size_t limit = graph_constraints ? 1 : static_cast<std::size_t>(k);
    const auto hits = std::count_if(rank.begin(), rank.end(), [&](const auto& r) {
      return r && *r < limit;
    });
    out[k] = static_cast<double>(hits) / static_cast<double>(gt.relations.size());
  }
  return out;
}

std::vector<PairScores> pair_scores_from_predictions(
    std::span<const ScoredTriplet> ranked, const SceneGraph& gt,
    std::size_t num_predicates) {
  std::vector<PairScores> out;
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const Relation& r : gt.relations) pairs.emplace(r.head, r.tail);
  for (const auto& [h, t] : pairs) {
    PairScores ps{h, t,
                  std::vector<double>(num_predicates,
                                      -std::numeric_limits<double>::infinity())};
    for (const auto& pred : ranked) {
      if (pred.head_box == gt.boxes[h] && pred.tail_box == gt.boxes[t] &&
          pred.head_label == gt.labels[h] && pred.tail_label == gt.labels[t] &&
          static_cast<std::size_t>(pred.predicate) < num_predicates) {
        ps.scores[pred.predicate] =
            std::max(ps.scores[pred.predicate], pred.score);
      }
    }
    out.push_back(std::move(ps));
  }
  return out;
}

std::optional<double> mean_recall(const std::vector<ModeReport>& modes) {
  double sum = 0;
  int terms = 0;
  for (Mode m : {Mode::kPredCls, Mode::kSGCls, Mode::kSGDet}) {
    auto it = std::find_if(modes.begin(), modes.end(), [&](const ModeReport& r) {
      return r.config.mode == m;
    });
    if (it == modes.end()) return std::nullopt;
    for (int k : {50, 100}) {
      auto v = it->recall.find(k);
      if (v == it->recall.end()) return std::nullopt;
      sum += v->second;
      ++terms;
    }
  }
  return sum / terms;
}

PredictedGraph parse_prediction_line(const std::string& text,
                                     const Vocab& vocab,
                                     const std::string& file,
                                     std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what(), file, line);
  }
  auto fail = [&](const std::string& msg, const std::string& field) {
    throw SchemaError(msg, file, line, field);
  };
  if (!j.is_object()) fail("record is not a JSON object", {});
  auto array = [&](const char* field) -> const json& {
    auto it = j.find(field);
    if (it == j.end() || !it->is_array()) fail("expected an array", field);
    return *it;
  };
  auto number = [&](const json& v, const std::string& field) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      fail("expected a finite number", field);
    }
    return v.get<double>();
  };

  PredictedGraph g;
  auto id = j.find("image_id");
  if (id == j.end()) fail("missing field", "image_id");
  if (id->is_string()) {
    g.image_id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    g.image_id = std::to_string(id->get<std::int64_t>());
  } else {
    fail("image_id must be a string or integer", "image_id");
  }

  const json& boxes = array("boxes");
  const json& labels = array("labels");
  const json& scores = array("scores");
  if (labels.size() != boxes.size() || scores.size() != boxes.size()) {
    fail("boxes, labels and scores differ in length", "labels");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::string field = "boxes[" + std::to_string(i) + "]";
    const json& b = boxes[i];
    if (!b.is_array() || b.size() != 4) fail("box must be [x1,y1,x2,y2]", field);
    double c[4];
    for (int k = 0; k < 4; ++k) c[k] = number(b[k], field);
    if (!Box::is_valid(c[0], c[1], c[2], c[3])) fail("invalid box geometry", field);
    const std::string lfield = "labels[" + std::to_string(i) + "]";
    if (!labels[i].is_string()) fail("expected a class name", lfield);
    auto cls = vocab.object_index(labels[i].get<std::string>());
    if (!cls) fail("unknown object class '" + labels[i].get<std::string>() + "'", lfield);
    g.entities.push_back({Box(c[0], c[1], c[2], c[3]), *cls,
                          number(scores[i], "scores[" + std::to_string(i) + "]")});
  }
  const json& rels = array("relations");
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const std::string field = "relations[" + std::to_string(i) + "]";
    const json& r = rels[i];
    if (!r.is_array() || r.size() != 4 || !r[0].is_number_integer() ||
        !r[1].is_number_integer() || !r[2].is_string()) {
      fail("relation must be [head, tail, predicate, score]", field);
    }
    const auto h = r[0].get<std::int64_t>();
    const auto t = r[1].get<std::int64_t>();
    const auto n = static_cast<std::int64_t>(g.entities.size());
    if (h < 0 || h >= n || t < 0 || t >= n) fail("entity index out of range", field);
    if (h == t) fail("self-loop", field);
    auto pred = vocab.predicate_index(r[2].get<std::string>());
    if (!pred) fail("unknown predicate '" + r[2].get<std::string>() + "'", field);
    if (*pred == kBackground) fail("predictions may not carry BG", field);
    g.triplets.push_back({static_cast<std::size_t>(h), static_cast<std::size_t>(t),
                          *pred, number(r[3], field)});
  }
  return g;
}

std::string format_prediction_line(const PredictedGraph& graph,
                                   const Vocab& vocab) {
  json j;
  j["image_id"] = graph.image_id;
  j["boxes"] = json::array();
  j["labels"] = json::array();
  j["scores"] = json::array();
  for (const Entity& e : graph.entities) {
    j["boxes"].push_back(e.box.coords());
    j["labels"].push_back(vocab.object_name(e.label));
    j["scores"].push_back(e.score);
  }
  j["relations"] = json::array();
  for (const auto& t : graph.triplets) {
    j["relations"].push_back(
        json::array({t.head, t.tail, vocab.predicate_name(t.predicate), t.score}));
  }
  return j.dump();
}

std::map<std::string, PredictedGraph> load_predictions(
    const std::filesystem::path& path, const Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open file", path.string());
  std::map<std::string, PredictedGraph> out;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    PredictedGraph g = parse_prediction_line(text, vocab, path.string(), number);
    std::string id = g.image_id;
    if (!out.emplace(id, std::move(g)).second) {
      throw SchemaError("duplicate image_id '" + id + "'", path.string(), number,
                        "image_id");
    }
  }
  return out;
}

ModeReport evaluate_corpus(const std::map<std::string, PredictedGraph>& predictions,
                           const Dataset& dataset, const EvalConfig& config,
                           unsigned jobs) {
  config.validate();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < dataset.graphs.size(); ++i) {
    index.emplace(dataset.graphs[i].image_id, i);
  }
  for (const auto& [id, _] : predictions) {
    if (!index.count(id)) {
      throw SchemaError("prediction for unknown image '" + id + "'", {}, 0,
                        "image_id");
    }
  }

  ModeReport report;
  report.config = config;
  report.images.resize(dataset.graphs.size());
  const std::size_t num_predicates = dataset.vocab.num_predicates();
  parallel_for(dataset.graphs.size(), jobs, [&](std::size_t i) {
    const SceneGraph& gt = dataset.graphs[i];
    ImageResult& res = report.images[i];
    res.image_id = gt.image_id;
    res.gt_relations = gt.relations.size();
    auto it = predictions.find(gt.image_id);
    std::vector<ScoredTriplet> ranked;
    if (it != predictions.end()) {
      res.has_predictions = true;
      ranked = it->second.scored_triplets();
    }
    if (config.mode == Mode::kPredDet) {
      auto pairs = pair_scores_from_predictions(ranked, gt, num_predicates);
      res.recall = evaluate_preddet(pairs, gt, config.ks, config.graph_constraints);
      return;
    }
    const MatchResult m = match_triplets(ranked, gt, config);
    if (gt.relations.empty()) return;
    RecallMap recall;
    for (int k : config.ks) {
      const auto greedy = m.matched_within(static_cast<std::size_t>(k));
      recall[k] = static_cast<double>(greedy) /
                  static_cast<double>(gt.relations.size());
      if (greedy < max_matching_size(ranked, gt, config,
                                     static_cast<std::size_t>(k))) {
        res.greedy_below_optimal.push_back(k);
      }
    }
    res.recall = std::move(recall);
  });

  for (int k : config.ks) report.recall[k] = 0.0;
  for (const auto& img : report.images) {
    if (!img.recall) continue;
    ++report.images_scored;
    for (const auto& [k, v] : *img.recall) report.recall[k] += v;
    if (!img.greedy_below_optimal.empty()) ++report.images_with_discrepancy;
  }
  if (report.images_scored > 0) {
    for (auto& [k, v] : report.recall) {
      v /= static_cast<double>(report.images_scored);
    }
  }
  return report;
}

ModeReport evaluate_corpus(const std::filesystem::path& predictions_path,
                           const Dataset& dataset, const EvalConfig& config,
                           unsigned jobs) {
  return evaluate_corpus(load_predictions(predictions_path, dataset.vocab),
                         dataset, config, jobs);
}

EvalReport make_report(std::vector<ModeReport> modes) {
  EvalReport r;
  r.modes = std::move(modes);
  r.mean = mean_recall(r.modes);
  return r;
}

std::string report_to_json(const EvalReport& report, bool per_image) {
  json j;
  j["format_version"] = 1;
  j["metadata"] = {{"matching", kMatchingRule},
                   {"consumption", kConsumptionRule},
                   {"unit", "relation"},
                   {"zero_relation_images", "excluded"},
                   {"mean_rule", "predcls,sgcls,sgdet x R@50,R@100"}};
  j["modes"] = json::array();
  for (const auto& m : report.modes) {
    json jm;
    jm["mode"] = to_string(m.config.mode);
    jm["graph_constraints"] = m.config.graph_constraints;
    jm["iou_threshold"] = m.config.iou_threshold;
    jm["images_scored"] = m.images_scored;
    jm["images_with_greedy_discrepancy"] = m.images_with_discrepancy;
    json rec = json::object();
    for (const auto& [k, v] : m.recall) rec[std::to_string(k)] = v;
    jm["recall"] = rec;
    if (per_image) {
      jm["per_image"] = json::array();
      for (const auto& img : m.images) {
        json ji;
        ji["image_id"] = img.image_id;
        ji["gt_relations"] = img.gt_relations;
        if (img.recall) {
          json r = json::object();
          for (const auto& [k, v] : *img.recall) r[std::to_string(k)] = v;
          ji["recall"] = r;
        } else {
          ji["recall"] = nullptr;
        }
        if (!img.greedy_below_optimal.empty()) {
          ji["greedy_below_optimal_at"] = img.greedy_below_optimal;
        }
        jm["per_image"].push_back(ji);
      }
    }
    j["modes"].push_back(jm);
  }
  j["mean"] = report.mean ? json(*report.mean) : json(nullptr);
  return j.dump(2) + "\n";
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string report_to_table(const EvalReport& report) {
  // Detection first, as in the usual results layout.
  std::vector<const ModeReport*> order;
  for (Mode m : {Mode::kSGDet, Mode::kSGCls, Mode::kPredCls, Mode::kPhrDet,
                 Mode::kPredDet}) {
    for (const auto& r : report.modes) {
      if (r.config.mode == m) order.push_back(&r);
    }
  }
  constexpr std::size_t kCol = 7;
  std::ostringstream head1, head2, row;
  head1 << "       ";
  head2 << "       ";
  row << "recall ";
  for (const auto* m : order) {
    std::string title = to_string(m->config.mode);
    if (!m->config.graph_constraints) title += "*";
    const std::size_t width = kCol * m->recall.size();
    head1 << "| " << title << std::string(width > title.size() ? width - title.size() : 0, ' ')
          << ' ';
    head2 << "| ";
    row << "| ";
    for (const auto& [k, v] : m->recall) {
      head2 << pad_left("R@" + std::to_string(k), kCol - 1) << ' ';
      row << pad_left(percent(v), kCol - 1) << ' ';
    }
    head2 << ' ';
    row << ' ';
  }
  head1 << "| Mean";
  head2 << "|";
  row << "| " << (report.mean ? pad_left(percent(*report.mean), 4) : "   -");
  std::string out = head1.str() + "\n" + head2.str() + "\n" + row.str() + "\n";
  bool any_unconstrained = false;
  for (const auto* m : order) any_unconstrained |= !m->config.graph_constraints;
  if (any_unconstrained) out += "* without graph constraints\n";
  return out;
}

}  // namespace scenestat
