#include "scenestat/baseline.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "scenestat/util.hpp"

namespace scenestat {

const std::vector<Count>* FrequencyTable::find(ClassId head,
                                               ClassId tail) const {
  auto it = counts_.find({head, tail});
  return it == counts_.end() ? nullptr : &it->second;
}

Count FrequencyTable::total(ClassId head, ClassId tail) const {
  const auto* c = find(head, tail);
  return c ? std::accumulate(c->begin(), c->end(), Count{0}) : 0;
}

double FrequencyTable::probability(ClassId head, ClassId tail,
                                   PredicateId predicate) const {
  const auto* c = find(head, tail);
  const Count n = total(head, tail);
  if (!c || n == 0) return predicate == kBackground ? 1.0 : 0.0;
  return static_cast<double>((*c)[predicate]) / static_cast<double>(n);
}

std::vector<double> FrequencyTable::distribution(ClassId head,
                                                 ClassId tail) const {
  std::vector<double> out(vocab_.num_predicates(), 0.0);
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = probability(head, tail, static_cast<PredicateId>(p));
  }
  return out;
}

void FrequencyTable::add(ClassId head, ClassId tail, PredicateId predicate,
                         Count n) {
  if (!vocab_.valid_object(head) || !vocab_.valid_object(tail) ||
      !vocab_.valid_predicate(predicate) || n < 0) {
    throw std::out_of_range("frequency table entry out of range");
  }
  auto& row = counts_[{head, tail}];
  if (row.empty()) row.assign(vocab_.num_predicates(), 0);
  row[predicate] += n;
}

void FrequencyTable::merge(const FrequencyTable& other) {
  if (!(vocab_ == other.vocab_)) {
    throw std::invalid_argument("cannot merge tables over different vocabs");
  }
  for (const auto& [key, row] : other.counts_) {
    for (std::size_t p = 0; p < row.size(); ++p) {
      if (row[p] != 0) add(key.first, key.second, static_cast<PredicateId>(p), row[p]);
    }
  }
}

FrequencyTable build_frequency_table(std::span<const SceneGraph> graphs,
                                     const Vocab& vocab) {
  FrequencyTable table(vocab);
  for (const SceneGraph& g : graphs) {
    const std::size_t n = g.num_entities();
    std::vector<std::vector<PredicateId>> edges(n * n);
    for (const Relation& r : g.relations) {
      edges[r.head * n + r.tail].push_back(r.predicate);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto& preds = edges[i * n + j];
        if (preds.empty()) {
          table.add(g.labels[i], g.labels[j], kBackground);
        } else {
          for (PredicateId p : preds) table.add(g.labels[i], g.labels[j], p);
        }
      }
    }
  }
  return table;
}

NmsResult nms_per_class(const DetectionSet& detections, double iou_threshold) {
  const auto& props = detections.proposals;
  NmsResult result;
  result.keep.resize(props.size());
  if (props.empty()) return result;
  const std::size_t num_classes = props.front().class_scores.size();

  std::vector<std::size_t> order(props.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return props[a].class_scores[c] >
                              props[b].class_scores[c];
                     });
    std::vector<std::size_t> survivors;
    for (std::size_t idx : order) {
      bool suppressed = false;
      for (std::size_t s : survivors) {
        if (iou(props[s].box, props[idx].box) > iou_threshold) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) {
        survivors.push_back(idx);
        result.keep[idx].push_back(static_cast<ClassId>(c));
      }
    }
  }
  return result;
}

std::vector<Entity> entities_after_nms(const DetectionSet& detections,
                                       const NmsResult& nms) {
  std::vector<Entity> out;
  for (std::size_t p = 0; p < detections.proposals.size(); ++p) {
    const auto& classes = nms.keep.at(p);
    if (classes.empty()) continue;
    const auto& scores = detections.proposals[p].class_scores;
    ClassId best = classes.front();
    for (ClassId c : classes) {
      if (scores[c] > scores[best]) best = c;
    }
    out.push_back({detections.proposals[p].box, best, scores[best]});
  }
  return out;
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kPredCls: return "predcls";
    case Mode::kSGCls: return "sgcls";
    case Mode::kSGDet: return "sgdet";
    case Mode::kPhrDet: return "phrdet";
    case Mode::kPredDet: return "preddet";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::kPredCls, Mode::kSGCls, Mode::kSGDet, Mode::kPhrDet,
                 Mode::kPredDet}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

std::vector<ScoredTriplet> PredictedGraph::scored_triplets() const {
  std::vector<ScoredTriplet> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) {
    const Entity& h = entities.at(t.head);
    const Entity& s = entities.at(t.tail);
    out.push_back({h.box, s.box, h.label, s.label, t.predicate, t.score});
  }
  return out;
}

void rank_triplets(std::vector<PredictedTriplet>& triplets) {
  std::sort(triplets.begin(), triplets.end(),
            [](const PredictedTriplet& a, const PredictedTriplet& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.head != b.head) return a.head < b.head;
              if (a.tail != b.tail) return a.tail < b.tail;
              return a.predicate < b.predicate;
            });
}

namespace {

Entity argmax_entity(const Box& box, const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("empty class score vector");
  auto it = std::max_element(scores.begin(), scores.end());
  return {box, static_cast<ClassId>(it - scores.begin()), *it};
}

std::vector<Entity> entities_for(Mode mode, const PredictInput& input,
                                 const PredictOptions& options) {
  std::vector<Entity> entities;
  switch (mode) {
    case Mode::kPredCls: {
      const auto* in = std::get_if<LabeledBoxes>(&input);
      if (!in) throw std::invalid_argument("predcls expects labeled boxes");
      if (in->boxes.size() != in->labels.size()) {
        throw std::invalid_argument("boxes and labels differ in length");
      }
      for (std::size_t i = 0; i < in->boxes.size(); ++i) {
        entities.push_back({in->boxes[i], in->labels[i], 1.0});
      }
      break;
    }
    case Mode::kSGCls: {
      const auto* in = std::get_if<ScoredBoxes>(&input);
      if (!in) throw std::invalid_argument("sgcls expects scored boxes");
      if (in->boxes.size() != in->class_scores.size()) {
        throw std::invalid_argument("boxes and class_scores differ in length");
      }
      for (std::size_t i = 0; i < in->boxes.size(); ++i) {
        entities.push_back(argmax_entity(in->boxes[i], in->class_scores[i]));
      }
      break;
    }
    case Mode::kSGDet: {
      const auto* in = std::get_if<DetectionSet>(&input);
      if (!in) throw std::invalid_argument("sgdet expects a detection set");
      entities = entities_after_nms(*in, nms_per_class(*in, options.nms_iou));
      break;
    }
    default:
      throw std::invalid_argument(std::string("cannot predict in mode ") +
                                  to_string(mode));
  }
  return entities;
}

}  // namespace

PredictedGraph predict(Mode mode, const PredictInput& input,
                       const FrequencyTable& table,
                       const PredictOptions& options) {
  PredictedGraph out;
  out.entities = entities_for(mode, input, options);
  if (const auto* d = std::get_if<DetectionSet>(&input)) out.image_id = d->image_id;

  const auto& ents = out.entities;
  const std::size_t num_preds = table.vocab().num_predicates();
  for (std::size_t i = 0; i < ents.size(); ++i) {
    for (std::size_t j = 0; j < ents.size(); ++j) {
      if (i == j) continue;
      if (options.use_overlap && !boxes_overlap(ents[i].box, ents[j].box)) {
        continue;
      }
      const auto* row = table.find(ents[i].label, ents[j].label);
      if (!row) continue;
      const double total = static_cast<double>(
          std::accumulate(row->begin(), row->end(), Count{0}));
      if (total == 0) continue;
      double denom = total;
      if (options.renormalize_without_bg) {
        denom = total - static_cast<double>((*row)[kBackground]);
        if (denom == 0) continue;
      }
      const double entity_score =
          options.use_entity_scores ? ents[i].score * ents[j].score : 1.0;

      PredictedTriplet best;
      bool have_best = false;
      for (std::size_t p = 1; p < num_preds; ++p) {
        if ((*row)[p] == 0) continue;
        PredictedTriplet t{i, j, static_cast<PredicateId>(p),
                           entity_score * (static_cast<double>((*row)[p]) / denom)};
        if (!options.use_constraints) {
          out.triplets.push_back(t);
        } else if (!have_best || t.score > best.score) {
          best = t;
          have_best = true;
        }
      }
      if (options.use_constraints && have_best) out.triplets.push_back(best);
    }
  }
  rank_triplets(out.triplets);
  if (out.triplets.size() > options.k_max) out.triplets.resize(options.k_max);
  return out;
}

std::optional<RoiOrder> parse_roi_order(std::string_view name) {
  for (RoiOrder o : {RoiOrder::kLeftRight, RoiOrder::kConfidence,
                     RoiOrder::kSize, RoiOrder::kRandom}) {
    if (name == to_string(o)) return o;
  }
  return std::nullopt;
}

const char* to_string(RoiOrder order) {
  switch (order) {
    case RoiOrder::kLeftRight: return "leftright";
    case RoiOrder::kConfidence: return "confidence";
    case RoiOrder::kSize: return "size";
    case RoiOrder::kRandom: return "random";
  }
  return "?";
}

std::vector<std::size_t> order_rois(const DetectionSet& detections,
                                    RoiOrder strategy, std::uint64_t seed) {
  const auto& props = detections.proposals;
  std::vector<std::size_t> perm(props.size());
  std::iota(perm.begin(), perm.end(), 0);

  auto sort_by_key = [&](auto key, bool descending) {
    std::vector<double> keys(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) keys[i] = key(props[i]);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) {
                       return descending ? keys[a] > keys[b] : keys[a] < keys[b];
                     });
  };

  switch (strategy) {
    case RoiOrder::kLeftRight:
      sort_by_key([](const Proposal& p) { return p.box.center_x(); }, false);
      break;
    case RoiOrder::kConfidence:
      sort_by_key(
          [](const Proposal& p) {
            return p.class_scores.empty()
                       ? 0.0
                       : *std::max_element(p.class_scores.begin(),
                                           p.class_scores.end());
          },
          true);
      break;
    case RoiOrder::kSize:
      sort_by_key([](const Proposal& p) { return p.box.area(); }, true);
      break;
    case RoiOrder::kRandom: {
      Rng rng(seed);
      shuffle(std::span<std::size_t>(perm), rng);
      break;
    }
    default:
      throw std::invalid_argument("unknown RoI ordering strategy");
  }
  return perm;
}

}  // namespace scenestat
