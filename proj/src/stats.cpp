#include "scenestat/stats.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "scenestat/errors.hpp"

namespace scenestat {

const char* to_string(Element e) {
  switch (e) {
    case Element::kHead: return "head";
    case Element::kEdge: return "edge";
    case Element::kTail: return "tail";
  }
  return "?";
}

std::optional<Element> parse_element(std::string_view name) {
  if (name == "head") return Element::kHead;
  if (name == "edge") return Element::kEdge;
  if (name == "tail") return Element::kTail;
  return std::nullopt;
}

std::string curve_name(Element target,
                       const std::vector<Element>& conditioning) {
  std::string out = to_string(target);
  out += '|';
  for (std::size_t i = 0; i < conditioning.size(); ++i) {
    if (i) out += ',';
    out += to_string(conditioning[i]);
  }
  return out;
}

namespace {

int label_of(Element e, const SceneGraph& g, const Relation& r) {
  switch (e) {
    case Element::kHead: return g.labels[r.head];
    case Element::kEdge: return r.predicate;
    case Element::kTail: return g.labels[r.tail];
  }
  return -1;
}

}  // namespace

ConditionalTable::ConditionalTable(Element target,
                                   std::vector<Element> conditioning)
    : target_(target), conditioning_(std::move(conditioning)) {
  for (Element c : conditioning_) {
    if (c == target_) {
      throw std::invalid_argument("target cannot be part of the conditioning");
    }
    if (std::count(conditioning_.begin(), conditioning_.end(), c) > 1) {
      throw std::invalid_argument("duplicate conditioning element");
    }
  }
}

std::vector<int> ConditionalTable::tuple_of(const SceneGraph& g,
                                            const Relation& r) const {
  std::vector<int> key;
  key.reserve(conditioning_.size());
  for (Element c : conditioning_) key.push_back(label_of(c, g, r));
  return key;
}

int ConditionalTable::target_of(const SceneGraph& g, const Relation& r) const {
  return label_of(target_, g, r);
}

void ConditionalTable::add(const SceneGraph& graph) {
  for (const Relation& r : graph.relations) {
    const int t = target_of(graph, r);
    ++counts_[tuple_of(graph, r)][t];
    ++marginal_[t];
  }
}

void ConditionalTable::merge(const ConditionalTable& other) {
  if (other.target_ != target_ || other.conditioning_ != conditioning_) {
    throw std::invalid_argument("conditional tables differ in signature");
  }
  for (const auto& [key, row] : other.counts_) {
    for (const auto& [label, n] : row) counts_[key][label] += n;
  }
  for (const auto& [label, n] : other.marginal_) marginal_[label] += n;
}

std::vector<std::pair<Element, std::vector<Element>>> standard_guess_curves() {
  std::vector<std::pair<Element, std::vector<Element>>> out;
  for (Element target : {Element::kHead, Element::kEdge, Element::kTail}) {
    std::vector<Element> others;
    for (Element e : {Element::kHead, Element::kEdge, Element::kTail}) {
      if (e != target) others.push_back(e);
    }
    out.push_back({target, {}});
    out.push_back({target, {others[0]}});
    out.push_back({target, {others[1]}});
    out.push_back({target, others});
  }
  return out;
}

GuessCurve guess_curve(const Dataset& train, const Dataset& eval,
                       Element target, std::vector<Element> conditioning,
                       int max_k) {
  if (max_k < 1) throw std::invalid_argument("K must be at least 1");
  ConditionalTable table(target, std::move(conditioning));
  for (const auto& g : train.graphs) table.add(g);

  const Vocab& vocab = train.vocab;
  std::vector<int> candidates;
  if (target == Element::kEdge) {
    for (std::size_t p = 1; p < vocab.num_predicates(); ++p) {
      candidates.push_back(static_cast<int>(p));
    }
  } else {
    for (std::size_t c = 0; c < vocab.num_objects(); ++c) {
      candidates.push_back(static_cast<int>(c));
    }
  }
  auto global = [&](int label) -> Count {
    auto it = table.marginal().find(label);
    return it == table.marginal().end() ? 0 : it->second;
  };

  // rank_of[tuple][label] is the 0-based guess position of `label`.
  std::map<std::vector<int>, std::map<int, std::size_t>> rank_cache;
  static const std::map<int, Count> kNoCounts;
  auto ranks_for = [&](const std::vector<int>& tuple)
      -> const std::map<int, std::size_t>& {
    auto cached = rank_cache.find(tuple);
    if (cached != rank_cache.end()) return cached->second;
    auto it = table.counts().find(tuple);
    const auto& row = it == table.counts().end() ? kNoCounts : it->second;
    auto cond = [&](int label) -> Count {
      auto r = row.find(label);
      return r == row.end() ? 0 : r->second;
    };
    std::vector<int> order = candidates;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (cond(a) != cond(b)) return cond(a) > cond(b);
      if (global(a) != global(b)) return global(a) > global(b);
      return a < b;
    });
    auto& ranks = rank_cache[tuple];
    for (std::size_t i = 0; i < order.size(); ++i) ranks[order[i]] = i;
    return ranks;
  };

  std::vector<std::size_t> hits_at_rank(candidates.size() + 1, 0);
  std::size_t instances = 0;
  for (const auto& g : eval.graphs) {
    for (const Relation& r : g.relations) {
      const auto& ranks = ranks_for(table.tuple_of(g, r));
      auto it = ranks.find(table.target_of(g, r));
      ++instances;
      if (it != ranks.end()) ++hits_at_rank[it->second];
    }
  }

  GuessCurve curve;
  curve.target = target;
  curve.conditioning = table.conditioning();
  curve.instances = instances;
  std::size_t cumulative = 0;
  for (int k = 1; k <= max_k; ++k) {
    if (static_cast<std::size_t>(k) <= candidates.size()) {
      cumulative += hits_at_rank[k - 1];
    }
    const double frac = instances == 0 ? 0.0
                                       : static_cast<double>(cumulative) /
                                             static_cast<double>(instances);
    curve.accuracy_at_k.emplace_back(k, frac);
  }
  return curve;
}

namespace {

const std::string& entity_type(const SupertypeMap& map, const Vocab& vocab,
                               ClassId c) {
  auto it = map.object_supertypes.find(vocab.object_name(c));
  if (it == map.object_supertypes.end()) {
    throw SchemaError("object class '" + vocab.object_name(c) +
                      "' has no supertype");
  }
  return it->second;
}

PredicateSupertype predicate_type(const SupertypeMap& map, const Vocab& vocab,
                                  PredicateId p) {
  auto it = map.predicate_supertypes.find(vocab.predicate_name(p));
  if (it == map.predicate_supertypes.end()) {
    throw SchemaError("predicate '" + vocab.predicate_name(p) +
                      "' has no supertype");
  }
  return it->second;
}

void require_total(const SupertypeMap& map, const Vocab& vocab) {
  auto missing = unmapped_classes(map, vocab);
  if (!missing.empty()) {
    throw SchemaError("supertype map does not cover '" + missing.front() +
                      "' (" + std::to_string(missing.size()) +
                      " unmapped in total)");
  }
}

std::vector<TypeRow> finish_rows(std::map<std::string, TypeRow> rows) {
  Count total = 0;
  for (const auto& [_, row] : rows) total += row.instance_count;
  std::vector<TypeRow> out;
  for (auto& [_, row] : rows) {
    if (row.instance_count == 0) continue;
    row.fraction =
        static_cast<double>(row.instance_count) / static_cast<double>(total);
    out.push_back(row);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TypeRow& a, const TypeRow& b) {
                     return a.instance_count > b.instance_count;
                   });
  return out;
}

}  // namespace

TypeDistribution type_distribution(const Dataset& dataset,
                                   const SupertypeMap& supertypes) {
  const Vocab& vocab = dataset.vocab;
  require_total(supertypes, vocab);

  std::map<std::string, TypeRow> ent, rel;
  for (std::size_t c = 0; c < vocab.num_objects(); ++c) {
    const auto& t = entity_type(supertypes, vocab, static_cast<ClassId>(c));
    ent[t].supertype = t;
    ++ent[t].class_count;
  }
  for (std::size_t p = 1; p < vocab.num_predicates(); ++p) {
    const std::string t =
        to_string(predicate_type(supertypes, vocab, static_cast<PredicateId>(p)));
    rel[t].supertype = t;
    ++rel[t].class_count;
  }
  for (const auto& g : dataset.graphs) {
    for (ClassId c : g.labels) ++ent[entity_type(supertypes, vocab, c)].instance_count;
    for (const Relation& r : g.relations) {
      ++rel[to_string(predicate_type(supertypes, vocab, r.predicate))]
            .instance_count;
    }
  }
  return {finish_rows(std::move(ent)), finish_rows(std::move(rel))};
}

std::optional<std::array<double, kNumPredicateSupertypes>> EdgeTypeMatrix::cell(
    const std::string& head, const std::string& tail) const {
  auto it = counts.find({head, tail});
  if (it == counts.end()) return std::nullopt;
  const Count total =
      std::accumulate(it->second.begin(), it->second.end(), Count{0});
  if (total == 0) return std::nullopt;
  std::array<double, kNumPredicateSupertypes> dist{};
  for (std::size_t i = 0; i < dist.size(); ++i) {
    dist[i] = static_cast<double>(it->second[i]) / static_cast<double>(total);
  }
  return dist;
}

EdgeTypeMatrix edge_type_matrix(const Dataset& dataset,
                                const SupertypeMap& supertypes) {
  const Vocab& vocab = dataset.vocab;
  require_total(supertypes, vocab);
  EdgeTypeMatrix m;
  m.entity_supertypes = entity_supertype_names();
  for (const auto& g : dataset.graphs) {
    for (const Relation& r : g.relations) {
      const auto& h = entity_type(supertypes, vocab, g.labels[r.head]);
      const auto& t = entity_type(supertypes, vocab, g.labels[r.tail]);
      auto& cell = m.counts[{h, t}];
      ++cell[static_cast<std::size_t>(
          predicate_type(supertypes, vocab, r.predicate))];
    }
  }
  return m;
}

OverlapCeiling overlap_recall_ceiling(const Dataset& dataset) {
  OverlapCeiling out;
  for (const auto& g : dataset.graphs) {
    for (const Relation& r : g.relations) {
      ++out.total;
      if (boxes_overlap(g.boxes[r.head], g.boxes[r.tail])) ++out.overlapping;
    }
  }
  return out;
}

}  // namespace scenestat
