#include "scenestat/motifs.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace scenestat {

namespace {

constexpr std::uint64_t kMotifBit = std::uint64_t{1} << 63;
constexpr std::uint64_t kFieldBits = 20;
constexpr std::uint64_t kFieldMask = (std::uint64_t{1} << kFieldBits) - 1;

}  // namespace

MotifElement MotifElement::atomic(TripletType t) {
  if (t.head < 0 || t.tail < 0 || t.predicate < 0 ||
      static_cast<std::uint64_t>(t.head) > kFieldMask ||
      static_cast<std::uint64_t>(t.tail) > kFieldMask ||
      static_cast<std::uint64_t>(t.predicate) > kFieldMask) {
    throw std::out_of_range("triplet label out of encodable range");
  }
  return MotifElement((static_cast<std::uint64_t>(t.head) << (2 * kFieldBits)) |
                      (static_cast<std::uint64_t>(t.predicate) << kFieldBits) |
                      static_cast<std::uint64_t>(t.tail));
}

MotifElement MotifElement::motif(std::size_t lexicon_index) {
  return MotifElement(kMotifBit | static_cast<std::uint64_t>(lexicon_index));
}

TripletType MotifElement::triplet() const {
  if (is_motif()) throw std::logic_error("element is a motif symbol");
  return {static_cast<ClassId>((key_ >> (2 * kFieldBits)) & kFieldMask),
          static_cast<PredicateId>((key_ >> kFieldBits) & kFieldMask),
          static_cast<ClassId>(key_ & kFieldMask)};
}

std::size_t MotifElement::motif_index() const {
  if (!is_motif()) throw std::logic_error("element is an atomic triplet");
  return static_cast<std::size_t>(key_ & ~kMotifBit);
}

std::size_t MotifLexicon::length_of(const MotifElement& e) const {
  return e.is_motif() ? motifs.at(e.motif_index()).length : 1;
}

std::size_t MotifLexicon::max_length() const {
  std::size_t best = 1;
  for (const auto& m : motifs) best = std::max(best, m.length);
  return best;
}

std::string MotifLexicon::name_of(const MotifElement& e) const {
  if (!e.is_motif()) {
    const TripletType t = e.triplet();
    return vocab.object_name(t.head) + "/" + vocab.predicate_name(t.predicate) +
           "/" + vocab.object_name(t.tail);
  }
  const Motif& m = motifs.at(e.motif_index());
  return "(" + name_of(m.a) + " + " + name_of(m.b) + ")";
}

std::map<TripletType, Count> MotifLexicon::expand(const MotifElement& e) const {
  std::map<TripletType, Count> out;
  if (!e.is_motif()) {
    out[e.triplet()] = 1;
    return out;
  }
  const Motif& m = motifs.at(e.motif_index());
  for (const auto* part : {&m.a, &m.b}) {
    for (const auto& [t, n] : expand(*part)) out[t] += n;
  }
  return out;
}

std::string MotifLexicon::plate_notation(const MotifElement& e) const {
  std::string out;
  for (const auto& [t, n] : expand(e)) {
    if (!out.empty()) out += " + ";
    if (n > 1) out += std::to_string(n) + "×";
    out += "[" + vocab.object_name(t.head) + " —" +
           vocab.predicate_name(t.predicate) + "→ " + vocab.object_name(t.tail) +
           "]";
  }
  return out;
}

ElementBag triplet_bag(const SceneGraph& graph) {
  ElementBag bag;
  for (const Relation& r : graph.relations) {
    ++bag[MotifElement::atomic(
        {graph.labels[r.head], r.predicate, graph.labels[r.tail]})];
  }
  return bag;
}

void apply_motifs(ElementBag& bag, const MotifLexicon& lexicon,
                  std::size_t first, std::size_t last) {
  for (std::size_t i = first; i < last; ++i) {
    const Motif& m = lexicon.motifs[i];
    auto ia = bag.find(m.a);
    if (ia == bag.end()) continue;
    Count pairs = 0;
    if (m.a == m.b) {
      pairs = ia->second / 2;
      ia->second -= 2 * pairs;
    } else {
      auto ib = bag.find(m.b);
      if (ib == bag.end()) continue;
      pairs = std::min(ia->second, ib->second);
      ia->second -= pairs;
      ib->second -= pairs;
      if (ib->second == 0) bag.erase(ib);
    }
    if (ia->second == 0) bag.erase(ia);
    if (pairs > 0) bag[MotifElement::motif(i)] += pairs;
  }
}

std::map<std::string, ElementBag> image_element_sets(
    const Dataset& dataset, const MotifLexicon& lexicon) {
  std::map<std::string, ElementBag> out;
  for (const auto& g : dataset.graphs) {
    ElementBag bag = triplet_bag(g);
    apply_motifs(bag, lexicon, 0, lexicon.motifs.size());
    out.emplace(g.image_id, std::move(bag));
  }
  return out;
}

namespace {

struct PairKeyHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p)
      const noexcept {
    std::uint64_t h = p.first * 0x9E3779B97F4A7C15ULL;
    h ^= p.second + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

std::vector<PairStatistic> admissible_pairs(const std::vector<ElementBag>& bags,
                                            const MotifLexicon& lexicon) {
  const auto& s = lexicon.settings;
  const double num_images = static_cast<double>(bags.size());

  // Images containing each element at least once.
  std::unordered_map<std::uint64_t, Count> presence;
  for (const auto& bag : bags) {
    for (const auto& [e, n] : bag) {
      if (n > 0) ++presence[e.key()];
    }
  }
  auto presence_of = [&](const MotifElement& e) -> Count {
    auto it = presence.find(e.key());
    return it == presence.end() ? 0 : it->second;
  };

  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, Count,
                     PairKeyHash>
      joint;
  std::map<std::uint64_t, MotifElement> elements;
  std::vector<MotifElement> present;
  for (const auto& bag : bags) {
    present.clear();
    for (const auto& [e, n] : bag) {
      if (n <= 0 || presence_of(e) < s.min_count) continue;
      present.push_back(e);
      elements.emplace(e.key(), e);
      if (n >= 2) ++joint[{e.key(), e.key()}];
    }
    // `bag` iterates in element order, so present[i] < present[j] for i < j.
    for (std::size_t i = 0; i < present.size(); ++i) {
      for (std::size_t j = i + 1; j < present.size(); ++j) {
        ++joint[{present[i].key(), present[j].key()}];
      }
    }
  }

  std::vector<PairStatistic> out;
  for (const auto& [key, n] : joint) {
    PairStatistic p{elements.at(key.first), elements.at(key.second)};
    p.count_a = presence_of(p.a);
    p.count_b = presence_of(p.b);
    p.joint = n;
    p.lift = static_cast<double>(n) * num_images /
             (static_cast<double>(p.count_a) * static_cast<double>(p.count_b));
    if (p.lift >= s.min_lift) out.push_back(p);
  }

  std::vector<std::pair<std::string, std::string>> names;
  names.reserve(out.size());
  std::vector<std::size_t> order(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    order[i] = i;
    names.emplace_back(lexicon.name_of(out[i].a), lexicon.name_of(out[i].b));
  }
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (out[x].lift != out[y].lift) return out[x].lift > out[y].lift;
    if (out[x].joint != out[y].joint) return out[x].joint > out[y].joint;
    return names[x] < names[y];
  });
  std::vector<PairStatistic> sorted;
  sorted.reserve(out.size());
  for (std::size_t i : order) sorted.push_back(out[i]);
  return sorted;
}

MotifLexicon mine_motifs(const Dataset& dataset,
                         const MiningSettings& settings) {
  if (settings.min_count <= 0 || !(settings.min_lift > 0)) {
    throw std::invalid_argument("mining thresholds must be positive");
  }
  MotifLexicon lexicon;
  lexicon.vocab = dataset.vocab;
  lexicon.settings = settings;

  std::vector<ElementBag> bags;
  bags.reserve(dataset.graphs.size());
  for (const auto& g : dataset.graphs) bags.push_back(triplet_bag(g));

  for (std::size_t round = 1;; ++round) {
    const auto candidates = admissible_pairs(bags, lexicon);
    const std::size_t first = lexicon.motifs.size();
    std::vector<MotifElement> consumed;
    auto is_consumed = [&](const MotifElement& e) {
      return std::find(consumed.begin(), consumed.end(), e) != consumed.end();
    };
    for (const auto& p : candidates) {
      if (is_consumed(p.a) || is_consumed(p.b)) continue;
      consumed.push_back(p.a);
      consumed.push_back(p.b);
      lexicon.motifs.push_back({p.a, p.b, p.lift, p.joint, p.count_a,
                                p.count_b,
                                lexicon.length_of(p.a) + lexicon.length_of(p.b),
                                round});
    }
    if (lexicon.motifs.size() == first) break;
    for (auto& bag : bags) apply_motifs(bag, lexicon, first, lexicon.motifs.size());
  }
  return lexicon;
}

std::vector<CoverageRow> motif_coverage(const Dataset& dataset,
                                        const MotifLexicon& lexicon) {
  const std::size_t top = std::max<std::size_t>(2, lexicon.max_length());
  std::vector<std::size_t> longest;
  longest.reserve(dataset.graphs.size());
  for (const auto& g : dataset.graphs) {
    ElementBag bag = triplet_bag(g);
    apply_motifs(bag, lexicon, 0, lexicon.motifs.size());
    std::size_t best = 0;
    for (const auto& [e, n] : bag) {
      if (n > 0 && e.is_motif()) best = std::max(best, lexicon.length_of(e));
    }
    longest.push_back(best);
  }
  std::vector<CoverageRow> rows;
  for (std::size_t len = 2; len <= top; ++len) {
    const auto hits = std::count_if(longest.begin(), longest.end(),
                                    [&](std::size_t l) { return l >= len; });
    rows.push_back({len, longest.empty()
                             ? 0.0
                             : static_cast<double>(hits) /
                                   static_cast<double>(longest.size())});
  }
  return rows;
}

}  // namespace scenestat
