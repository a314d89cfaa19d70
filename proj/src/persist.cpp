#include "scenestat/persist.hpp"

#include <cstdio>

#include "json.hpp"
#include "scenestat/errors.hpp"

namespace scenestat {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string checksum_of(const json& payload) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(payload.dump())));
  return buf;
}

std::string seal(json payload, const char* kind) {
  payload["format_version"] = kFormatVersion;
  payload["kind"] = kind;
  payload["checksum"] = checksum_of(payload);
  return payload.dump(1) + "\n";
}

json unseal(const std::string& text, const char* kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw PersistError(PersistError::Kind::kChecksumMismatch,
                       "artifact is truncated or corrupt");
  }
  if (!j.is_object() || !j.contains("checksum") || !j["checksum"].is_string()) {
    throw PersistError(PersistError::Kind::kChecksumMismatch,
                       "artifact carries no checksum");
  }
  const std::string stored = j["checksum"].get<std::string>();
  j.erase("checksum");
  if (checksum_of(j) != stored) {
    throw PersistError(PersistError::Kind::kChecksumMismatch,
                       "checksum mismatch");
  }
  if (!j.contains("format_version") || j["format_version"] != kFormatVersion) {
    throw PersistError(PersistError::Kind::kVersionMismatch,
                       "unsupported format_version " +
                           j.value("format_version", json()).dump());
  }
  if (j.value("kind", "") != kind) {
    throw PersistError(PersistError::Kind::kWrongKind,
                       std::string("expected a ") + kind + " artifact");
  }
  return j;
}

json vocab_json(const Vocab& v) {
  const auto& p = v.predicates();
  return {{"object_classes", v.object_classes()},
          {"predicates", std::vector<std::string>(p.begin() + 1, p.end())}};
}

Vocab vocab_from(const json& j) {
  return Vocab(j.at("object_classes").get<std::vector<std::string>>(),
               j.at("predicates").get<std::vector<std::string>>());
}

json element_json(const MotifElement& e) {
  if (e.is_motif()) return {{"motif", e.motif_index()}};
  const TripletType t = e.triplet();
  return {{"triplet", {t.head, t.predicate, t.tail}}};
}

MotifElement element_from(const json& j) {
  if (j.contains("motif")) return MotifElement::motif(j["motif"].get<std::size_t>());
  const auto& t = j.at("triplet");
  return MotifElement::atomic(
      {t.at(0).get<ClassId>(), t.at(1).get<PredicateId>(), t.at(2).get<ClassId>()});
}

// Structural errors inside a checksummed document mean the writer was buggy
// or the format drifted.
template <typename Fn>
auto decode(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw PersistError(PersistError::Kind::kVersionMismatch,
                       std::string("artifact does not match format: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw PersistError(PersistError::Kind::kVersionMismatch,
                       std::string("artifact does not match format: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw PersistError(PersistError::Kind::kVersionMismatch,
                       std::string("artifact does not match format: ") + e.what());
  }
}

}  // namespace

std::string serialize_frequency_table(const FrequencyTable& table) {
  json j;
  j["vocab"] = vocab_json(table.vocab());
  j["counts"] = json::array();
  for (const auto& [key, row] : table.counts()) {
    j["counts"].push_back({key.first, key.second, row});
  }
  return seal(std::move(j), "frequency_table");
}

FrequencyTable deserialize_frequency_table(const std::string& text) {
  const json j = unseal(text, "frequency_table");
  return decode([&] {
    FrequencyTable table(vocab_from(j.at("vocab")));
    for (const auto& entry : j.at("counts")) {
      const auto head = entry.at(0).get<ClassId>();
      const auto tail = entry.at(1).get<ClassId>();
      const auto row = entry.at(2).get<std::vector<Count>>();
      if (row.size() != table.vocab().num_predicates()) {
        throw std::invalid_argument("count row has wrong length");
      }
      for (std::size_t p = 0; p < row.size(); ++p) {
        table.add(head, tail, static_cast<PredicateId>(p), row[p]);
      }
    }
    return table;
  });
}

void save_frequency_table(const FrequencyTable& table,
                          const std::filesystem::path& path) {
  write_file(path, serialize_frequency_table(table));
}

FrequencyTable load_frequency_table(const std::filesystem::path& path) {
  return deserialize_frequency_table(read_file(path));
}

std::string serialize_motif_lexicon(const MotifLexicon& lexicon) {
  json j;
  j["vocab"] = vocab_json(lexicon.vocab);
  j["settings"] = {{"min_count", lexicon.settings.min_count},
                   {"min_lift", lexicon.settings.min_lift},
                   {"cooccurrence_scope", kCooccurrenceScope},
                   {"probability_model", kProbabilityModel},
                   {"conflict_order", kConflictOrder}};
  j["motifs"] = json::array();
  for (const auto& m : lexicon.motifs) {
    j["motifs"].push_back({{"a", element_json(m.a)},
                           {"b", element_json(m.b)},
                           {"lift", m.lift},
                           {"joint_count", m.joint_count},
                           {"count_a", m.count_a},
                           {"count_b", m.count_b},
                           {"length", m.length},
                           {"round", m.round}});
  }
  return seal(std::move(j), "motif_lexicon");
}

MotifLexicon deserialize_motif_lexicon(const std::string& text) {
  const json j = unseal(text, "motif_lexicon");
  return decode([&] {
    MotifLexicon lex;
    lex.vocab = vocab_from(j.at("vocab"));
    lex.settings.min_count = j.at("settings").at("min_count").get<Count>();
    lex.settings.min_lift = j.at("settings").at("min_lift").get<double>();
    for (const auto& jm : j.at("motifs")) {
      Motif m{element_from(jm.at("a")), element_from(jm.at("b"))};
      for (const auto* e : {&m.a, &m.b}) {
        if (e->is_motif() && e->motif_index() >= lex.motifs.size()) {
          throw std::invalid_argument("motif references a later entry");
        }
      }
      m.lift = jm.at("lift").get<double>();
      m.joint_count = jm.at("joint_count").get<Count>();
      m.count_a = jm.at("count_a").get<Count>();
      m.count_b = jm.at("count_b").get<Count>();
      m.length = jm.at("length").get<std::size_t>();
      m.round = jm.at("round").get<std::size_t>();
      lex.motifs.push_back(m);
    }
    return lex;
  });
}

void save_motif_lexicon(const MotifLexicon& lexicon,
                        const std::filesystem::path& path) {
  write_file(path, serialize_motif_lexicon(lexicon));
}

MotifLexicon load_motif_lexicon(const std::filesystem::path& path) {
  return deserialize_motif_lexicon(read_file(path));
}

}  // namespace scenestat
