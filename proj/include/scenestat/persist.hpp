#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "scenestat/baseline.hpp"
#include "scenestat/motifs.hpp"

namespace scenestat {

inline constexpr int kFormatVersion = 1;

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view data);

// Artifacts are JSON documents with "format_version", "kind" and a "checksum"
// over the compact serialization of every other field. Loading throws
// PersistError on a version or checksum mismatch; truncated or otherwise
// unparseable files fail the checksum.
std::string serialize_frequency_table(const FrequencyTable& table);
FrequencyTable deserialize_frequency_table(const std::string& text);
void save_frequency_table(const FrequencyTable& table,
                          const std::filesystem::path& path);
FrequencyTable load_frequency_table(const std::filesystem::path& path);

std::string serialize_motif_lexicon(const MotifLexicon& lexicon);
MotifLexicon deserialize_motif_lexicon(const std::string& text);
void save_motif_lexicon(const MotifLexicon& lexicon,
                        const std::filesystem::path& path);
MotifLexicon load_motif_lexicon(const std::filesystem::path& path);

}  // namespace scenestat
