// SPDX-License-Identifier: Apache-2.0
//
// ISO 15919 romanization of Devanagari, Bengali, and Tamil text. Strict
// tables: the inherent vowel is always written (no schwa deletion), so
// सूरज comes out as "sūraja".

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace xlat::translit {

enum class Script { Devanagari, Bengali, Tamil };

std::string_view script_name(Script script);
Script script_from_name(std::string_view name);

enum class Category { Consonant, Vowel, VowelSign, Digit, Sign, Virama };

struct Entry {
  std::u32string sequence;  // one codepoint, or consonant+nukta pairs
  std::string latin;
  Category category = Category::Sign;
};

/// Mapping table for one script, loaded from a TSV of
/// codepoint-hex-sequence, Latin output, category.
class ScriptTable {
 public:
  static ScriptTable load(const std::filesystem::path& path, Script script);

  Script script() const { return script_; }
  const Entry* find(const std::u32string& sequence) const;
  std::size_t max_sequence_length() const { return max_sequence_length_; }
  bool in_block(char32_t cp) const;
  std::size_t size() const { return entries_.size(); }

 private:
  Script script_ = Script::Devanagari;
  std::map<std::u32string, Entry> entries_;
  std::size_t max_sequence_length_ = 1;
};

/// Loads <resources>/translit/<script>.tsv.
ScriptTable load_script_table(const std::filesystem::path& resources,
                              Script script);

/// Romanizes in-script text; everything else passes through unchanged, so
/// the call is idempotent on its own output. Unknown codepoints inside the
/// script's Unicode block pass through and append a note to `warnings`.
std::string transliterate(std::string_view text, const ScriptTable& table,
                          std::vector<std::string>* warnings = nullptr);

}  // namespace xlat::translit
