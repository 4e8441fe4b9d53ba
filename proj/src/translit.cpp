// SPDX-License-Identifier: Apache-2.0

#include "xlat/translit.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "xlat/unicode.hpp"

namespace xlat::translit {

namespace {

struct Block {
  char32_t begin;
  char32_t end;
};

Block script_block(Script script) {
  switch (script) {
    case Script::Devanagari:
      return {0x0900, 0x097F};
    case Script::Bengali:
      return {0x0980, 0x09FF};
    case Script::Tamil:
      return {0x0B80, 0x0BFF};
  }
  throw std::logic_error("unreachable");
}

Category category_from_name(const std::string& name) {
  if (name == "consonant") return Category::Consonant;
  if (name == "vowel") return Category::Vowel;
  if (name == "vowel_sign") return Category::VowelSign;
  if (name == "digit") return Category::Digit;
  if (name == "sign") return Category::Sign;
  if (name == "virama") return Category::Virama;
  throw std::invalid_argument("unknown category: " + name);
}

std::u32string parse_sequence(const std::string& field) {
  std::u32string seq;
  std::istringstream in(field);
  std::string hex;
  while (in >> hex) {
    seq.push_back(static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
  }
  if (seq.empty()) {
    throw std::invalid_argument("empty codepoint sequence");
  }
  return seq;
}

}  // namespace

std::string_view script_name(Script script) {
  switch (script) {
    case Script::Devanagari:
      return "devanagari";
    case Script::Bengali:
      return "bengali";
    case Script::Tamil:
      return "tamil";
  }
  throw std::logic_error("unreachable");
}

Script script_from_name(std::string_view name) {
  if (name == "devanagari") return Script::Devanagari;
  if (name == "bengali") return Script::Bengali;
  if (name == "tamil") return Script::Tamil;
  throw std::invalid_argument("unknown script: " + std::string(name));
}

ScriptTable ScriptTable::load(const std::filesystem::path& path,
                              Script script) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  ScriptTable table;
  table.script_ = script;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 =
        tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected three tab-separated fields");
    }
    Entry entry;
    entry.sequence = parse_sequence(line.substr(0, tab1));
    entry.latin = line.substr(tab1 + 1, tab2 - tab1 - 1);
    entry.category = category_from_name(line.substr(tab2 + 1));
    if (!table.entries_.emplace(entry.sequence, entry).second) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": duplicate codepoint sequence");
    }
    table.max_sequence_length_ =
        std::max(table.max_sequence_length_, entry.sequence.size());
  }
  return table;
}

const Entry* ScriptTable::find(const std::u32string& sequence) const {
  auto it = entries_.find(sequence);
  return it == entries_.end() ? nullptr : &it->second;
}

bool ScriptTable::in_block(char32_t cp) const {
  const Block block = script_block(script_);
  return cp >= block.begin && cp <= block.end;
}

ScriptTable load_script_table(const std::filesystem::path& resources,
                              Script script) {
  return ScriptTable::load(
      resources / "translit" /
          (std::string(script_name(script)) + ".tsv"),
      script);
}

std::string transliterate(std::string_view text, const ScriptTable& table,
                          std::vector<std::string>* warnings) {
  const std::u32string cps = unicode::to_codepoints(text);
  std::string out;
  out.reserve(text.size());
  std::string pending;
  bool have_pending = false;

  auto flush = [&](bool inherent_vowel) {
    if (!have_pending) return;
    out += pending;
    if (inherent_vowel) out += 'a';
    pending.clear();
    have_pending = false;
  };
  auto warn = [&](const std::string& message) {
    if (warnings) warnings->push_back(message);
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    if (cps[i] == 0x200C || cps[i] == 0x200D) {
      ++i;
      continue;
    }
    const Entry* entry = nullptr;
    std::size_t len = 0;
    const std::size_t longest =
        std::min(table.max_sequence_length(), cps.size() - i);
    for (std::size_t l = longest; l >= 1; --l) {
      entry = table.find(cps.substr(i, l));
      if (entry) {
        len = l;
        break;
      }
    }
    if (!entry) {
      const char32_t cp = cps[i];
      flush(true);
      if (table.in_block(cp)) {
        std::ostringstream msg;
        msg << "unmapped " << script_name(table.script()) << " codepoint U+"
            << std::hex << std::uppercase << std::setw(4) << std::setfill('0')
            << static_cast<std::uint32_t>(cp) << "; passed through";
        warn(msg.str());
      }
      unicode::append_utf8(out, cp);
      ++i;
      continue;
    }
    switch (entry->category) {
      case Category::Consonant:
        flush(true);
        pending = entry->latin;
        have_pending = true;
        break;
      case Category::Vowel:
        flush(true);
        out += entry->latin;
        break;
      case Category::VowelSign:
        if (have_pending) {
          out += pending;
          pending.clear();
          have_pending = false;
        } else {
          warn("vowel sign without a consonant");
        }
        out += entry->latin;
        break;
      case Category::Virama:
        if (have_pending) {
          flush(false);
        } else {
          warn("virama without a consonant");
        }
        break;
      case Category::Digit:
      case Category::Sign:
        flush(true);
        out += entry->latin;
        break;
    }
    i += len;
  }
  flush(true);
  return out;
}

}  // namespace xlat::translit
