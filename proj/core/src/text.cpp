#include "slcnn/text.hpp"

#include <algorithm>
#include <array>
#include <cstdint>

namespace slcnn {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return is_upper(c) || is_lower(c); }
bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_opener(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Parses "#123;" or "#x1F;" starting at s[0] == '#'. Returns the number of
// characters consumed, 0 if not a valid numeric reference.
std::size_t parse_numeric_ref(std::string_view s, std::uint32_t& cp) {
  std::size_t i = 1;
  int base = 10;
  if (i < s.size() && (s[i] == 'x' || s[i] == 'X')) {
    base = 16;
    ++i;
  }
  std::uint32_t value = 0;
  std::size_t digits = 0;
  for (; i < s.size() && digits < 7; ++i, ++digits) {
    const char c = s[i];
    int d;
    if (is_digit(c)) {
      d = c - '0';
    } else if (base == 16 && c >= 'a' && c <= 'f') {
      d = c - 'a' + 10;
    } else if (base == 16 && c >= 'A' && c <= 'F') {
      d = c - 'A' + 10;
    } else {
      break;
    }
    value = value * static_cast<std::uint32_t>(base) + static_cast<std::uint32_t>(d);
  }
  if (digits == 0 || i >= s.size() || s[i] != ';') return 0;
  if (value == 0 || value > 0x10FFFF || (value >= 0xD800 && value <= 0xDFFF)) return 0;
  cp = value;
  return i + 1;
}

struct NamedEntity {
  std::string_view name;
  std::string_view text;
};

constexpr std::array<NamedEntity, 12> kNamedEntities{{
    {"amp;", "&"},
    {"lt;", "<"},
    {"gt;", ">"},
    {"quot;", "\""},
    {"apos;", "'"},
    {"nbsp;", " "},
    {"ndash;", "-"},
    {"mdash;", "-"},
    {"lsquo;", "'"},
    {"rsquo;", "'"},
    {"ldquo;", "\""},
    {"rdquo;", "\""},
}};

// One left-to-right decoding pass. Also decodes the bare "#39;" form that
// appears in scraped news text whose ampersands were lost.
std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const char c = s[i];
    if (c == '&' && i + 1 < s.size()) {
      const auto rest = s.substr(i + 1);
      if (rest[0] == '#') {
        std::uint32_t cp;
        if (const auto n = parse_numeric_ref(rest, cp)) {
          append_utf8(out, cp);
          i += 1 + n;
          continue;
        }
      } else {
        bool matched = false;
        for (const auto& e : kNamedEntities) {
          if (rest.starts_with(e.name)) {
            out += e.text;
            i += 1 + e.name.size();
            matched = true;
            break;
          }
        }
        if (matched) continue;
      }
    } else if (c == '#' && (i == 0 || is_space(s[i - 1]))) {
      std::uint32_t cp;
      if (const auto n = parse_numeric_ref(s.substr(i), cp); n >= 4) {
        append_utf8(out, cp);
        i += n;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return out;
}

// Replaces "<tag ...>", "</tag>", "<!-- ... >" and "<?...>" with a space.
std::string strip_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '<' && i + 1 < s.size() &&
        (is_alpha(s[i + 1]) || s[i + 1] == '/' || s[i + 1] == '!' || s[i + 1] == '?')) {
      const auto close = s.find_first_of("<>", i + 1);
      if (close != std::string_view::npos && s[close] == '>') {
        out += ' ';
        i = close + 1;
        continue;
      }
    }
    out += s[i];
    ++i;
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

constexpr std::array<std::string_view, 24> kAbbreviations{
    "mr",  "mrs", "ms",  "dr",  "st",  "vs",  "etc", "e.g", "i.e", "no",  "inc", "ltd",
    "co",  "u.s", "jr",  "sr",  "prof", "gen", "gov", "sen", "rep", "corp", "u.k", "mt",
};

bool is_abbreviation(std::string_view word) {
  std::string lower(word);
  for (auto& c : lower) {
    if (is_upper(c)) c = static_cast<char>(c - 'A' + 'a');
  }
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

// The letters-and-periods word ending right before position `dot`.
std::string_view word_before(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && (is_alpha(text[begin - 1]) || text[begin - 1] == '.')) --begin;
  return text.substr(begin, dot - begin);
}

bool is_word_byte(unsigned char c) { return is_alnum(static_cast<char>(c)) || c >= 0x80; }

// Length of a UTF-8 general punctuation character (U+2000..U+206F) at s[i],
// or 0.
std::size_t general_punctuation_at(std::string_view s, std::size_t i) {
  if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
      (static_cast<unsigned char>(s[i + 1]) == 0x80 || static_cast<unsigned char>(s[i + 1]) == 0x81)) {
    return 3;
  }
  return 0;
}

}  // namespace

std::span<const std::string_view> sentence_abbreviations() { return kAbbreviations; }

std::string clean_text(std::string_view raw) {
  std::string current = collapse_whitespace(strip_tags(decode_entities(raw)));
  // Every changing pass strictly shortens the text, so this terminates.
  for (;;) {
    std::string next = collapse_whitespace(strip_tags(decode_entities(current)));
    if (next == current) return current;
    current = std::move(next);
  }
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  auto emit = [&](std::size_t begin, std::size_t end) {
    while (begin < end && is_space(text[begin])) ++begin;
    while (end > begin && is_space(text[end - 1])) --end;
    if (end > begin) sentences.emplace_back(text.substr(begin, end - begin));
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    const std::size_t run_begin = i;
    while (i < text.size() && is_terminator(text[i])) ++i;
    const std::size_t run_length = i - run_begin;
    while (i < text.size() && is_closer(text[i])) ++i;
    const std::size_t boundary = i;

    if (i >= text.size() || !is_space(text[i])) continue;
    std::size_t j = i;
    while (j < text.size() && is_space(text[j])) ++j;
    while (j < text.size() && is_opener(text[j])) ++j;
    if (j >= text.size() || !(is_upper(text[j]) || is_digit(text[j]))) continue;

    if (run_length == 1 && text[run_begin] == '.' && boundary == run_begin + 1) {
      const auto word = word_before(text, run_begin);
      const bool initial = word.size() == 1 && is_upper(word[0]);
      if (initial || is_abbreviation(word)) continue;
    }
    emit(start, boundary);
    start = boundary;
  }
  emit(start, text.size());
  return sentences;
}

std::vector<std::string> tokenize_words(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  const auto word_at = [&](std::size_t k) {
    return k < sentence.size() && general_punctuation_at(sentence, k) == 0 &&
           is_word_byte(static_cast<unsigned char>(sentence[k]));
  };

  for (std::size_t i = 0; i < sentence.size();) {
    const char c = sentence[i];
    if (const auto n = general_punctuation_at(sentence, i)) {
      // U+2019 between word characters is an apostrophe.
      const bool right_quote = static_cast<unsigned char>(sentence[i + 1]) == 0x80 &&
                               static_cast<unsigned char>(sentence[i + 2]) == 0x99;
      if (right_quote && !current.empty() && word_at(i + n)) {
        current += '\'';
      } else {
        flush();
      }
      i += n;
      continue;
    }
    if (is_word_byte(static_cast<unsigned char>(c))) {
      current += is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
    } else if ((c == '\'' || c == '-') && !current.empty() && word_at(i + 1)) {
      current += c;
    } else {
      flush();
    }
    ++i;
  }
  flush();
  return tokens;
}

std::string join_fields(std::span<const std::string> fields) {
  std::string text;
  for (const auto& raw : fields) {
    const auto field = collapse_whitespace(raw);
    if (field.empty()) continue;
    if (!text.empty()) {
      text += is_terminator(text.back()) ? " " : ". ";
    }
    text += field;
  }
  return text;
}

std::vector<std::vector<std::string>> tokenize_document(std::string_view text) {
  std::vector<std::vector<std::string>> doc;
  for (const auto& sentence : split_sentences(clean_text(text))) {
    auto words = tokenize_words(sentence);
    if (!words.empty()) doc.push_back(std::move(words));
  }
  return doc;
}

}  // namespace slcnn
