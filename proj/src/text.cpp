#include "fusereader/text.hpp"

#include <cctype>

namespace fusereader {

namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

}  // namespace

bool is_entity_marker(std::string_view token) {
  constexpr std::string_view prefix = "@entity";
  if (token.size() <= prefix.size() || token.substr(0, prefix.size()) != prefix) return false;
  for (char c : token.substr(prefix.size())) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::string chunk;
    chunk.reserve(j - i);
    for (std::size_t k = i; k < j; ++k) chunk.push_back(lower(text[k]));
    i = j;

    if (is_entity_marker(chunk)) {
      out.push_back(std::move(chunk));
      continue;
    }
    std::string word;
    for (char c : chunk) {
      if (is_punct(c)) {
        if (!word.empty()) {
          out.push_back(word);
          word.clear();
        }
        out.push_back(std::string(1, c));
      } else {
        word.push_back(c);
      }
    }
    if (!word.empty()) out.push_back(std::move(word));
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const std::string& tok : normalize_tokens(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace fusereader
