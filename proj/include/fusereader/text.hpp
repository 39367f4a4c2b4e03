#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fusereader {

// Shared normalization: lowercase, whitespace split, ASCII punctuation split
// into standalone tokens. "@entityN" markers survive as single tokens so
// cloze candidates keep their positions. Both the tokenizer and the metric
// tokenization go through here.
std::vector<std::string> normalize_tokens(std::string_view text);

// Tokens joined with single spaces (the round-trip normal form).
std::string normalize_text(std::string_view text);

bool is_entity_marker(std::string_view token);

}  // namespace fusereader
