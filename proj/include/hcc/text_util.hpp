#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hcc::text {

struct FencedBlock {
    std::string language;
    std::string body;
};

/// All ``` fenced blocks in order. An unterminated final fence is ignored.
std::vector<FencedBlock> fenced_blocks(std::string_view text);

std::string trim(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);
bool starts_with_ci(std::string_view text, std::string_view prefix);

/// Keeps the last `max_lines` lines and at most `max_chars` trailing bytes
/// (cut on a line start where possible).
std::string keep_tail(std::string_view text, std::size_t max_lines, std::size_t max_chars);

/// Keeps the tail of `text` so that its token estimate fits in `max_tokens`
/// (4 bytes per token), prefixed with a truncation marker.
std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

}  // namespace hcc::text
