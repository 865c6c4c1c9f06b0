#include "hcc/text_util.hpp"

#include <algorithm>
#include <cctype>

namespace hcc::text {

std::vector<FencedBlock> fenced_blocks(std::string_view text) {
    std::vector<FencedBlock> blocks;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find("```", pos);
        if (open == std::string_view::npos) break;
        std::size_t line_end = text.find('\n', open);
        if (line_end == std::string_view::npos) break;
        std::string language = trim(text.substr(open + 3, line_end - open - 3));
        std::size_t body_start = line_end + 1;
        // closing fence must begin a line
        std::size_t search = body_start;
        std::size_t close = std::string_view::npos;
        while (true) {
            std::size_t candidate = text.find("```", search);
            if (candidate == std::string_view::npos) break;
            if (candidate == body_start || text[candidate - 1] == '\n') {
                close = candidate;
                break;
            }
            search = candidate + 3;
        }
        if (close == std::string_view::npos) break;
        std::string body(text.substr(body_start, close - body_start));
        if (!body.empty() && body.back() == '\n') body.pop_back();
        blocks.push_back({std::move(language), std::move(body)});
        std::size_t after = text.find('\n', close);
        pos = after == std::string_view::npos ? text.size() : after + 1;
    }
    return blocks;
}

std::string trim(std::string_view text) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && is_space(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && is_space(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(pos));
            break;
        }
        lines.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

bool starts_with_ci(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

std::string keep_tail(std::string_view text, std::size_t max_lines, std::size_t max_chars) {
    std::size_t start = 0;
    std::size_t lines = 0;
    // a trailing newline does not open a new line
    std::size_t end = text.size();
    if (end > 0 && text[end - 1] == '\n') --end;
    for (std::size_t i = end; i > 0; --i) {
        if (text[i - 1] == '\n') {
            if (++lines == max_lines) {
                start = i;
                break;
            }
        }
    }
    if (text.size() - start > max_chars) {
        start = text.size() - max_chars;
        std::size_t nl = text.find('\n', start);
        if (nl != std::string_view::npos && nl + 1 < text.size()) start = nl + 1;
    }
    return std::string(text.substr(start));
}

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens) {
    const std::size_t max_chars = max_tokens * 4;
    if (text.size() <= max_chars) return std::string(text);
    std::size_t dropped = text.size() - max_chars;
    while (dropped < text.size() && (static_cast<unsigned char>(text[dropped]) & 0xC0) == 0x80) ++dropped;
    return "[... " + std::to_string(dropped) + " characters truncated ...]\n" + std::string(text.substr(dropped));
}

std::string join(const std::vector<std::string>& parts, std::string_view separator) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += separator;
        out += parts[i];
    }
    return out;
}

}  // namespace hcc::text
