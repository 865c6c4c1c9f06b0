#include "hcc/structured_output.hpp"

#include <numeric>

#include <nlohmann/json.hpp>

#include "hcc/error.hpp"
#include "hcc/text_util.hpp"

namespace hcc {

std::vector<std::size_t> ResearchPlan::suggestion_counts() const {
    std::vector<std::size_t> counts;
    for (const auto& direction : directions) counts.push_back(direction.suggestions.size());
    return counts;
}

std::size_t ResearchPlan::trajectory_count() const {
    std::size_t total = 0;
    for (const auto& direction : directions) total += direction.suggestions.size();
    return total;
}

std::string strip_trailing_commas(std::string_view json) {
    std::string out;
    out.reserve(json.size());
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = 0; i < json.size(); ++i) {
        char c = json[i];
        if (in_string) {
            out += c;
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out += c;
            continue;
        }
        if (c == ',') {
            std::size_t k = i + 1;
            while (k < json.size() && (json[k] == ' ' || json[k] == '\t' || json[k] == '\n' || json[k] == '\r')) ++k;
            if (k < json.size() && (json[k] == '}' || json[k] == ']')) continue;
        }
        out += c;
    }
    return out;
}

namespace {

std::string plan_json_text(std::string_view text) {
    for (const auto& block : text::fenced_blocks(text)) {
        std::string body = text::trim(block.body);
        if (!body.empty() && body.front() == '{') return body;
    }
    std::size_t open = text.find('{');
    std::size_t close = text.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        fail(Errc::MalformedPlan, "response contains no JSON object");
    return std::string(text.substr(open, close - open + 1));
}

}  // namespace

ResearchPlan parse_research_plan(std::string_view text) {
    nlohmann::ordered_json json;
    try {
        json = nlohmann::ordered_json::parse(strip_trailing_commas(plan_json_text(text)));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::MalformedPlan, std::string("not valid JSON: ") + e.what());
    }
    if (!json.is_object()) fail(Errc::MalformedPlan, "top level must be an object of directions");

    ResearchPlan plan;
    for (const auto& [title, suggestions] : json.items()) {
        if (text::trim(title).empty()) fail(Errc::MalformedPlan, "empty direction title");
        Direction direction{title, {}};
        if (suggestions.is_object()) {
            for (const auto& [key, value] : suggestions.items()) {
                if (!value.is_string()) fail(Errc::MalformedPlan, "suggestion '" + key + "' is not a string");
                direction.suggestions.push_back(value.get<std::string>());
            }
        } else if (suggestions.is_array()) {
            for (const auto& value : suggestions) {
                if (!value.is_string()) fail(Errc::MalformedPlan, "suggestion is not a string");
                direction.suggestions.push_back(value.get<std::string>());
            }
        } else {
            fail(Errc::MalformedPlan, "direction '" + title + "' must map to suggestions");
        }
        if (direction.suggestions.empty()) fail(Errc::MalformedPlan, "direction '" + title + "' has no suggestions");
        for (const auto& suggestion : direction.suggestions)
            if (text::trim(suggestion).empty()) fail(Errc::MalformedPlan, "empty suggestion in '" + title + "'");
        plan.directions.push_back(std::move(direction));
    }
    if (plan.directions.size() < kMinPlanDirections) {
        fail(Errc::TooFewDirections, std::to_string(plan.directions.size()) + " directions, need at least " +
                                         std::to_string(kMinPlanDirections));
    }
    return plan;
}

std::string serialize_research_plan(const ResearchPlan& plan) {
    nlohmann::ordered_json json = nlohmann::ordered_json::object();
    for (const auto& direction : plan.directions) {
        nlohmann::ordered_json suggestions = nlohmann::ordered_json::object();
        for (std::size_t j = 0; j < direction.suggestions.size(); ++j)
            suggestions[std::to_string(j + 1)] = direction.suggestions[j];
        json[direction.title] = std::move(suggestions);
    }
    return json.dump(2);
}

std::string extract_code_block(std::string_view text, MultipleBlockPolicy policy) {
    auto blocks = text::fenced_blocks(text);
    if (blocks.empty()) fail(Errc::NoCodeBlock, "response has no fenced code block");
    if (blocks.size() > 1 && policy == MultipleBlockPolicy::Error)
        fail(Errc::MultipleBlocks, std::to_string(blocks.size()) + " fenced blocks");
    return blocks.front().body;
}

}  // namespace hcc
