#pragma once

// Parsing of model responses: research plans (JSON) and fenced code blocks.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hcc {

struct Direction {
    std::string title;
    std::vector<std::string> suggestions;

    bool operator==(const Direction&) const = default;
};

/// m directions, each with q_i suggestions.
struct ResearchPlan {
    std::vector<Direction> directions;

    std::size_t direction_count() const { return directions.size(); }
    std::vector<std::size_t> suggestion_counts() const;
    std::size_t trajectory_count() const;

    bool operator==(const ResearchPlan&) const = default;
};

inline constexpr std::size_t kMinPlanDirections = 3;

/// Accepts bare JSON or JSON inside a fenced block, tolerates trailing
/// commas and surrounding prose. Throws MalformedPlan, TooFewDirections.
ResearchPlan parse_research_plan(std::string_view text);

/// {"<direction>": {"1": "...", "2": "..."}, ...}, two-space indent.
std::string serialize_research_plan(const ResearchPlan& plan);

/// Removes commas that directly precede '}' or ']' outside string literals.
std::string strip_trailing_commas(std::string_view json);

enum class MultipleBlockPolicy { FirstWins, Error };

/// Body of the first ``` fenced block, language tag dropped.
/// Throws NoCodeBlock, MultipleBlocks (policy Error).
std::string extract_code_block(std::string_view text, MultipleBlockPolicy policy = MultipleBlockPolicy::FirstWins);

}  // namespace hcc
