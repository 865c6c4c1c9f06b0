#include "hcc/prompts.hpp"

#include <algorithm>

#include "hcc/error.hpp"

namespace hcc {

namespace {

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Length of the slot name starting after '{' at `open`, or 0 when the brace
// does not open a {name} slot.
std::size_t slot_length(std::string_view text, std::size_t open) {
    std::size_t k = open + 1;
    while (k < text.size() && is_slot_char(text[k])) ++k;
    if (k == open + 1 || k >= text.size() || text[k] != '}') return 0;
    return k - open - 1;
}

}  // namespace

std::string_view to_string(PromptName name) noexcept {
    switch (name) {
        case PromptName::Descriptor: return "Descriptor";
        case PromptName::Draft: return "Draft";
        case PromptName::Debug: return "Debug";
        case PromptName::Plan: return "Plan";
        case PromptName::Improve: return "Improve";
        case PromptName::PromoteP1: return "PromoteP1";
        case PromptName::PromoteP2: return "PromoteP2";
    }
    return "Descriptor";
}

PromptName prompt_name_from_string(std::string_view text) {
    for (PromptName name : kAllPrompts)
        if (to_string(name) == text) return name;
    fail(Errc::UnknownTemplate, std::string(text));
}

std::vector<std::string> placeholders(std::string_view template_text) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < template_text.size(); ++i) {
        if (template_text[i] != '{') continue;
        std::size_t length = slot_length(template_text, i);
        if (!length) continue;
        std::string name(template_text.substr(i + 1, length));
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
        i += length + 1;
    }
    return names;
}

std::string render_template(std::string_view template_text, const Bindings& bindings) {
    std::string out;
    out.reserve(template_text.size());
    std::size_t i = 0;
    while (i < template_text.size()) {
        char c = template_text[i];
        std::size_t length = c == '{' ? slot_length(template_text, i) : 0;
        if (!length) {
            out += c;
            ++i;
            continue;
        }
        std::string_view name = template_text.substr(i + 1, length);
        auto binding = bindings.find(name);
        if (binding == bindings.end()) fail(Errc::MissingBinding, "{" + std::string(name) + "}");
        out += binding->second;
        i += length + 2;
    }
    return out;
}

std::string render_prompt(PromptName name, const Bindings& bindings) {
    return render_template(prompt_template(name), bindings);
}

std::string render_prompt(std::string_view name, const Bindings& bindings) {
    return render_prompt(prompt_name_from_string(name), bindings);
}

std::string with_kernel_instructions(std::string prompt, std::string_view user_instructions) {
    while (!prompt.empty() && prompt.back() == '\n') prompt.pop_back();
    prompt += "\n\n# Additional instructions\n\n- ";
    prompt += kMetricConventionLine;
    if (!user_instructions.empty()) {
        prompt += "\n\n- ";
        prompt += user_instructions;
    }
    prompt += '\n';
    return prompt;
}

}  // namespace hcc
