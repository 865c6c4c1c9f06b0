#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hcc {

enum class PromptName { Descriptor, Draft, Debug, Plan, Improve, PromoteP1, PromoteP2 };

inline constexpr PromptName kAllPrompts[] = {PromptName::Descriptor, PromptName::Draft,     PromptName::Debug,
                                             PromptName::Plan,       PromptName::Improve,   PromptName::PromoteP1,
                                             PromptName::PromoteP2};

std::string_view to_string(PromptName name) noexcept;
/// Throws UnknownTemplate.
PromptName prompt_name_from_string(std::string_view text);

/// The registry text, byte-exact, placeholders unexpanded.
std::string_view prompt_template(PromptName name);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view template_text);

/// Single-pass substitution of {name} slots (name = [a-z_]+). Binding values
/// are inserted literally and never re-expanded. Throws MissingBinding.
std::string render_template(std::string_view template_text, const Bindings& bindings);

std::string render_prompt(PromptName name, const Bindings& bindings);
/// Lookup by registry name ("Draft", "PromoteP1", ...). Throws UnknownTemplate.
std::string render_prompt(std::string_view name, const Bindings& bindings);

/// Appends the kernel's own instructions after a coding prompt: the metric
/// line convention parsed by the sandbox and, when given, the user's
/// instructions.
std::string with_kernel_instructions(std::string prompt, std::string_view user_instructions);

inline constexpr std::string_view kMetricConventionLine =
    "Print the hold-out validation metric on its own line, exactly in the form `Validation metric: <number>`.";

}  // namespace hcc
