#pragma once

#include "elicit/core.hpp"
#include "elicit/errors.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace elicit {

namespace template_ids {
inline constexpr std::string_view kController = "controller";
inline constexpr std::string_view kAssistant = "assistant";
inline constexpr std::string_view kUserSim = "usersim";
inline constexpr std::string_view kEvaluator = "evaluator";
/// Assistant prompt for the controller-free comparator.
inline constexpr std::string_view kBaseline = "baseline";
}  // namespace template_ids

using SlotValues = std::map<std::string, std::string, std::less<>>;

/// A prompt body with `{name}` slots. `{{` and `}}` are literal braces; a
/// brace that does not open a well-formed slot is kept as-is.
class PromptTemplate {
public:
    PromptTemplate(std::string id, std::string body);

    const std::string& id() const { return id_; }
    const std::string& body() const { return body_; }
    const std::set<std::string, std::less<>>& required_slots() const { return required_slots_; }

    /// Throws MissingSlot / ExtraSlot naming the first offending slot.
    std::string render(const SlotValues& values) const;

private:
    struct Piece {
        bool is_slot;
        std::string text;
    };

    std::string id_;
    std::string body_;
    std::vector<Piece> pieces_;
    std::set<std::string, std::less<>> required_slots_;
};

/// Immutable once built; concurrent render() calls are safe.
class PromptRegistry {
public:
    void add(PromptTemplate t);
    bool contains(std::string_view id) const;
    const PromptTemplate& get(std::string_view id) const;
    std::vector<std::string> ids() const;

    /// Values used for slots a caller leaves unset (e.g. "domain").
    void set_default(std::string slot, std::string value);
    const SlotValues& defaults() const { return defaults_; }

    std::string render(std::string_view id, const SlotValues& values) const;

    /// Replaces (or adds) templates from `<id>.txt` files in `dir`. Returns
    /// the ids loaded.
    std::vector<std::string> load_overrides(const std::filesystem::path& dir);

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
    SlotValues defaults_;
};

/// Controller, assistant, user-simulator and evaluator prompts for restaurant
/// recommendation, plus the baseline assistant prompt. `domain` fills the
/// {domain} slot by default.
PromptRegistry builtin_registry(std::string domain = "restaurants");

/// One "- Name: Value" line per attribute, in persona order, newline-separated.
std::string build_persona_block(const Persona& p);

inline constexpr std::string_view kContradictionInstruction =
    "- Please make statements that are sometimes contradictory. This will help the assistant determine if the "
    "user's inconsistencies can be adequately addressed.";

/// Slot value filling {controller_instruction} when the controller gave none.
inline constexpr std::string_view kNoInstruction = "(no instruction)";

/// Sentinel a baseline assistant prefixes to its final summary.
inline constexpr std::string_view kReadySentinel = "READY:";

/// Controller line that asks for the termination verdict.
inline constexpr std::string_view kTerminationQuestion = "Terminate an assistant's recommendation?";

std::string render_usersim_prompt(const PromptRegistry& reg, const Persona& persona,
                                  const std::string& assistant_context);

}  // namespace elicit
