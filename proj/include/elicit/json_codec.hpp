#pragma once

// JSON representation of the core types. Field names are stable and
// documented in docs/schema.md; documents written by the store carry a
// top-level "schema_version".

#include "elicit/core.hpp"

#include <nlohmann/json.hpp>

namespace elicit {

inline constexpr int kSchemaVersion = 1;

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);
void to_json(nlohmann::json& j, const Persona& p);
void from_json(const nlohmann::json& j, Persona& p);
void to_json(nlohmann::json& j, const ControllerEvent& e);
void from_json(const nlohmann::json& j, ControllerEvent& e);
void to_json(nlohmann::json& j, const ReviewVerdict& v);
void from_json(const nlohmann::json& j, ReviewVerdict& v);
void to_json(nlohmann::json& j, const TerminationDecision& d);
void from_json(const nlohmann::json& j, TerminationDecision& d);
void to_json(nlohmann::json& j, const BackendSpec& b);
void from_json(const nlohmann::json& j, BackendSpec& b);
void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys keep the value already in `c`, so a partial document layers
/// over defaults.
void from_json(const nlohmann::json& j, RunConfig& c);
void to_json(nlohmann::json& j, const Outcome& o);
void from_json(const nlohmann::json& j, Outcome& o);
void to_json(nlohmann::json& j, const Transcript& t);
void from_json(const nlohmann::json& j, Transcript& t);
void to_json(nlohmann::json& j, const EvaluationScores& s);
void from_json(const nlohmann::json& j, EvaluationScores& s);

/// Canonical text of a transcript document (sorted keys, two-space indent,
/// trailing newline).
std::string dump_transcript(const Transcript& t);

}  // namespace elicit
