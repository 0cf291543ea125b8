#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace elicit {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

Timestamp now_utc();
std::string format_timestamp(Timestamp t);
/// Accepts the output of format_timestamp ("YYYY-MM-DDTHH:MM:SS.mmmZ"); the
/// fractional part is optional.
std::optional<Timestamp> parse_timestamp(std::string_view text);

enum class Role { Controller, Assistant, User, Evaluator, System };

std::string_view to_string(Role r);
std::optional<Role> role_from_string(std::string_view s);

struct Message {
    std::string id;
    std::string session_id;
    Role role = Role::Assistant;
    std::string content;
    int turn = 0;
    Timestamp created_at{};

    friend bool operator==(const Message&, const Message&) = default;
};

struct PersonaAttribute {
    std::string name;
    std::string value;

    friend bool operator==(const PersonaAttribute&, const PersonaAttribute&) = default;
};

/// Attribute list driving the user simulator. Order is significant: it is the
/// order the lines appear in the rendered persona block.
struct Persona {
    std::vector<PersonaAttribute> attributes;
    bool contradiction_enabled = true;

    const std::string* find(std::string_view name) const;
    /// Names of attributes that occur more than once.
    std::vector<std::string> duplicate_names() const;

    friend bool operator==(const Persona&, const Persona&) = default;
};

/// The example user from the restaurant experiments: a 24-year-old male
/// engineer who likes Italian food and is planning company get-togethers.
Persona reference_persona();

struct ReviewVerdict {
    bool approved = true;
    std::optional<std::string> guidance;
    std::string raw;

    static ReviewVerdict approve(std::string raw) { return {true, std::nullopt, std::move(raw)}; }
    static ReviewVerdict reject(std::string guidance, std::string raw)
    {
        return {false, std::move(guidance), std::move(raw)};
    }

    friend bool operator==(const ReviewVerdict&, const ReviewVerdict&) = default;
};

struct TerminationDecision {
    bool terminate = false;
    std::optional<std::string> final_instruction;
    std::string raw;

    friend bool operator==(const TerminationDecision&, const TerminationDecision&) = default;
};

enum class ControllerEventKind { InitialInstruction, Guidance, ReviewReject, TerminationCheck, FinalInstruction };

std::string_view to_string(ControllerEventKind k);
std::optional<ControllerEventKind> controller_event_kind_from_string(std::string_view s);

struct ControllerEvent {
    int turn = 0;
    ControllerEventKind kind = ControllerEventKind::Guidance;
    std::string payload;

    friend bool operator==(const ControllerEvent&, const ControllerEvent&) = default;
};

// Backend selection lives here because RunConfig snapshots it into every
// transcript.
struct LiveSpec {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env_var = "OPENAI_API_KEY";

    friend bool operator==(const LiveSpec&, const LiveSpec&) = default;
};

struct ScriptedSpec {
    std::string script_path;

    friend bool operator==(const ScriptedSpec&, const ScriptedSpec&) = default;
};

struct ReplaySpec {
    std::string cassette_path;
    bool record = false;
    /// Endpoint consulted on a cassette miss while recording.
    LiveSpec upstream;

    friend bool operator==(const ReplaySpec&, const ReplaySpec&) = default;
};

using BackendSpec = std::variant<LiveSpec, ScriptedSpec, ReplaySpec>;

std::string_view backend_kind(const BackendSpec& spec);

struct RunConfig {
    BackendSpec backend = LiveSpec{};
    std::string model_name = "gpt-4";
    double temperature_dialogue = 0.7;
    double temperature_judge = 0.0;
    std::optional<int> max_tokens;
    int max_turns = 10;
    int max_review_retries = 2;
    int num_dialogues = 5;
    std::int64_t seed = 0;
    /// Plural noun naming what is being recommended, e.g. "restaurants".
    std::string domain_topic = "restaurants";
    /// Ask the controller for fresh guidance before every question rather than
    /// only at turn 0 and after a rejected draft.
    bool guidance_every_turn = false;
    int retry_attempts = 3;
    int retry_backoff_ms = 500;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Empty when the config is usable; otherwise one entry per problem.
std::vector<std::string> validate_config(const RunConfig& cfg);

enum class SessionMode { Controlled, Baseline, HumanControlled };

std::string_view to_string(SessionMode m);
std::optional<SessionMode> session_mode_from_string(std::string_view s);

enum class TerminatedBy { Controller, MaxTurns, UserQuit, Error, SelfStop };

std::string_view to_string(TerminatedBy t);
std::optional<TerminatedBy> terminated_by_from_string(std::string_view s);

struct Outcome {
    TerminatedBy terminated_by = TerminatedBy::Error;
    std::optional<std::string> needs_summary;

    friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct Transcript {
    std::string session_id;
    Timestamp created_at{};
    SessionMode mode = SessionMode::Controlled;
    Persona persona;
    std::vector<Message> messages;
    std::vector<ControllerEvent> controller_events;
    /// Unset while the session is still running.
    std::optional<Outcome> outcome;
    RunConfig config_snapshot;

    /// Number of (assistant question, user answer) pairs.
    int completed_pairs() const;

    friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Checks every transcript invariant. Never throws; each entry names the
/// invariant and the offending index.
std::vector<std::string> validate_transcript(const Transcript& t);

enum class Criterion { Satisfaction, Flexibility, Accuracy, Contradiction };

inline constexpr Criterion kAllCriteria[] = {
    Criterion::Satisfaction, Criterion::Flexibility, Criterion::Accuracy, Criterion::Contradiction};

std::string_view to_string(Criterion c);
std::optional<Criterion> criterion_from_string(std::string_view s);
/// The question the judge answers for this criterion.
std::string_view criterion_definition(Criterion c);

struct EvaluationScores {
    std::string transcript_id;
    int satisfaction = 0;
    int flexibility = 0;
    int accuracy = 0;
    int contradiction = 0;

    int get(Criterion c) const;
    void set(Criterion c, int score);
    bool valid() const;

    friend bool operator==(const EvaluationScores&, const EvaluationScores&) = default;
};

}  // namespace elicit
