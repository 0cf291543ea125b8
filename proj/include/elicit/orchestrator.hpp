#pragma once

#include "elicit/core.hpp"
#include "elicit/errors.hpp"
#include "elicit/llm_backend.hpp"
#include "elicit/prompts.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

namespace elicit {

// --- reply parsing ---------------------------------------------------------

struct Unparseable {
    std::string raw;
    friend bool operator==(const Unparseable&, const Unparseable&) = default;
};

inline constexpr std::string_view kDefaultFinalInstruction =
    "Summarize the user's needs and present a recommendation direction.";

/// Reads the controller's Yes/No termination verdict. Total over arbitrary
/// bytes: a leading "yes" word ends the dialogue (the rest of the reply is the
/// final instruction), a leading "no" continues it, anything else is
/// Unparseable.
std::variant<TerminationDecision, Unparseable> parse_termination(std::string_view raw);

/// Approval is a leading "OK", "APPROVE" or "APPROVED" word; any other reply is
/// a rejection whose text becomes guidance. Returns nullopt when the reply is
/// blank once markers are removed.
std::optional<ReviewVerdict> parse_review(std::string_view raw);

/// Renders delivered messages as "###Assistant\n...\n\n###User\n..." blocks.
std::string render_dialogue(const std::vector<Message>& messages);

// --- user side ---------------------------------------------------------------

class UserAgent {
public:
    virtual ~UserAgent() = default;
    /// The user's reply to `question`, or nullopt to quit. `context` holds the
    /// dialogue so far, ending with `question`.
    virtual std::optional<std::string> reply(const std::string& question, const Transcript& context) = 0;
};

// --- session -----------------------------------------------------------------

/// One item of a session's chronological log: either a controller event or a
/// delivered message. `index` counts from 0 over both kinds.
struct SessionEvent {
    std::size_t index = 0;
    std::variant<ControllerEvent, Message> item;
};

using SessionObserver = std::function<void(const SessionEvent&)>;

struct SessionOptions {
    std::string session_id;
    /// Defaults to builtin_registry(cfg.domain_topic).
    std::shared_ptr<const PromptRegistry> prompts;
    SessionObserver observer;
    /// Timestamp source; tests pin it for byte-stable output.
    std::function<Timestamp()> clock = now_utc;
};

struct StepResult {
    bool finished = false;
    /// Next delivered question, or the needs summary when the session ended
    /// with one. Empty when it ended without an assistant message.
    std::string assistant_message;
};

/// Step-driven dialogue: start() runs up to the first delivered question and
/// each submit() feeds one user answer. Controlled sessions route every draft
/// through the controller review loop and ask the controller for a
/// termination verdict after every answer; baseline sessions let the assistant
/// end the dialogue itself with the READY: sentinel.
///
/// Not thread-safe; callers serialize access to one session.
class Session {
public:
    Session(RunConfig cfg, Persona persona, SessionMode mode, std::shared_ptr<ChatBackend> backend,
            SessionOptions options = {});

    StepResult start();
    StepResult submit(const std::string& user_reply);
    /// Ends the session with UserQuit.
    void quit();

    bool started() const { return started_; }
    bool finished() const { return transcript_.outcome.has_value(); }
    const Transcript& transcript() const { return transcript_; }
    std::size_t event_count() const { return next_event_index_; }

    // Individual agent calls. Public so they can be exercised one at a time.
    std::string initial_instruction();
    std::string draft_question(const std::optional<std::string>& instruction);
    ReviewVerdict review_question(const std::string& draft);
    TerminationDecision check_termination(const std::string& last_question, const std::string& last_answer);
    std::string finalize(const std::string& final_instruction);

private:
    bool controlled() const { return transcript_.mode != SessionMode::Baseline; }
    std::string call(std::string_view tag, std::vector<ChatMessage> messages, double temperature);
    ChatRequest make_request(std::string_view tag, std::vector<ChatMessage> messages, double temperature) const;
    std::string assistant_prompt(const std::optional<std::string>& instruction) const;

    StepResult next_question();
    StepResult next_question_controlled();
    StepResult next_question_baseline();
    void deliver(Role role, std::string content);
    void record(ControllerEventKind kind, std::string payload);
    void finish(TerminatedBy by, std::optional<std::string> summary = std::nullopt);
    [[noreturn]] void fail(const BackendError& e);

    RunConfig cfg_;
    std::shared_ptr<ChatBackend> backend_;
    std::shared_ptr<const PromptRegistry> prompts_;
    SessionObserver observer_;
    std::function<Timestamp()> clock_;
    Transcript transcript_;
    std::optional<std::string> pending_instruction_;
    int turn_ = 0;
    bool started_ = false;
    std::size_t next_event_index_ = 0;
};

/// Drives a full session against `user`. On a backend error the transcript is
/// finished with terminated_by = Error, handed to `on_error` (typically a
/// store) and a BackendFailure carrying it is thrown.
Transcript run_session(const RunConfig& cfg, const Persona& persona, UserAgent& user,
                       std::shared_ptr<ChatBackend> backend, SessionOptions options = {},
                       SessionMode mode = SessionMode::Controlled,
                       const std::function<void(const Transcript&)>& on_error = {});

Transcript run_baseline_session(const RunConfig& cfg, const Persona& persona, UserAgent& user,
                                std::shared_ptr<ChatBackend> backend, SessionOptions options = {},
                                const std::function<void(const Transcript&)>& on_error = {});

}  // namespace elicit
