#pragma once

#include "elicit/orchestrator.hpp"

#include <deque>
#include <iosfwd>
#include <memory>
#include <mutex>

namespace elicit {

/// Fills the {assistant_context} slot: the earlier dialogue as labeled turns
/// ending with the latest question. The slot already sits under an
/// "###Assistant" header, so the first label is omitted.
std::string build_assistant_context(const std::vector<Message>& history, const std::string& question);

/// One simulated user turn. The leading "###User" marker is stripped; an empty
/// reply gets one retry before SchemaError propagates.
std::string respond(const Persona& persona, const std::string& question, const std::vector<Message>& history,
                    ChatBackend& backend, const RunConfig& cfg, const PromptRegistry& prompts);

/// Persona-driven simulator. Never quits.
class SimulatedUser final : public UserAgent {
public:
    SimulatedUser(Persona persona, std::shared_ptr<ChatBackend> backend, RunConfig cfg,
                  std::shared_ptr<const PromptRegistry> prompts = nullptr);

    std::optional<std::string> reply(const std::string& question, const Transcript& context) override;

private:
    Persona persona_;
    std::shared_ptr<ChatBackend> backend_;
    RunConfig cfg_;
    std::shared_ptr<const PromptRegistry> prompts_;
};

/// Replays fixed replies in order and quits once they run out.
class ScriptedUser final : public UserAgent {
public:
    explicit ScriptedUser(std::vector<std::string> replies);

    std::optional<std::string> reply(const std::string& question, const Transcript& context) override;

    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::deque<std::string> replies_;
};

std::unique_ptr<UserAgent> scripted_user(std::vector<std::string> replies);

/// A human at a terminal. Blank lines are ignored; "/quit" or end of input
/// quits.
class ConsoleUser final : public UserAgent {
public:
    ConsoleUser(std::istream& in, std::ostream& out);

    std::optional<std::string> reply(const std::string& question, const Transcript& context) override;

private:
    std::istream& in_;
    std::ostream& out_;
};

}  // namespace elicit
