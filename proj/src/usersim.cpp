#include "elicit/usersim.hpp"

#include "elicit/text.hpp"

#include <iostream>
#include <stdexcept>

namespace elicit {

namespace {
constexpr std::string_view kUserMarker = "###User";
}

std::string build_assistant_context(const std::vector<Message>& history, const std::string& question)
{
    std::vector<Message> all = history;
    if (all.empty() || all.back().role != Role::Assistant || all.back().content != question) {
        Message q;
        q.role = Role::Assistant;
        q.content = question;
        all.push_back(std::move(q));
    }
    std::string rendered = render_dialogue(all);
    constexpr std::string_view kLead = "###Assistant\n";
    if (rendered.rfind(kLead, 0) == 0) rendered.erase(0, kLead.size());
    return rendered;
}

std::string respond(const Persona& persona, const std::string& question, const std::vector<Message>& history,
                    ChatBackend& backend, const RunConfig& cfg, const PromptRegistry& prompts)
{
    if (text::trim(question).empty()) throw std::invalid_argument("question is empty");
    const std::string system = render_usersim_prompt(prompts, persona, build_assistant_context(history, question));
    const ChatRequest req{cfg.model_name, {{"system", system}, {"user", question}}, cfg.temperature_dialogue,
                          cfg.max_tokens, std::string(tags::kUserSim)};
    for (int attempt = 0;; ++attempt) {
        std::string out;
        try {
            out = text::strip_marker(backend.complete(req).content, kUserMarker);
        } catch (const SchemaError&) {
            if (attempt > 0) throw;
            continue;
        }
        if (!out.empty()) return out;
        if (attempt > 0) throw SchemaError("user simulator returned an empty reply");
    }
}

SimulatedUser::SimulatedUser(Persona persona, std::shared_ptr<ChatBackend> backend, RunConfig cfg,
                             std::shared_ptr<const PromptRegistry> prompts)
    : persona_(std::move(persona)), backend_(std::move(backend)), cfg_(std::move(cfg)), prompts_(std::move(prompts))
{
    if (!prompts_) prompts_ = std::make_shared<const PromptRegistry>(builtin_registry(cfg_.domain_topic));
}

std::optional<std::string> SimulatedUser::reply(const std::string& question, const Transcript& context)
{
    return respond(persona_, question, context.messages, *backend_, cfg_, *prompts_);
}

ScriptedUser::ScriptedUser(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

std::optional<std::string> ScriptedUser::reply(const std::string&, const Transcript&)
{
    std::lock_guard lock(mutex_);
    if (replies_.empty()) return std::nullopt;
    std::string r = std::move(replies_.front());
    replies_.pop_front();
    return r;
}

std::size_t ScriptedUser::remaining() const
{
    std::lock_guard lock(mutex_);
    return replies_.size();
}

std::unique_ptr<UserAgent> scripted_user(std::vector<std::string> replies)
{
    return std::make_unique<ScriptedUser>(std::move(replies));
}

ConsoleUser::ConsoleUser(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

std::optional<std::string> ConsoleUser::reply(const std::string& question, const Transcript&)
{
    out_ << "\nAssistant: " << question << "\n";
    std::string line;
    while (true) {
        out_ << "You: " << std::flush;
        if (!std::getline(in_, line)) return std::nullopt;
        const auto t = text::trim(line);
        if (t == "/quit") return std::nullopt;
        if (!t.empty()) return std::string(t);
    }
}

}  // namespace elicit
