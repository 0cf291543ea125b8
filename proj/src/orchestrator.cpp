#include "elicit/orchestrator.hpp"

#include "elicit/text.hpp"

#include <random>
#include <stdexcept>

namespace elicit {

namespace {

constexpr std::string_view kControllerMarker = "###Controller";
constexpr std::string_view kAssistantMarker = "###Assistant";
constexpr std::string_view kClarification = "Answer Yes or No first.";

std::string random_session_id()
{
    std::random_device rd;
    std::uniform_int_distribution<int> hex(0, 15);
    std::string id = "s-";
    for (int i = 0; i < 16; ++i) id += "0123456789abcdef"[hex(rd)];
    return id;
}

std::string dialogue_section(const std::vector<Message>& messages)
{
    const std::string d = render_dialogue(messages);
    return "###Dialogue so far\n" + (d.empty() ? std::string("(no dialogue yet)") : d);
}

}  // namespace

std::variant<TerminationDecision, Unparseable> parse_termination(std::string_view raw)
{
    const std::string stripped = text::strip_marker(raw, kControllerMarker);
    const std::string_view s = text::trim_left_punct(stripped);
    if (text::starts_with_word(s, "yes")) {
        std::string rest(text::trim_right(text::trim_left_punct(s.substr(3))));
        if (rest.empty()) rest = std::string(kDefaultFinalInstruction);
        return TerminationDecision{true, std::move(rest), std::string(raw)};
    }
    if (text::starts_with_word(s, "no")) return TerminationDecision{false, std::nullopt, std::string(raw)};
    return Unparseable{std::string(raw)};
}

std::optional<ReviewVerdict> parse_review(std::string_view raw)
{
    const std::string stripped = text::strip_marker(raw, kControllerMarker);
    if (stripped.empty()) return std::nullopt;
    const std::string_view s = text::trim_left_punct(stripped);
    for (std::string_view token : {"ok", "approve", "approved"}) {
        if (text::starts_with_word(s, token)) return ReviewVerdict::approve(std::string(raw));
    }
    return ReviewVerdict::reject(stripped, std::string(raw));
}

std::string render_dialogue(const std::vector<Message>& messages)
{
    std::string out;
    for (const auto& m : messages) {
        if (m.role != Role::Assistant && m.role != Role::User) continue;
        if (!out.empty()) out += "\n\n";
        out += m.role == Role::Assistant ? "###Assistant\n" : "###User\n";
        out += m.content;
    }
    return out;
}

Session::Session(RunConfig cfg, Persona persona, SessionMode mode, std::shared_ptr<ChatBackend> backend,
                 SessionOptions options)
    : cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      prompts_(std::move(options.prompts)),
      observer_(std::move(options.observer)),
      clock_(options.clock ? std::move(options.clock) : std::function<Timestamp()>(now_utc))
{
    if (!backend_) throw InvalidConfig("session requires a backend");
    if (const auto problems = validate_config(cfg_); !problems.empty()) throw InvalidConfig(problems.front());
    if (!prompts_) prompts_ = std::make_shared<const PromptRegistry>(builtin_registry(cfg_.domain_topic));
    transcript_.session_id = options.session_id.empty() ? random_session_id() : std::move(options.session_id);
    transcript_.mode = mode;
    transcript_.persona = std::move(persona);
    transcript_.config_snapshot = cfg_;
    transcript_.created_at = clock_();
}

ChatRequest Session::make_request(std::string_view tag, std::vector<ChatMessage> messages, double temperature) const
{
    return ChatRequest{cfg_.model_name, std::move(messages), temperature, cfg_.max_tokens, std::string(tag)};
}

std::string Session::call(std::string_view tag, std::vector<ChatMessage> messages, double temperature)
{
    const ChatRequest req = make_request(tag, std::move(messages), temperature);
    // An empty reply gets exactly one more chance.
    try {
        return backend_->complete(req).content;
    } catch (const SchemaError&) {
        return backend_->complete(req).content;
    }
}

std::string Session::assistant_prompt(const std::optional<std::string>& instruction) const
{
    if (!controlled()) return prompts_->render(template_ids::kBaseline, {});
    return prompts_->render(template_ids::kAssistant,
                            {{"controller_instruction", instruction ? *instruction : std::string(kNoInstruction)}});
}

void Session::deliver(Role role, std::string content)
{
    Message m;
    m.id = transcript_.session_id + "-m" + std::to_string(transcript_.messages.size());
    m.session_id = transcript_.session_id;
    m.role = role;
    m.content = std::move(content);
    m.turn = turn_;
    m.created_at = clock_();
    transcript_.messages.push_back(m);
    if (observer_) observer_(SessionEvent{next_event_index_, std::move(m)});
    ++next_event_index_;
}

void Session::record(ControllerEventKind kind, std::string payload)
{
    ControllerEvent e{turn_, kind, std::move(payload)};
    transcript_.controller_events.push_back(e);
    if (observer_) observer_(SessionEvent{next_event_index_, std::move(e)});
    ++next_event_index_;
}

void Session::finish(TerminatedBy by, std::optional<std::string> summary)
{
    transcript_.outcome = Outcome{by, std::move(summary)};
}

void Session::fail(const BackendError& e)
{
    if (!finished()) finish(TerminatedBy::Error);
    throw BackendFailure(e.what(), std::make_shared<const Transcript>(transcript_));
}

std::string Session::initial_instruction()
{
    const std::string controller = prompts_->render(template_ids::kController, {});
    std::string out = text::strip_marker(
        call(tags::kController,
             {{"system", controller},
              {"user", dialogue_section(transcript_.messages) +
                           "\n\nGenerate the instruction for the assistant's first question."}},
             cfg_.temperature_dialogue),
        kControllerMarker);
    if (out.empty()) throw SchemaError("controller returned an empty initial instruction");
    record(ControllerEventKind::InitialInstruction, out);
    return out;
}

std::string Session::draft_question(const std::optional<std::string>& instruction)
{
    std::vector<ChatMessage> messages{
        {"system", assistant_prompt(instruction)},
        {"user", dialogue_section(transcript_.messages) + "\n\nGenerate the next question for the user."}};
    const ChatRequest req = make_request(tags::kAssistant, std::move(messages), cfg_.temperature_dialogue);
    for (int attempt = 0;; ++attempt) {
        std::string draft;
        try {
            draft = text::strip_marker(backend_->complete(req).content, kAssistantMarker);
        } catch (const SchemaError&) {
            if (attempt > 0) throw;
            continue;
        }
        if (!draft.empty()) return draft;
        if (attempt > 0) throw SchemaError("assistant returned an empty question");
    }
}

ReviewVerdict Session::review_question(const std::string& draft)
{
    std::vector<ChatMessage> messages{
        {"system", prompts_->render(template_ids::kController, {})},
        {"user", dialogue_section(transcript_.messages) + "\n\n###Assistant draft\n" + draft +
                     "\n\nReview the assistant's draft question. Output \"OK\" if it is appropriate; otherwise "
                     "output an instruction for the assistant."}};
    const ChatRequest req = make_request(tags::kController, std::move(messages), cfg_.temperature_dialogue);
    for (int attempt = 0;; ++attempt) {
        std::optional<ReviewVerdict> verdict;
        try {
            verdict = parse_review(backend_->complete(req).content);
        } catch (const SchemaError&) {
            if (attempt > 0) throw;
            continue;
        }
        if (verdict) return *verdict;
        if (attempt > 0) throw SchemaError("controller returned an empty review");
    }
}

TerminationDecision Session::check_termination(const std::string& last_question, const std::string& last_answer)
{
    std::vector<Message> earlier = transcript_.messages;
    // The latest pair is presented separately from the earlier dialogue.
    if (earlier.size() >= 2 && earlier.back().role == Role::User && earlier.back().content == last_answer) {
        earlier.resize(earlier.size() - 2);
    }
    std::vector<ChatMessage> messages{
        {"system", prompts_->render(template_ids::kController, {})},
        {"user", dialogue_section(earlier) + "\n\n###Assistant\n" + last_question + "\n\n###User\n" + last_answer +
                     "\n\n" + std::string(kTerminationQuestion)}};

    std::string raw = call(tags::kController, messages, cfg_.temperature_dialogue);
    auto parsed = parse_termination(raw);
    if (std::holds_alternative<Unparseable>(parsed)) {
        messages.push_back({"assistant", raw});
        messages.push_back({"user", std::string(kClarification)});
        raw = call(tags::kController, std::move(messages), cfg_.temperature_dialogue);
        parsed = parse_termination(raw);
    }
    if (std::holds_alternative<Unparseable>(parsed)) {
        record(ControllerEventKind::TerminationCheck, "warning: unparseable termination reply, continuing: " + raw);
        return TerminationDecision{false, std::nullopt, raw};
    }
    auto decision = std::get<TerminationDecision>(std::move(parsed));
    record(ControllerEventKind::TerminationCheck, decision.raw);
    if (decision.terminate) record(ControllerEventKind::FinalInstruction, *decision.final_instruction);
    return decision;
}

std::string Session::finalize(const std::string& final_instruction)
{
    std::vector<ChatMessage> messages{
        {"system", prompts_->render(template_ids::kAssistant, {{"controller_instruction", final_instruction}})},
        {"user", dialogue_section(transcript_.messages) + "\n\nFollow the controller's instruction now."}};
    const ChatRequest req = make_request(tags::kAssistant, std::move(messages), cfg_.temperature_dialogue);
    for (int attempt = 0;; ++attempt) {
        std::string summary;
        try {
            summary = text::strip_marker(backend_->complete(req).content, kAssistantMarker);
        } catch (const SchemaError&) {
            if (attempt > 0) throw;
            continue;
        }
        if (!summary.empty()) return summary;
        if (attempt > 0) throw SchemaError("assistant returned an empty summary");
    }
}

StepResult Session::start()
{
    if (started_) throw std::logic_error("session already started");
    started_ = true;
    try {
        if (controlled()) pending_instruction_ = initial_instruction();
        return next_question();
    } catch (const BackendError& e) {
        fail(e);
    }
}

StepResult Session::submit(const std::string& user_reply)
{
    if (!started_) throw std::logic_error("session not started");
    if (finished()) throw std::logic_error("session already finished");
    if (text::trim(user_reply).empty()) throw std::invalid_argument("user reply is empty");

    const std::string question = transcript_.messages.back().content;
    deliver(Role::User, user_reply);
    ++turn_;
    try {
        if (controlled()) {
            const TerminationDecision d = check_termination(question, user_reply);
            if (d.terminate) {
                std::string summary = finalize(*d.final_instruction);
                deliver(Role::Assistant, summary);
                finish(TerminatedBy::Controller, summary);
                return {true, std::move(summary)};
            }
        }
        if (turn_ >= cfg_.max_turns) {
            finish(TerminatedBy::MaxTurns);
            return {true, {}};
        }
        return next_question();
    } catch (const BackendError& e) {
        fail(e);
    }
}

void Session::quit()
{
    if (finished()) throw std::logic_error("session already finished");
    started_ = true;
    finish(TerminatedBy::UserQuit);
}

StepResult Session::next_question() { return controlled() ? next_question_controlled() : next_question_baseline(); }

StepResult Session::next_question_controlled()
{
    if (cfg_.guidance_every_turn && turn_ > 0) {
        std::string guidance = text::strip_marker(
            call(tags::kController,
                 {{"system", prompts_->render(template_ids::kController, {})},
                  {"user", dialogue_section(transcript_.messages) +
                               "\n\nGenerate the instruction for the assistant's next question."}},
                 cfg_.temperature_dialogue),
            kControllerMarker);
        if (guidance.empty()) throw SchemaError("controller returned empty guidance");
        record(ControllerEventKind::Guidance, guidance);
        pending_instruction_ = std::move(guidance);
    }

    std::optional<std::string> instruction = std::exchange(pending_instruction_, std::nullopt);
    std::string draft;
    for (int attempt = 0; attempt <= cfg_.max_review_retries; ++attempt) {
        draft = draft_question(instruction);
        const ReviewVerdict verdict = review_question(draft);
        if (verdict.approved) break;
        record(ControllerEventKind::ReviewReject, draft);
        record(ControllerEventKind::Guidance, *verdict.guidance);
        instruction = verdict.guidance;
    }
    // After the last retry the final draft goes out even if it was rejected.
    deliver(Role::Assistant, draft);
    return {false, std::move(draft)};
}

StepResult Session::next_question_baseline()
{
    std::string draft = draft_question(std::nullopt);
    if (text::istarts_with(draft, kReadySentinel)) {
        std::string summary(text::trim(std::string_view(draft).substr(kReadySentinel.size())));
        if (summary.empty()) throw SchemaError("READY: sentinel without a summary");
        deliver(Role::Assistant, summary);
        finish(TerminatedBy::SelfStop, summary);
        return {true, std::move(summary)};
    }
    deliver(Role::Assistant, draft);
    return {false, std::move(draft)};
}

Transcript run_session(const RunConfig& cfg, const Persona& persona, UserAgent& user,
                       std::shared_ptr<ChatBackend> backend, SessionOptions options, SessionMode mode,
                       const std::function<void(const Transcript&)>& on_error)
{
    Session session(cfg, persona, mode, std::move(backend), std::move(options));
    try {
        StepResult step = session.start();
        while (!step.finished) {
            std::optional<std::string> reply;
            try {
                reply = user.reply(step.assistant_message, session.transcript());
            } catch (const BackendError& e) {
                Transcript t = session.transcript();
                t.outcome = Outcome{TerminatedBy::Error, std::nullopt};
                throw BackendFailure(e.what(), std::make_shared<const Transcript>(std::move(t)));
            }
            if (!reply) {
                session.quit();
                break;
            }
            step = session.submit(*reply);
        }
    } catch (const BackendFailure& f) {
        if (on_error && f.transcript()) on_error(*f.transcript());
        throw;
    }
    return session.transcript();
}

Transcript run_baseline_session(const RunConfig& cfg, const Persona& persona, UserAgent& user,
                                std::shared_ptr<ChatBackend> backend, SessionOptions options,
                                const std::function<void(const Transcript&)>& on_error)
{
    return run_session(cfg, persona, user, std::move(backend), std::move(options), SessionMode::Baseline, on_error);
}

}  // namespace elicit
