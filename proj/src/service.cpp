#include "elicit/service.hpp"

#include "elicit/json_codec.hpp"
#include "elicit/store.hpp"
#include "elicit/text.hpp"

#include <random>
#include <set>

namespace elicit {

using nlohmann::json;

namespace {

/// Mutex granting the lock in request order.
class FifoMutex {
public:
    void lock()
    {
        std::unique_lock lk(m_);
        const std::uint64_t ticket = next_++;
        cv_.wait(lk, [&] { return serving_ == ticket; });
    }
    void unlock()
    {
        std::lock_guard lk(m_);
        ++serving_;
        cv_.notify_all();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    std::uint64_t next_ = 0;
    std::uint64_t serving_ = 0;
};

ServiceResponse error(int status, std::string message) { return {status, json{{"error", std::move(message)}}}; }

json event_json(const SessionEvent& e)
{
    json j{{"index", e.index}};
    if (const auto* ev = std::get_if<ControllerEvent>(&e.item)) {
        j["type"] = "controller_event";
        j["data"] = *ev;
    } else {
        j["type"] = "message";
        j["data"] = std::get<Message>(e.item);
    }
    return j;
}

std::string hex_token(std::size_t n)
{
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += "0123456789abcdef"[rng() & 0xf];
    return out;
}

const std::set<std::string> kOverrideKeys = {"max_turns",   "max_review_retries", "temperature_dialogue",
                                             "max_tokens",  "guidance_every_turn", "domain_topic",
                                             "script_path"};

}  // namespace

BackendFactory default_backend_factory()
{
    auto shared = std::make_shared<std::pair<std::mutex, std::shared_ptr<ChatBackend>>>();
    return [shared](const RunConfig& cfg) -> std::shared_ptr<ChatBackend> {
        const RetryPolicy retry{cfg.retry_attempts, std::chrono::milliseconds{cfg.retry_backoff_ms}};
        if (std::holds_alternative<ScriptedSpec>(cfg.backend)) return make_backend(cfg.backend, retry);
        std::lock_guard lock(shared->first);
        if (!shared->second) shared->second = make_backend(cfg.backend, retry);
        return shared->second;
    };
}

struct SessionService::Entry {
    FifoMutex turn_lock;  // serializes operations on `session`
    std::unique_ptr<Session> session;

    mutable std::mutex state_mutex;  // guards everything below
    mutable std::condition_variable cv;
    std::vector<json> events;
    Transcript snapshot;
    bool finished = false;
    bool persisted = false;
    std::chrono::steady_clock::time_point last_active = std::chrono::steady_clock::now();

    void refresh()
    {
        std::lock_guard lk(state_mutex);
        snapshot = session->transcript();
        finished = session->finished();
        last_active = std::chrono::steady_clock::now();
        cv.notify_all();
    }
};

SessionService::SessionService(ServiceConfig cfg) : cfg_(std::move(cfg))
{
    if (!cfg_.prompts) cfg_.prompts = std::make_shared<const PromptRegistry>(builtin_registry(cfg_.run.domain_topic));
    if (!cfg_.backend_factory) cfg_.backend_factory = default_backend_factory();
}

SessionService::~SessionService() = default;

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

bool SessionService::has_session(const std::string& id) const { return find(id) != nullptr; }

void SessionService::persist(Entry& e)
{
    Transcript t;
    {
        std::lock_guard lk(e.state_mutex);
        if (e.persisted || !e.finished) return;
        e.persisted = true;
        t = e.snapshot;
    }
    ++persisted_;
    if (cfg_.out_dir) store::save_transcript(*cfg_.out_dir, t);
}

std::size_t SessionService::persisted_count() const { return persisted_.load(); }

ServiceResponse SessionService::create_session(const json& request)
{
    if (!request.is_object()) return error(400, "request body must be a JSON object");

    SessionMode mode = SessionMode::HumanControlled;
    if (auto it = request.find("mode"); it != request.end()) {
        if (!it->is_string()) return error(400, "mode must be a string");
        const auto m = it->get<std::string>();
        if (m == "controlled") {
            mode = SessionMode::HumanControlled;
        } else if (m == "baseline") {
            mode = SessionMode::Baseline;
        } else {
            return error(400, "invalid mode '" + m + "'");
        }
    }

    Persona persona;
    persona.contradiction_enabled = false;
    if (auto it = request.find("persona"); it != request.end() && !it->is_null()) {
        try {
            persona = it->get<Persona>();
        } catch (const std::exception& ex) {
            return error(400, std::string("invalid persona: ") + ex.what());
        }
        if (const auto d = persona.duplicate_names(); !d.empty()) {
            return error(400, "invalid persona: duplicate attribute '" + d.front() + "'");
        }
    }
    if (mode == SessionMode::Baseline && persona.attributes.empty()) {
        return error(400, "baseline sessions need a persona");
    }

    RunConfig cfg = cfg_.run;
    if (auto it = request.find("config"); it != request.end() && !it->is_null()) {
        if (!it->is_object()) return error(400, "config must be an object");
        for (const auto& [key, value] : it->items()) {
            if (!kOverrideKeys.contains(key)) return error(400, "unsupported config override '" + key + "'");
        }
        try {
            json overrides = *it;
            std::optional<std::string> script;
            if (overrides.contains("script_path")) {
                script = overrides["script_path"].get<std::string>();
                overrides.erase("script_path");
            }
            from_json(overrides, cfg);
            if (script) {
                if (!std::holds_alternative<ScriptedSpec>(cfg.backend)) {
                    return error(400, "script_path is only accepted by a scripted server");
                }
                cfg.backend = ScriptedSpec{*script};
            }
        } catch (const std::exception& ex) {
            return error(400, std::string("invalid config: ") + ex.what());
        }
    }
    if (const auto problems = validate_config(cfg); !problems.empty()) return error(400, problems.front());

    std::shared_ptr<ChatBackend> backend;
    try {
        backend = cfg_.backend_factory(cfg);
    } catch (const BackendError& ex) {
        return error(502, ex.what());
    } catch (const std::exception& ex) {
        return error(400, std::string("backend configuration: ") + ex.what());
    }

    auto entry = std::make_shared<Entry>();
    const std::string id = "h-" + hex_token(12) + "-" + std::to_string(next_id_++);
    Entry* raw = entry.get();
    SessionOptions opts;
    opts.session_id = id;
    opts.prompts = cfg.domain_topic == cfg_.run.domain_topic
                       ? cfg_.prompts
                       : std::make_shared<const PromptRegistry>(builtin_registry(cfg.domain_topic));
    opts.observer = [raw](const SessionEvent& e) {
        std::lock_guard lk(raw->state_mutex);
        raw->events.push_back(event_json(e));
        raw->cv.notify_all();
    };
    entry->session = std::make_unique<Session>(cfg, std::move(persona), mode, std::move(backend), std::move(opts));

    StepResult step;
    try {
        step = entry->session->start();
    } catch (const BackendFailure& ex) {
        return error(502, ex.what());
    }
    entry->refresh();

    json body{{"session_id", id}, {"first_question", step.assistant_message}, {"terminated", step.finished}};
    for (const auto& ev : entry->session->transcript().controller_events) {
        if (ev.kind == ControllerEventKind::InitialInstruction) body["controller_instruction"] = ev.payload;
    }
    if (step.finished) {
        body["terminated_by"] = to_string(entry->session->transcript().outcome->terminated_by);
        if (const auto& s = entry->session->transcript().outcome->needs_summary) body["needs_summary"] = *s;
    }
    {
        std::lock_guard lock(mutex_);
        sessions_.emplace(id, entry);
    }
    if (step.finished) persist(*entry);
    return {200, body};
}

ServiceResponse SessionService::post_user_message(const std::string& id, const json& request)
{
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");

    const json* content = nullptr;
    if (request.is_object()) {
        if (auto it = request.find("content"); it != request.end() && it->is_string()) content = &*it;
    }
    if (content == nullptr) return error(400, "body must be {\"content\": string}");
    const std::string reply = content->get<std::string>();
    if (text::trim(reply).empty()) return error(400, "content is empty");

    std::lock_guard turn(entry->turn_lock);
    Session& s = *entry->session;
    if (s.finished()) return error(409, "session '" + id + "' is finished");

    StepResult step;
    try {
        step = s.submit(reply);
    } catch (const BackendFailure& ex) {
        entry->refresh();
        persist(*entry);
        return error(502, ex.what());
    }
    entry->refresh();

    json body{{"terminated", step.finished}, {"assistant_message", step.assistant_message}};
    if (step.finished) {
        const Outcome& o = *s.transcript().outcome;
        body["terminated_by"] = to_string(o.terminated_by);
        if (o.needs_summary) body["needs_summary"] = *o.needs_summary;
        persist(*entry);
    }
    return {200, body};
}

ServiceResponse SessionService::get_session(const std::string& id) const
{
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard lk(entry->state_mutex);
    return {200, json(entry->snapshot)};
}

void SessionService::end_locked(Entry& e, TerminatedBy by)
{
    if (by == TerminatedBy::UserQuit) e.session->quit();
    e.refresh();
    persist(e);
}

ServiceResponse SessionService::end_session(const std::string& id)
{
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard turn(entry->turn_lock);
    if (entry->session->finished()) return error(409, "session '" + id + "' is finished");
    end_locked(*entry, TerminatedBy::UserQuit);
    std::lock_guard lk(entry->state_mutex);
    return {200, json(entry->snapshot)};
}

std::optional<SessionService::EventBatch> SessionService::wait_events(const std::string& id, std::size_t from,
                                                                      std::chrono::milliseconds timeout) const
{
    auto entry = find(id);
    if (!entry) return std::nullopt;
    std::unique_lock lk(entry->state_mutex);
    entry->cv.wait_for(lk, timeout, [&] { return entry->events.size() > from || entry->finished; });
    EventBatch batch;
    for (std::size_t i = from; i < entry->events.size(); ++i) batch.events.push_back(entry->events[i]);
    batch.finished = entry->finished;
    return batch;
}

std::size_t SessionService::evict_idle(std::chrono::steady_clock::time_point now)
{
    std::vector<std::shared_ptr<Entry>> candidates;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, e] : sessions_) candidates.push_back(e);
    }
    std::size_t evicted = 0;
    for (const auto& e : candidates) {
        {
            std::lock_guard lk(e->state_mutex);
            if (e->finished || now - e->last_active < cfg_.idle_timeout) continue;
        }
        std::lock_guard turn(e->turn_lock);
        if (e->session->finished()) continue;
        end_locked(*e, TerminatedBy::UserQuit);
        ++evicted;
    }
    return evicted;
}

void SessionService::shutdown()
{
    std::vector<std::shared_ptr<Entry>> all;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, e] : sessions_) all.push_back(e);
    }
    for (const auto& e : all) {
        std::lock_guard turn(e->turn_lock);
        if (!e->session->finished()) {
            end_locked(*e, TerminatedBy::UserQuit);
        } else {
            persist(*e);
        }
    }
}

}  // namespace elicit
