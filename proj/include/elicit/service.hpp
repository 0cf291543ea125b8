#pragma once

#include "elicit/core.hpp"
#include "elicit/llm_backend.hpp"
#include "elicit/orchestrator.hpp"
#include "elicit/prompts.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace elicit {

using BackendFactory = std::function<std::shared_ptr<ChatBackend>(const RunConfig&)>;

/// Scripted specs get a fresh backend per session (each session replays its
/// own script from the top); live and replay backends are shared.
BackendFactory default_backend_factory();

struct ServiceConfig {
    RunConfig run;
    /// Finished sessions are saved here; nothing is written when unset.
    std::optional<std::filesystem::path> out_dir;
    std::chrono::seconds idle_timeout{30 * 60};
    std::shared_ptr<const PromptRegistry> prompts;
    BackendFactory backend_factory;
};

struct ServiceResponse {
    int status = 200;
    nlohmann::json body;
};

/// Transport-independent session API. Each public call maps to one HTTP
/// endpoint; see docs/api.md. Thread-safe: operations on one session run one
/// at a time in arrival order, distinct sessions proceed independently.
class SessionService {
public:
    explicit SessionService(ServiceConfig cfg);
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    ServiceResponse create_session(const nlohmann::json& request);
    ServiceResponse post_user_message(const std::string& id, const nlohmann::json& request);
    ServiceResponse get_session(const std::string& id) const;
    ServiceResponse end_session(const std::string& id);

    struct EventBatch {
        std::vector<nlohmann::json> events;
        bool finished = false;
    };

    /// Events with index >= `from`, waiting up to `timeout` for at least one
    /// when none are pending. nullopt for an unknown session.
    std::optional<EventBatch> wait_events(const std::string& id, std::size_t from,
                                          std::chrono::milliseconds timeout) const;

    bool has_session(const std::string& id) const;

    /// Ends sessions idle for longer than the configured timeout (UserQuit)
    /// and persists them. Returns how many were evicted.
    std::size_t evict_idle(std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now());

    /// Ends every unfinished session with UserQuit and persists it.
    void shutdown();

    std::size_t persisted_count() const;

private:
    struct Entry;

    std::shared_ptr<Entry> find(const std::string& id) const;
    void persist(Entry& e);
    void end_locked(Entry& e, TerminatedBy by);

    ServiceConfig cfg_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::atomic<std::size_t> persisted_{0};
    std::atomic<std::uint64_t> next_id_{1};
};

/// HTTP front end for SessionService (cpp-httplib). Server-push events use
/// text/event-stream.
class HttpServer {
public:
    explicit HttpServer(SessionService& service);
    ~HttpServer();

    /// Binds without serving. Port 0 picks a free port. Returns false when the
    /// address cannot be bound.
    bool bind(const std::string& host, int port);
    int port() const { return port_; }

    /// Serves until stop(). Also runs idle eviction in the background.
    void serve();
    void stop();
    bool running() const;

private:
    SessionService& service_;
    std::unique_ptr<httplib::Server> server_;
    int port_ = 0;
    std::mutex sweep_mutex_;
    std::condition_variable sweep_cv_;
    bool stopping_ = false;
};

}  // namespace elicit
