#pragma once

#include "elicit/core.hpp"
#include "elicit/errors.hpp"

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace elicit {

/// Which agent issued a request. Scripted backends key their queues on it.
namespace tags {
inline constexpr std::string_view kController = "controller";
inline constexpr std::string_view kAssistant = "assistant";
inline constexpr std::string_view kUserSim = "usersim";
inline constexpr std::string_view kEvaluator = "evaluator";
}  // namespace tags

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    std::string model_name;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    std::string tag;

    /// Empty when well-formed: messages nonempty, first one "system",
    /// temperature >= 0.
    std::vector<std::string> problems() const;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse {
    std::string content;
    std::string finish_reason = "stop";
    Usage usage;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    /// Returns the model's next message. Never returns empty content: that
    /// case raises SchemaError.
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

// --- scripted ------------------------------------------------------------

/// Per-tag queues of canned responses, in file order.
struct Script {
    std::map<std::string, std::deque<std::string>, std::less<>> queues;

    std::size_t size() const;
};

/// Script text format. Each entry starts with a header line `>>> tag`; every
/// following line up to the next header belongs to the entry (trailing blank
/// lines dropped). Before the first header only blank lines and `#` comments
/// are allowed.
///
///     # three-turn restaurant session
///     >>> controller
///     Start with the user's daily life.
///     >>> assistant
///     ###Assistant
///     What do you usually do on weekends?
Script parse_script(std::string_view text);
Script load_script(const std::filesystem::path& path);

/// Pops responses from the queue matching the request tag. Thread-safe.
class ScriptedBackend final : public ChatBackend {
public:
    explicit ScriptedBackend(Script script);

    ChatResponse complete(const ChatRequest& req) override;

    /// Number of completions served (or attempted) per tag.
    std::size_t calls(std::string_view tag) const;
    std::size_t remaining(std::string_view tag) const;
    /// Every request seen, in arrival order.
    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mutex_;
    Script script_;
    std::map<std::string, std::size_t, std::less<>> calls_;
    std::vector<ChatRequest> requests_;
};

// --- live ----------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

/// OpenAI-compatible chat-completions client:
/// POST {base_url}/chat/completions, answer read from choices[0].message.content.
class LiveBackend final : public ChatBackend {
public:
    /// `api_key` may be empty, in which case no Authorization header is sent.
    LiveBackend(std::string base_url, std::string api_key, RetryPolicy retry = {},
                std::chrono::seconds timeout = std::chrono::seconds{120});

    ChatResponse complete(const ChatRequest& req) override;

    std::string request_body(const ChatRequest& req) const;

private:
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::string api_key_;
    RetryPolicy retry_;
    std::chrono::seconds timeout_;
};

// --- record / replay -----------------------------------------------------

/// Hex SHA-256 over the canonical JSON of (model_name, messages, temperature).
std::string cassette_key(const ChatRequest& req);

/// Serves responses from an append-only JSON-lines cassette. On a miss it
/// either records through `upstream` (record mode) or throws CassetteMiss.
class ReplayBackend final : public ChatBackend {
public:
    ReplayBackend(std::filesystem::path cassette, bool record, std::shared_ptr<ChatBackend> upstream = nullptr);

    ChatResponse complete(const ChatRequest& req) override;

    std::size_t size() const;
    std::size_t upstream_calls() const;

private:
    void load();

    mutable std::mutex mutex_;
    std::filesystem::path path_;
    bool record_;
    std::shared_ptr<ChatBackend> upstream_;
    std::map<std::string, std::string, std::less<>> entries_;
    std::size_t upstream_calls_ = 0;
};

/// Builds the backend named by the spec. Live keys are read from the
/// environment variable the spec names.
std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec, const RetryPolicy& retry = {});

}  // namespace elicit
