#include "elicit/llm_backend.hpp"

#include "elicit/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <thread>

namespace elicit {

using nlohmann::json;

namespace {

void split_base_url(std::string_view url, std::string& origin, std::string& prefix)
{
    url = text::trim(url);
    const auto scheme_end = url.find("://");
    const std::size_t host_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string_view::npos) {
        origin = std::string(url);
        prefix.clear();
    } else {
        origin = std::string(url.substr(0, path_start));
        prefix = std::string(url.substr(path_start));
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

LiveBackend::LiveBackend(std::string base_url, std::string api_key, RetryPolicy retry, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), retry_(retry), timeout_(timeout)
{
    split_base_url(base_url, scheme_host_port_, path_prefix_);
    if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

std::string LiveBackend::request_body(const ChatRequest& req) const
{
    json messages = json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", req.model_name}, {"messages", messages}, {"temperature", req.temperature}};
    if (req.max_tokens) body["max_tokens"] = *req.max_tokens;
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

ChatResponse LiveBackend::complete(const ChatRequest& req)
{
    if (const auto p = req.problems(); !p.empty()) throw SchemaError("malformed request: " + p.front());

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const std::string path = path_prefix_ + "/chat/completions";
    const std::string body = request_body(req);
    std::string last_error;
    int last_status = 0;

    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        if (attempt > 1) std::this_thread::sleep_for(retry_.initial_backoff * (1 << (attempt - 2)));

        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            last_status = 0;
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw AuthError("credential rejected (HTTP " + std::to_string(res->status) + ")");
        }
        if (retryable(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            last_status = res->status;
            continue;
        }
        if (res->status != 200) {
            throw TransportError("unexpected HTTP " + std::to_string(res->status) + ": " + res->body, res->status);
        }

        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded()) throw SchemaError("response body is not JSON");
        const json* content = nullptr;
        if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
            const json& choice = doc["choices"][0];
            if (choice.contains("message") && choice["message"].is_object()) {
                auto it = choice["message"].find("content");
                if (it != choice["message"].end() && it->is_string()) content = &*it;
            }
        }
        if (content == nullptr) throw SchemaError("response lacks choices[0].message.content");

        ChatResponse out;
        out.content = content->get<std::string>();
        if (auto fr = doc["choices"][0].find("finish_reason"); fr != doc["choices"][0].end() && fr->is_string()) {
            out.finish_reason = fr->get<std::string>();
        }
        if (auto u = doc.find("usage"); u != doc.end() && u->is_object()) {
            out.usage.prompt_tokens = u->value("prompt_tokens", 0);
            out.usage.completion_tokens = u->value("completion_tokens", 0);
        }
        if (text::trim(out.content).empty()) throw SchemaError("response content is empty");
        return out;
    }
    throw TransportError(last_error + " after " + std::to_string(retry_.max_attempts) + " attempts", last_status);
}

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec, const RetryPolicy& retry)
{
    auto live = [&retry](const LiveSpec& s) {
        std::string key;
        if (!s.api_key_env_var.empty()) {
            if (const char* v = std::getenv(s.api_key_env_var.c_str())) key = v;
        }
        return std::make_shared<LiveBackend>(s.base_url, key, retry);
    };
    if (const auto* s = std::get_if<LiveSpec>(&spec)) return live(*s);
    if (const auto* s = std::get_if<ScriptedSpec>(&spec)) {
        return std::make_shared<ScriptedBackend>(load_script(s->script_path));
    }
    const auto& r = std::get<ReplaySpec>(spec);
    return std::make_shared<ReplayBackend>(r.cassette_path, r.record, r.record ? live(r.upstream) : nullptr);
}

}  // namespace elicit
