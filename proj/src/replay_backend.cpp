#include "elicit/llm_backend.hpp"

#include "elicit/text.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <fstream>

namespace elicit {

using nlohmann::json;

namespace {

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xf];
    }
    return out;
}

json request_summary(const ChatRequest& req)
{
    std::string last = req.messages.empty() ? std::string() : req.messages.back().content;
    constexpr std::size_t kMax = 160;
    if (last.size() > kMax) last = last.substr(0, kMax) + "...";
    return json{{"model", req.model_name},
                {"tag", req.tag},
                {"temperature", req.temperature},
                {"messages", req.messages.size()},
                {"last_message", last}};
}

}  // namespace

std::string cassette_key(const ChatRequest& req)
{
    json messages = json::array();
    for (const auto& m : req.messages) messages.push_back(json::array({m.role, m.content}));
    const json canonical{{"model", req.model_name}, {"messages", messages}, {"temperature", req.temperature}};
    return sha256_hex(canonical.dump(-1, ' ', false, json::error_handler_t::replace));
}

ReplayBackend::ReplayBackend(std::filesystem::path cassette, bool record, std::shared_ptr<ChatBackend> upstream)
    : path_(std::move(cassette)), record_(record), upstream_(std::move(upstream))
{
    load();
}

void ReplayBackend::load()
{
    std::ifstream in(path_, std::ios::binary);
    if (!in) {
        if (record_) return;  // created on first write
        throw IoError("cannot open cassette", path_.string());
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("key") || !rec.contains("response") ||
            !rec["key"].is_string() || !rec["response"].is_string()) {
            throw ParseError("malformed cassette record", lineno);
        }
        // First record for a key wins; the file is append-only.
        entries_.emplace(rec["key"].get<std::string>(), rec["response"].get<std::string>());
    }
}

ChatResponse ReplayBackend::complete(const ChatRequest& req)
{
    const std::string key = cassette_key(req);
    {
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) return ChatResponse{it->second, "stop", {}};
        if (!record_ || !upstream_) throw CassetteMiss(key);
        ++upstream_calls_;
    }

    ChatResponse res = upstream_->complete(req);

    std::lock_guard lock(mutex_);
    auto [it, inserted] = entries_.emplace(key, res.content);
    if (!inserted) return ChatResponse{it->second, "stop", {}};
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to cassette", path_.string());
    const json rec{{"key", key}, {"request", request_summary(req)}, {"response", res.content}};
    out << rec.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to cassette", path_.string());
    return res;
}

std::size_t ReplayBackend::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::size_t ReplayBackend::upstream_calls() const
{
    std::lock_guard lock(mutex_);
    return upstream_calls_;
}

}  // namespace elicit
