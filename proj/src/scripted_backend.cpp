#include "elicit/llm_backend.hpp"

#include "elicit/text.hpp"

#include <fstream>
#include <sstream>

namespace elicit {

std::vector<std::string> ChatRequest::problems() const
{
    std::vector<std::string> out;
    if (messages.empty()) {
        out.push_back("request has no messages");
    } else if (messages.front().role != "system") {
        out.push_back("first message must have role 'system'");
    }
    for (const auto& m : messages) {
        if (m.role != "system" && m.role != "user" && m.role != "assistant") {
            out.push_back("unknown message role '" + m.role + "'");
        }
    }
    if (temperature < 0) out.push_back("temperature must be >= 0");
    if (max_tokens && *max_tokens < 1) out.push_back("max_tokens must be >= 1");
    return out;
}

std::size_t Script::size() const
{
    std::size_t n = 0;
    for (const auto& [tag, q] : queues) n += q.size();
    return n;
}

namespace {

bool valid_tag(std::string_view tag)
{
    if (tag.empty()) return false;
    for (char c : tag) {
        if (!(text::is_alnum(c) || c == '_' || c == '-')) return false;
    }
    return true;
}

}  // namespace

Script parse_script(std::string_view source)
{
    Script script;
    std::string current_tag;
    std::vector<std::string> body;
    bool in_entry = false;

    auto flush = [&] {
        if (!in_entry) return;
        while (!body.empty() && text::trim(body.back()).empty()) body.pop_back();
        std::string content;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (i) content += '\n';
            content += body[i];
        }
        script.queues[current_tag].push_back(std::move(content));
        body.clear();
    };

    const auto lines = text::split_lines(source);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.rfind(">>>", 0) == 0) {
            flush();
            const auto tag = std::string(text::trim(std::string_view(line).substr(3)));
            if (!valid_tag(tag)) throw ParseError("invalid tag '" + tag + "' in entry header", i + 1);
            current_tag = tag;
            in_entry = true;
            continue;
        }
        if (!in_entry) {
            const auto t = text::trim(line);
            if (t.empty() || t.front() == '#') continue;
            throw ParseError("text before the first '>>> tag' header", i + 1);
        }
        body.push_back(line);
    }
    flush();

    if (script.size() == 0) throw EmptyScript("script has no entries");
    return script;
}

Script load_script(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open script", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_script(ss.str());
}

ScriptedBackend::ScriptedBackend(Script script) : script_(std::move(script)) {}

ChatResponse ScriptedBackend::complete(const ChatRequest& req)
{
    std::lock_guard lock(mutex_);
    requests_.push_back(req);
    ++calls_[req.tag];
    auto it = script_.queues.find(req.tag);
    if (it == script_.queues.end() || it->second.empty()) throw ScriptExhausted(req.tag);
    std::string content = std::move(it->second.front());
    it->second.pop_front();
    if (text::trim(content).empty()) throw SchemaError("scripted response for '" + req.tag + "' is empty");
    return ChatResponse{std::move(content), "stop", {}};
}

std::size_t ScriptedBackend::calls(std::string_view tag) const
{
    std::lock_guard lock(mutex_);
    auto it = calls_.find(tag);
    return it == calls_.end() ? 0 : it->second;
}

std::size_t ScriptedBackend::remaining(std::string_view tag) const
{
    std::lock_guard lock(mutex_);
    auto it = script_.queues.find(tag);
    return it == script_.queues.end() ? 0 : it->second.size();
}

std::vector<ChatRequest> ScriptedBackend::requests() const
{
    std::lock_guard lock(mutex_);
    return requests_;
}

}  // namespace elicit
