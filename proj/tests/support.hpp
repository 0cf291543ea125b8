#pragma once

#include "elicit/core.hpp"
#include "elicit/llm_backend.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <random>
#include <regex>
#include <string>
#include <utility>

namespace elicit::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("elicit-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

using Entries = std::initializer_list<std::pair<std::string_view, std::string>>;

inline Script make_script(Entries entries)
{
    Script s;
    for (const auto& [tag, text] : entries) s.queues[std::string(tag)].push_back(text);
    return s;
}

inline std::shared_ptr<ScriptedBackend> scripted(Entries entries)
{
    return std::make_shared<ScriptedBackend>(make_script(entries));
}

/// Clock ticking one second per call from a fixed instant.
inline std::function<Timestamp()> fixed_clock()
{
    auto t = std::make_shared<Timestamp>(std::chrono::sys_days{std::chrono::year{2024} / 5 / 1});
    return [t] {
        *t += std::chrono::seconds{1};
        return *t;
    };
}

/// Replaces every ISO-8601 timestamp with a placeholder.
inline std::string mask_timestamps(const std::string& s)
{
    static const std::regex ts(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?Z)");
    return std::regex_replace(s, ts, "<ts>");
}

/// Answers by tag through a callback; counts nothing.
class FnBackend final : public ChatBackend {
public:
    explicit FnBackend(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
    ChatResponse complete(const ChatRequest& req) override { return ChatResponse{fn_(req)}; }

private:
    std::function<std::string(const ChatRequest&)> fn_;
};

inline RunConfig scripted_config(std::string script_path = "unused.txt")
{
    RunConfig cfg;
    cfg.backend = ScriptedSpec{std::move(script_path)};
    return cfg;
}

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Nonempty lines of a file.
inline std::vector<std::string> text_lines(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

}  // namespace elicit::testing
