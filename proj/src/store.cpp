#include "elicit/store.hpp"

#include "elicit/json_codec.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

namespace elicit::store {

using nlohmann::json;

namespace {

bool ends_with(const std::string& s, std::string_view suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_version(const json& doc)
{
    const int v = doc.value("schema_version", 0);
    if (v > kSchemaVersion) {
        throw SchemaVersionError("schema_version " + std::to_string(v) + " is newer than supported version " +
                                 std::to_string(kSchemaVersion));
    }
    if (v < 1) throw std::invalid_argument("missing schema_version");
}

std::vector<fs::path> json_files(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory", dir.string());
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
    }
    if (ec) throw IoError("cannot list directory", dir.string());
    std::sort(out.begin(), out.end());
    return out;
}

bool safe_file_stem(const std::string& id)
{
    if (id.empty() || id == "." || id == "..") return false;
    return std::none_of(id.begin(), id.end(), [](char c) { return c == '/' || c == '\\' || c == '\0'; });
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& content)
{
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
           std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write", path.string());
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("cannot write", path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into place", path.string());
    }
}

fs::path save_transcript(const fs::path& dir, const Transcript& t)
{
    if (!safe_file_stem(t.session_id)) throw IoError("session id is not a valid file name", t.session_id);
    const fs::path path = dir / (t.session_id + ".json");
    atomic_write(path, dump_transcript(t));
    return path;
}

Transcript load_transcript(const fs::path& path)
{
    const json doc = json::parse(read_file(path));
    check_version(doc);
    return doc.get<Transcript>();
}

LoadedTranscripts load_transcripts(const fs::path& dir)
{
    LoadedTranscripts out;
    for (const auto& path : json_files(dir)) {
        const std::string name = path.filename().string();
        if (name == kManifestName || ends_with(name, kScoresSuffix)) continue;
        try {
            out.transcripts.push_back(load_transcript(path));
        } catch (const SchemaVersionError&) {
            throw;
        } catch (const std::exception& e) {
            out.warnings.push_back({path, e.what()});
        }
    }
    std::stable_sort(out.transcripts.begin(), out.transcripts.end(), [](const Transcript& a, const Transcript& b) {
        return a.created_at != b.created_at ? a.created_at < b.created_at : a.session_id < b.session_id;
    });
    return out;
}

fs::path write_run_manifest(const fs::path& dir, const RunManifest& m)
{
    const json doc{{"schema_version", kSchemaVersion},
                   {"config", m.config},
                   {"session_ids", m.session_ids},
                   {"started_at", format_timestamp(m.started_at)},
                   {"finished_at", format_timestamp(m.finished_at)},
                   {"artifact_version", m.artifact_version}};
    const fs::path path = dir / std::string(kManifestName);
    atomic_write(path, doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
    return path;
}

RunManifest read_run_manifest(const fs::path& path)
{
    const json doc = json::parse(read_file(path));
    check_version(doc);
    RunManifest m;
    from_json(doc.at("config"), m.config);
    m.session_ids = doc.at("session_ids").get<std::vector<std::string>>();
    auto ts = [&doc](const char* key) {
        auto t = parse_timestamp(doc.at(key).get<std::string>());
        if (!t) throw std::invalid_argument(std::string("bad timestamp: ") + key);
        return *t;
    };
    m.started_at = ts("started_at");
    m.finished_at = ts("finished_at");
    m.artifact_version = doc.at("artifact_version").get<std::string>();
    return m;
}

fs::path save_scores(const fs::path& dir, const EvaluationScores& s)
{
    if (!safe_file_stem(s.transcript_id)) throw IoError("transcript id is not a valid file name", s.transcript_id);
    json doc = s;
    doc["schema_version"] = kSchemaVersion;
    const fs::path path = dir / (s.transcript_id + std::string(kScoresSuffix));
    atomic_write(path, doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
    return path;
}

LoadedScores load_scores(const fs::path& dir)
{
    LoadedScores out;
    for (const auto& path : json_files(dir)) {
        if (!ends_with(path.filename().string(), kScoresSuffix)) continue;
        try {
            const json doc = json::parse(read_file(path));
            check_version(doc);
            out.scores.push_back(doc.get<EvaluationScores>());
        } catch (const SchemaVersionError&) {
            throw;
        } catch (const std::exception& e) {
            out.warnings.push_back({path, e.what()});
        }
    }
    return out;
}

}  // namespace elicit::store
