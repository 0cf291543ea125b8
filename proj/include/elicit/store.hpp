#pragma once

#include "elicit/core.hpp"
#include "elicit/errors.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace elicit::store {

namespace fs = std::filesystem;

inline constexpr std::string_view kManifestName = "run_manifest.json";
inline constexpr std::string_view kScoresSuffix = ".scores.json";
inline constexpr std::string_view kArtifactVersion = "0.1.0";

/// Writes `content` to `path` through a sibling temp file and rename.
void atomic_write(const fs::path& path, const std::string& content);

/// Saves `<dir>/<session_id>.json`; returns the path.
fs::path save_transcript(const fs::path& dir, const Transcript& t);

Transcript load_transcript(const fs::path& path);

struct LoadWarning {
    fs::path path;
    std::string message;
};

struct LoadedTranscripts {
    std::vector<Transcript> transcripts;
    std::vector<LoadWarning> warnings;
};

/// Loads every transcript document in `dir` (score records and the manifest
/// are ignored), sorted by created_at then session_id. Malformed documents
/// are skipped with a warning. A document with a newer schema_version throws
/// SchemaVersionError.
LoadedTranscripts load_transcripts(const fs::path& dir);

struct RunManifest {
    RunConfig config;
    std::vector<std::string> session_ids;
    Timestamp started_at{};
    Timestamp finished_at{};
    std::string artifact_version{kArtifactVersion};

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

fs::path write_run_manifest(const fs::path& dir, const RunManifest& manifest);
RunManifest read_run_manifest(const fs::path& path);

/// `<dir>/<transcript_id>.scores.json`.
fs::path save_scores(const fs::path& dir, const EvaluationScores& s);

struct LoadedScores {
    std::vector<EvaluationScores> scores;
    std::vector<LoadWarning> warnings;
};

LoadedScores load_scores(const fs::path& dir);

}  // namespace elicit::store
