#pragma once

#include "elicit/core.hpp"
#include "elicit/errors.hpp"
#include "elicit/llm_backend.hpp"
#include "elicit/prompts.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace elicit {

/// First standalone integer token of `raw` that lies in [1,5]. Decimals
/// ("4.5"), signed numbers and digits glued to letters are not standalone.
/// Never throws.
std::optional<int> parse_score(std::string_view raw);

/// The judge prompt for one (transcript, criterion) pair.
std::string build_judge_prompt(const Transcript& t, Criterion c, const PromptRegistry& prompts);

/// Asks the judge for one 1-5 score; one stricter retry when the reply holds
/// no score. Throws UnscorableTranscript, ScoreParseFailure or
/// BackendFailure.
int score_transcript(const Transcript& t, Criterion c, ChatBackend& backend, const RunConfig& cfg,
                     const PromptRegistry& prompts);

struct EvaluationWarning {
    std::string transcript_id;
    std::string message;
    bool backend_error = false;
};

struct BatchResult {
    std::vector<EvaluationScores> scores;
    std::vector<EvaluationWarning> warnings;
};

/// Scores all four criteria for every transcript, in order. A transcript that
/// fails is left out of `scores` and reported in `warnings`. Throws
/// EmptyInput on an empty batch.
BatchResult evaluate_batch(const std::vector<Transcript>& transcripts, ChatBackend& backend, const RunConfig& cfg,
                           const PromptRegistry& prompts);

/// Per-criterion means, each rounded half-up to one decimal.
struct CriterionMeans {
    std::array<double, 4> values{};
    int n_dialogues = 0;

    double get(Criterion c) const { return values[static_cast<std::size_t>(c)]; }
    friend bool operator==(const CriterionMeans&, const CriterionMeans&) = default;
};

/// Throws EmptyInput for an empty list.
CriterionMeans aggregate(const std::vector<EvaluationScores>& scores);

/// Rounds sum/n half-up to tenths using integer arithmetic; the result is
/// in tenths (e.g. 48 for 4.8).
long long mean_tenths_half_up(long long sum, long long n);

struct ReportRow {
    std::string label;
    CriterionMeans means;
};

/// Aligned plain-text table: one header line and one line per row.
std::string compare_report(const std::vector<ReportRow>& rows);

/// Comma-separated variant with a header and an n_dialogues column.
std::string compare_report_csv(const std::vector<ReportRow>& rows);

/// Inverse of compare_report_csv. Throws ParseError with the line number.
std::vector<ReportRow> parse_report_csv(std::string_view csv);

std::string format_mean(double v);

}  // namespace elicit
