#include "elicit/evaluator.hpp"

#include "elicit/orchestrator.hpp"
#include "elicit/text.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace elicit {

namespace {

constexpr std::string_view kScoreRequest = "Score the dialogue now.";
constexpr std::string_view kStricterRequest =
    "Your previous reply did not contain a score. Reply with only one digit from 1 to 5 and nothing else.";

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::optional<int> parse_score(std::string_view s)
{
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_digit(s[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < s.size() && is_digit(s[i])) ++i;
        const std::size_t end = i;

        const char before = start > 0 ? s[start - 1] : ' ';
        const char before2 = start > 1 ? s[start - 2] : ' ';
        const char after = end < s.size() ? s[end] : ' ';
        const char after2 = end + 1 < s.size() ? s[end + 1] : ' ';

        if (text::is_alnum(before) || text::is_alnum(after)) continue;
        if (before == '.' && is_digit(before2)) continue;        // fractional part
        if ((after == '.' || after == ',') && is_digit(after2)) continue;  // decimal / thousands
        if (before == '-' && !is_digit(before2)) continue;       // negative

        const std::string_view digits = s.substr(start, end - start);
        if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '5') return digits[0] - '0';
    }
    return std::nullopt;
}

std::string build_judge_prompt(const Transcript& t, Criterion c, const PromptRegistry& prompts)
{
    return prompts.render(template_ids::kEvaluator, {{"persona_block", build_persona_block(t.persona)},
                                                     {"dialogue", render_dialogue(t.messages)},
                                                     {"criterion_name", std::string(to_string(c))},
                                                     {"criterion_definition", std::string(criterion_definition(c))}});
}

int score_transcript(const Transcript& t, Criterion c, ChatBackend& backend, const RunConfig& cfg,
                     const PromptRegistry& prompts)
{
    if (t.completed_pairs() < 1) throw UnscorableTranscript("transcript " + t.session_id + " has no Q/A pairs");

    ChatRequest req{cfg.model_name,
                    {{"system", build_judge_prompt(t, c, prompts)}, {"user", std::string(kScoreRequest)}},
                    cfg.temperature_judge,
                    cfg.max_tokens,
                    std::string(tags::kEvaluator)};
    try {
        std::string raw = backend.complete(req).content;
        if (auto s = parse_score(raw)) return *s;
        req.messages.push_back({"assistant", raw});
        req.messages.push_back({"user", std::string(kStricterRequest)});
        raw = backend.complete(req).content;
        if (auto s = parse_score(raw)) return *s;
        throw ScoreParseFailure("no score in judge reply for " + std::string(to_string(c)) + " of " + t.session_id +
                                ": " + raw);
    } catch (const BackendError& e) {
        throw BackendFailure(e.what());
    }
}

BatchResult evaluate_batch(const std::vector<Transcript>& transcripts, ChatBackend& backend, const RunConfig& cfg,
                           const PromptRegistry& prompts)
{
    if (transcripts.empty()) throw EmptyInput("evaluate_batch needs at least one transcript");
    BatchResult out;
    for (const auto& t : transcripts) {
        EvaluationScores s;
        s.transcript_id = t.session_id;
        try {
            for (Criterion c : kAllCriteria) s.set(c, score_transcript(t, c, backend, cfg, prompts));
            out.scores.push_back(std::move(s));
        } catch (const BackendFailure& e) {
            out.warnings.push_back({t.session_id, e.what(), true});
        } catch (const Error& e) {
            out.warnings.push_back({t.session_id, e.what(), false});
        }
    }
    return out;
}

long long mean_tenths_half_up(long long sum, long long n)
{
    // round(10 * sum / n) with ties upward == floor((20 * sum + n) / (2n)) for
    // nonnegative sums.
    return (20 * sum + n) / (2 * n);
}

CriterionMeans aggregate(const std::vector<EvaluationScores>& scores)
{
    if (scores.empty()) throw EmptyInput("aggregate needs at least one score record");
    CriterionMeans m;
    m.n_dialogues = static_cast<int>(scores.size());
    for (Criterion c : kAllCriteria) {
        long long sum = 0;
        for (const auto& s : scores) sum += s.get(c);
        m.values[static_cast<std::size_t>(c)] =
            static_cast<double>(mean_tenths_half_up(sum, static_cast<long long>(scores.size()))) / 10.0;
    }
    return m;
}

std::string format_mean(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", std::round(v * 10.0) / 10.0);
    return buf;
}

std::string compare_report(const std::vector<ReportRow>& rows)
{
    std::size_t label_width = 0;
    for (const auto& r : rows) label_width = std::max(label_width, r.label.size());

    std::ostringstream out;
    out << std::string(label_width, ' ');
    for (Criterion c : kAllCriteria) out << "  " << to_string(c);
    out << '\n';
    for (const auto& r : rows) {
        out << r.label << std::string(label_width - r.label.size(), ' ');
        for (Criterion c : kAllCriteria) {
            const std::string cell = format_mean(r.means.get(c));
            const std::size_t width = to_string(c).size();
            out << "  " << std::string(width > cell.size() ? width - cell.size() : 0, ' ') << cell;
        }
        out << '\n';
    }
    return out.str();
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", lineno);
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace

std::string compare_report_csv(const std::vector<ReportRow>& rows)
{
    std::ostringstream out;
    out << "system,n_dialogues";
    for (Criterion c : kAllCriteria) out << ',' << to_string(c);
    out << '\n';
    for (const auto& r : rows) {
        out << csv_field(r.label) << ',' << r.means.n_dialogues;
        for (Criterion c : kAllCriteria) out << ',' << format_mean(r.means.get(c));
        out << '\n';
    }
    return out.str();
}

std::vector<ReportRow> parse_report_csv(std::string_view csv)
{
    const auto lines = text::split_lines(csv);
    std::vector<ReportRow> rows;
    if (lines.empty() || text::trim(lines[0]).empty()) throw ParseError("missing header", 1);
    const auto header = split_csv_line(lines[0], 1);
    if (header.size() != 6 || header[0] != "system" || header[1] != "n_dialogues") {
        throw ParseError("unexpected header", 1);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (header[i + 2] != to_string(kAllCriteria[i])) throw ParseError("unexpected header", 1);
    }
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto f = split_csv_line(lines[ln], ln + 1);
        if (f.size() != 6) throw ParseError("expected 6 fields", ln + 1);
        ReportRow r;
        r.label = f[0];
        try {
            std::size_t used = 0;
            r.means.n_dialogues = std::stoi(f[1], &used);
            if (used != f[1].size()) throw std::invalid_argument(f[1]);
            for (std::size_t k = 0; k < 4; ++k) {
                r.means.values[k] = std::stod(f[k + 2], &used);
                if (used != f[k + 2].size()) throw std::invalid_argument(f[k + 2]);
            }
        } catch (const std::exception&) {
            throw ParseError("malformed number", ln + 1);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace elicit
