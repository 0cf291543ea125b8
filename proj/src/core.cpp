#include "elicit/core.hpp"

#include "elicit/text.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <set>

namespace elicit {

Timestamp now_utc()
{
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::string format_timestamp(Timestamp t)
{
    using namespace std::chrono;
    const auto secs = time_point_cast<seconds>(t);
    const auto millis = (t - secs).count();
    const std::time_t tt = system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(millis));
    return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text)
{
    std::string s(text);
    std::tm tm{};
    int millis = 0;
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &consumed) != 6) {
        return std::nullopt;
    }
    std::string_view rest = text.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        int digits = 0;
        while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
            if (digits < 3) millis = millis * 10 + (rest.front() - '0');
            ++digits;
            rest.remove_prefix(1);
        }
        if (digits == 0) return std::nullopt;
        for (int i = digits; i < 3; ++i) millis *= 10;
    }
    if (rest != "Z") return std::nullopt;
    if (tm.tm_mon < 1 || tm.tm_mon > 12 || tm.tm_mday < 1 || tm.tm_mday > 31) return std::nullopt;
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t tt = timegm(&tm);
    return Timestamp{std::chrono::milliseconds{static_cast<std::int64_t>(tt) * 1000 + millis}};
}

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::pair<E, std::string_view> (&table)[N], std::string_view s)
{
    for (const auto& [value, name] : table) {
        if (name == s) return value;
    }
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E e)
{
    for (const auto& [value, name] : table) {
        if (value == e) return name;
    }
    return "unknown";
}

constexpr std::pair<Role, std::string_view> kRoles[] = {
    {Role::Controller, "controller"}, {Role::Assistant, "assistant"}, {Role::User, "user"},
    {Role::Evaluator, "evaluator"},   {Role::System, "system"},
};

constexpr std::pair<ControllerEventKind, std::string_view> kEventKinds[] = {
    {ControllerEventKind::InitialInstruction, "initial_instruction"},
    {ControllerEventKind::Guidance, "guidance"},
    {ControllerEventKind::ReviewReject, "review_reject"},
    {ControllerEventKind::TerminationCheck, "termination_check"},
    {ControllerEventKind::FinalInstruction, "final_instruction"},
};

constexpr std::pair<SessionMode, std::string_view> kModes[] = {
    {SessionMode::Controlled, "controlled"},
    {SessionMode::Baseline, "baseline"},
    {SessionMode::HumanControlled, "human_controlled"},
};

constexpr std::pair<TerminatedBy, std::string_view> kTerminations[] = {
    {TerminatedBy::Controller, "controller"}, {TerminatedBy::MaxTurns, "max_turns"},
    {TerminatedBy::UserQuit, "user_quit"},     {TerminatedBy::Error, "error"},
    {TerminatedBy::SelfStop, "self_stop"},
};

constexpr std::pair<Criterion, std::string_view> kCriteria[] = {
    {Criterion::Satisfaction, "satisfaction"},
    {Criterion::Flexibility, "flexibility"},
    {Criterion::Accuracy, "accuracy"},
    {Criterion::Contradiction, "contradiction"},
};

}  // namespace

std::string_view to_string(Role r) { return name_of(kRoles, r); }
std::optional<Role> role_from_string(std::string_view s) { return lookup(kRoles, s); }
std::string_view to_string(ControllerEventKind k) { return name_of(kEventKinds, k); }
std::optional<ControllerEventKind> controller_event_kind_from_string(std::string_view s)
{
    return lookup(kEventKinds, s);
}
std::string_view to_string(SessionMode m) { return name_of(kModes, m); }
std::optional<SessionMode> session_mode_from_string(std::string_view s) { return lookup(kModes, s); }
std::string_view to_string(TerminatedBy t) { return name_of(kTerminations, t); }
std::optional<TerminatedBy> terminated_by_from_string(std::string_view s) { return lookup(kTerminations, s); }
std::string_view to_string(Criterion c) { return name_of(kCriteria, c); }
std::optional<Criterion> criterion_from_string(std::string_view s) { return lookup(kCriteria, s); }

std::string_view criterion_definition(Criterion c)
{
    switch (c) {
    case Criterion::Satisfaction:
        return "Whether the user was satisfied with the dialogue";
    case Criterion::Flexibility:
        return "Whether you were able to compose a tactful flow of dialogue based on the user's statements";
    case Criterion::Accuracy:
        return "Whether we were able to accurately identify user needs and organize the information";
    case Criterion::Contradiction:
        return "Whether you were able to successfully approach the user's statement by pointing out the "
               "inconsistencies hidden in the user's statement";
    }
    return {};
}

const std::string* Persona::find(std::string_view name) const
{
    for (const auto& a : attributes) {
        if (a.name == name) return &a.value;
    }
    return nullptr;
}

std::vector<std::string> Persona::duplicate_names() const
{
    std::set<std::string> seen;
    std::set<std::string> dups;
    for (const auto& a : attributes) {
        if (!seen.insert(a.name).second) dups.insert(a.name);
    }
    return {dups.begin(), dups.end()};
}

Persona reference_persona()
{
    return Persona{{
                       {"Gender", "Male"},
                       {"Age", "24"},
                       {"Occupation", "Engineer"},
                       {"Favorite Cuisine", "Italian"},
                       {"Occasion", "Company get-togethers"},
                   },
                   true};
}

std::string_view backend_kind(const BackendSpec& spec)
{
    switch (spec.index()) {
    case 0: return "live";
    case 1: return "scripted";
    default: return "replay";
    }
}

std::vector<std::string> validate_config(const RunConfig& cfg)
{
    std::vector<std::string> out;
    if (cfg.max_turns < 1) out.push_back("max_turns must be >= 1");
    if (cfg.num_dialogues < 1) out.push_back("num_dialogues must be >= 1");
    if (cfg.max_review_retries < 0) out.push_back("max_review_retries must be >= 0");
    if (cfg.temperature_dialogue < 0) out.push_back("temperature_dialogue must be >= 0");
    if (cfg.temperature_judge < 0) out.push_back("temperature_judge must be >= 0");
    if (cfg.max_tokens && *cfg.max_tokens < 1) out.push_back("max_tokens must be >= 1");
    if (cfg.retry_attempts < 1) out.push_back("retry_attempts must be >= 1");
    if (cfg.retry_backoff_ms < 0) out.push_back("retry_backoff_ms must be >= 0");
    if (cfg.model_name.empty()) out.push_back("model_name must be nonempty");
    if (cfg.domain_topic.empty()) out.push_back("domain_topic must be nonempty");
    if (const auto* s = std::get_if<ScriptedSpec>(&cfg.backend); s && s->script_path.empty()) {
        out.push_back("scripted backend requires a script path");
    }
    if (const auto* r = std::get_if<ReplaySpec>(&cfg.backend); r && r->cassette_path.empty()) {
        out.push_back("replay backend requires a cassette path");
    }
    return out;
}

int Transcript::completed_pairs() const
{
    return static_cast<int>(std::count_if(messages.begin(), messages.end(),
                                          [](const Message& m) { return m.role == Role::User; }));
}

std::vector<std::string> validate_transcript(const Transcript& t)
{
    std::vector<std::string> v;
    auto at = [](std::string_view what, std::size_t i) {
        return std::string(what) + " at index " + std::to_string(i);
    };

    std::set<std::string> ids;
    for (std::size_t i = 0; i < t.messages.size(); ++i) {
        const Message& m = t.messages[i];
        if (text::trim(m.content).empty()) v.push_back(at("content: empty message", i));
        if (m.turn < 0) v.push_back(at("turn: negative turn", i));
        if (i > 0 && m.turn < t.messages[i - 1].turn) v.push_back(at("turn order: turn decreases", i));
        if (m.role != Role::Assistant && m.role != Role::User) {
            v.push_back(at("role: " + std::string(to_string(m.role)) + " message in turn sequence", i));
        }
        if (m.session_id != t.session_id) v.push_back(at("session_id: message belongs to another session", i));
        if (!ids.insert(m.id).second) v.push_back(at("id: duplicate message id", i));

        const bool first = i == 0;
        if (first && m.role == Role::User) v.push_back(at("alternation: user message without a question", i));
        if (!first && m.role == t.messages[i - 1].role &&
            (m.role == Role::Assistant || m.role == Role::User)) {
            v.push_back(at("alternation: consecutive " + std::string(to_string(m.role)) + " messages", i));
        }
    }

    const auto& ev = t.controller_events;
    if (t.mode == SessionMode::Baseline) {
        if (!ev.empty()) v.push_back(at("baseline has no controller events", 0));
    } else {
        std::size_t initial = 0;
        for (std::size_t i = 0; i < ev.size(); ++i) {
            if (ev[i].kind != ControllerEventKind::InitialInstruction) continue;
            ++initial;
            if (ev[i].turn != 0) v.push_back(at("initial instruction: not at turn 0", i));
            if (i != 0) v.push_back(at("initial instruction: not the first controller event", i));
        }
        const bool errored = t.outcome && t.outcome->terminated_by == TerminatedBy::Error;
        if (initial > 1) v.push_back(at("initial instruction: more than one", 0));
        if (initial == 0 && !errored) v.push_back(at("initial instruction: missing", 0));
    }
    for (std::size_t i = 0; i < ev.size(); ++i) {
        if (ev[i].turn < 0) v.push_back(at("controller event: negative turn", i));
        if (i > 0 && ev[i].turn < ev[i - 1].turn) v.push_back(at("controller event: turn decreases", i));
        if (ev[i].kind == ControllerEventKind::FinalInstruction && i + 1 != ev.size()) {
            v.push_back(at("final instruction: not the last controller event", i));
        }
    }

    if (t.outcome) {
        const auto by = t.outcome->terminated_by;
        if (by == TerminatedBy::Controller && !t.outcome->needs_summary) {
            v.push_back(at("needs_summary: controller termination without summary", 0));
        }
        if (by == TerminatedBy::SelfStop && t.mode != SessionMode::Baseline) {
            v.push_back(at("outcome: self_stop outside baseline mode", 0));
        }
        if (by == TerminatedBy::Controller && t.mode == SessionMode::Baseline) {
            v.push_back(at("outcome: controller termination in baseline mode", 0));
        }
        if (t.outcome->needs_summary && text::trim(*t.outcome->needs_summary).empty()) {
            v.push_back(at("needs_summary: empty", 0));
        }
    }

    for (const auto& name : t.persona.duplicate_names()) {
        v.push_back("persona: duplicate attribute name '" + name + "'");
    }
    if (t.persona.attributes.empty() && t.mode != SessionMode::HumanControlled) {
        v.push_back("persona: empty attributes outside human mode");
    }
    return v;
}

int EvaluationScores::get(Criterion c) const
{
    switch (c) {
    case Criterion::Satisfaction: return satisfaction;
    case Criterion::Flexibility: return flexibility;
    case Criterion::Accuracy: return accuracy;
    case Criterion::Contradiction: return contradiction;
    }
    return 0;
}

void EvaluationScores::set(Criterion c, int score)
{
    switch (c) {
    case Criterion::Satisfaction: satisfaction = score; break;
    case Criterion::Flexibility: flexibility = score; break;
    case Criterion::Accuracy: accuracy = score; break;
    case Criterion::Contradiction: contradiction = score; break;
    }
}

bool EvaluationScores::valid() const
{
    return std::all_of(std::begin(kAllCriteria), std::end(kAllCriteria), [this](Criterion c) {
        const int s = get(c);
        return s >= 1 && s <= 5;
    });
}

}  // namespace elicit
