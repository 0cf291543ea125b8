#include "elicit/json_codec.hpp"

#include <stdexcept>

namespace elicit {

using nlohmann::json;

namespace {

template <typename E, typename F>
E enum_field(const json& j, const char* key, F parse)
{
    const auto s = j.at(key).get<std::string>();
    if (auto v = parse(s)) return *v;
    throw std::invalid_argument(std::string("bad value for '") + key + "': " + s);
}

Timestamp timestamp_field(const json& j, const char* key)
{
    const auto s = j.at(key).get<std::string>();
    if (auto t = parse_timestamp(s)) return *t;
    throw std::invalid_argument(std::string("bad timestamp for '") + key + "': " + s);
}

template <typename T>
void maybe(const json& j, const char* key, T& out)
{
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

template <typename T>
void maybe(const json& j, const char* key, std::optional<T>& out)
{
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

void to_json(json& j, const Message& m)
{
    j = json{{"id", m.id},           {"session_id", m.session_id}, {"role", to_string(m.role)},
             {"content", m.content}, {"turn", m.turn},             {"created_at", format_timestamp(m.created_at)}};
}

void from_json(const json& j, Message& m)
{
    m.id = j.at("id").get<std::string>();
    m.session_id = j.at("session_id").get<std::string>();
    m.role = enum_field<Role>(j, "role", role_from_string);
    m.content = j.at("content").get<std::string>();
    m.turn = j.at("turn").get<int>();
    m.created_at = timestamp_field(j, "created_at");
}

void to_json(json& j, const Persona& p)
{
    json attrs = json::array();
    for (const auto& a : p.attributes) attrs.push_back({{"name", a.name}, {"value", a.value}});
    j = json{{"attributes", attrs}, {"contradiction_enabled", p.contradiction_enabled}};
}

void from_json(const json& j, Persona& p)
{
    p.attributes.clear();
    for (const auto& a : j.at("attributes")) {
        p.attributes.push_back({a.at("name").get<std::string>(), a.at("value").get<std::string>()});
    }
    p.contradiction_enabled = j.value("contradiction_enabled", true);
}

void to_json(json& j, const ControllerEvent& e)
{
    j = json{{"turn", e.turn}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
}

void from_json(const json& j, ControllerEvent& e)
{
    e.turn = j.at("turn").get<int>();
    e.kind = enum_field<ControllerEventKind>(j, "kind", controller_event_kind_from_string);
    e.payload = j.at("payload").get<std::string>();
}

void to_json(json& j, const ReviewVerdict& v)
{
    j = json{{"approved", v.approved}, {"raw", v.raw}};
    j["guidance"] = v.guidance ? json(*v.guidance) : json(nullptr);
}

void from_json(const json& j, ReviewVerdict& v)
{
    v.approved = j.at("approved").get<bool>();
    v.raw = j.at("raw").get<std::string>();
    v.guidance.reset();
    maybe(j, "guidance", v.guidance);
}

void to_json(json& j, const TerminationDecision& d)
{
    j = json{{"terminate", d.terminate}, {"raw", d.raw}};
    j["final_instruction"] = d.final_instruction ? json(*d.final_instruction) : json(nullptr);
}

void from_json(const json& j, TerminationDecision& d)
{
    d.terminate = j.at("terminate").get<bool>();
    d.raw = j.at("raw").get<std::string>();
    d.final_instruction.reset();
    maybe(j, "final_instruction", d.final_instruction);
}

void to_json(json& j, const BackendSpec& b)
{
    std::visit(
        [&j](const auto& spec) {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, LiveSpec>) {
                j = json{{"kind", "live"}, {"base_url", spec.base_url}, {"api_key_env_var", spec.api_key_env_var}};
            } else if constexpr (std::is_same_v<T, ScriptedSpec>) {
                j = json{{"kind", "scripted"}, {"script_path", spec.script_path}};
            } else {
                j = json{{"kind", "replay"},
                         {"cassette_path", spec.cassette_path},
                         {"record", spec.record},
                         {"base_url", spec.upstream.base_url},
                         {"api_key_env_var", spec.upstream.api_key_env_var}};
            }
        },
        b);
}

void from_json(const json& j, BackendSpec& b)
{
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "live") {
        LiveSpec s;
        maybe(j, "base_url", s.base_url);
        maybe(j, "api_key_env_var", s.api_key_env_var);
        b = s;
    } else if (kind == "scripted") {
        ScriptedSpec s;
        maybe(j, "script_path", s.script_path);
        b = s;
    } else if (kind == "replay") {
        ReplaySpec s;
        maybe(j, "cassette_path", s.cassette_path);
        maybe(j, "record", s.record);
        maybe(j, "base_url", s.upstream.base_url);
        maybe(j, "api_key_env_var", s.upstream.api_key_env_var);
        b = s;
    } else {
        throw std::invalid_argument("unknown backend kind: " + kind);
    }
}

void to_json(json& j, const RunConfig& c)
{
    j = json{{"backend", c.backend},
             {"model_name", c.model_name},
             {"temperature_dialogue", c.temperature_dialogue},
             {"temperature_judge", c.temperature_judge},
             {"max_turns", c.max_turns},
             {"max_review_retries", c.max_review_retries},
             {"num_dialogues", c.num_dialogues},
             {"seed", c.seed},
             {"domain_topic", c.domain_topic},
             {"guidance_every_turn", c.guidance_every_turn},
             {"retry_attempts", c.retry_attempts},
             {"retry_backoff_ms", c.retry_backoff_ms}};
    j["max_tokens"] = c.max_tokens ? json(*c.max_tokens) : json(nullptr);
}

void from_json(const json& j, RunConfig& c)
{
    maybe(j, "backend", c.backend);
    maybe(j, "model_name", c.model_name);
    maybe(j, "temperature_dialogue", c.temperature_dialogue);
    maybe(j, "temperature_judge", c.temperature_judge);
    if (auto it = j.find("max_tokens"); it != j.end()) {
        c.max_tokens = it->is_null() ? std::nullopt : std::optional<int>(it->get<int>());
    }
    maybe(j, "max_turns", c.max_turns);
    maybe(j, "max_review_retries", c.max_review_retries);
    maybe(j, "num_dialogues", c.num_dialogues);
    maybe(j, "seed", c.seed);
    maybe(j, "domain_topic", c.domain_topic);
    maybe(j, "guidance_every_turn", c.guidance_every_turn);
    maybe(j, "retry_attempts", c.retry_attempts);
    maybe(j, "retry_backoff_ms", c.retry_backoff_ms);
}

void to_json(json& j, const Outcome& o)
{
    j = json{{"terminated_by", to_string(o.terminated_by)}};
    j["needs_summary"] = o.needs_summary ? json(*o.needs_summary) : json(nullptr);
}

void from_json(const json& j, Outcome& o)
{
    o.terminated_by = enum_field<TerminatedBy>(j, "terminated_by", terminated_by_from_string);
    o.needs_summary.reset();
    maybe(j, "needs_summary", o.needs_summary);
}

void to_json(json& j, const Transcript& t)
{
    j = json{{"schema_version", kSchemaVersion},
             {"session_id", t.session_id},
             {"created_at", format_timestamp(t.created_at)},
             {"mode", to_string(t.mode)},
             {"persona", t.persona},
             {"messages", t.messages},
             {"controller_events", t.controller_events},
             {"config_snapshot", t.config_snapshot}};
    j["outcome"] = t.outcome ? json(*t.outcome) : json(nullptr);
}

void from_json(const json& j, Transcript& t)
{
    t.session_id = j.at("session_id").get<std::string>();
    t.created_at = timestamp_field(j, "created_at");
    t.mode = enum_field<SessionMode>(j, "mode", session_mode_from_string);
    t.persona = j.at("persona").get<Persona>();
    t.messages = j.at("messages").get<std::vector<Message>>();
    t.controller_events = j.at("controller_events").get<std::vector<ControllerEvent>>();
    t.outcome.reset();
    maybe(j, "outcome", t.outcome);
    t.config_snapshot = RunConfig{};
    from_json(j.at("config_snapshot"), t.config_snapshot);
}

void to_json(json& j, const EvaluationScores& s)
{
    j = json{{"transcript_id", s.transcript_id}};
    for (Criterion c : kAllCriteria) j[std::string(to_string(c))] = s.get(c);
}

void from_json(const json& j, EvaluationScores& s)
{
    s.transcript_id = j.at("transcript_id").get<std::string>();
    for (Criterion c : kAllCriteria) s.set(c, j.at(std::string(to_string(c))).get<int>());
    if (!s.valid()) throw std::invalid_argument("score outside [1,5] for " + s.transcript_id);
}

std::string dump_transcript(const Transcript& t) { return json(t).dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

}  // namespace elicit
