#include "elicit/json_codec.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

namespace elicit {
namespace {

using nlohmann::json;

// Hand-rolled generators for the round-trip property.
struct Gen {
    std::mt19937_64 rng;

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin() { return integer(0, 1) == 1; }

    std::string text()
    {
        // Whole code points only: documents are UTF-8.
        static const std::vector<std::string> units = {"a", "b", "X", " ", "0", "9", "\n", "\t", "\"", "\\",
                                                       "{", "}", ":", "#", "\xC3\xA9", "\xE2\x80\xA6", "\x01"};
        std::string s;
        for (int n = integer(0, 12); n > 0; --n) s += units[static_cast<std::size_t>(integer(0, units.size() - 1))];
        return s;
    }

    Timestamp stamp()
    {
        return Timestamp{std::chrono::milliseconds{std::uniform_int_distribution<std::int64_t>(0, 4102444800000)(rng)}};
    }

    BackendSpec backend()
    {
        switch (integer(0, 2)) {
        case 0: return LiveSpec{text(), text()};
        case 1: return ScriptedSpec{text()};
        default: return ReplaySpec{text(), coin(), LiveSpec{text(), text()}};
        }
    }

    RunConfig config()
    {
        RunConfig c;
        c.backend = backend();
        c.model_name = text();
        c.temperature_dialogue = integer(0, 20) / 10.0;
        c.temperature_judge = integer(0, 20) / 8.0;
        if (coin()) c.max_tokens = integer(1, 4096);
        c.max_turns = integer(1, 50);
        c.max_review_retries = integer(0, 5);
        c.num_dialogues = integer(1, 9);
        c.seed = std::uniform_int_distribution<std::int64_t>()(rng);
        c.domain_topic = text();
        c.guidance_every_turn = coin();
        c.retry_attempts = integer(1, 5);
        c.retry_backoff_ms = integer(0, 2000);
        return c;
    }

    Transcript transcript()
    {
        Transcript t;
        t.session_id = text();
        t.created_at = stamp();
        t.mode = static_cast<SessionMode>(integer(0, 2));
        for (int n = integer(0, 5); n > 0; --n) t.persona.attributes.push_back({text(), text()});
        t.persona.contradiction_enabled = coin();
        for (int n = integer(0, 6); n > 0; --n) {
            t.messages.push_back({text(), text(), static_cast<Role>(integer(0, 4)), text(), integer(-2, 9), stamp()});
        }
        for (int n = integer(0, 6); n > 0; --n) {
            t.controller_events.push_back({integer(0, 9), static_cast<ControllerEventKind>(integer(0, 4)), text()});
        }
        if (coin()) {
            t.outcome = Outcome{static_cast<TerminatedBy>(integer(0, 4)), std::nullopt};
            if (coin()) t.outcome->needs_summary = text();
        }
        t.config_snapshot = config();
        return t;
    }
};

TEST(JsonCodec, TranscriptRoundTripProperty)
{
    Gen g{std::mt19937_64{42}};
    for (int i = 0; i < 500; ++i) {
        const Transcript t = g.transcript();
        const std::string text = dump_transcript(t);
        const Transcript back = json::parse(text).get<Transcript>();
        ASSERT_EQ(back, t) << text;
        EXPECT_EQ(dump_transcript(back), text);
    }
}

TEST(JsonCodec, ScoresAndManifestPiecesRoundTrip)
{
    Gen g{std::mt19937_64{9}};
    for (int i = 0; i < 200; ++i) {
        EvaluationScores s{g.text(), g.integer(1, 5), g.integer(1, 5), g.integer(1, 5), g.integer(1, 5)};
        EXPECT_EQ(json(s).get<EvaluationScores>(), s);
        const RunConfig c = g.config();
        RunConfig back;
        from_json(json(c), back);
        EXPECT_EQ(back, c);
    }
}

TEST(JsonCodec, DocumentShape)
{
    Transcript t;
    t.session_id = "ctl-0-001";
    t.persona = reference_persona();
    t.messages.push_back({"ctl-0-001-m0", "ctl-0-001", Role::Assistant, "Q?", 0, Timestamp{}});
    t.controller_events.push_back({0, ControllerEventKind::InitialInstruction, "go"});
    t.outcome = Outcome{TerminatedBy::MaxTurns, std::nullopt};
    const json j = t;
    EXPECT_EQ(j.at("schema_version"), kSchemaVersion);
    EXPECT_EQ(j.at("mode"), "controlled");
    EXPECT_EQ(j.at("messages")[0].at("role"), "assistant");
    EXPECT_EQ(j.at("messages")[0].at("created_at"), "1970-01-01T00:00:00.000Z");
    EXPECT_EQ(j.at("controller_events")[0].at("kind"), "initial_instruction");
    EXPECT_EQ(j.at("outcome").at("terminated_by"), "max_turns");
    EXPECT_EQ(j.at("persona").at("attributes")[3], (json{{"name", "Favorite Cuisine"}, {"value", "Italian"}}));
    const std::string text = dump_transcript(t);
    EXPECT_TRUE(text.ends_with("}\n"));
    EXPECT_LT(text.find("\"config_snapshot\""), text.find("\"session_id\""));
}

TEST(JsonCodec, RunConfigLayersOverExistingValues)
{
    RunConfig c;
    c.max_turns = 7;
    from_json(json{{"model_name", "local-model"}, {"backend", {{"kind", "scripted"}, {"script_path", "s.txt"}}}}, c);
    EXPECT_EQ(c.model_name, "local-model");
    EXPECT_EQ(c.max_turns, 7);
    EXPECT_EQ(c.backend, BackendSpec{ScriptedSpec{"s.txt"}});
}

TEST(JsonCodec, InvalidUtf8IsReplacedNotFatal)
{
    Transcript t;
    t.session_id = "bad\xFF";
    const std::string text = dump_transcript(t);
    EXPECT_NE(text.find("bad\xEF\xBF\xBD"), std::string::npos);
    EXPECT_EQ(nlohmann::json::parse(text).get<Transcript>().session_id, "bad\xEF\xBF\xBD");
}

TEST(JsonCodec, RejectsBadValues)
{
    EXPECT_THROW(json({{"transcript_id", "x"}, {"satisfaction", 6}, {"flexibility", 1}, {"accuracy", 1},
                       {"contradiction", 1}})
                     .get<EvaluationScores>(),
                 std::exception);
    json j = Transcript{};
    j["mode"] = "sideways";
    EXPECT_THROW(j.get<Transcript>(), std::exception);
    j = Transcript{};
    j["created_at"] = "not a time";
    EXPECT_THROW(j.get<Transcript>(), std::exception);
}

}  // namespace
}  // namespace elicit
