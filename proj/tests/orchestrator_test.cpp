#include "elicit/orchestrator.hpp"
#include "elicit/usersim.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <regex>

namespace elicit {
namespace {

using testing::scripted;
using testing::scripted_config;

std::size_t count_kind(const Transcript& t, ControllerEventKind k)
{
    return static_cast<std::size_t>(std::count_if(t.controller_events.begin(), t.controller_events.end(),
                                                   [k](const ControllerEvent& e) { return e.kind == k; }));
}

std::vector<ControllerEventKind> kinds(const Transcript& t)
{
    std::vector<ControllerEventKind> out;
    for (const auto& e : t.controller_events) out.push_back(e.kind);
    return out;
}

// --- parse_termination ---------------------------------------------------------

TEST(ParseTermination, FixtureDecisions)
{
    for (const char* raw : {"No", "no.", "###Controller\nNo", "NO", "  no, keep asking", "###Controller: No"}) {
        auto r = parse_termination(raw);
        ASSERT_TRUE(std::holds_alternative<TerminationDecision>(r)) << raw;
        const auto& d = std::get<TerminationDecision>(r);
        EXPECT_FALSE(d.terminate) << raw;
        EXPECT_FALSE(d.final_instruction) << raw;
        EXPECT_EQ(d.raw, raw);
    }

    auto yes = std::get<TerminationDecision>(parse_termination("Yes, summarize the user's needs."));
    EXPECT_TRUE(yes.terminate);
    EXPECT_EQ(yes.final_instruction, "summarize the user's needs.");

    auto bare = std::get<TerminationDecision>(parse_termination("YES"));
    EXPECT_TRUE(bare.terminate);
    EXPECT_EQ(bare.final_instruction, std::string(kDefaultFinalInstruction));

    auto multi = std::get<TerminationDecision>(parse_termination("###Controller\nYes\nTell the user their needs."));
    EXPECT_EQ(multi.final_instruction, "Tell the user their needs.");

    for (const char* raw : {"Maybe", "", "   ", "Nothing yet", "Yesterday was fine", "nope", "###Controller"}) {
        EXPECT_TRUE(std::holds_alternative<Unparseable>(parse_termination(raw))) << raw;
    }
}

// Independent oracle: markers, then whitespace/punctuation, then a yes/no word.
std::optional<bool> oracle_terminate(const std::string& raw)
{
    static const std::regex yes(R"(^\s*(###controller\s*:?\s*)*[\s!-/:-@\[-`{-~]*yes([^a-z0-9]|$))",
                                std::regex::icase);
    static const std::regex no(R"(^\s*(###controller\s*:?\s*)*[\s!-/:-@\[-`{-~]*no([^a-z0-9]|$))",
                               std::regex::icase);
    if (std::regex_search(raw, yes)) return true;
    if (std::regex_search(raw, no)) return false;
    return std::nullopt;
}

std::string fuzz_string(std::mt19937& rng)
{
    static const std::vector<std::string> pieces = {
        "Yes", "yes", "YES", "No", "no", "NO", "###Controller", ":", "\n", " ", ",", ".", "!", "Maybe", "Yesterday",
        "nope", "summarize", "\xE2\x80\xA6", "\xFF", "\0", "5", "-", "*", "Noted", "ok", "\t", "Yes!"};
    std::uniform_int_distribution<int> len(0, 8);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> mode(0, 3);
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        if (mode(rng) == 0) {
            s += static_cast<char>(byte(rng));
        } else {
            s += pieces[pick(rng)];
        }
    }
    return s;
}

TEST(ParseTermination, FuzzIsTotalAndConsistent)
{
    std::mt19937 rng(20240501);
    for (int i = 0; i < 10000; ++i) {
        const std::string raw = fuzz_string(rng);
        std::variant<TerminationDecision, Unparseable> r;
        ASSERT_NO_THROW(r = parse_termination(raw)) << i;
        const auto expected = oracle_terminate(raw);
        if (const auto* d = std::get_if<TerminationDecision>(&r)) {
            EXPECT_EQ(d->terminate, d->final_instruction.has_value()) << i;
            if (d->final_instruction) EXPECT_FALSE(d->final_instruction->empty()) << i;
            ASSERT_TRUE(expected.has_value()) << "case " << i;
            EXPECT_EQ(*expected, d->terminate) << "case " << i;
        } else {
            EXPECT_FALSE(expected.has_value()) << "case " << i;
            EXPECT_EQ(std::get<Unparseable>(r).raw, raw);
        }
    }
}

// --- parse_review ---------------------------------------------------------------

TEST(ParseReview, ApprovalWords)
{
    for (const char* raw : {"OK", "ok.", "###Controller\nOK", "Approved", "APPROVE - fine", "\"OK\""}) {
        auto v = parse_review(raw);
        ASSERT_TRUE(v) << raw;
        EXPECT_TRUE(v->approved) << raw;
        EXPECT_FALSE(v->guidance) << raw;
    }
}

TEST(ParseReview, AnythingElseIsGuidance)
{
    auto v = parse_review("###Controller\nAsk about the budget before cuisine.");
    ASSERT_TRUE(v);
    EXPECT_FALSE(v->approved);
    EXPECT_EQ(v->guidance, "Ask about the budget before cuisine.");
    // "Okay" is not the approval token.
    EXPECT_FALSE(parse_review("Okayish question, but ask about budget")->approved);
    EXPECT_FALSE(parse_review("   "));
    EXPECT_FALSE(parse_review("###Controller"));
}

TEST(RenderDialogue, LabelsTurns)
{
    std::vector<Message> msgs(3);
    msgs[0].role = Role::Assistant;
    msgs[0].content = "Q1";
    msgs[1].role = Role::User;
    msgs[1].content = "A1";
    msgs[2].role = Role::Assistant;
    msgs[2].content = "Q2";
    EXPECT_EQ(render_dialogue(msgs), "###Assistant\nQ1\n\n###User\nA1\n\n###Assistant\nQ2");
    EXPECT_EQ(render_dialogue({}), "");
}

// --- sessions -------------------------------------------------------------------

// Hand-traced: 3 user turns, rejections on the first and third questions, the
// controller ends the dialogue after the third answer.
std::shared_ptr<ScriptedBackend> three_turn_two_rejects()
{
    return scripted({
        {tags::kController, "###Controller\nStart with the user's daily life."},
        {tags::kAssistant, "###Assistant\nWhat kind of food do you like?"},
        {tags::kController, "Ask about daily life before food."},
        {tags::kAssistant, "###Assistant\nWhat do you usually do after work?"},
        {tags::kController, "OK"},
        {tags::kController, "No"},
        {tags::kAssistant, "Who do you usually eat out with?"},
        {tags::kController, "OK"},
        {tags::kController, "No"},
        {tags::kAssistant, "Do you want a restaurant?"},
        {tags::kController, "Ask about the budget and the occasion."},
        {tags::kAssistant, "What budget per person do you have in mind for the get-together?"},
        {tags::kController, "OK"},
        {tags::kController, "Yes\nSummarize the user's needs for the restaurant."},
        {tags::kAssistant, "###Assistant\nYou want an Italian place for company get-togethers."},
    });
}

TEST(Session, CallAccountingThreeTurnsTwoRejects)
{
    auto backend = three_turn_two_rejects();
    ScriptedUser user({"I play tennis after work.", "Mostly with coworkers.", "About 5000 yen."});
    SessionOptions opts;
    opts.session_id = "acct";
    opts.clock = testing::fixed_clock();
    const Transcript t = run_session(scripted_config(), reference_persona(), user, backend, opts);

    const std::size_t U = 3, R = 2;
    EXPECT_EQ(backend->calls(tags::kAssistant), U + R + 1);
    EXPECT_EQ(backend->calls(tags::kController), 1 + U + (U + R));
    EXPECT_EQ(count_kind(t, ControllerEventKind::ReviewReject), R);
    EXPECT_EQ(backend->remaining(tags::kController), 0u);
    EXPECT_EQ(backend->remaining(tags::kAssistant), 0u);

    using K = ControllerEventKind;
    EXPECT_EQ(kinds(t), (std::vector<K>{K::InitialInstruction, K::ReviewReject, K::Guidance, K::TerminationCheck,
                                        K::TerminationCheck, K::ReviewReject, K::Guidance, K::TerminationCheck,
                                        K::FinalInstruction}));
    EXPECT_EQ(t.controller_events[0].payload, "Start with the user's daily life.");
    EXPECT_EQ(t.controller_events[1].payload, "What kind of food do you like?");
    EXPECT_EQ(t.controller_events[2].payload, "Ask about daily life before food.");
    EXPECT_EQ(t.controller_events.back().payload, "Summarize the user's needs for the restaurant.");

    ASSERT_EQ(t.messages.size(), 7u);
    EXPECT_EQ(t.messages[0].content, "What do you usually do after work?");
    EXPECT_EQ(t.messages[4].content, "What budget per person do you have in mind for the get-together?");
    EXPECT_EQ(t.messages[6].content, "You want an Italian place for company get-togethers.");
    EXPECT_EQ(t.completed_pairs(), 3);
    ASSERT_TRUE(t.outcome);
    EXPECT_EQ(t.outcome->terminated_by, TerminatedBy::Controller);
    EXPECT_EQ(t.outcome->needs_summary, "You want an Italian place for company get-togethers.");
    EXPECT_TRUE(validate_transcript(t).empty());
}

TEST(Session, RejectedGuidanceReachesTheNextDraft)
{
    auto backend = three_turn_two_rejects();
    ScriptedUser user({"a", "b", "c"});
    run_session(scripted_config(), reference_persona(), user, backend);
    const auto reqs = backend->requests();
    std::vector<ChatRequest> drafts;
    for (const auto& r : reqs) {
        if (r.tag == tags::kAssistant) drafts.push_back(r);
    }
    ASSERT_EQ(drafts.size(), 6u);
    EXPECT_NE(drafts[0].messages[0].content.find("###Controller\nStart with the user's daily life."), std::string::npos);
    EXPECT_NE(drafts[1].messages[0].content.find("###Controller\nAsk about daily life before food."),
              std::string::npos);
    EXPECT_NE(drafts[2].messages[0].content.find("###Controller\n(no instruction)"), std::string::npos);
    EXPECT_NE(drafts[5].messages[0].content.find("Summarize the user's needs for the restaurant."), std::string::npos);
    for (const auto& r : reqs) {
        EXPECT_TRUE(r.problems().empty());
        EXPECT_EQ(r.model_name, "gpt-4");
        EXPECT_DOUBLE_EQ(r.temperature, 0.7);
    }
}

TEST(Session, TerminationCheckSeesTheLatestPairAndTheQuestionLine)
{
    auto backend = three_turn_two_rejects();
    ScriptedUser user({"I play tennis after work.", "Mostly with coworkers.", "About 5000 yen."});
    run_session(scripted_config(), reference_persona(), user, backend);
    std::vector<std::string> checks;
    for (const auto& r : backend->requests()) {
        if (r.tag == tags::kController && r.messages[1].content.find(kTerminationQuestion) != std::string::npos) {
            checks.push_back(r.messages[1].content);
        }
    }
    ASSERT_EQ(checks.size(), 3u);
    const std::string& last = checks.back();
    EXPECT_TRUE(last.ends_with("###Assistant\nWhat budget per person do you have in mind for the get-together?"
                               "\n\n###User\nAbout 5000 yen.\n\nTerminate an assistant's recommendation?"));
    // Earlier turns are part of the context too.
    EXPECT_NE(last.find("###User\nMostly with coworkers."), std::string::npos);
}

TEST(Session, ExhaustedRetriesDeliverTheLastDraft)
{
    RunConfig cfg = scripted_config();
    cfg.max_review_retries = 1;
    cfg.max_turns = 1;
    auto backend = scripted({
        {tags::kController, "Open with daily life."},
        {tags::kAssistant, "Draft one?"},
        {tags::kController, "Too abrupt."},
        {tags::kAssistant, "Draft two?"},
        {tags::kController, "Still too abrupt."},
        {tags::kController, "No"},
    });
    ScriptedUser user({"fine"});
    const Transcript t = run_session(cfg, reference_persona(), user, backend);
    EXPECT_EQ(t.messages.front().content, "Draft two?");
    EXPECT_EQ(count_kind(t, ControllerEventKind::ReviewReject), 2u);
    EXPECT_EQ(t.outcome->terminated_by, TerminatedBy::MaxTurns);
    EXPECT_EQ(backend->calls(tags::kAssistant), 2u);
    EXPECT_TRUE(validate_transcript(t).empty());
}

TEST(Session, AlwaysNoControllerHitsTheCap)
{
    RunConfig cfg = scripted_config();
    cfg.max_turns = 4;
    int questions = 0, controller_calls = 0;
    auto backend = std::make_shared<testing::FnBackend>([&](const ChatRequest& r) -> std::string {
        if (r.tag == tags::kController) {
            ++controller_calls;
            return "No";
        }
        return "Question " + std::to_string(++questions) + "?";
    });
    ScriptedUser user({"a1", "a2", "a3", "a4", "a5", "a6"});
    const Transcript t = run_session(cfg, reference_persona(), user, backend);
    ASSERT_TRUE(t.outcome);
    EXPECT_EQ(t.outcome->terminated_by, TerminatedBy::MaxTurns);
    EXPECT_FALSE(t.outcome->needs_summary);
    EXPECT_EQ(t.completed_pairs(), 4);
    EXPECT_EQ(t.messages.size(), 8u);
    EXPECT_EQ(user.remaining(), 2u);
    // "No" as a review is guidance, so every question uses all redrafts.
    EXPECT_EQ(questions, 4 * 3);
    EXPECT_EQ(controller_calls, 1 + 4 * 3 + 4);
    EXPECT_TRUE(validate_transcript(t).empty());
}

TEST(Session, ScriptedUserExhaustionQuits)
{
    RunConfig cfg = scripted_config();
    auto backend = std::make_shared<testing::FnBackend>([](const ChatRequest& r) -> std::string {
        if (r.tag == tags::kController) return r.messages[1].content.find("Review") != std::string::npos ? "OK" : "No";
        return "Next question?";
    });
    ScriptedUser user({"one", "two"});
    const Transcript t = run_session(cfg, reference_persona(), user, backend);
    EXPECT_EQ(t.outcome->terminated_by, TerminatedBy::UserQuit);
    EXPECT_EQ(t.completed_pairs(), 2);
    EXPECT_EQ(t.messages.back().role, Role::Assistant);
    EXPECT_TRUE(validate_transcript(t).empty());
}

TEST(Session, UnparseableTerminationGetsOneClarification)
{
    RunConfig cfg = scripted_config();
    cfg.max_turns = 2;
    auto backend = scripted({
        {tags::kController, "Begin."},
        {tags::kAssistant, "Q1?"},
        {tags::kController, "OK"},
        {tags::kController, "Hmm, hard to say."},
        {tags::kController, "No"},
        {tags::kAssistant, "Q2?"},
        {tags::kController, "OK"},
        {tags::kController, "Perhaps."},
        {tags::kController, "Still thinking."},
    });
    ScriptedUser user({"a", "b"});
    const Transcript t = run_session(cfg, reference_persona(), user, backend);
    EXPECT_EQ(backend->remaining(tags::kController), 0u);
    EXPECT_EQ(t.outcome->terminated_by, TerminatedBy::MaxTurns);
    ASSERT_EQ(count_kind(t, ControllerEventKind::TerminationCheck), 2u);
    EXPECT_EQ(t.controller_events[1].payload, "No");
    EXPECT_TRUE(t.controller_events[2].payload.starts_with("warning: unparseable"));
    // The clarification carries the unparseable reply back.
    const auto reqs = backend->requests();
    const auto& retry = reqs[4];
    ASSERT_EQ(retry.messages.size(), 4u);
    EXPECT_EQ(retry.messages[2].content, "Hmm, hard to say.");
    EXPECT_EQ(retry.messages[3].content, "Answer Yes or No first.");
}

TEST(Session, BackendFailureYieldsErrorTranscript)
{
    auto backend = scripted({
        {tags::kController, "Begin."},
        {tags::kAssistant, "Q1?"},
        {tags::kController, "OK"},
    });
    ScriptedUser user({"a", "b"});
    std::optional<Transcript> saved;
    try {
        run_session(scripted_config(), reference_persona(), user, backend, {}, SessionMode::Controlled,
                    [&](const Transcript& t) { saved = t; });
        FAIL() << "expected BackendFailure";
    } catch (const BackendFailure& f) {
        ASSERT_TRUE(f.transcript());
        EXPECT_EQ(f.transcript()->outcome->terminated_by, TerminatedBy::Error);
        EXPECT_EQ(f.transcript()->completed_pairs(), 1);
    }
    ASSERT_TRUE(saved);
    EXPECT_EQ(saved->outcome->terminated_by, TerminatedBy::Error);
    EXPECT_TRUE(validate_transcript(*saved).empty());
}

TEST(Session, EmptyReplyIsRetriedOnce)
{
    auto backend = scripted({
        {tags::kController, "Begin."},
        {tags::kAssistant, "###Assistant"},
        {tags::kAssistant, "Q1?"},
        {tags::kController, "OK"},
    });
    Session s(scripted_config(), reference_persona(), SessionMode::Controlled, backend);
    EXPECT_EQ(s.start().assistant_message, "Q1?");

    auto twice = scripted({
        {tags::kController, "Begin."},
        {tags::kAssistant, "###Assistant"},
        {tags::kAssistant, "  "},
    });
    Session s2(scripted_config(), reference_persona(), SessionMode::Controlled, twice);
    EXPECT_THROW(s2.start(), BackendFailure);
    EXPECT_EQ(s2.transcript().outcome->terminated_by, TerminatedBy::Error);
}

TEST(Session, GuidanceEveryTurnAddsOneControllerCallPerLaterQuestion)
{
    RunConfig cfg = scripted_config();
    cfg.guidance_every_turn = true;
    cfg.max_turns = 2;
    auto backend = scripted({
        {tags::kController, "Begin."},
        {tags::kAssistant, "Q1?"},
        {tags::kController, "OK"},
        {tags::kController, "No"},
        {tags::kController, "Now ask about budget."},
        {tags::kAssistant, "Q2?"},
        {tags::kController, "OK"},
        {tags::kController, "No"},
    });
    ScriptedUser user({"a", "b"});
    const Transcript t = run_session(cfg, reference_persona(), user, backend);
    EXPECT_EQ(backend->remaining(tags::kController), 0u);
    EXPECT_EQ(count_kind(t, ControllerEventKind::Guidance), 1u);
    EXPECT_NE(backend->requests()[5].messages[0].content.find("###Controller\nNow ask about budget."),
              std::string::npos);
}

TEST(Session, StepApiAndObserverOrder)
{
    auto backend = three_turn_two_rejects();
    std::vector<std::size_t> seen;
    SessionOptions opts;
    opts.observer = [&](const SessionEvent& e) { seen.push_back(e.index); };
    Session s(scripted_config(), reference_persona(), SessionMode::Controlled, backend, opts);
    EXPECT_THROW(s.submit("too early"), std::logic_error);
    auto step = s.start();
    EXPECT_FALSE(step.finished);
    EXPECT_THROW(s.submit("   "), std::invalid_argument);
    step = s.submit("I play tennis.");
    step = s.submit("Coworkers.");
    step = s.submit("5000 yen.");
    EXPECT_TRUE(step.finished);
    EXPECT_EQ(step.assistant_message, "You want an Italian place for company get-togethers.");
    EXPECT_THROW(s.submit("more"), std::logic_error);
    EXPECT_THROW(s.quit(), std::logic_error);
    ASSERT_EQ(seen.size(), s.event_count());
    for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i);
    EXPECT_EQ(seen.size(), 9u + 7u);
}

TEST(Session, MessageIdsAndTurns)
{
    auto backend = three_turn_two_rejects();
    ScriptedUser user({"a", "b", "c"});
    SessionOptions opts;
    opts.session_id = "ids";
    const Transcript t = run_session(scripted_config(), reference_persona(), user, backend, opts);
    for (std::size_t i = 0; i < t.messages.size(); ++i) {
        EXPECT_EQ(t.messages[i].id, "ids-m" + std::to_string(i));
        EXPECT_EQ(t.messages[i].turn, static_cast<int>(i / 2));
    }
    Session anon(scripted_config(), reference_persona(), SessionMode::Controlled, three_turn_two_rejects());
    EXPECT_TRUE(std::regex_match(anon.transcript().session_id, std::regex("s-[0-9a-f]{16}")));
}

// --- baseline -------------------------------------------------------------------

TEST(Baseline, NoControllerAndReadySentinelStops)
{
    auto backend = scripted({
        {tags::kAssistant, "###Assistant\nWhat cuisine do you enjoy?"},
        {tags::kUserSim, "###User\nItalian, mostly."},
        {tags::kAssistant, "How many people usually join?"},
        {tags::kUserSim, "About ten coworkers."},
        {tags::kAssistant, "###Assistant\nready: You want an Italian restaurant for ten coworkers."},
    });
    RunConfig cfg = scripted_config();
    SimulatedUser user(reference_persona(), backend, cfg);
    std::vector<SessionEvent> events;
    SessionOptions opts;
    opts.observer = [&](const SessionEvent& e) { events.push_back(e); };
    const Transcript t = run_baseline_session(cfg, reference_persona(), user, backend, opts);

    EXPECT_EQ(backend->calls(tags::kController), 0u);
    EXPECT_TRUE(t.controller_events.empty());
    for (const auto& e : events) EXPECT_TRUE(std::holds_alternative<Message>(e.item));
    EXPECT_EQ(t.mode, SessionMode::Baseline);
    EXPECT_EQ(t.outcome->terminated_by, TerminatedBy::SelfStop);
    EXPECT_EQ(t.outcome->needs_summary, "You want an Italian restaurant for ten coworkers.");
    EXPECT_EQ(t.messages.back().content, "You want an Italian restaurant for ten coworkers.");
    EXPECT_EQ(t.messages[1].content, "Italian, mostly.");
    EXPECT_TRUE(validate_transcript(t).empty());
    for (const auto& r : backend->requests()) {
        if (r.tag == tags::kAssistant) {
            EXPECT_NE(r.messages[0].content.find("READY:"), std::string::npos);
            EXPECT_EQ(r.messages[0].content.find("controller"), std::string::npos);
        }
    }
}

TEST(Baseline, CapStillApplies)
{
    RunConfig cfg = scripted_config();
    cfg.max_turns = 2;
    auto backend = std::make_shared<testing::FnBackend>([](const ChatRequest&) { return std::string("More?"); });
    ScriptedUser user({"x", "y", "z"});
    const Transcript t = run_baseline_session(cfg, reference_persona(), user, backend);
    EXPECT_EQ(t.outcome->terminated_by, TerminatedBy::MaxTurns);
    EXPECT_EQ(t.completed_pairs(), 2);
    EXPECT_TRUE(t.controller_events.empty());
}

TEST(Baseline, ReadyWithoutSummaryIsAnError)
{
    auto backend = scripted({{tags::kAssistant, "READY:"}});
    ScriptedUser user(std::vector<std::string>{});
    EXPECT_THROW(run_baseline_session(scripted_config(), reference_persona(), user, backend), BackendFailure);
}

}  // namespace
}  // namespace elicit
