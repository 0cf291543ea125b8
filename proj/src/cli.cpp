#include "elicit/cli.hpp"

#include "elicit/evaluator.hpp"
#include "elicit/json_codec.hpp"
#include "elicit/orchestrator.hpp"
#include "elicit/service.hpp"
#include "elicit/store.hpp"
#include "elicit/usersim.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace elicit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Flags shared by the commands that talk to a model.
struct BackendFlags {
    std::string config_file;
    std::string backend;
    std::string base_url;
    std::string api_key_env;
    std::string model;
    std::string script;
    std::string cassette;
    bool record = false;
    int max_turns = 0;
    int max_review_retries = -1;
    double temperature = -1;
    double judge_temperature = -1;
    long long seed = 0;
    std::string domain;
    std::string templates;
    bool guidance_every_turn = false;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* max_turns_opt = nullptr;
    CLI::Option* retries_opt = nullptr;
    CLI::Option* temp_opt = nullptr;
    CLI::Option* judge_temp_opt = nullptr;

    void add_to(CLI::App& app)
    {
        app.add_option("--config", config_file, "JSON run configuration; flags override it")->check(CLI::ExistingFile);
        app.add_option("--backend", backend, "Model backend")->check(CLI::IsMember({"live", "scripted", "replay"}));
        app.add_option("--base-url", base_url, "OpenAI-compatible endpoint, e.g. https://api.openai.com/v1");
        app.add_option("--api-key-env", api_key_env, "Environment variable holding the API key");
        app.add_option("--model", model, "Model name");
        app.add_option("--script", script, "Script file for the scripted backend");
        app.add_option("--cassette", cassette, "Cassette file for replay/record");
        app.add_flag("--record", record, "Record live responses into the cassette");
        max_turns_opt = app.add_option("--max-turns", max_turns, "Maximum question/answer pairs per session");
        retries_opt = app.add_option("--max-review-retries", max_review_retries, "Redrafts allowed per question");
        temp_opt = app.add_option("--temperature", temperature, "Sampling temperature for dialogue agents");
        judge_temp_opt = app.add_option("--judge-temperature", judge_temperature, "Sampling temperature for the judge");
        seed_opt = app.add_option("--seed", seed, "Run seed (recorded; names sessions)");
        app.add_option("--domain", domain, "What is being recommended (plural noun)");
        app.add_option("--templates", templates, "Directory of <id>.txt prompt overrides")->check(CLI::ExistingDirectory);
        app.add_flag("--guidance-every-turn", guidance_every_turn, "Ask the controller for guidance before every question");
    }
};

RunConfig build_config(const BackendFlags& f, const std::string& out_dir)
{
    RunConfig cfg;
    if (!f.config_file.empty()) {
        std::ifstream in(f.config_file);
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw InvalidConfig("config file is not a JSON object: " + f.config_file);
        try {
            from_json(doc, cfg);
        } catch (const std::exception& e) {
            throw InvalidConfig(std::string("config file: ") + e.what());
        }
    }

    std::string kind = f.backend.empty() ? std::string(backend_kind(cfg.backend)) : f.backend;
    LiveSpec live = std::holds_alternative<LiveSpec>(cfg.backend) ? std::get<LiveSpec>(cfg.backend) : LiveSpec{};
    if (const auto* r = std::get_if<ReplaySpec>(&cfg.backend)) live = r->upstream;
    if (!f.base_url.empty()) live.base_url = f.base_url;
    if (!f.api_key_env.empty()) live.api_key_env_var = f.api_key_env;

    if (kind == "scripted") {
        ScriptedSpec s = std::holds_alternative<ScriptedSpec>(cfg.backend) ? std::get<ScriptedSpec>(cfg.backend)
                                                                           : ScriptedSpec{};
        if (!f.script.empty()) s.script_path = f.script;
        if (s.script_path.empty()) throw InvalidConfig("--backend scripted requires --script");
        cfg.backend = s;
    } else if (kind == "replay" || (kind == "live" && f.record)) {
        ReplaySpec r = std::holds_alternative<ReplaySpec>(cfg.backend) ? std::get<ReplaySpec>(cfg.backend)
                                                                       : ReplaySpec{};
        r.upstream = live;
        if (!f.cassette.empty()) r.cassette_path = f.cassette;
        if (r.cassette_path.empty() && !out_dir.empty()) r.cassette_path = (fs::path(out_dir) / "cassette.jsonl").string();
        if (f.record) r.record = true;
        if (r.cassette_path.empty()) throw InvalidConfig("replay backend requires --cassette");
        cfg.backend = r;
    } else {
        cfg.backend = live;
    }

    if (!f.model.empty()) cfg.model_name = f.model;
    if (f.max_turns_opt->count()) cfg.max_turns = f.max_turns;
    if (f.retries_opt->count()) cfg.max_review_retries = f.max_review_retries;
    if (f.temp_opt->count()) cfg.temperature_dialogue = f.temperature;
    if (f.judge_temp_opt->count()) cfg.temperature_judge = f.judge_temperature;
    if (f.seed_opt->count()) cfg.seed = f.seed;
    if (!f.domain.empty()) cfg.domain_topic = f.domain;
    if (f.guidance_every_turn) cfg.guidance_every_turn = true;

    if (const auto problems = validate_config(cfg); !problems.empty()) throw InvalidConfig(problems.front());
    return cfg;
}

std::shared_ptr<const PromptRegistry> load_prompts(const BackendFlags& f, const RunConfig& cfg)
{
    auto reg = builtin_registry(cfg.domain_topic);
    if (!f.templates.empty()) reg.load_overrides(f.templates);
    return std::make_shared<const PromptRegistry>(std::move(reg));
}

std::shared_ptr<ChatBackend> build_backend(const RunConfig& cfg)
{
    try {
        return make_backend(cfg.backend, RetryPolicy{cfg.retry_attempts, std::chrono::milliseconds{cfg.retry_backoff_ms}});
    } catch (const IoError& e) {
        throw InvalidConfig(e.what());
    } catch (const ParseError& e) {
        throw InvalidConfig(std::string("script: ") + e.what());
    } catch (const EmptyScript& e) {
        throw InvalidConfig(std::string("script: ") + e.what());
    }
}

Persona load_persona(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot read persona file " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw InvalidConfig("persona file is not JSON: " + path.string());
    Persona p;
    try {
        p = doc.get<Persona>();
    } catch (const std::exception& e) {
        throw InvalidConfig("persona file " + path.string() + ": " + e.what());
    }
    if (const auto d = p.duplicate_names(); !d.empty()) {
        throw InvalidConfig("persona file " + path.string() + ": duplicate attribute " + d.front());
    }
    return p;
}

struct NamedPersona {
    std::string source;
    Persona persona;
};

std::vector<NamedPersona> load_personas(const std::string& dir)
{
    if (dir.empty()) return {{"builtin", reference_persona()}};
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw InvalidConfig("persona directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InvalidConfig("no persona files (*.json) in " + dir);
    std::vector<NamedPersona> out;
    for (const auto& f : files) out.push_back({f.filename().string(), load_persona(f)});
    return out;
}

void print_config(std::ostream& err, const RunConfig& cfg) { err << "config: " << json(cfg).dump(-1, ' ', false, json::error_handler_t::replace) << "\n"; }

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InvalidConfig("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string session_name(const char* prefix, long long seed, int index)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%lld-%03d", prefix, seed, index + 1);
    return buf;
}

std::size_t count_events(const Transcript& t, ControllerEventKind kind)
{
    return static_cast<std::size_t>(std::count_if(t.controller_events.begin(), t.controller_events.end(),
                                                   [kind](const ControllerEvent& e) { return e.kind == kind; }));
}

// --- simulate ----------------------------------------------------------------

struct SimulateFlags {
    int n = 0;
    std::string personas;
    std::string out = "runs";
    bool baseline = false;
    int parallel = 1;
    CLI::Option* n_opt = nullptr;
};

int cmd_simulate(const BackendFlags& bf, const SimulateFlags& sf, std::ostream& out, std::ostream& err)
{
    RunConfig cfg = build_config(bf, sf.out);
    if (sf.n_opt->count()) cfg.num_dialogues = sf.n;
    if (const auto problems = validate_config(cfg); !problems.empty()) throw InvalidConfig(problems.front());
    if (sf.parallel < 1) throw InvalidConfig("--parallel must be >= 1");
    print_config(err, cfg);

    const auto personas = load_personas(sf.personas);
    const auto prompts = load_prompts(bf, cfg);
    const fs::path root(sf.out);
    ensure_dir(root);
    auto backend = build_backend(cfg);

    struct Job {
        SessionMode mode;
        int index;
    };
    std::vector<Job> jobs;
    for (int i = 0; i < cfg.num_dialogues; ++i) jobs.push_back({SessionMode::Controlled, i});
    if (sf.baseline) {
        for (int i = 0; i < cfg.num_dialogues; ++i) jobs.push_back({SessionMode::Baseline, i});
    }
    ensure_dir(root / "controlled");
    if (sf.baseline) ensure_dir(root / "baseline");

    store::RunManifest manifest;
    manifest.config = cfg;
    manifest.started_at = now_utc();
    std::vector<std::string> ids(jobs.size());
    std::vector<std::string> lines(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> backend_failed{false};
    std::mutex io_mutex;

    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            const Job job = jobs[j];
            const bool base = job.mode == SessionMode::Baseline;
            const auto& np = personas[static_cast<std::size_t>(job.index) % personas.size()];
            const fs::path dir = root / (base ? "baseline" : "controlled");
            SessionOptions opts;
            opts.session_id = session_name(base ? "base" : "ctl", cfg.seed, job.index);
            opts.prompts = prompts;
            ids[j] = opts.session_id;
            SimulatedUser user(np.persona, backend, cfg, prompts);
            std::string line;
            try {
                Transcript t = run_session(cfg, np.persona, user, backend, std::move(opts), job.mode,
                                           [&dir](const Transcript& failed) { store::save_transcript(dir, failed); });
                store::save_transcript(dir, t);
                line = t.session_id + " persona=" + np.source + " pairs=" + std::to_string(t.completed_pairs()) +
                       " rejects=" + std::to_string(count_events(t, ControllerEventKind::ReviewReject)) +
                       " terminated_by=" + std::string(to_string(t.outcome->terminated_by));
            } catch (const BackendFailure& e) {
                backend_failed = true;
                line = ids[j] + " persona=" + np.source + " terminated_by=error (" + e.what() + ")";
            }
            std::lock_guard lock(io_mutex);
            lines[j] = line;
            out << line << "\n" << std::flush;
        }
    };

    std::vector<std::thread> pool;
    const int threads = std::min<int>(sf.parallel, static_cast<int>(jobs.size()));
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    manifest.session_ids = ids;
    manifest.finished_at = now_utc();
    store::write_run_manifest(root, manifest);
    if (backend_failed) {
        err << "error: at least one session failed on the backend; partial results saved in " << root.string() << "\n";
        return kBackendError;
    }
    return kOk;
}

// --- chat --------------------------------------------------------------------

struct ChatFlags {
    std::string persona;
    std::string out = "runs/chat";
    bool show_controller = false;
};

int cmd_chat(const BackendFlags& bf, const ChatFlags& cf, std::istream& in, std::ostream& out, std::ostream& err)
{
    RunConfig cfg = build_config(bf, cf.out);
    print_config(err, cfg);
    Persona persona;
    persona.contradiction_enabled = false;
    if (!cf.persona.empty()) persona = load_persona(cf.persona);
    const auto prompts = load_prompts(bf, cfg);
    ensure_dir(cf.out);
    auto backend = build_backend(cfg);

    SessionOptions opts;
    opts.prompts = prompts;
    opts.session_id = "chat-" + std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                    now_utc().time_since_epoch())
                                                    .count());
    if (cf.show_controller) {
        opts.observer = [&out](const SessionEvent& e) {
            if (const auto* ev = std::get_if<ControllerEvent>(&e.item)) {
                out << "[controller:" << to_string(ev->kind) << "] " << ev->payload << "\n";
            }
        };
    }

    ConsoleUser user(in, out);
    Transcript t;
    try {
        t = run_session(cfg, persona, user, backend, std::move(opts), SessionMode::HumanControlled,
                        [&cf](const Transcript& failed) { store::save_transcript(cf.out, failed); });
    } catch (const BackendFailure& e) {
        err << "error: " << e.what() << "\n";
        return kBackendError;
    }
    const auto path = store::save_transcript(cf.out, t);
    if (t.outcome->needs_summary) out << "\nNeeds summary:\n" << *t.outcome->needs_summary << "\n";
    out << "Session ended (" << to_string(t.outcome->terminated_by) << "); transcript saved to " << path.string()
        << "\n";
    return kOk;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateFlags {
    std::string in_dir;
    std::string label;
};

int cmd_evaluate(const BackendFlags& bf, const EvaluateFlags& ef, std::ostream& out, std::ostream& err)
{
    RunConfig cfg = build_config(bf, ef.in_dir);
    print_config(err, cfg);
    store::LoadedTranscripts loaded;
    try {
        loaded = store::load_transcripts(ef.in_dir);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    for (const auto& w : loaded.warnings) err << "warning: skipped " << w.path.string() << ": " << w.message << "\n";
    if (loaded.transcripts.empty()) {
        err << "error: no transcripts in " << ef.in_dir << "\n";
        return kConfigError;
    }
    const auto prompts = load_prompts(bf, cfg);
    auto backend = build_backend(cfg);

    const BatchResult result = evaluate_batch(loaded.transcripts, *backend, cfg, *prompts);
    bool backend_error = false;
    for (const auto& w : result.warnings) {
        err << "warning: " << w.transcript_id << " not scored: " << w.message << "\n";
        backend_error = backend_error || w.backend_error;
    }
    for (const auto& s : result.scores) {
        store::save_scores(ef.in_dir, s);
        out << s.transcript_id;
        for (Criterion c : kAllCriteria) out << " " << to_string(c) << "=" << s.get(c);
        out << "\n";
    }
    if (!result.scores.empty()) {
        const std::string label = ef.label.empty() ? fs::path(ef.in_dir).lexically_normal().filename().string() : ef.label;
        out << "\n" << compare_report({{label.empty() ? std::string("run") : label, aggregate(result.scores)}});
    }
    return backend_error ? kBackendError : kOk;
}

// --- report ------------------------------------------------------------------

struct ReportFlags {
    std::vector<std::string> groups;
    std::string csv;
};

int cmd_report(const ReportFlags& rf, std::ostream& out, std::ostream& err)
{
    if (rf.groups.empty()) {
        err << "error: give at least one --group LABEL=DIR\n";
        return kConfigError;
    }
    std::vector<ReportRow> rows;
    for (const auto& g : rf.groups) {
        const auto eq = g.find('=');
        const std::string label = eq == std::string::npos ? fs::path(g).filename().string() : g.substr(0, eq);
        const std::string dir = eq == std::string::npos ? g : g.substr(eq + 1);
        store::LoadedScores loaded;
        try {
            loaded = store::load_scores(dir);
        } catch (const Error& e) {
            err << "error: group " << label << ": " << e.what() << "\n";
            return kConfigError;
        }
        for (const auto& w : loaded.warnings) err << "warning: skipped " << w.path.string() << ": " << w.message << "\n";
        if (loaded.scores.empty()) {
            err << "error: group " << label << " has no scores in " << dir << "\n";
            return kConfigError;
        }
        rows.push_back({label, aggregate(loaded.scores)});
    }
    out << compare_report(rows);
    if (!rf.csv.empty()) {
        try {
            store::atomic_write(rf.csv, compare_report_csv(rows));
        } catch (const IoError& e) {
            err << "error: " << e.what() << "\n";
            return kConfigError;
        }
    }
    return kOk;
}

// --- serve -------------------------------------------------------------------

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct ServeFlags {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string out = "runs/service";
    int idle_minutes = 30;
};

int cmd_serve(const BackendFlags& bf, const ServeFlags& sv, std::ostream& out, std::ostream& err)
{
    RunConfig cfg = build_config(bf, sv.out);
    print_config(err, cfg);
    ensure_dir(sv.out);

    ServiceConfig scfg;
    scfg.run = cfg;
    scfg.out_dir = fs::path(sv.out);
    scfg.idle_timeout = std::chrono::minutes{sv.idle_minutes};
    scfg.prompts = load_prompts(bf, cfg);
    SessionService service(std::move(scfg));
    HttpServer server(service);
    if (!server.bind(sv.host, sv.port)) {
        err << "error: cannot bind " << sv.host << ":" << sv.port << "\n";
        return kConfigError;
    }

    g_interrupted = false;
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    std::atomic<bool> done{false};
    std::thread watcher([&] {
        while (!done && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds{50});
        server.stop();
    });

    out << "listening on " << sv.host << ":" << server.port() << "\n" << std::flush;
    server.serve();
    done = true;
    watcher.join();
    service.shutdown();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    out << "shut down; " << service.persisted_count() << " session(s) persisted\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Controller-steered needs-elicitation dialogues: simulate, chat, evaluate, report, serve"};
    app.require_subcommand(1);

    BackendFlags sim_bf, chat_bf, eval_bf, serve_bf;
    SimulateFlags sf;
    ChatFlags cf;
    EvaluateFlags ef;
    ReportFlags rf;
    ServeFlags svf;

    auto* simulate = app.add_subcommand("simulate", "Run simulated dialogues and save transcripts");
    sim_bf.add_to(*simulate);
    sf.n_opt = simulate->add_option("--n", sf.n, "Number of dialogues per mode");
    simulate->add_option("--personas", sf.personas, "Directory of persona JSON files (file i drives dialogue i)");
    simulate->add_option("--out", sf.out, "Output directory");
    simulate->add_flag("--baseline", sf.baseline, "Also run controller-free baseline sessions");
    simulate->add_option("--parallel", sf.parallel, "Sessions run concurrently");

    auto* chat = app.add_subcommand("chat", "Answer the assistant yourself in the terminal (/quit to stop)");
    chat_bf.add_to(*chat);
    chat->add_option("--persona", cf.persona, "Optional persona JSON recorded with the transcript");
    chat->add_option("--out", cf.out, "Output directory");
    chat->add_flag("--show-controller", cf.show_controller, "Print controller events as they happen");

    auto* evaluate = app.add_subcommand("evaluate", "Score saved transcripts with the LLM judge");
    eval_bf.add_to(*evaluate);
    evaluate->add_option("--in", ef.in_dir, "Transcript directory")->required();
    evaluate->add_option("--label", ef.label, "Row label for the printed summary");

    auto* report = app.add_subcommand("report", "Compare mean scores across groups");
    report->add_option("--group", rf.groups, "LABEL=DIR of score records (repeatable)");
    report->add_option("--csv", rf.csv, "Also write the table as CSV");

    auto* serve = app.add_subcommand("serve", "Serve the HTTP session API");
    serve_bf.add_to(*serve);
    serve->add_option("--host", svf.host, "Bind address");
    serve->add_option("--port", svf.port, "Port");
    serve->add_option("--out", svf.out, "Directory for finished transcripts");
    serve->add_option("--idle-minutes", svf.idle_minutes, "Idle sessions are ended after this many minutes");

    std::vector<std::string> argv_store{"elicit"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kConfigError;
    }

    try {
        if (*simulate) return cmd_simulate(sim_bf, sf, out, err);
        if (*chat) return cmd_chat(chat_bf, cf, in, out, err);
        if (*evaluate) return cmd_evaluate(eval_bf, ef, out, err);
        if (*report) return cmd_report(rf, out, err);
        if (*serve) return cmd_serve(serve_bf, svf, out, err);
    } catch (const InvalidConfig& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const PromptError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const BackendError& e) {
        err << "error: " << e.what() << "\n";
        return kBackendError;
    }
    return kConfigError;
}

}  // namespace elicit::cli
