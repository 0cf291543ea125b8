#include "elicit/service.hpp"

#include <httplib.h>

namespace elicit {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, const ServiceResponse& r)
{
    res.status = r.status;
    res.set_content(r.body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

json parse_body(const httplib::Request& req, bool& ok)
{
    if (req.body.empty()) {
        ok = true;
        return json::object();
    }
    json j = json::parse(req.body, nullptr, false);
    ok = !j.is_discarded();
    return j;
}

std::string sse_frame(const json& event)
{
    const std::string type = event.value("type", "message");
    return "id: " + std::to_string(event.value("index", 0)) + "\nevent: " + type + "\ndata: " + event.dump(-1, ' ', false, json::error_handler_t::replace) + "\n\n";
}

}  // namespace

HttpServer::HttpServer(SessionService& service) : service_(service), server_(std::make_unique<httplib::Server>())
{
    auto& srv = *server_;
    // httplib defaults to SO_REUSEPORT, which lets a second server share a
    // busy port; a port in use must fail to bind instead.
    srv.set_socket_options([](auto sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });

    srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        bool ok = false;
        const json body = parse_body(req, ok);
        if (!ok) return reply(res, {400, json{{"error", "body is not valid JSON"}}});
        reply(res, service_.create_session(body));
    });

    srv.Post(R"(/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
        bool ok = false;
        const json body = parse_body(req, ok);
        if (!ok) return reply(res, {400, json{{"error", "body is not valid JSON"}}});
        reply(res, service_.post_user_message(req.matches[1], body));
    });

    srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        reply(res, service_.get_session(req.matches[1]));
    });

    srv.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        reply(res, service_.end_session(req.matches[1]));
    });

    srv.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        if (!service_.has_session(id)) {
            return reply(res, {404, json{{"error", "unknown session '" + id + "'"}}});
        }
        auto cursor = std::make_shared<std::size_t>(0);
        // Resume after the last event the client saw.
        if (req.has_header("Last-Event-ID")) {
            try {
                *cursor = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
            } catch (const std::exception&) {
            }
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
            auto batch = service_.wait_events(id, *cursor, std::chrono::milliseconds{1000});
            if (!batch) {
                sink.done();
                return true;
            }
            for (const auto& e : batch->events) {
                const std::string frame = sse_frame(e);
                if (!sink.write(frame.data(), frame.size())) return false;
                ++*cursor;
            }
            if (batch->events.empty() && !batch->finished) {
                static constexpr char kKeepAlive[] = ": keep-alive\n\n";
                if (!sink.write(kKeepAlive, sizeof kKeepAlive - 1)) return false;
            }
            if (batch->finished) {
                // Drain anything recorded just before the session finished.
                auto rest = service_.wait_events(id, *cursor, std::chrono::milliseconds{0});
                if (rest) {
                    for (const auto& e : rest->events) {
                        const std::string frame = sse_frame(e);
                        if (!sink.write(frame.data(), frame.size())) return false;
                        ++*cursor;
                    }
                }
                sink.done();
            }
            return true;
        });
    });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind(const std::string& host, int port)
{
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        return port_ > 0;
    }
    if (!server_->bind_to_port(host, port)) return false;
    port_ = port;
    return true;
}

void HttpServer::serve()
{
    std::thread sweeper([this] {
        std::unique_lock lk(sweep_mutex_);
        while (!stopping_) {
            sweep_cv_.wait_for(lk, std::chrono::seconds{30});
            if (stopping_) break;
            lk.unlock();
            service_.evict_idle();
            lk.lock();
        }
    });
    server_->listen_after_bind();
    {
        std::lock_guard lk(sweep_mutex_);
        stopping_ = true;
    }
    sweep_cv_.notify_all();
    sweeper.join();
}

void HttpServer::stop()
{
    {
        std::lock_guard lk(sweep_mutex_);
        stopping_ = true;
    }
    sweep_cv_.notify_all();
    if (server_) server_->stop();
}

bool HttpServer::running() const { return server_ && server_->is_running(); }

}  // namespace elicit
