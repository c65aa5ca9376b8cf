// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "service/http.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace asr::service {

using nlohmann::json;

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::Parse: return 400;
        case ErrorCode::Validation: return 422;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::Unavailable: return 503;
        case ErrorCode::PayloadTooLarge: return 413;
        default: return 500;
    }
}

std::string_view error_slug(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::Io: return "io";
        case ErrorCode::Parse: return "malformed";
        case ErrorCode::Validation: return "validation";
        case ErrorCode::Config: return "config";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::Unavailable: return "unavailable";
        case ErrorCode::PayloadTooLarge: return "payload_too_large";
        default: return "internal";
    }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message, json extra = nullptr) {
    json body = {{"error", {{"code", error_slug(code)}, {"message", message}}}};
    if (!extra.is_null()) body["error"].update(extra);
    send_json(res, http_status(code), body);
}

json parse_body(const httplib::Request& req) {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw parse_error("request body is not valid JSON");
    if (!j.is_object()) throw parse_error("request body must be a JSON object");
    return j;
}

std::string required_string(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) throw validation_error(std::string("field '") + key + "' is required");
    if (!it->is_string()) throw validation_error(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw validation_error(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    const std::string v = req.get_param_value(key);
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw validation_error(std::string("query parameter '") + key + "' must be a non-negative integer");
    return out;
}

json page_json(const QueuePage& page) {
    json items = json::array();
    for (const auto& item : page.items) items.push_back(item.to_json());
    return {{"items", items}, {"page", page.page}, {"page_size", page.page_size}, {"total", page.total}};
}

}  // namespace

struct HttpServer::Impl {
    TriageEngine& engine;
    httplib::Server server;
    std::thread thread;
    int port = -1;

    explicit Impl(TriageEngine& e) : engine(e) { routes(); }

    // Runs a handler and turns engine exceptions into JSON errors.
    template <typename F>
    auto guarded(F f) {
        return [this, f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e.code(), e.what());
            } catch (const json::exception& e) {
                send_error(res, ErrorCode::Parse, e.what());
            } catch (const std::exception& e) {
                send_error(res, ErrorCode::Internal, e.what());
            }
        };
    }

    void routes() {
        // Leave headroom for the JSON envelope; the engine enforces the text limit itself.
        server.set_payload_max_length(engine.config().max_payload_bytes + 64 * 1024);
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            if (res.status == 413)
                send_error(res, ErrorCode::PayloadTooLarge, "request body exceeds the payload limit");
            else if (res.status == 404)
                send_error(res, ErrorCode::NotFound, "no such route");
        });

        server.Post("/v1/responses", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            SubmittedResponse r;
            r.response_id = required_string(body, "response_id");
            r.item_id = optional_string(body, "item_id").value_or("");
            r.text = required_string(body, "text");
            json decisions = json::array();
            for (const auto& d : engine.submit(r))
                decisions.push_back(
                    {{"fragment_id", d.fragment_id}, {"score", d.score}, {"cutoff", d.cutoff}, {"flagged", d.flagged}});
            send_json(res, 200, {{"decisions", decisions}});
        }));

        server.Get("/v1/queue", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::optional<ItemStatus> status;
            const std::string s = req.has_param("status") ? req.get_param_value("status") : "all";
            if (s == "pending")
                status = ItemStatus::Pending;
            else if (s == "adjudicated")
                status = ItemStatus::Adjudicated;
            else if (s != "all")
                throw validation_error("status must be pending, adjudicated or all");
            const auto page = query_size(req, "page", 0);
            const auto size = query_size(req, "page_size", engine.config().default_page_size);
            send_json(res, 200, page_json(engine.list_queue(status, page, size)));
        }));

        server.Get(R"(/v1/queue/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, engine.get_item(req.matches[1]).to_json());
        }));

        server.Post(R"(/v1/queue/([^/]+)/adjudication)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const std::string id = req.matches[1];
                        const json body = parse_body(req);
                        AdjudicationRequest a;
                        a.outcome = outcome_from_string(required_string(body, "outcome"));
                        if (auto c = optional_string(body, "category")) a.category = corpus::category_from_string(*c);
                        a.reviewer_id = optional_string(body, "reviewer_id").value_or(req.get_header_value("X-Reviewer-Id"));
                        try {
                            send_json(res, 200, engine.adjudicate(id, a).to_json());
                        } catch (const Error& e) {
                            if (e.code() != ErrorCode::Conflict) throw;
                            send_error(res, e.code(), e.what(), {{"item", engine.get_item(id).to_json()}});
                        }
                    }));

        server.Get("/v1/calibration", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, engine.calibration_json());
        }));

        server.Put("/v1/calibration", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            const auto p = body.find("p");
            if (p == body.end() || !p->is_number()) throw validation_error("field 'p' must be a number");
            engine.set_active_percent(required_string(body, "model"), p->get<double>());
            send_json(res, 200, engine.calibration_json());
        }));

        server.Get("/v1/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, engine.metrics().to_json());
        }));

        server.Get("/v1/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::int64_t since = 0;
            if (req.has_param("since")) {
                const std::string v = req.get_param_value("since");
                const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), since);
                if (ec != std::errc() || p != v.data() + v.size())
                    throw validation_error("since must be an integer timestamp in milliseconds");
            }
            res.status = 200;
            res.set_content(engine.export_adjudications(since), "application/x-ndjson");
        }));
    }
};

HttpServer::HttpServer(TriageEngine& engine) : impl_(std::make_unique<Impl>(engine)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0)
        impl_->port = impl_->server.bind_to_any_port(host);
    else
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    if (impl_->port < 0) throw io_error("cannot bind " + host + ":" + std::to_string(port));
    return impl_->port;
}

void HttpServer::listen() {
    if (impl_->port < 0) throw invalid_argument("bind() before listen()");
    impl_->server.listen_after_bind();
}

void HttpServer::start() {
    impl_->thread = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
}

void HttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpServer::port() const { return impl_->port; }

}  // namespace asr::service
