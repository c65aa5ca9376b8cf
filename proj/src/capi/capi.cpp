// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "asr/asr_triage.h"

#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <new>

#include "calibration/calibration.hpp"
#include "common/error.hpp"
#include "common/tensor_file.hpp"
#include "corpus/corpus.hpp"
#include "pipeline/train.hpp"
#include "scoring/scorer.hpp"
#include "service/engine.hpp"
#include "service/http.hpp"
#include "transformer/encoder.hpp"
#include "transformer/onnx_export.hpp"
#include "transformer/onnx_runtime.hpp"

using nlohmann::json;

struct asr_scorer {
    std::shared_ptr<const asr::Scorer> scorer;
    std::string kind;
};

struct asr_engine {
    std::unique_ptr<asr::service::TriageEngine> engine;
};

struct asr_server {
    std::unique_ptr<asr::service::HttpServer> http;
    std::mutex mu;
    std::condition_variable cv;
    bool stopped = false;
};

namespace {

thread_local std::string g_last_error;

asr_status fail(asr_status s, const std::string& message) {
    g_last_error = message;
    return s;
}

asr_status to_status(asr::ErrorCode c) { return static_cast<asr_status>(static_cast<int>(c)); }

// Runs `f`, translating exceptions into status codes. Nothing escapes.
template <typename F>
asr_status guarded(F&& f) noexcept {
    try {
        f();
        g_last_error.clear();
        return ASR_OK;
    } catch (const asr::Error& e) {
        return fail(to_status(e.code()), e.what());
    } catch (const json::exception& e) {
        return fail(ASR_E_PARSE, e.what());
    } catch (const std::bad_alloc&) {
        return fail(ASR_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(ASR_E_INTERNAL, e.what());
    } catch (...) {
        return fail(ASR_E_INTERNAL, "unknown error");
    }
}

void require(const void* p, const char* what) {
    if (!p) throw asr::invalid_argument(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

void put(char** out, const std::string& s) {
    if (out) *out = dup(s);
}

json parse_object(const char* text, const char* what) {
    if (!text) return json::object();
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw asr::parse_error(std::string(what) + " is not a JSON object");
    return j;
}

std::string str_field(const json& j, const char* key, bool required) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        if (required) throw asr::validation_error(std::string("field '") + key + "' is required");
        return {};
    }
    if (!it->is_string()) throw asr::validation_error(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

json item_page(const asr::service::QueuePage& p) {
    json items = json::array();
    for (const auto& i : p.items) items.push_back(i.to_json());
    return {{"items", items}, {"page", p.page}, {"page_size", p.page_size}, {"total", p.total}};
}

}  // namespace

extern "C" {

const char* asr_version(void) { return "0.1.0"; }

const char* asr_last_error(void) { return g_last_error.c_str(); }

const char* asr_status_name(asr_status status) {
    switch (status) {
        case ASR_OK: return "ok";
        case ASR_E_INVALID_ARGUMENT: return "invalid_argument";
        case ASR_E_IO: return "io";
        case ASR_E_PARSE: return "parse";
        case ASR_E_VALIDATION: return "validation";
        case ASR_E_CONFIG: return "config";
        case ASR_E_NOT_FOUND: return "not_found";
        case ASR_E_CONFLICT: return "conflict";
        case ASR_E_UNAVAILABLE: return "unavailable";
        case ASR_E_PAYLOAD_TOO_LARGE: return "payload_too_large";
        case ASR_E_INTERNAL: return "internal";
    }
    return "unknown";
}

void asr_string_free(char* s) { std::free(s); }

asr_status asr_synthesize(size_t n_normal, size_t n_asr, uint64_t seed, const char* out_path) {
    return guarded([&] {
        require(out_path, "out_path");
        asr::corpus::write_labeled(out_path, asr::corpus::generate_synthetic(n_normal, n_asr, seed));
    });
}

asr_status asr_synthesize_threshold(size_t n_normal, size_t n_asr, uint64_t seed, const char* out_path) {
    return guarded([&] {
        require(out_path, "out_path");
        std::vector<std::string> texts;
        for (auto& r : asr::corpus::generate_synthetic(n_normal, n_asr, seed)) texts.push_back(std::move(r.text));
        asr::corpus::write_threshold(out_path, texts);
    });
}

asr_status asr_train(const char* kind, const char* corpus_path, const char* weights_out, const char* options_json,
                     char** report_json) {
    return guarded([&] {
        require(kind, "kind");
        require(corpus_path, "corpus_path");
        require(weights_out, "weights_out");
        asr::pipeline::default_options(kind);  // rejects an unknown kind before any I/O
        const json options = parse_object(options_json, "options");
        const auto model = asr::pipeline::train(kind, asr::corpus::load_labeled(corpus_path), options);
        asr::write_file_atomic(weights_out, model.bytes);
        put(report_json, model.report.dump());
    });
}

asr_status asr_scorer_open(const char* weights_path, asr_scorer** out) {
    return guarded([&] {
        require(weights_path, "weights_path");
        require(out, "out");
        auto s = asr::load_scorer(weights_path);
        *out = new asr_scorer{s, std::string(s->kind())};
    });
}

asr_status asr_scorer_open_onnx(const char* graph_path, const char* vocab_path, size_t window, size_t overlap,
                                asr_scorer** out) {
    return guarded([&] {
        require(graph_path, "graph_path");
        require(vocab_path, "vocab_path");
        require(out, "out");
        asr::transformer::ExternalModelHandle h;
        h.graph_path = graph_path;
        h.vocab_path = vocab_path;
        if (window) h.window = window;
        if (window || overlap) h.overlap = overlap;
        auto s = std::make_shared<asr::transformer::ExternalScorer>(h);
        *out = new asr_scorer{s, std::string(s->kind())};
    });
}

void asr_scorer_close(asr_scorer* scorer) { delete scorer; }

const char* asr_scorer_model_id(const asr_scorer* scorer) { return scorer ? scorer->scorer->model_id().c_str() : ""; }

const char* asr_scorer_kind(const asr_scorer* scorer) { return scorer ? scorer->kind.c_str() : ""; }

asr_status asr_scorer_score(const asr_scorer* scorer, const char* text, double* score, char** detail_json) {
    return guarded([&] {
        require(scorer, "scorer");
        require(text, "text");
        const auto fs = scorer->scorer->score_fragment(text);
        if (score) *score = fs.score;
        if (detail_json) {
            json segs = json::array();
            for (const auto& s : fs.segments) segs.push_back({{"start", s.start}, {"length", s.length}});
            put(detail_json, json{{"score", fs.score},
                                  {"segment_scores", fs.segment_scores},
                                  {"segments", segs},
                                  {"best_segment", fs.segments.empty() ? json() : json(fs.best)}}
                                 .dump());
        }
    });
}

asr_status asr_export_onnx(const char* weights_path, const char* graph_out, const char* vocab_out) {
    return guarded([&] {
        require(weights_path, "weights_path");
        require(graph_out, "graph_out");
        require(vocab_out, "vocab_out");
        const auto wf = asr::WeightFile::load(weights_path);
        if (wf.kind != "transformer")
            throw asr::validation_error("only transformer weights can be exported to ONNX; got '" + wf.kind + "'");
        const auto stack = asr::transformer::EncoderStack::from_weights(wf);
        asr::transformer::save_onnx(stack, graph_out);
        stack.vocab.save(vocab_out);
    });
}

asr_status asr_calibrate(const asr_scorer* scorer, const char* threshold_path, const double* percents,
                         size_t n_percents, const char* table_out, char** warnings_json) {
    return guarded([&] {
        require(scorer, "scorer");
        require(threshold_path, "threshold_path");
        require(table_out, "table_out");
        std::vector<double> ps(asr::calibration::kDefaultPercents.begin(), asr::calibration::kDefaultPercents.end());
        if (percents && n_percents) ps.assign(percents, percents + n_percents);
        const auto corpus = asr::corpus::load_threshold(threshold_path);
        json warnings = json::array();
        if (auto w = asr::calibration::sizing_warning(corpus.texts.size(), ps)) warnings.push_back(*w);
        const auto dist = asr::calibration::build_distribution(*scorer->scorer, corpus);
        const auto table = asr::calibration::build_cutoff_table(dist, ps, scorer->scorer->model_id(),
                                                                asr::calibration::corpus_fingerprint(corpus.texts));
        table.save(table_out);
        put(warnings_json, warnings.dump());
    });
}

asr_status asr_evaluate(const asr_scorer* scorer, const char* cutoffs_path, const char* validation_path,
                        const char* report_csv, char** curve_json) {
    return guarded([&] {
        require(scorer, "scorer");
        require(cutoffs_path, "cutoffs_path");
        require(validation_path, "validation_path");
        const auto table = asr::calibration::CutoffTable::load(cutoffs_path);
        if (table.model_id != scorer->scorer->model_id())
            throw asr::config_error("cutoff table belongs to model '" + table.model_id + "', not '" +
                                    scorer->scorer->model_id() + "'");
        const auto validation = asr::corpus::load_validation(validation_path);
        std::vector<std::string> texts;
        for (const auto& r : validation.texts) texts.push_back(r.text);
        const auto scores = asr::calibration::score_all(*scorer->scorer, texts);
        const std::vector<asr::calibration::EfficacyCurve> curves = {asr::calibration::efficacy_curve(table, scores)};
        if (report_csv) asr::write_file_atomic(report_csv, asr::calibration::format_csv(curves));
        put(curve_json, asr::calibration::curves_to_json(curves).dump());
    });
}

asr_status asr_engine_open(const char* data_dir, const char* config_json, asr_engine** out) {
    return guarded([&] {
        require(data_dir, "data_dir");
        require(out, "out");
        const json j = parse_object(config_json, "engine config");
        asr::service::ServiceConfig c;
        c.data_dir = data_dir;
        for (const auto& [key, value] : j.items()) {
            if (!value.is_number_unsigned()) throw asr::validation_error("engine option '" + key + "' must be a non-negative integer");
            const auto v = value.get<std::size_t>();
            if (key == "max_payload_bytes") c.max_payload_bytes = v;
            else if (key == "default_page_size") c.default_page_size = v;
            else if (key == "max_page_size") c.max_page_size = v;
            else if (key == "snapshot_every") c.snapshot_every = v;
            else if (key == "latency_reservoir") c.latency_reservoir = v;
            else throw asr::validation_error("unknown engine option '" + key + "'");
        }
        auto e = std::make_unique<asr::service::TriageEngine>(std::move(c));
        *out = new asr_engine{std::move(e)};
    });
}

void asr_engine_close(asr_engine* engine) { delete engine; }

asr_status asr_engine_configure(asr_engine* engine, const char* weights_path, const char* cutoffs_path, double p) {
    return guarded([&] {
        require(engine, "engine");
        require(weights_path, "weights_path");
        require(cutoffs_path, "cutoffs_path");
        engine->engine->configure(asr::load_scorer(weights_path), asr::calibration::CutoffTable::load(cutoffs_path), p);
    });
}

asr_status asr_engine_configure_scorer(asr_engine* engine, const asr_scorer* scorer, const char* cutoffs_path,
                                       double p) {
    return guarded([&] {
        require(engine, "engine");
        require(scorer, "scorer");
        require(cutoffs_path, "cutoffs_path");
        engine->engine->configure(scorer->scorer, asr::calibration::CutoffTable::load(cutoffs_path), p);
    });
}

asr_status asr_engine_set_percent(asr_engine* engine, const char* model_id, double p) {
    return guarded([&] {
        require(engine, "engine");
        require(model_id, "model_id");
        engine->engine->set_active_percent(model_id, p);
    });
}

asr_status asr_engine_submit(asr_engine* engine, const char* request_json, char** response_json) {
    return guarded([&] {
        require(engine, "engine");
        require(request_json, "request_json");
        const json j = parse_object(request_json, "request");
        asr::service::SubmittedResponse r{str_field(j, "response_id", true), str_field(j, "item_id", false),
                                          str_field(j, "text", true)};
        json decisions = json::array();
        for (const auto& d : engine->engine->submit(r))
            decisions.push_back(
                {{"fragment_id", d.fragment_id}, {"score", d.score}, {"cutoff", d.cutoff}, {"flagged", d.flagged}});
        put(response_json, json{{"decisions", decisions}}.dump());
    });
}

asr_status asr_engine_list(asr_engine* engine, const char* status, size_t page, size_t page_size, char** page_json) {
    return guarded([&] {
        require(engine, "engine");
        std::optional<asr::service::ItemStatus> st;
        const std::string s = status ? status : "all";
        if (s == "pending") st = asr::service::ItemStatus::Pending;
        else if (s == "adjudicated") st = asr::service::ItemStatus::Adjudicated;
        else if (s != "all") throw asr::validation_error("status must be pending, adjudicated or all");
        put(page_json, item_page(engine->engine->list_queue(st, page, page_size)).dump());
    });
}

asr_status asr_engine_adjudicate(asr_engine* engine, const char* fragment_id, const char* request_json,
                                 char** item_json) {
    return guarded([&] {
        require(engine, "engine");
        require(fragment_id, "fragment_id");
        require(request_json, "request_json");
        const json j = parse_object(request_json, "request");
        asr::service::AdjudicationRequest a;
        a.outcome = asr::service::outcome_from_string(str_field(j, "outcome", true));
        if (auto c = str_field(j, "category", false); !c.empty()) a.category = asr::corpus::category_from_string(c);
        a.reviewer_id = str_field(j, "reviewer_id", false);
        put(item_json, engine->engine->adjudicate(fragment_id, a).to_json().dump());
    });
}

asr_status asr_engine_export(asr_engine* engine, int64_t since_ms, char** jsonl) {
    return guarded([&] {
        require(engine, "engine");
        put(jsonl, engine->engine->export_adjudications(since_ms));
    });
}

asr_status asr_engine_metrics(asr_engine* engine, char** metrics_json) {
    return guarded([&] {
        require(engine, "engine");
        put(metrics_json, engine->engine->metrics().to_json().dump());
    });
}

asr_status asr_engine_calibration(asr_engine* engine, char** calibration_json) {
    return guarded([&] {
        require(engine, "engine");
        put(calibration_json, engine->engine->calibration_json().dump());
    });
}

asr_status asr_server_start(asr_engine* engine, const char* host, int port, asr_server** out, int* bound_port) {
    return guarded([&] {
        require(engine, "engine");
        require(out, "out");
        if (port < 0 || port > 65535) throw asr::invalid_argument("port must be in [0, 65535]");
        auto s = std::make_unique<asr_server>();
        s->http = std::make_unique<asr::service::HttpServer>(*engine->engine);
        const int p = s->http->bind(host ? host : "127.0.0.1", port);
        s->http->start();
        if (bound_port) *bound_port = p;
        *out = s.release();
    });
}

asr_status asr_server_wait(asr_server* server) {
    return guarded([&] {
        require(server, "server");
        std::unique_lock lock(server->mu);
        server->cv.wait(lock, [&] { return server->stopped; });
    });
}

void asr_server_stop(asr_server* server) {
    if (!server) return;
    std::lock_guard lock(server->mu);
    if (server->stopped) return;
    server->http->stop();
    server->stopped = true;
    server->cv.notify_all();
}

void asr_server_close(asr_server* server) {
    asr_server_stop(server);
    delete server;
}

}  // extern "C"
