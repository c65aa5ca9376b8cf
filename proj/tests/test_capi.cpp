// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

// Drives the engine only through the public C header.

#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "asr/asr_triage.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Dir {
    fs::path path;
    Dir() {
        char tmpl[] = "/tmp/asr-capi-XXXXXX";
        path = mkdtemp(tmpl);
    }
    ~Dir() { fs::remove_all(path); }
    std::string operator/(const char* name) const { return (path / name).string(); }
};

// Takes ownership of a returned string.
std::string take(char* s) {
    std::string out = s ? s : "";
    asr_string_free(s);
    return out;
}

#define REQUIRE_OK(expr)                                     \
    do {                                                     \
        const asr_status st_ = (expr);                       \
        INFO(asr_status_name(st_), ": ", asr_last_error());  \
        REQUIRE(st_ == ASR_OK);                              \
    } while (0)

// A small trained BoW model plus its cutoff table, shared by the cases.
struct Fixture {
    Dir dir;
    std::string corpus = dir / "train.jsonl", threshold = dir / "threshold.txt", validation = dir / "val.jsonl",
                weights = dir / "bow.asrw", cutoffs = dir / "cutoffs.json";
    Fixture() {
        REQUIRE_OK(asr_synthesize(600, 60, 1, corpus.c_str()));
        REQUIRE_OK(asr_synthesize_threshold(2000, 4, 2, threshold.c_str()));
        REQUIRE_OK(asr_synthesize(0, 40, 3, validation.c_str()));
        char* report = nullptr;
        REQUIRE_OK(asr_train("bow", corpus.c_str(), weights.c_str(), R"({"k": 40, "epochs": 30})", &report));
        const auto r = json::parse(take(report));
        CHECK(r.at("kind") == "bow");
        asr_scorer* s = nullptr;
        REQUIRE_OK(asr_scorer_open(weights.c_str(), &s));
        CHECK(r.at("model") == std::string(asr_scorer_model_id(s)));
        char* warnings = nullptr;
        REQUIRE_OK(asr_calibrate(s, threshold.c_str(), nullptr, 0, cutoffs.c_str(), &warnings));
        // 2004 texts cannot give 20 flags at 0.05 %
        CHECK(json::parse(take(warnings)).size() == 1);
        asr_scorer_close(s);
    }
};

}  // namespace

TEST_CASE("errors carry a status and a message") {
    asr_scorer* s = nullptr;
    CHECK(asr_scorer_open("/nonexistent.asrw", &s) == ASR_E_IO);
    CHECK(std::string(asr_last_error()).find("/nonexistent.asrw") != std::string::npos);
    CHECK(s == nullptr);
    CHECK(asr_scorer_open(nullptr, &s) == ASR_E_INVALID_ARGUMENT);
    CHECK(asr_train("svm", "x", "y", nullptr, nullptr) == ASR_E_VALIDATION);
    CHECK(std::string(asr_status_name(ASR_E_CONFLICT)) == "conflict");
    asr_scorer_close(nullptr);
    asr_engine_close(nullptr);
    asr_server_close(nullptr);
}

TEST_CASE("train, score, calibrate and evaluate") {
    Fixture f;
    asr_scorer* s = nullptr;
    REQUIRE_OK(asr_scorer_open(f.weights.c_str(), &s));
    CHECK(std::string(asr_scorer_kind(s)) == "bow");

    double alarming = 0, benign = 0;
    char* detail = nullptr;
    REQUIRE_OK(asr_scorer_score(s, "I wanna kill myself.", &alarming, &detail));
    const auto d = json::parse(take(detail));
    CHECK(d.at("score") == alarming);
    CHECK(d.at("segment_scores").size() == 1);
    REQUIRE_OK(asr_scorer_score(s, "The author explains that the water cycle is important.", &benign, nullptr));
    CHECK(alarming > benign);

    char* curve = nullptr;
    const std::string csv = f.dir / "report.csv";
    REQUIRE_OK(asr_evaluate(s, f.cutoffs.c_str(), f.validation.c_str(), csv.c_str(), &curve));
    const auto c = json::parse(take(curve));
    REQUIRE(c.size() == 1);
    double prev = -1;
    for (const auto& pt : c[0].at("points")) {
        CHECK(pt.at("efficacy").get<double>() >= prev);
        prev = pt.at("efficacy").get<double>();
    }
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "model,p,cutoff,flagged_fraction,efficacy");

    // a table calibrated for another model is refused
    const std::string other = f.dir / "other.asrw";
    REQUIRE_OK(asr_train("bow", f.corpus.c_str(), other.c_str(), R"({"k": 20, "epochs": 5})", nullptr));
    asr_scorer* s2 = nullptr;
    REQUIRE_OK(asr_scorer_open(other.c_str(), &s2));
    CHECK(asr_evaluate(s2, f.cutoffs.c_str(), f.validation.c_str(), nullptr, nullptr) == ASR_E_CONFIG);
    asr_scorer_close(s2);
    asr_scorer_close(s);
}

TEST_CASE("engine lifecycle through the C API") {
    Fixture f;
    const std::string data = f.dir / "data";
    asr_engine* e = nullptr;
    REQUIRE_OK(asr_engine_open(data.c_str(), R"({"snapshot_every": 5})", &e));
    char* out = nullptr;
    CHECK(asr_engine_submit(e, R"({"response_id":"r","item_id":"i","text":"x"})", &out) == ASR_E_UNAVAILABLE);
    CHECK(asr_engine_configure(e, f.weights.c_str(), f.cutoffs.c_str(), 3.0) == ASR_E_NOT_FOUND);
    REQUIRE_OK(asr_engine_configure(e, f.weights.c_str(), f.cutoffs.c_str(), 2.0));

    REQUIRE_OK(asr_engine_submit(
        e, R"({"response_id":"r1","item_id":"q1","text":"I wanna kill myself.\n\nI think the water cycle is important because the evidence is strong. My favorite part was reading with my friend."})", &out));
    const auto decisions = json::parse(take(out)).at("decisions");
    REQUIRE(decisions.size() == 2);
    INFO(decisions.dump());
    CHECK(decisions[0].at("flagged") == true);
    CHECK(decisions[1].at("flagged") == false);
    const std::string id = decisions[0].at("fragment_id");

    REQUIRE_OK(asr_engine_list(e, "pending", 0, 0, &out));
    CHECK(json::parse(take(out)).at("total") == 1);
    CHECK(asr_engine_list(e, "bogus", 0, 0, &out) == ASR_E_VALIDATION);

    REQUIRE_OK(asr_engine_adjudicate(e, id.c_str(), R"({"outcome":"true_asr","category":"harm_to_self","reviewer_id":"r"})",
                                     &out));
    CHECK(json::parse(take(out)).at("status") == "adjudicated");
    CHECK(asr_engine_adjudicate(e, id.c_str(), R"({"outcome":"false_positive","reviewer_id":"r"})", &out) ==
          ASR_E_CONFLICT);
    CHECK(asr_engine_adjudicate(e, "nope", R"({"outcome":"false_positive","reviewer_id":"r"})", &out) ==
          ASR_E_NOT_FOUND);
    CHECK(asr_engine_adjudicate(e, id.c_str(), "not json", &out) == ASR_E_PARSE);

    REQUIRE_OK(asr_engine_export(e, 0, &out));
    const auto exported = take(out);
    CHECK(exported.find("\"label\":1") != std::string::npos);
    CHECK(exported.find("harm_to_self") != std::string::npos);

    REQUIRE_OK(asr_engine_metrics(e, &out));
    const auto m = json::parse(take(out));
    CHECK(m.at("fragments_processed") == 2);
    CHECK(m.at("flagged") == 1);

    REQUIRE_OK(asr_engine_calibration(e, &out));
    const auto cal = json::parse(take(out));
    CHECK(cal.at("p") == 2.0);
    REQUIRE_OK(asr_engine_set_percent(e, cal.at("model").get<std::string>().c_str(), 4.0));
    CHECK(asr_engine_set_percent(e, "other-model", 4.0) == ASR_E_VALIDATION);

    // HTTP front end on a free port
    asr_server* srv = nullptr;
    int port = 0;
    REQUIRE_OK(asr_server_start(e, "127.0.0.1", 0, &srv, &port));
    CHECK(port > 0);
    std::thread waiter([&] { CHECK(asr_server_wait(srv) == ASR_OK); });
    httplib::Client cli("127.0.0.1", port);
    auto r = cli.Get("/v1/metrics");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body).at("flagged") == 1);
    asr_server_stop(srv);
    waiter.join();
    asr_server_close(srv);
    asr_engine_close(e);

    // reopen: the adjudicated item survived
    REQUIRE_OK(asr_engine_open(data.c_str(), nullptr, &e));
    REQUIRE_OK(asr_engine_list(e, "adjudicated", 0, 0, &out));
    CHECK(json::parse(take(out)).at("total") == 1);
    CHECK(asr_engine_open(data.c_str(), R"({"colour": 1})", &e) == ASR_E_VALIDATION);
    asr_engine_close(e);
}

TEST_CASE("transformer export to ONNX through the C API") {
    Fixture f;
    const std::string w = f.dir / "tf.asrw", graph = f.dir / "tf.onnx", vocab = f.dir / "tf.vocab";
    REQUIRE_OK(asr_train("transformer", f.corpus.c_str(), w.c_str(),
                         R"({"hidden":16,"heads":2,"layers":1,"ffn":32,"embed":16,"max_positions":66,
                             "window":64,"overlap":8,"vocab_size":300,"epochs":1,"batch":16,"lr":1e-3})",
                         nullptr));
    REQUIRE_OK(asr_export_onnx(w.c_str(), graph.c_str(), vocab.c_str()));
    CHECK(fs::file_size(graph) > 1000);
    CHECK(asr_export_onnx(f.weights.c_str(), graph.c_str(), vocab.c_str()) == ASR_E_VALIDATION);

    asr_scorer* ext = nullptr;
    const asr_status st = asr_scorer_open_onnx(graph.c_str(), vocab.c_str(), 64, 8, &ext);
    if (st == ASR_E_CONFIG && std::string(asr_last_error()).find("ONNX Runtime library not found") != std::string::npos) {
        MESSAGE("ONNX Runtime not installed; external comparison skipped");
        return;
    }
    REQUIRE_OK(st);
    asr_scorer* native = nullptr;
    REQUIRE_OK(asr_scorer_open(w.c_str(), &native));
    for (const char* t : {"I wanna kill myself.", "The author explains that gravity is clear.", ""}) {
        double a = 0, b = 0;
        REQUIRE_OK(asr_scorer_score(native, t, &a, nullptr));
        REQUIRE_OK(asr_scorer_score(ext, t, &b, nullptr));
        CHECK(std::abs(a - b) < 1e-4);
    }
    CHECK(std::string(asr_scorer_kind(ext)) == "onnx");
    asr_scorer_close(native);
    asr_scorer_close(ext);
}
