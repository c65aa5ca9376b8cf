// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

// asr-triage command line. Talks to the engine through the C API only.

#include <CLI11.hpp>
#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "asr/asr_triage.h"

namespace {

struct CliError {
    int exit_code;
};

// Prints the error and aborts the subcommand when a call fails.
void check(asr_status st, const char* what) {
    if (st == ASR_OK) return;
    std::cerr << "asr-triage: " << what << " failed (" << asr_status_name(st) << "): " << asr_last_error() << "\n";
    throw CliError{st == ASR_E_CONFIG || st == ASR_E_UNAVAILABLE ? 3 : 2};
}

std::string take(char* s) {
    std::string out = s ? s : "";
    asr_string_free(s);
    return out;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "asr-triage: cannot read " << path << "\n";
        throw CliError{2};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> parse_percents(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            std::cerr << "asr-triage: bad percentage '" << item << "'\n";
            throw CliError{2};
        }
    }
    return out;
}

// Environment wins over flags for the service location.
void env_override(std::string& value, const char* name) {
    if (const char* v = std::getenv(name); v && *v) value = v;
}

struct Scorer {
    asr_scorer* h = nullptr;
    ~Scorer() { asr_scorer_close(h); }
};

void open_scorer(Scorer& s, const std::string& weights, const std::string& onnx, const std::string& vocab) {
    if (!onnx.empty()) {
        if (vocab.empty()) {
            std::cerr << "asr-triage: --onnx needs --vocab\n";
            throw CliError{2};
        }
        check(asr_scorer_open_onnx(onnx.c_str(), vocab.c_str(), 0, 0, &s.h), "opening ONNX graph");
    } else {
        check(asr_scorer_open(weights.c_str(), &s.h), "opening weights");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Alarming student response triage: train scorers, calibrate cutoffs, serve the review queue"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(asr_version()));

    // train
    auto* train = app.add_subcommand("train", "Train a scorer on a labelled corpus (JSONL)");
    std::string kind, corpus, out, options, options_file;
    train->add_option("--scorer", kind, "Model family")->required()->check(CLI::IsMember({"bow", "rnn", "transformer"}));
    train->add_option("--corpus", corpus, "Labelled corpus")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out, "Weight file to write")->required();
    train->add_option("--options", options, "JSON object of training options");
    train->add_option("--options-file", options_file, "File holding the JSON options")->check(CLI::ExistingFile);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Turn review percentages into score cutoffs");
    std::string weights, threshold, percents = "0.05,0.1,0.3,0.5,1,2,4", onnx, vocab;
    calibrate->add_option("--weights", weights, "Native weight file");
    calibrate->add_option("--onnx", onnx, "ONNX graph instead of native weights");
    calibrate->add_option("--vocab", vocab, "Vocabulary for --onnx");
    calibrate->add_option("--threshold-corpus", threshold, "Unlabelled texts, one per line")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--percents", percents, "Comma separated percentages")->capture_default_str();
    calibrate->add_option("--out", out, "Cutoff table to write")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Efficacy E(p) on a validation set of alarming texts");
    std::string cutoffs, validation, report, report_json;
    evaluate->add_option("--weights", weights, "Native weight file");
    evaluate->add_option("--onnx", onnx, "ONNX graph instead of native weights");
    evaluate->add_option("--vocab", vocab, "Vocabulary for --onnx");
    evaluate->add_option("--cutoffs", cutoffs, "Cutoff table")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--validation", validation, "Validation corpus (JSONL, all label 1)")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--report", report, "CSV report to write");
    evaluate->add_option("--json", report_json, "JSON report to write");

    // score
    auto* score = app.add_subcommand("score", "Score one fragment");
    std::string text;
    bool detail = false;
    score->add_option("--weights", weights, "Native weight file");
    score->add_option("--onnx", onnx, "ONNX graph instead of native weights");
    score->add_option("--vocab", vocab, "Vocabulary for --onnx");
    score->add_option("--text", text, "Fragment text")->required();
    score->add_flag("--detail", detail, "Print per-segment scores as JSON");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the review-queue HTTP service");
    std::string data_dir, host = "127.0.0.1", port = "8080", engine_config;
    double p = 2.0;
    serve->add_option("--data-dir", data_dir, "Queue directory (env ASR_DATA_DIR overrides)");
    serve->add_option("--port", port, "Port (env ASR_PORT overrides)")->capture_default_str();
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--weights", weights, "Native weight file to load at start");
    serve->add_option("--onnx", onnx, "ONNX graph to load at start");
    serve->add_option("--vocab", vocab, "Vocabulary for --onnx");
    serve->add_option("--cutoffs", cutoffs, "Cutoff table for the loaded model");
    serve->add_option("--p", p, "Active review percentage")->capture_default_str();
    serve->add_option("--engine-config", engine_config, "JSON engine limits (payload size, paging, compaction)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    std::size_t n_normal = 0, n_asr = 0;
    std::uint64_t seed = 0;
    bool as_threshold = false;
    synth->add_option("--normal", n_normal, "Normal texts")->required();
    synth->add_option("--asr", n_asr, "Alarming texts")->required();
    synth->add_option("--seed", seed, "Seed")->required();
    synth->add_option("--out", out, "File to write")->required();
    synth->add_flag("--threshold", as_threshold, "Write unlabelled texts, one per line");

    // export-onnx
    auto* export_onnx = app.add_subcommand("export-onnx", "Export transformer weights as an ONNX graph");
    std::string vocab_out;
    export_onnx->add_option("--weights", weights, "Transformer weight file")->required()->check(CLI::ExistingFile);
    export_onnx->add_option("--out", out, "ONNX file to write")->required();
    export_onnx->add_option("--vocab", vocab_out, "Vocabulary file to write")->required();

    CLI11_PARSE(app, argc, argv);

    auto need_model = [&] {
        if (weights.empty() == onnx.empty()) {
            std::cerr << "asr-triage: give exactly one of --weights or --onnx\n";
            throw CliError{2};
        }
    };

    try {
        if (train->parsed()) {
            if (!options_file.empty()) options = read_text(options_file);
            char* rep = nullptr;
            check(asr_train(kind.c_str(), corpus.c_str(), out.c_str(), options.empty() ? nullptr : options.c_str(), &rep),
                  "training");
            std::cout << take(rep) << "\n";
        } else if (calibrate->parsed()) {
            need_model();
            Scorer s;
            open_scorer(s, weights, onnx, vocab);
            const auto ps = parse_percents(percents);
            char* warnings = nullptr;
            check(asr_calibrate(s.h, threshold.c_str(), ps.data(), ps.size(), out.c_str(), &warnings), "calibration");
            const std::string w = take(warnings);
            if (w != "[]") std::cerr << "warning: " << w << "\n";
            std::cout << read_text(out) << "\n";
        } else if (evaluate->parsed()) {
            need_model();
            Scorer s;
            open_scorer(s, weights, onnx, vocab);
            char* curve = nullptr;
            check(asr_evaluate(s.h, cutoffs.c_str(), validation.c_str(), report.empty() ? nullptr : report.c_str(), &curve),
                  "evaluation");
            const std::string j = take(curve);
            if (!report_json.empty()) std::ofstream(report_json) << j << "\n";
            if (!report.empty())
                std::cout << read_text(report);
            else
                std::cout << j << "\n";
        } else if (score->parsed()) {
            need_model();
            Scorer s;
            open_scorer(s, weights, onnx, vocab);
            double v = 0;
            char* d = nullptr;
            check(asr_scorer_score(s.h, text.c_str(), &v, detail ? &d : nullptr), "scoring");
            if (detail)
                std::cout << take(d) << "\n";
            else
                std::printf("%.4f\n", v);
        } else if (serve->parsed()) {
            env_override(data_dir, "ASR_DATA_DIR");
            env_override(port, "ASR_PORT");
            if (data_dir.empty()) {
                std::cerr << "asr-triage: --data-dir or ASR_DATA_DIR is required\n";
                throw CliError{2};
            }
            int port_no = 0;
            try {
                port_no = std::stoi(port);
            } catch (const std::exception&) {
                std::cerr << "asr-triage: bad port '" << port << "'\n";
                throw CliError{2};
            }
            // Block termination signals before any server thread exists so
            // they are delivered to sigwait below.
            sigset_t sigs;
            sigemptyset(&sigs);
            sigaddset(&sigs, SIGINT);
            sigaddset(&sigs, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

            asr_engine* engine = nullptr;
            check(asr_engine_open(data_dir.c_str(), engine_config.empty() ? nullptr : engine_config.c_str(), &engine),
                  "opening the queue");
            Scorer s;
            if (!weights.empty() || !onnx.empty()) {
                need_model();
                if (cutoffs.empty()) {
                    std::cerr << "asr-triage: loading a model needs --cutoffs\n";
                    asr_engine_close(engine);
                    throw CliError{2};
                }
                try {
                    open_scorer(s, weights, onnx, vocab);
                    check(asr_engine_configure_scorer(engine, s.h, cutoffs.c_str(), p), "configuring the engine");
                } catch (...) {
                    asr_engine_close(engine);
                    throw;
                }
            } else {
                std::cerr << "note: no model loaded; submissions return 503 until one is configured\n";
            }
            asr_server* server = nullptr;
            int bound = 0;
            if (asr_server_start(engine, host.c_str(), port_no, &server, &bound) != ASR_OK) {
                std::cerr << "asr-triage: cannot start server: " << asr_last_error() << "\n";
                asr_engine_close(engine);
                throw CliError{2};
            }
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            int sig = 0;
            sigwait(&sigs, &sig);
            std::cout << "stopping" << std::endl;
            asr_server_close(server);
            asr_engine_close(engine);
        } else if (synth->parsed()) {
            check(as_threshold ? asr_synthesize_threshold(n_normal, n_asr, seed, out.c_str())
                               : asr_synthesize(n_normal, n_asr, seed, out.c_str()),
                  "synthesis");
        } else if (export_onnx->parsed()) {
            check(asr_export_onnx(weights.c_str(), out.c_str(), vocab_out.c_str()), "ONNX export");
        }
    } catch (const CliError& e) {
        return e.exit_code;
    }
    return 0;
}
