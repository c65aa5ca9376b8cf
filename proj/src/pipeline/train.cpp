// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "pipeline/train.hpp"

#include <chrono>
#include <set>

#include "bow/bow_model.hpp"
#include "common/error.hpp"
#include "common/hash.hpp"
#include "rnn/rnn_model.hpp"
#include "transformer/encoder.hpp"
#include "transformer/training.hpp"

namespace asr::pipeline {
namespace {

using nlohmann::json;

// Merges overrides into defaults, rejecting keys the family does not know.
json merged(const std::string& kind, const json& overrides) {
    json out = default_options(kind);
    if (overrides.is_null()) return out;
    if (!overrides.is_object()) throw validation_error("training options must be a JSON object");
    for (const auto& [key, value] : overrides.items()) {
        if (!out.contains(key)) throw validation_error("unknown " + kind + " training option '" + key + "'");
        if (!out[key].is_null() && out[key].is_number() != value.is_number())
            throw validation_error("training option '" + key + "' has the wrong type");
        out[key] = value;
    }
    return out;
}

std::size_t positive(const json& o, const char* key) {
    const auto v = o.at(key).get<double>();
    if (!(v >= 1) || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw validation_error(std::string("training option '") + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
}

void require_both_classes(const std::vector<int>& labels) {
    const std::set<int> seen(labels.begin(), labels.end());
    if (seen.size() < 2) throw validation_error("training corpus must contain both normal and alarming texts");
}

}  // namespace

json default_options(const std::string& kind) {
    if (kind == "bow") {
        const bow::BowTrainOptions d;
        return {{"k", d.k},
                {"lsa_tolerance", d.lsa.tolerance},
                {"lsa_max_iterations", d.lsa.max_iterations},
                {"l2", d.logreg.l2},
                {"lr", d.logreg.lr},
                {"epochs", d.logreg.epochs},
                {"batch", d.logreg.batch},
                {"seed", 0}};
    }
    if (kind == "rnn") {
        const rnn::RnnTrainOptions d;
        return {{"embed", d.config.embed},   {"hidden", d.config.hidden}, {"attention", d.config.attention},
                {"lr", d.lr},                {"epochs", d.epochs},        {"batch", d.batch},
                {"clip_norm", d.clip_norm},  {"seed", 0},                 {"glove", nullptr}};
    }
    if (kind == "transformer") {
        const transformer::EncoderConfig c;
        const transformer::FineTuneConfig f;
        return {{"hidden", c.hidden},
                {"heads", c.heads},
                {"layers", c.layers},
                {"ffn", c.ffn},
                {"embed", c.embed},
                {"max_positions", c.max_positions},
                {"vocab_size", 30522},
                {"window", textprep::kDefaultWindow},
                {"overlap", textprep::kDefaultOverlap},
                {"lr", f.lr},
                {"batch", f.batch},
                {"epochs", f.epochs},
                {"weight_decay", f.weight_decay},
                {"seed", 0}};
    }
    throw validation_error("unknown scorer kind '" + kind + "'; expected bow, rnn or transformer");
}

std::string model_id_for(const std::string& kind, std::string_view bytes) { return kind + "-" + fnv1a_hex(bytes); }

TrainedModel train(const std::string& kind, const std::vector<corpus::LabeledText>& records, const json& options) {
    const json o = merged(kind, options);
    if (records.empty()) throw validation_error("training corpus is empty");
    std::vector<std::string> texts;
    std::vector<int> labels;
    for (const auto& r : records) {
        texts.push_back(r.text);
        labels.push_back(r.label);
    }
    require_both_classes(labels);

    const auto t0 = std::chrono::steady_clock::now();
    TrainedModel out;
    out.kind = kind;
    WeightFile wf;
    if (kind == "bow") {
        bow::BowTrainOptions b;
        b.k = static_cast<Eigen::Index>(positive(o, "k"));
        b.lsa.tolerance = o.at("lsa_tolerance").get<double>();
        b.lsa.max_iterations = static_cast<int>(positive(o, "lsa_max_iterations"));
        b.lsa.seed = b.logreg.seed = o.at("seed").get<std::uint64_t>();
        b.logreg.l2 = o.at("l2").get<double>();
        b.logreg.lr = o.at("lr").get<double>();
        b.logreg.epochs = static_cast<int>(o.at("epochs").get<double>());
        b.logreg.batch = static_cast<int>(positive(o, "batch"));
        wf = bow::train_bow(texts, labels, b).to_weights();
    } else if (kind == "rnn") {
        rnn::RnnTrainOptions r;
        r.config.embed = static_cast<Eigen::Index>(positive(o, "embed"));
        r.config.hidden = static_cast<Eigen::Index>(positive(o, "hidden"));
        r.config.attention = static_cast<Eigen::Index>(positive(o, "attention"));
        r.lr = o.at("lr").get<double>();
        r.epochs = static_cast<int>(positive(o, "epochs"));
        r.batch = static_cast<int>(positive(o, "batch"));
        r.clip_norm = o.at("clip_norm").get<double>();
        r.seed = o.at("seed").get<std::uint64_t>();
        std::optional<rnn::EmbeddingTable> glove;
        if (!o.at("glove").is_null()) {
            glove = rnn::load_glove(o.at("glove").get<std::string>());
            r.pretrained = &*glove;
            r.config.embed = glove->dim();
        }
        wf = rnn::train_rnn(texts, labels, r).to_weights();
    } else {
        transformer::EncoderConfig c;
        c.hidden = static_cast<Eigen::Index>(positive(o, "hidden"));
        c.heads = static_cast<Eigen::Index>(positive(o, "heads"));
        c.layers = static_cast<Eigen::Index>(positive(o, "layers"));
        c.ffn = static_cast<Eigen::Index>(positive(o, "ffn"));
        c.embed = static_cast<Eigen::Index>(positive(o, "embed"));
        c.max_positions = static_cast<Eigen::Index>(positive(o, "max_positions"));
        const std::size_t window = positive(o, "window");
        const auto overlap = o.at("overlap").get<std::size_t>();
        if (overlap >= window) throw validation_error("overlap must be smaller than the window");
        c.validate(window);
        transformer::FineTuneConfig f;
        f.lr = o.at("lr").get<double>();
        f.batch = positive(o, "batch");
        f.epochs = positive(o, "epochs");
        f.weight_decay = o.at("weight_decay").get<double>();
        f.seed = o.at("seed").get<std::uint64_t>();
        f.validate();

        auto vocab = textprep::SubwordVocabulary::build(texts, positive(o, "vocab_size"));
        const auto segments = transformer::make_training_segments(texts, labels, vocab, window, overlap);
        auto stack = transformer::EncoderStack::random(c, std::move(vocab), f.seed);
        stack.window = window;
        stack.overlap = overlap;
        transformer::FineTuneReport rep;
        stack = transformer::fine_tune(segments, f, std::move(stack), &rep);
        out.report["segments"] = segments.size();
        out.report["steps"] = rep.steps;
        if (!rep.step_losses.empty()) out.report["final_batch_loss"] = rep.step_losses.back();
        wf = stack.to_weights();
    }
    out.bytes = wf.serialize();
    out.model_id = model_id_for(kind, out.bytes);
    out.report["kind"] = kind;
    out.report["model"] = out.model_id;
    out.report["texts"] = texts.size();
    out.report["options"] = o;
    out.report["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace asr::pipeline
