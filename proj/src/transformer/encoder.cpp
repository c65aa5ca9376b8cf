// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "transformer/encoder.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "transformer/attention.hpp"
#include "transformer/forward_cache.hpp"

namespace asr::transformer {

void EncoderConfig::validate(std::size_t window) const {
    if (hidden <= 0 || heads <= 0 || layers < 0 || ffn <= 0 || embed <= 0)
        throw invalid_argument("encoder dimensions must be positive");
    if (hidden % heads != 0) throw invalid_argument("hidden size must be divisible by the head count");
    if (max_positions < static_cast<Eigen::Index>(window) + 2)
        throw invalid_argument("max_positions must cover the window plus [CLS] and [SEP]");
}

AttentionHeadParams head_params(const EncoderLayer& layer, Eigen::Index head, Eigen::Index heads) {
    const Eigen::Index d = layer.Wq.rows() / heads;
    const Eigen::Index off = head * d;
    return AttentionHeadParams{layer.Wq.middleRows(off, d), layer.Wk.middleRows(off, d), layer.Wv.middleRows(off, d),
                               layer.bq.segment(off, d),    layer.bk.segment(off, d),    layer.bv.segment(off, d),
                               layer.Wo.middleCols(off, d)};
}

namespace {

Eigen::MatrixXd linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    Eigen::MatrixXd y = x * w.transpose();
    y.rowwise() += b.transpose();
    return y;
}

Eigen::MatrixXd layer_norm_cached(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta,
                                  double eps, detail::LayerNormCache* cache) {
    const Eigen::Index n = x.rows();
    const auto h = static_cast<double>(x.cols());
    Eigen::MatrixXd xhat(n, x.cols());
    Eigen::VectorXd inv(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mean = x.row(r).sum() / h;
        const Eigen::RowVectorXd centered = x.row(r).array() - mean;
        const double var = centered.squaredNorm() / h;
        inv(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = centered * inv(r);
    }
    Eigen::MatrixXd y = xhat.array().rowwise() * gamma.transpose().array();
    y.rowwise() += beta.transpose();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_sigma = std::move(inv);
    }
    return y;
}

Eigen::MatrixXd multi_head_cached(const Eigen::MatrixXd& x, const EncoderLayer& layer, Eigen::Index heads,
                                  const std::optional<Eigen::RowVectorXd>& key_bias, detail::LayerCache* cache) {
    const Eigen::Index hidden = layer.Wq.rows();
    if (x.cols() != layer.Wq.cols() || hidden % heads != 0 || layer.Wo.rows() != hidden || layer.Wo.cols() != hidden)
        throw invalid_argument("multi-head attention dimension mismatch");
    const Eigen::Index d = hidden / heads;
    Eigen::MatrixXd q = linear(x, layer.Wq, layer.bq);
    Eigen::MatrixXd k = linear(x, layer.Wk, layer.bk);
    Eigen::MatrixXd v = linear(x, layer.Wv, layer.bv);
    Eigen::MatrixXd context(x.rows(), hidden);
    if (cache) cache->probs.clear();
    for (Eigen::Index h = 0; h < heads; ++h) {
        AttentionOutput a = attention(q.middleCols(h * d, d), k.middleCols(h * d, d), v.middleCols(h * d, d), key_bias);
        context.middleCols(h * d, d) = a.output;
        if (cache) cache->probs.push_back(std::move(a.weights));
    }
    Eigen::MatrixXd out = linear(context, layer.Wo, layer.bo);
    if (cache) {
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->context = std::move(context);
    }
    return out;
}

}  // namespace

Eigen::MatrixXd multi_head(const Eigen::MatrixXd& x, const EncoderLayer& layer, Eigen::Index heads,
                           const std::optional<Eigen::RowVectorXd>& key_bias) {
    return multi_head_cached(x, layer, heads, key_bias, nullptr);
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta,
                           double eps) {
    return layer_norm_cached(x, gamma, beta, eps, nullptr);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_derivative(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

namespace detail {

EncoderOutput forward(const EncoderStack& stack, std::span<const TokenId> tokens, std::span<const std::uint8_t> mask,
                      ForwardCache* cache) {
    const auto n = static_cast<Eigen::Index>(tokens.size());
    const EncoderConfig& cfg = stack.config;
    if (n == 0) throw invalid_argument("encoder input is empty");
    if (n > cfg.max_positions)
        throw invalid_argument("sequence of " + std::to_string(n) + " tokens exceeds max_positions " +
                               std::to_string(cfg.max_positions) + "; segment the text first");
    if (!mask.empty() && mask.size() != tokens.size()) throw invalid_argument("mask length differs from token count");

    Eigen::MatrixXd e(n, cfg.embed);
    for (Eigen::Index t = 0; t < n; ++t) {
        const TokenId id = tokens[static_cast<std::size_t>(t)];
        if (id < 0 || id >= stack.token_embedding.rows()) throw invalid_argument("token id out of range");
        e.row(t) = stack.token_embedding.row(id) + stack.position_embedding.row(t);
    }
    Eigen::MatrixXd x = linear(e, stack.embed_W, stack.embed_b);

    std::optional<Eigen::RowVectorXd> key_bias;
    if (!mask.empty()) {
        key_bias = Eigen::RowVectorXd::Zero(n);
        for (Eigen::Index t = 0; t < n; ++t)
            if (!mask[static_cast<std::size_t>(t)]) (*key_bias)(t) = kMaskedLogit;
    }

    if (cache) {
        cache->tokens.assign(tokens.begin(), tokens.end());
        cache->embedded = e;
        cache->layers.assign(stack.layers.size(), {});
    }
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const EncoderLayer& layer = stack.layers[l];
        LayerCache* lc = cache ? &cache->layers[l] : nullptr;
        if (lc) lc->input = x;
        const Eigen::MatrixXd attn = multi_head_cached(x, layer, cfg.heads, key_bias, lc);
        Eigen::MatrixXd x1 = layer_norm_cached(x + attn, layer.ln1_gamma, layer.ln1_beta, cfg.layer_norm_eps,
                                               lc ? &lc->ln1 : nullptr);
        Eigen::MatrixXd pre = linear(x1, layer.W1, layer.b1);
        Eigen::MatrixXd act = pre.unaryExpr([](double v) { return gelu(v); });
        const Eigen::MatrixXd ff = linear(act, layer.W2, layer.b2);
        Eigen::MatrixXd x2 = layer_norm_cached(x1 + ff, layer.ln2_gamma, layer.ln2_beta, cfg.layer_norm_eps,
                                               lc ? &lc->ln2 : nullptr);
        if (lc) {
            lc->x1 = std::move(x1);
            lc->ffn_pre = std::move(pre);
            lc->ffn_act = std::move(act);
        }
        x = std::move(x2);
    }

    EncoderOutput out;
    out.logits = stack.head_W * x.row(0).transpose() + stack.head_b;
    const double m = out.logits.maxCoeff();
    const double e0 = std::exp(out.logits(0) - m);
    const double e1 = std::exp(out.logits(1) - m);
    out.prob = e1 / (e0 + e1);
    if (cache) cache->output = std::move(x);
    return out;
}

}  // namespace detail

EncoderOutput EncoderStack::forward_tokens(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask) const {
    return detail::forward(*this, tokens, mask, nullptr);
}

EncoderOutput encoder_forward(std::span<const TokenId> ids, const EncoderStack& stack) {
    if (static_cast<Eigen::Index>(ids.size()) + 2 > stack.config.max_positions)
        throw invalid_argument("input of " + std::to_string(ids.size()) + " tokens does not fit max_positions " +
                               std::to_string(stack.config.max_positions) + " with [CLS]/[SEP]; segment it first");
    std::vector<TokenId> tokens;
    tokens.reserve(ids.size() + 2);
    tokens.push_back(textprep::SubwordVocabulary::kCls);
    tokens.insert(tokens.end(), ids.begin(), ids.end());
    tokens.push_back(textprep::SubwordVocabulary::kSep);
    return stack.forward_tokens(tokens);
}

FragmentScore score_fragment(std::string_view text, const EncoderStack& stack, std::size_t window,
                             std::size_t overlap) {
    const auto ids = textprep::subword_encode(text, stack.vocab);
    const auto spans = textprep::segment_spans(ids.size(), window, overlap);
    std::vector<double> scores;
    scores.reserve(spans.size());
    for (const auto& s : spans)
        scores.push_back(encoder_forward(std::span(ids).subspan(s.start, s.length), stack).prob);
    return max_pool(std::move(scores), spans);
}

EncoderStack EncoderStack::zeros(const EncoderConfig& config, textprep::SubwordVocabulary vocab) {
    EncoderStack s;
    s.config = config;
    s.config.vocab_size = static_cast<Eigen::Index>(vocab.size());
    s.config.validate(0);  // window is checked where one is chosen
    s.vocab = std::move(vocab);
    const Eigen::Index h = config.hidden;
    s.token_embedding = Eigen::MatrixXd::Zero(s.config.vocab_size, config.embed);
    s.position_embedding = Eigen::MatrixXd::Zero(config.max_positions, config.embed);
    s.embed_W = Eigen::MatrixXd::Zero(h, config.embed);
    s.embed_b = Eigen::VectorXd::Zero(h);
    s.layers.resize(static_cast<std::size_t>(config.layers));
    for (auto& l : s.layers) {
        l.Wq = l.Wk = l.Wv = l.Wo = Eigen::MatrixXd::Zero(h, h);
        l.bq = l.bk = l.bv = l.bo = Eigen::VectorXd::Zero(h);
        l.ln1_gamma = l.ln1_beta = l.ln2_gamma = l.ln2_beta = Eigen::VectorXd::Zero(h);
        l.W1 = Eigen::MatrixXd::Zero(config.ffn, h);
        l.b1 = Eigen::VectorXd::Zero(config.ffn);
        l.W2 = Eigen::MatrixXd::Zero(h, config.ffn);
        l.b2 = Eigen::VectorXd::Zero(h);
    }
    s.head_W = Eigen::MatrixXd::Zero(2, h);
    s.head_b = Eigen::VectorXd::Zero(2);
    return s;
}

EncoderStack EncoderStack::random(const EncoderConfig& config, textprep::SubwordVocabulary vocab, std::uint64_t seed) {
    EncoderStack s = zeros(config, std::move(vocab));
    Rng rng(seed);
    // float-representable from the start so a saved stack reloads exactly
    auto fill = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = static_cast<float>(rng.truncated_normal(0.02));
    };
    fill(s.token_embedding);
    fill(s.position_embedding);
    fill(s.embed_W);
    for (auto& l : s.layers) {
        fill(l.Wq);
        fill(l.Wk);
        fill(l.Wv);
        fill(l.Wo);
        fill(l.W1);
        fill(l.W2);
        l.ln1_gamma.setOnes();
        l.ln2_gamma.setOnes();
    }
    fill(s.head_W);
    return s;
}

std::vector<ParamView> EncoderStack::params() {
    std::vector<ParamView> p;
    p.emplace_back("emb.token", token_embedding, true);
    p.emplace_back("emb.position", position_embedding, true);
    p.emplace_back("emb.proj.W", embed_W, true);
    p.emplace_back("emb.proj.b", embed_b, false);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = layers[i];
        const std::string pre = "layer" + std::to_string(i) + ".";
        p.emplace_back(pre + "attn.Wq", l.Wq, true);
        p.emplace_back(pre + "attn.bq", l.bq, false);
        p.emplace_back(pre + "attn.Wk", l.Wk, true);
        p.emplace_back(pre + "attn.bk", l.bk, false);
        p.emplace_back(pre + "attn.Wv", l.Wv, true);
        p.emplace_back(pre + "attn.bv", l.bv, false);
        p.emplace_back(pre + "attn.Wo", l.Wo, true);
        p.emplace_back(pre + "attn.bo", l.bo, false);
        p.emplace_back(pre + "ln1.gamma", l.ln1_gamma, false);
        p.emplace_back(pre + "ln1.beta", l.ln1_beta, false);
        p.emplace_back(pre + "ffn.W1", l.W1, true);
        p.emplace_back(pre + "ffn.b1", l.b1, false);
        p.emplace_back(pre + "ffn.W2", l.W2, true);
        p.emplace_back(pre + "ffn.b2", l.b2, false);
        p.emplace_back(pre + "ln2.gamma", l.ln2_gamma, false);
        p.emplace_back(pre + "ln2.beta", l.ln2_beta, false);
    }
    p.emplace_back("head.W", head_W, true);
    p.emplace_back("head.b", head_b, false);
    return p;
}

WeightFile EncoderStack::to_weights() const {
    WeightFile wf;
    wf.kind = "transformer";
    wf.hyperparameters = {
        {"hidden", config.hidden},   {"heads", config.heads},
        {"layers", config.layers},   {"ffn", config.ffn},
        {"max_positions", config.max_positions},
        {"embed", config.embed},     {"vocab_size", config.vocab_size},
        {"layer_norm_eps", config.layer_norm_eps},
        {"window", window},          {"overlap", overlap},
        {"fine_tune", training},
    };
    wf.extra = {{"vocab", vocab.entries()}};
    wf.put_matrix("emb.token", token_embedding);
    wf.put_matrix("emb.position", position_embedding);
    wf.put_matrix("emb.proj.W", embed_W);
    wf.put_vector("emb.proj.b", embed_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string pre = "layer" + std::to_string(i) + ".";
        wf.put_matrix(pre + "attn.Wq", l.Wq);
        wf.put_vector(pre + "attn.bq", l.bq);
        wf.put_matrix(pre + "attn.Wk", l.Wk);
        wf.put_vector(pre + "attn.bk", l.bk);
        wf.put_matrix(pre + "attn.Wv", l.Wv);
        wf.put_vector(pre + "attn.bv", l.bv);
        wf.put_matrix(pre + "attn.Wo", l.Wo);
        wf.put_vector(pre + "attn.bo", l.bo);
        wf.put_vector(pre + "ln1.gamma", l.ln1_gamma);
        wf.put_vector(pre + "ln1.beta", l.ln1_beta);
        wf.put_matrix(pre + "ffn.W1", l.W1);
        wf.put_vector(pre + "ffn.b1", l.b1);
        wf.put_matrix(pre + "ffn.W2", l.W2);
        wf.put_vector(pre + "ffn.b2", l.b2);
        wf.put_vector(pre + "ln2.gamma", l.ln2_gamma);
        wf.put_vector(pre + "ln2.beta", l.ln2_beta);
    }
    wf.put_matrix("head.W", head_W);
    wf.put_vector("head.b", head_b);
    return wf;
}

EncoderStack EncoderStack::from_weights(const WeightFile& wf) {
    if (wf.kind != "transformer") throw parse_error("expected a transformer weight file, got '" + wf.kind + "'");
    EncoderConfig cfg;
    std::size_t window = textprep::kDefaultWindow, overlap = textprep::kDefaultOverlap;
    std::vector<std::string> entries;
    nlohmann::json training;
    try {
        const auto& hp = wf.hyperparameters;
        cfg.hidden = hp.at("hidden").get<Eigen::Index>();
        cfg.heads = hp.at("heads").get<Eigen::Index>();
        cfg.layers = hp.at("layers").get<Eigen::Index>();
        cfg.ffn = hp.at("ffn").get<Eigen::Index>();
        cfg.max_positions = hp.at("max_positions").get<Eigen::Index>();
        cfg.embed = hp.at("embed").get<Eigen::Index>();
        cfg.layer_norm_eps = hp.value("layer_norm_eps", 1e-12);
        window = hp.value("window", window);
        overlap = hp.value("overlap", overlap);
        training = hp.value("fine_tune", nlohmann::json::object());
        entries = wf.extra.at("vocab").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("transformer manifest: ") + e.what());
    }
    EncoderStack s;
    try {
        s = zeros(cfg, textprep::SubwordVocabulary(std::move(entries)));
    } catch (const Error& e) {
        throw parse_error(std::string("transformer weight file: ") + e.what());
    }
    s.window = window;
    s.overlap = overlap;
    s.training = training;
    try {
        cfg.validate(window);
        (void)textprep::segment_spans(0, window, overlap);
    } catch (const Error& e) {
        throw parse_error(std::string("transformer weight file: ") + e.what());
    }
    for (auto& p : s.params()) {
        const auto& t = wf.tensor(p.name);
        if (static_cast<Eigen::Index>(t.data.size()) != p.values.size())
            throw parse_error("tensor '" + p.name + "' has the wrong size");
    }
    s.token_embedding = wf.matrix("emb.token");
    s.position_embedding = wf.matrix("emb.position");
    s.embed_W = wf.matrix("emb.proj.W");
    s.embed_b = wf.vector("emb.proj.b");
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
        auto& l = s.layers[i];
        const std::string pre = "layer" + std::to_string(i) + ".";
        l.Wq = wf.matrix(pre + "attn.Wq");
        l.bq = wf.vector(pre + "attn.bq");
        l.Wk = wf.matrix(pre + "attn.Wk");
        l.bk = wf.vector(pre + "attn.bk");
        l.Wv = wf.matrix(pre + "attn.Wv");
        l.bv = wf.vector(pre + "attn.bv");
        l.Wo = wf.matrix(pre + "attn.Wo");
        l.bo = wf.vector(pre + "attn.bo");
        l.ln1_gamma = wf.vector(pre + "ln1.gamma");
        l.ln1_beta = wf.vector(pre + "ln1.beta");
        l.W1 = wf.matrix(pre + "ffn.W1");
        l.b1 = wf.vector(pre + "ffn.b1");
        l.W2 = wf.matrix(pre + "ffn.W2");
        l.b2 = wf.vector(pre + "ffn.b2");
        l.ln2_gamma = wf.vector(pre + "ln2.gamma");
        l.ln2_beta = wf.vector(pre + "ln2.beta");
    }
    s.head_W = wf.matrix("head.W");
    s.head_b = wf.vector("head.b");
    return s;
}

}  // namespace asr::transformer
