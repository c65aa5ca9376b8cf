// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "transformer/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "transformer/forward_cache.hpp"

namespace asr::transformer {

void FineTuneConfig::validate() const {
    // lr == 0 is accepted as a no-op run (parameters stay bit-identical).
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw invalid_argument("fine-tune lr must be non-negative");
    if (batch < 1) throw invalid_argument("fine-tune batch must be at least 1");
    if (epochs < 1) throw invalid_argument("fine-tune epochs must be at least 1");
    if (weight_decay < 0.0) throw invalid_argument("weight_decay must be non-negative");
}

nlohmann::json FineTuneConfig::to_json() const {
    return {{"lr", lr},
            {"batch", batch},
            {"epochs", epochs},
            {"weight_decay", weight_decay},
            {"schedule", "linear-to-zero"},
            {"seed", seed}};
}

std::vector<LabeledSegment> make_training_segments(std::span<const std::string> texts, std::span<const int> labels,
                                                   const textprep::SubwordVocabulary& vocab, std::size_t window,
                                                   std::size_t overlap) {
    if (texts.size() != labels.size()) throw invalid_argument("texts and labels differ in length");
    std::vector<LabeledSegment> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw invalid_argument("labels must be 0 or 1");
        const auto ids = textprep::subword_encode(texts[i], vocab);
        for (const auto& s : textprep::segment_spans(ids.size(), window, overlap))
            out.push_back({std::vector<TokenId>(ids.begin() + static_cast<std::ptrdiff_t>(s.start),
                                                ids.begin() + static_cast<std::ptrdiff_t>(s.start + s.length)),
                           labels[i]});
    }
    return out;
}

namespace {

std::vector<TokenId> wrap(std::span<const TokenId> ids) {
    std::vector<TokenId> t;
    t.reserve(ids.size() + 2);
    t.push_back(textprep::SubwordVocabulary::kCls);
    t.insert(t.end(), ids.begin(), ids.end());
    t.push_back(textprep::SubwordVocabulary::kSep);
    return t;
}

double cross_entropy(const Eigen::Vector2d& logits, int label) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log(std::exp(logits(0) - m) + std::exp(logits(1) - m));
    return lse - logits(label);
}

// dy -> dx through y = gamma * xhat + beta; accumulates gamma/beta grads.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const detail::LayerNormCache& c,
                                    const Eigen::VectorXd& gamma, Eigen::VectorXd& dgamma, Eigen::VectorXd& dbeta) {
    dgamma += (dy.array() * c.xhat.array()).colwise().sum().transpose().matrix();
    dbeta += dy.colwise().sum().transpose();
    const Eigen::MatrixXd dxhat = dy.array().rowwise() * gamma.transpose().array();
    const auto h = static_cast<double>(dy.cols());
    Eigen::MatrixXd dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double s1 = dxhat.row(r).sum();
        const double s2 = dxhat.row(r).dot(c.xhat.row(r));
        dx.row(r) = (c.inv_sigma(r) / h) * (h * dxhat.row(r).array() - s1 - c.xhat.row(r).array() * s2).matrix();
    }
    return dx;
}

}  // namespace

double loss_and_grad(const EncoderStack& stack, std::span<const TokenId> ids, int label, EncoderStack& grad) {
    if (label != 0 && label != 1) throw invalid_argument("label must be 0 or 1");
    const auto tokens = wrap(ids);
    detail::ForwardCache cache;
    const EncoderOutput out = detail::forward(stack, tokens, {}, &cache);
    const double loss = cross_entropy(out.logits, label);

    Eigen::Vector2d dlogits(1.0 - out.prob, out.prob);
    dlogits(label) -= 1.0;
    grad.head_W += dlogits * cache.output.row(0);
    grad.head_b += dlogits;

    const Eigen::Index n = static_cast<Eigen::Index>(tokens.size());
    const Eigen::Index heads = stack.config.heads;
    const Eigen::Index d = stack.config.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, stack.config.hidden);
    dx.row(0) = (stack.head_W.transpose() * dlogits).transpose();

    for (std::size_t li = stack.layers.size(); li-- > 0;) {
        const EncoderLayer& L = stack.layers[li];
        EncoderLayer& G = grad.layers[li];
        const detail::LayerCache& c = cache.layers[li];

        // feed-forward sub-block
        const Eigen::MatrixXd dy2 = layer_norm_backward(dx, c.ln2, L.ln2_gamma, G.ln2_gamma, G.ln2_beta);
        G.W2 += dy2.transpose() * c.ffn_act;
        G.b2 += dy2.colwise().sum().transpose();
        Eigen::MatrixXd dpre = dy2 * L.W2;
        for (Eigen::Index i = 0; i < dpre.size(); ++i) dpre.data()[i] *= gelu_derivative(c.ffn_pre.data()[i]);
        G.W1 += dpre.transpose() * c.x1;
        G.b1 += dpre.colwise().sum().transpose();
        const Eigen::MatrixXd dx1 = dy2 + dpre * L.W1;

        // attention sub-block
        const Eigen::MatrixXd dy1 = layer_norm_backward(dx1, c.ln1, L.ln1_gamma, G.ln1_gamma, G.ln1_beta);
        G.Wo += dy1.transpose() * c.context;
        G.bo += dy1.colwise().sum().transpose();
        const Eigen::MatrixXd dctx = dy1 * L.Wo;
        Eigen::MatrixXd dq(n, stack.config.hidden), dk(n, stack.config.hidden), dv(n, stack.config.hidden);
        for (Eigen::Index h = 0; h < heads; ++h) {
            const auto& P = c.probs[static_cast<std::size_t>(h)];
            const Eigen::MatrixXd dc = dctx.middleCols(h * d, d);
            const Eigen::MatrixXd dP = dc * c.v.middleCols(h * d, d).transpose();
            dv.middleCols(h * d, d) = P.transpose() * dc;
            const Eigen::VectorXd rowdot = (dP.array() * P.array()).rowwise().sum();
            const Eigen::MatrixXd dS = P.array() * (dP.colwise() - rowdot).array();
            dq.middleCols(h * d, d) = scale * (dS * c.k.middleCols(h * d, d));
            dk.middleCols(h * d, d) = scale * (dS.transpose() * c.q.middleCols(h * d, d));
        }
        G.Wq += dq.transpose() * c.input;
        G.Wk += dk.transpose() * c.input;
        G.Wv += dv.transpose() * c.input;
        G.bq += dq.colwise().sum().transpose();
        G.bk += dk.colwise().sum().transpose();
        G.bv += dv.colwise().sum().transpose();
        dx = dy1 + dq * L.Wq + dk * L.Wk + dv * L.Wv;
    }

    grad.embed_W += dx.transpose() * cache.embedded;
    grad.embed_b += dx.colwise().sum().transpose();
    const Eigen::MatrixXd de = dx * stack.embed_W;
    for (Eigen::Index t = 0; t < n; ++t) {
        grad.token_embedding.row(tokens[static_cast<std::size_t>(t)]) += de.row(t);
        grad.position_embedding.row(t) += de.row(t);
    }
    return loss;
}

double mean_loss(const EncoderStack& stack, std::span<const LabeledSegment> data) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : data) total += cross_entropy(encoder_forward(s.ids, stack).logits, s.label);
    return total / static_cast<double>(data.size());
}

EncoderStack fine_tune(std::span<const LabeledSegment> data, const FineTuneConfig& cfg, EncoderStack stack,
                       FineTuneReport* report, const StepObserver& on_step) {
    cfg.validate();
    bool has0 = false, has1 = false;
    for (const auto& s : data) (s.label ? has1 : has0) = true;
    if (!has0 || !has1) throw invalid_argument("fine-tuning needs segments of both classes");
    const std::size_t max_len = static_cast<std::size_t>(stack.config.max_positions) - 2;
    for (const auto& s : data)
        if (s.ids.size() > max_len) throw invalid_argument("training segment longer than max_positions allows");

    EncoderStack grad = EncoderStack::zeros(stack.config, stack.vocab);
    auto params = stack.params();
    auto grads = grad.params();
    AdamW opt(params);

    const std::size_t per_epoch = (data.size() + cfg.batch - 1) / cfg.batch;
    const double total = static_cast<double>(per_epoch * cfg.epochs);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < data.size(); b += cfg.batch) {
            const std::size_t end = std::min(data.size(), b + cfg.batch);
            zero_all(grads);
            double loss = 0.0;
            for (std::size_t i = b; i < end; ++i) loss += loss_and_grad(stack, data[order[i]].ids, data[order[i]].label, grad);
            const double inv = 1.0 / static_cast<double>(end - b);
            scale_all(grads, inv);
            const double lr = cfg.lr * (1.0 - static_cast<double>(step) / total);
            opt.step(params, grads, lr, cfg.weight_decay);
            if (report) {
                report->step_losses.push_back(loss * inv);
                report->learning_rates.push_back(lr);
            }
            ++step;
            if (on_step) on_step(step, stack);
        }
    }
    if (report) report->steps = step;
    stack.training = cfg.to_json();
    return stack;
}

}  // namespace asr::transformer
