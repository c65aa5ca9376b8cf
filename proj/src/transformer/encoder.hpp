// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/params.hpp"
#include "common/tensor_file.hpp"
#include "scoring/scorer.hpp"
#include "textprep/textprep.hpp"

namespace asr::transformer {

using textprep::TokenId;

/// Defaults are the small-model geometry: a third of base BERT's hidden
/// size, heads and feed-forward width, with a factorised 128-d embedding.
struct EncoderConfig {
    Eigen::Index hidden = 256;
    Eigen::Index heads = 4;
    Eigen::Index layers = 12;
    Eigen::Index ffn = 1024;
    Eigen::Index max_positions = 512;
    Eigen::Index embed = 128;
    Eigen::Index vocab_size = 0;
    double layer_norm_eps = 1e-12;

    Eigen::Index head_dim() const { return hidden / heads; }
    /// Throws unless hidden % heads == 0 and max_positions >= window + 2.
    void validate(std::size_t window = textprep::kDefaultWindow) const;
};

/// Linear maps follow the (out x in) convention: y = W x + b.
struct EncoderLayer {
    Eigen::MatrixXd Wq, Wk, Wv, Wo;  // hidden x hidden
    Eigen::VectorXd bq, bk, bv, bo;
    Eigen::VectorXd ln1_gamma, ln1_beta;
    Eigen::MatrixXd W1;  // ffn x hidden
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;  // hidden x ffn
    Eigen::VectorXd b2;
    Eigen::VectorXd ln2_gamma, ln2_beta;
};

/// Projections of one attention head: rows [h*d, (h+1)*d) of Wq/Wk/Wv and the
/// matching column block of Wo.
struct AttentionHeadParams {
    Eigen::MatrixXd Wq, Wk, Wv;  // d x hidden
    Eigen::VectorXd bq, bk, bv;
    Eigen::MatrixXd Wo_block;  // hidden x d
};

AttentionHeadParams head_params(const EncoderLayer& layer, Eigen::Index head, Eigen::Index heads);

/// Multi-head self-attention of the token rows of `x` (n x hidden),
/// including the output projection. Rows of `key_bias` mask padded keys.
Eigen::MatrixXd multi_head(const Eigen::MatrixXd& x, const EncoderLayer& layer, Eigen::Index heads,
                           const std::optional<Eigen::RowVectorXd>& key_bias = std::nullopt);

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta,
                           double eps);

/// Exact (erf) GELU.
double gelu(double x);
double gelu_derivative(double x);

struct EncoderOutput {
    Eigen::Vector2d logits;
    double prob = 0.5;  // softmax(logits)[1]
};

struct EncoderStack {
    EncoderConfig config;
    textprep::SubwordVocabulary vocab;
    Eigen::MatrixXd token_embedding;     // vocab x embed
    Eigen::MatrixXd position_embedding;  // max_positions x embed
    Eigen::MatrixXd embed_W;             // hidden x embed
    Eigen::VectorXd embed_b;
    std::vector<EncoderLayer> layers;
    Eigen::MatrixXd head_W;  // 2 x hidden, reads position 0
    Eigen::VectorXd head_b;
    std::size_t window = textprep::kDefaultWindow;
    std::size_t overlap = textprep::kDefaultOverlap;
    nlohmann::json training = nlohmann::json::object();  // recorded fine-tune settings

    /// All-zero parameters (layer-norm scales included).
    static EncoderStack zeros(const EncoderConfig& config, textprep::SubwordVocabulary vocab);
    /// Truncated-normal(0.02) weights, zero biases, unit layer-norm scales.
    static EncoderStack random(const EncoderConfig& config, textprep::SubwordVocabulary vocab, std::uint64_t seed);

    std::vector<ParamView> params();

    /// Runs a full token sequence (specials already in place). `mask` marks
    /// real tokens with 1; omitted means all real.
    EncoderOutput forward_tokens(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask = {}) const;

    WeightFile to_weights() const;
    static EncoderStack from_weights(const WeightFile& wf);
};

/// Wraps content ids as [CLS] ids [SEP] and runs the stack.
/// Throws when |ids| + 2 exceeds max_positions.
EncoderOutput encoder_forward(std::span<const TokenId> ids, const EncoderStack& stack);

/// Max over the encoder probabilities of every window of the fragment.
FragmentScore score_fragment(std::string_view text, const EncoderStack& stack, std::size_t window,
                             std::size_t overlap);

class TransformerScorer final : public Scorer {
public:
    TransformerScorer(EncoderStack stack, std::string model_id) : stack_(std::move(stack)), id_(std::move(model_id)) {}

    std::string_view kind() const override { return "transformer"; }
    const std::string& model_id() const override { return id_; }
    FragmentScore score_fragment(std::string_view text) const override {
        return transformer::score_fragment(text, stack_, stack_.window, stack_.overlap);
    }
    const EncoderStack& stack() const { return stack_; }

private:
    EncoderStack stack_;
    std::string id_;
};

}  // namespace asr::transformer
