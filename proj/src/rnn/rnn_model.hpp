// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bow/tfidf.hpp"
#include "common/params.hpp"
#include "common/tensor_file.hpp"
#include "scoring/scorer.hpp"

namespace asr::rnn {

/// Gate order in W, U and b is (input, forget, candidate, output).
struct LstmCellParams {
    Eigen::MatrixXd W;  // 4h x in
    Eigen::MatrixXd U;  // 4h x h
    Eigen::VectorXd b;  // 4h

    Eigen::Index hidden() const { return U.cols(); }
    Eigen::Index input() const { return W.cols(); }
    void validate() const;
};

struct LstmState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

LstmState lstm_cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                    const LstmCellParams& p);

/// layers[l][0] runs left to right, layers[l][1] right to left.
struct BiLstmStack {
    std::array<std::array<LstmCellParams, 2>, 2> layers;

    Eigen::Index hidden() const { return layers[0][0].hidden(); }
    void validate() const;
};

/// Columns are time steps: in is e x T, out is 2h x T (forward half on top).
Eigen::MatrixXd bilstm_forward(const Eigen::MatrixXd& embedded, const BiLstmStack& stack);

struct AttentionParams {
    Eigen::MatrixXd W;  // a x 2h
    Eigen::VectorXd v;  // a
};

struct AttentionResult {
    Eigen::VectorXd context;  // 2h
    Eigen::VectorXd weights;  // T, sums to 1
};

/// e_t = v . tanh(W s_t); alpha = softmax(e); context = sum_t alpha_t s_t.
AttentionResult additive_attention(const Eigen::MatrixXd& states, const AttentionParams& p);

struct EmbeddingTable {
    bow::VocabularyIndex vocab;
    Eigen::MatrixXd matrix;  // |V| x e

    Eigen::Index dim() const { return matrix.cols(); }
};

/// GloVe text format: a word followed by e floats per line.
EmbeddingTable load_glove(const std::string& path);

struct RnnConfig {
    Eigen::Index embed = 32;
    Eigen::Index hidden = 512;  // per direction
    Eigen::Index attention = 64;
};

struct RnnTrainOptions {
    RnnConfig config;
    double lr = 5e-3;
    int epochs = 2;
    int batch = 32;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
    // Optional pretrained vectors; words not covered get random rows.
    const EmbeddingTable* pretrained = nullptr;
};

struct RnnModel {
    EmbeddingTable embedding;
    BiLstmStack stack;
    AttentionParams attention;
    Eigen::MatrixXd head_W;  // 2 x 2h
    Eigen::VectorXd head_b;  // 2
    RnnConfig config;
    RnnTrainOptions train_options;

    /// Zero parameters of the given geometry over `words`.
    static RnnModel zeros(std::vector<std::string> words, const RnnConfig& config);
    static RnnModel random(std::vector<std::string> words, const RnnConfig& config, std::uint64_t seed);

    std::vector<ParamView> params();

    /// Embedding rows for a token sequence; -1 marks out-of-vocabulary words.
    std::vector<Eigen::Index> lookup(const bow::WordTokens& words) const;
    Eigen::MatrixXd embed(std::span<const Eigen::Index> rows) const;

    Eigen::Vector2d logits(std::span<const Eigen::Index> rows) const;
    /// Probability of class 1; 0.0 for text without words.
    double score(std::string_view text) const;

    /// Cross-entropy of one example; gradients are accumulated into `grad`,
    /// which must share this model's geometry.
    double loss_and_grad(std::span<const Eigen::Index> rows, int label, RnnModel& grad) const;

    WeightFile to_weights() const;
    static RnnModel from_weights(const WeightFile& wf);
};

RnnModel train_rnn(std::span<const std::string> texts, std::span<const int> labels, const RnnTrainOptions& options);

class RnnScorer final : public Scorer {
public:
    RnnScorer(RnnModel model, std::string model_id) : model_(std::move(model)), id_(std::move(model_id)) {}

    std::string_view kind() const override { return "rnn"; }
    const std::string& model_id() const override { return id_; }
    FragmentScore score_fragment(std::string_view text) const override;

private:
    RnnModel model_;
    std::string id_;
};

}  // namespace asr::rnn
