// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "transformer/encoder.hpp"

namespace asr::transformer::detail {

struct LayerNormCache {
    Eigen::MatrixXd xhat;       // n x hidden
    Eigen::VectorXd inv_sigma;  // n
};

struct LayerCache {
    Eigen::MatrixXd input;               // n x hidden
    Eigen::MatrixXd q, k, v;             // n x hidden
    std::vector<Eigen::MatrixXd> probs;  // per head, n x n
    Eigen::MatrixXd context;             // n x hidden, heads concatenated
    LayerNormCache ln1;
    Eigen::MatrixXd x1;
    Eigen::MatrixXd ffn_pre;  // n x ffn
    Eigen::MatrixXd ffn_act;
    LayerNormCache ln2;
};

struct ForwardCache {
    std::vector<TokenId> tokens;
    Eigen::MatrixXd embedded;  // n x embed
    std::vector<LayerCache> layers;
    Eigen::MatrixXd output;  // n x hidden
};

/// The single forward implementation; fills `cache` when non-null.
EncoderOutput forward(const EncoderStack& stack, std::span<const TokenId> tokens, std::span<const std::uint8_t> mask,
                      ForwardCache* cache);

}  // namespace asr::transformer::detail
