// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <optional>

namespace asr::transformer {

/// Additive bias for masked key positions.
inline constexpr double kMaskedLogit = -1e9;

struct AttentionOutput {
    Eigen::MatrixXd output;   // n_q x d_v
    Eigen::MatrixXd weights;  // n_q x n_k, rows sum to 1
};

/// Row-wise softmax, stabilised by subtracting each row's maximum.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// softmax(Q K^T / sqrt(d) + mask) V. `key_bias`, when given, is added to
/// every row of the logits (0 for visible keys, kMaskedLogit for padding).
AttentionOutput attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                          const std::optional<Eigen::RowVectorXd>& key_bias = std::nullopt);

}  // namespace asr::transformer
