// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "transformer/attention.hpp"

#include <cmath>

#include "common/error.hpp"

namespace asr::transformer {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - m).exp().matrix();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

AttentionOutput attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                          const std::optional<Eigen::RowVectorXd>& key_bias) {
    if (q.cols() == 0 || k.cols() == 0) throw invalid_argument("attention needs a positive key dimension");
    if (q.cols() != k.cols()) throw invalid_argument("query and key dimensions differ");
    if (k.rows() != v.rows()) throw invalid_argument("keys and values differ in row count");
    if (key_bias && key_bias->size() != k.rows()) throw invalid_argument("mask length must equal the key count");
    Eigen::MatrixXd logits = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
    if (key_bias) logits.rowwise() += *key_bias;
    AttentionOutput out;
    out.weights = softmax_rows(logits);
    out.output = out.weights * v;
    return out;
}

}  // namespace asr::transformer
