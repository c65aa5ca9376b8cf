// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

namespace asr::bow {

struct LogisticClassifier {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double l2 = 0.0;

    double decision(const Eigen::VectorXd& x) const { return weights.dot(x) + bias; }
    double probability(const Eigen::VectorXd& x) const;
};

struct LogRegOptions {
    double l2 = 1e-4;
    double lr = 0.1;
    int epochs = 100;
    int batch = 32;
    std::uint64_t seed = 0;
};

struct LogRegObjective {
    double loss = 0.0;
    Eigen::VectorXd grad_w;
    double grad_b = 0.0;
};

double sigmoid(double z);

/// Mean negative log-likelihood over the rows of `x` plus (l2/2)*|w|^2, and
/// its analytic gradient. The bias is not regularised.
LogRegObjective logreg_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                                 std::span<const int> y, double l2);

/// Mini-batch gradient descent from zero weights; rows of `x` are examples.
LogisticClassifier train_logreg(const Eigen::MatrixXd& x, std::span<const int> y, const LogRegOptions& options = {});

}  // namespace asr::bow
