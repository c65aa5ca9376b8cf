// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "bow/logreg.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace asr::bow {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double LogisticClassifier::probability(const Eigen::VectorXd& x) const { return sigmoid(decision(x)); }

namespace {

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

LogRegObjective logreg_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                                 std::span<const int> y, double l2) {
    LogRegObjective out;
    out.grad_w = Eigen::VectorXd::Zero(w.size());
    const auto n = static_cast<double>(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double z = x.row(i).dot(w) + b;
        const double yi = y[static_cast<std::size_t>(i)];
        out.loss += softplus(z) - yi * z;
        const double r = sigmoid(z) - yi;
        out.grad_w += r * x.row(i).transpose();
        out.grad_b += r;
    }
    out.loss = out.loss / n + 0.5 * l2 * w.squaredNorm();
    out.grad_w = out.grad_w / n + l2 * w;
    out.grad_b /= n;
    return out;
}

LogisticClassifier train_logreg(const Eigen::MatrixXd& x, std::span<const int> y, const LogRegOptions& options) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw invalid_argument("features and labels differ in length");
    if (y.size() < 2) throw invalid_argument("logistic regression needs at least two examples");
    bool has[2] = {false, false};
    for (int label : y) {
        if (label != 0 && label != 1) throw invalid_argument("labels must be 0 or 1");
        has[label] = true;
    }
    if (!has[0] || !has[1]) throw invalid_argument("logistic regression needs both classes present");
    if (options.batch < 1) throw invalid_argument("batch size must be positive");

    LogisticClassifier clf;
    clf.weights = Eigen::VectorXd::Zero(x.cols());
    clf.l2 = options.l2;

    Rng rng(options.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto batch = static_cast<std::size_t>(options.batch);

    Eigen::VectorXd grad_w(x.cols());
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            grad_w.setZero();
            double grad_b = 0.0;
            for (std::size_t j = start; j < end; ++j) {
                const Eigen::Index i = order[j];
                const double r = sigmoid(x.row(i).dot(clf.weights) + clf.bias) - y[static_cast<std::size_t>(i)];
                grad_w += r * x.row(i).transpose();
                grad_b += r;
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            clf.weights -= options.lr * (grad_w * scale + options.l2 * clf.weights);
            clf.bias -= options.lr * grad_b * scale;
        }
    }
    return clf;
}

}  // namespace asr::bow
