// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>

namespace asr::bow {

inline constexpr std::size_t kDefaultLsaRank = 500;

struct LsaOptions {
    double tolerance = 1e-10;  // eigen-residual relative to the largest eigenvalue
    int max_iterations = 1000;
    int oversample = 10;
    std::uint64_t seed = 0;
};

struct LsaProjection {
    Eigen::MatrixXd components;  // k x |V|, orthonormal rows
    Eigen::VectorXd singular_values;
    int iterations = 0;
    bool converged = false;

    Eigen::Index k() const { return components.rows(); }
    Eigen::VectorXd project(const Eigen::VectorXd& tfidf) const { return components * tfidf; }
    Eigen::VectorXd project(const Eigen::SparseVector<double>& tfidf) const { return components * tfidf; }
};

/// Top-k left singular vectors of `t` by orthogonal (subspace) iteration on
/// t t^T with Rayleigh-Ritz rotation. Rows are ordered by descending singular
/// value; the first significant entry of every row is positive.
LsaProjection fit_lsa(const Eigen::SparseMatrix<double>& t, Eigen::Index k, const LsaOptions& options = {});
LsaProjection fit_lsa(const Eigen::MatrixXd& t, Eigen::Index k, const LsaOptions& options = {});

}  // namespace asr::bow
