// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "bow/lsa.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace asr::bow {
namespace {

// Dense Gram matrices are cheaper than two sparse products per iteration when
// the vocabulary is small.
constexpr Eigen::Index kDenseGramLimit = 2500;

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& z) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    return qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), z.cols());
}

void canonicalize_signs(Eigen::MatrixXd& rows) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        const double scale = rows.row(r).cwiseAbs().maxCoeff();
        if (scale == 0.0) continue;
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            // entries at rounding level do not count as "first nonzero"
            if (std::abs(rows(r, c)) > 1e-10 * scale) {
                if (rows(r, c) < 0) rows.row(r) *= -1.0;
                break;
            }
        }
    }
}

}  // namespace

LsaProjection fit_lsa(const Eigen::SparseMatrix<double>& t, Eigen::Index k, const LsaOptions& options) {
    const Eigen::Index m = t.rows();
    const Eigen::Index n = t.cols();
    if (k < 1 || k > std::min(m, n))
        throw invalid_argument("LSA rank k=" + std::to_string(k) + " must lie in [1, " + std::to_string(std::min(m, n)) + "]");

    const Eigen::Index block = std::min<Eigen::Index>(k + options.oversample, std::min(m, n));
    const Eigen::SparseMatrix<double> tt = t.transpose();

    Eigen::MatrixXd gram;
    const bool dense_gram = m <= kDenseGramLimit;
    if (dense_gram) gram = Eigen::MatrixXd(t * tt);
    auto apply_tt = [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
        if (dense_gram) return gram * x;
        return t * Eigen::MatrixXd(tt * x);
    };

    Rng rng(options.seed);
    Eigen::MatrixXd q(m, block);
    for (Eigen::Index c = 0; c < block; ++c)
        for (Eigen::Index r = 0; r < m; ++r) q(r, c) = rng.normal();
    q = thin_q(q);

    LsaProjection out;
    Eigen::VectorXd lambda;
    for (int it = 1; it <= options.max_iterations; ++it) {
        Eigen::MatrixXd z = apply_tt(q);
        // Rayleigh-Ritz on the current subspace
        Eigen::MatrixXd b = q.transpose() * z;
        b = 0.5 * (b + b.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
        Eigen::VectorXd evals = eig.eigenvalues().reverse();
        Eigen::MatrixXd evecs = eig.eigenvectors().rowwise().reverse();
        q = q * evecs;
        z = z * evecs;
        lambda = evals.cwiseMax(0.0);

        const double top = std::max(lambda(0), std::numeric_limits<double>::min());
        double worst = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) worst = std::max(worst, (z.col(i) - evals(i) * q.col(i)).norm());
        out.iterations = it;
        if (worst <= options.tolerance * top) {
            out.converged = true;
            break;
        }
        q = thin_q(z);
    }

    out.components = q.leftCols(k).transpose();
    canonicalize_signs(out.components);
    out.singular_values = lambda.head(k).cwiseSqrt();
    return out;
}

LsaProjection fit_lsa(const Eigen::MatrixXd& t, Eigen::Index k, const LsaOptions& options) {
    return fit_lsa(Eigen::SparseMatrix<double>(t.sparseView()), k, options);
}

}  // namespace asr::bow
