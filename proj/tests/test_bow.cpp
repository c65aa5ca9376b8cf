// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "bow/bow_model.hpp"
#include "bow/logreg.hpp"
#include "bow/lsa.hpp"
#include "bow/tfidf.hpp"
#include "corpus/corpus.hpp"
#include "support.hpp"
#include "textprep/textprep.hpp"

using namespace asr;
using namespace asr::bow;

namespace {

std::vector<WordTokens> docs_of(const std::vector<std::string>& texts) {
    std::vector<WordTokens> d;
    for (const auto& t : texts) d.push_back(textprep::tokenize_words(t));
    return d;
}

// Direct evaluation of tf, idf and their product with std::map counting.
std::map<std::string, double> brute_tfidf(const std::vector<WordTokens>& train, const WordTokens& doc) {
    std::map<std::string, int> df;
    for (const auto& d : train) {
        std::set<std::string> uniq(d.begin(), d.end());
        for (const auto& w : uniq) ++df[w];
    }
    std::map<std::string, int> counts;
    int total = 0;
    for (const auto& w : doc)
        if (df.count(w)) {
            ++counts[w];
            ++total;
        }
    std::map<std::string, double> out;
    for (const auto& [w, c] : counts)
        out[w] = (static_cast<double>(c) / total) * std::log(static_cast<double>(train.size()) / df[w]);
    return out;
}

const std::vector<std::string> kHandCorpus = {
    "the cat sat on the mat",
    "the dog sat on the log",
    "the cat chased the dog",
    "I want to go to the home",
    "the weather is nice the",
    "home is where the heart is",
    "the dog and the cat are friends",
    "nobody likes the rain",
    "the sun will come out tomorrow",
    "the end",
};

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& g) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(g);
    return m;
}

}  // namespace

TEST_CASE("tf-idf matches a brute-force evaluation on a hand corpus") {
    const auto docs = docs_of(kHandCorpus);
    const auto model = fit_tfidf(docs);
    CHECK(model.doc_count == 10);
    // "the" appears in every document, so its idf is exactly zero
    const auto the = model.vocab.row("the");
    REQUIRE(the >= 0);
    CHECK(model.idf(the) == 0.0);

    std::vector<WordTokens> probes = docs;
    probes.push_back(textprep::tokenize_words("the cat wants unseen words"));
    probes.push_back(textprep::tokenize_words("zzz qqq"));
    for (const auto& doc : probes) {
        const Eigen::VectorXd v = transform(model, doc);
        const auto oracle = brute_tfidf(docs, doc);
        for (std::size_t r = 0; r < model.vocab.size(); ++r) {
            const auto& w = model.vocab.words()[r];
            const double expected = oracle.count(w) ? oracle.at(w) : 0.0;
            CHECK(std::abs(v(static_cast<Eigen::Index>(r)) - expected) <= 1e-12);
        }
    }
    for (Eigen::Index r = 0; r < model.idf.size(); ++r) {
        CHECK(model.idf(r) >= 0.0);
        bool in_all = true;
        for (const auto& d : docs)
            in_all = in_all && std::find(d.begin(), d.end(), model.vocab.words()[r]) != d.end();
        CHECK((model.idf(r) == 0.0) == in_all);
    }
}

TEST_CASE("tf-idf worked example") {
    const auto docs = docs_of({"a a b", "a c"});
    const auto model = fit_tfidf(docs);
    REQUIRE(model.vocab.words() == std::vector<std::string>{"a", "b", "c"});
    CHECK(model.idf(0) == 0.0);
    CHECK(std::abs(model.idf(1) - std::log(2.0)) < 1e-15);
    CHECK(std::abs(model.idf(2) - std::log(2.0)) < 1e-15);

    const Eigen::VectorXd ab = transform(model, {"a", "b"});
    CHECK(ab(0) == 0.0);
    CHECK(std::abs(ab(1) - 0.5 * std::log(2.0)) < 1e-15);
    CHECK(ab(2) == 0.0);
    CHECK(transform(model, {"x", "y"}).isZero(0.0));
    CHECK(transform(model, {}).isZero(0.0));

    // columns of the fitted matrix equal per-document transforms
    const Eigen::MatrixXd t = Eigen::MatrixXd(tfidf_matrix(model, docs));
    for (std::size_t d = 0; d < docs.size(); ++d)
        CHECK((t.col(static_cast<Eigen::Index>(d)) - transform(model, docs[d])).cwiseAbs().maxCoeff() == 0.0);

    const auto single = fit_tfidf(docs_of({"word"}));
    CHECK(single.idf(0) == 0.0);
    CHECK(transform(single, {"word"})(0) == 0.0);

    CHECK_ASR_ERROR(fit_tfidf(docs_of({"", "  "})), ErrorCode::InvalidArgument);
}

TEST_CASE("tf sums to one for in-vocabulary docs") {
    // With idf replaced by ones the transform is the tf vector itself.
    auto model = fit_tfidf(docs_of(kHandCorpus));
    model.idf.setOnes();
    for (const auto& t : kHandCorpus) {
        const Eigen::VectorXd tf = transform(model, textprep::tokenize_words(t));
        CHECK(std::abs(tf.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("LSA on random 15x12 matrices matches a dense SVD oracle") {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd t = random_matrix(15, 12, g);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::Index rank = svd.rank();
        REQUIRE(rank == 12);
        const auto lsa = fit_lsa(t, rank);
        CHECK(lsa.converged);

        const Eigen::MatrixXd c = lsa.components;
        const Eigen::MatrixXd eye = c * c.transpose();
        CHECK((eye - Eigen::MatrixXd::Identity(rank, rank)).cwiseAbs().maxCoeff() < 1e-8);

        // Oracle Gram: T^T U U^T T rebuilt from the dense SVD.
        const Eigen::MatrixXd u = svd.matrixU();
        const Eigen::MatrixXd oracle = (u.transpose() * t).transpose() * (u.transpose() * t);
        const Eigen::MatrixXd projected = c * t;
        CHECK((projected.transpose() * projected - oracle).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((projected.transpose() * projected - t.transpose() * t).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((lsa.singular_values - svd.singularValues()).cwiseAbs().maxCoeff() < 1e-8);

        // Truncated rank: leading components equal the oracle's up to sign.
        const auto top = fit_lsa(t, 4);
        for (Eigen::Index r = 0; r < 4; ++r) {
            const double dot = std::abs(top.components.row(r).dot(u.col(r)));
            CHECK(dot > 1.0 - 1e-8);
        }
        // Projection never increases energy.
        for (int p = 0; p < 5; ++p) {
            const Eigen::VectorXd x = random_matrix(15, 1, g);
            CHECK(top.project(x).norm() <= x.norm() + 1e-12);
        }
    }
}

TEST_CASE("LSA rank-1, sign convention, sparse/dense agreement, errors") {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(6, 4);
    t.col(2) << 0.0, -3.0, 1.0, 0.0, 2.0, 0.0;
    const auto lsa = fit_lsa(t, 1);
    const Eigen::VectorXd dir = t.col(2).normalized();
    CHECK(std::abs(std::abs(lsa.components.row(0).dot(dir)) - 1.0) < 1e-10);
    CHECK(lsa.components(0, 1) > 0.0);  // first nonzero entry positive

    std::mt19937_64 g(9);
    Eigen::MatrixXd dense = random_matrix(20, 14, g);
    for (Eigen::Index i = 0; i < dense.size(); ++i)
        if (std::abs(dense.data()[i]) < 0.8) dense.data()[i] = 0.0;
    const auto a = fit_lsa(dense, 5);
    const auto b = fit_lsa(Eigen::SparseMatrix<double>(dense.sparseView()), 5);
    CHECK((a.components - b.components).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index r = 0; r < a.components.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.components.cols(); ++c)
            if (std::abs(a.components(r, c)) > 1e-10) {
                CHECK(a.components(r, c) > 0.0);
                break;
            }
    }

    CHECK_ASR_ERROR(fit_lsa(dense, 0), ErrorCode::InvalidArgument);
    CHECK_ASR_ERROR(fit_lsa(dense, 15), ErrorCode::InvalidArgument);
}

TEST_CASE("logistic regression gradient matches central differences") {
    std::mt19937_64 g(17);
    for (int inst = 0; inst < 6; ++inst) {
        const Eigen::Index n = 12 + inst, k = 3 + inst;
        const Eigen::MatrixXd x = random_matrix(n, k, g);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (auto& v : y) v = static_cast<int>(g() % 2);
        y[0] = 0;
        y[1] = 1;
        const Eigen::VectorXd w = random_matrix(k, 1, g);
        const double b = 0.3 * inst - 0.5;
        const double l2 = 0.05 * inst;
        const auto obj = logreg_objective(w, b, x, y, l2);
        const double h = 1e-6;
        for (Eigen::Index j = 0; j < k; ++j) {
            Eigen::VectorXd wp = w, wm = w;
            wp(j) += h;
            wm(j) -= h;
            const double fd = (logreg_objective(wp, b, x, y, l2).loss - logreg_objective(wm, b, x, y, l2).loss) / (2 * h);
            CHECK(test::rel_error(obj.grad_w(j), fd) < 1e-4);
        }
        const double fdb = (logreg_objective(w, b + h, x, y, l2).loss - logreg_objective(w, b - h, x, y, l2).loss) / (2 * h);
        CHECK(test::rel_error(obj.grad_b, fdb) < 1e-4);
    }
}

TEST_CASE("logistic regression behaviour") {
    Eigen::MatrixXd x(8, 2);
    x << 2, 1, 1.5, 2, 3, 0.5, 2.5, 2.5, -2, -1, -1, -2.5, -3, 0, -1.5, -1.5;
    const std::vector<int> y = {1, 1, 1, 1, 0, 0, 0, 0};
    const auto clf = train_logreg(x, y);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        CHECK((clf.probability(x.row(i).transpose()) > 0.5) == (y[static_cast<std::size_t>(i)] == 1));

    LogRegOptions zero;
    zero.epochs = 0;
    const auto untouched = train_logreg(x, y, zero);
    for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(untouched.probability(x.row(i).transpose()) == 0.5);

    const std::vector<int> one_class(8, 1);
    CHECK_ASR_ERROR(train_logreg(x, one_class), ErrorCode::InvalidArgument);

    const auto again = train_logreg(x, y);
    CHECK(again.weights == clf.weights);
    CHECK(again.bias == clf.bias);
}

TEST_CASE("bow pipeline") {
    const auto corpus = corpus::generate_synthetic(1500, 60, 21);
    std::vector<std::string> texts;
    std::vector<int> labels;
    for (const auto& r : corpus) {
        texts.push_back(r.text);
        labels.push_back(r.label);
    }
    BowTrainOptions opt;
    opt.k = 20;
    const auto model = train_bow(texts, labels, opt);
    BowScorer scorer(model, "bow-test");

    double pos = 0, neg = 0;
    std::size_t np = 0, nn = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const double s = scorer.score(texts[i]);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        (labels[i] ? pos : neg) += s;
        ++(labels[i] ? np : nn);
    }
    CHECK(pos / static_cast<double>(np) > neg / static_cast<double>(nn));

    // word order does not matter, exactly
    const std::string text = "I want to hurt myself tonight because nothing helps";
    std::vector<std::string> words = textprep::tokenize_words(text);
    std::mt19937_64 g(3);
    for (int k = 0; k < 5; ++k) {
        std::shuffle(words.begin(), words.end(), g);
        std::string shuffled;
        for (const auto& w : words) shuffled += w + " ";
        CHECK(scorer.score(shuffled) == scorer.score(text));
    }

    // empty text scores sigmoid(b)
    CHECK(scorer.score("") == sigmoid(model.classifier.bias));
    BowModel zeroed = model;
    zeroed.classifier.bias = 0.0;
    CHECK(BowScorer(zeroed, "z").score("") == 0.5);

    // identical weight files on retraining, and exact reload
    const auto again = train_bow(texts, labels, opt);
    CHECK(again.to_weights().serialize() == model.to_weights().serialize());
    const auto reloaded = BowModel::from_weights(WeightFile::parse(model.to_weights().serialize()));
    for (std::size_t i = 0; i < 50; ++i) CHECK(reloaded.score(texts[i]) == model.score(texts[i]));
}
