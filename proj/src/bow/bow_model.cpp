// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "bow/bow_model.hpp"

#include "common/error.hpp"
#include "textprep/textprep.hpp"

namespace asr::bow {

Eigen::VectorXd BowModel::embed(const WordTokens& doc) const { return lsa.project(transform_sparse(tfidf, doc)); }

double BowModel::score(std::string_view text) const {
    return classifier.probability(embed(textprep::tokenize_words(text)));
}

WeightFile BowModel::to_weights() const {
    WeightFile wf;
    wf.kind = "bow";
    wf.hyperparameters = {
        {"k", lsa.k()},
        {"lsa_tolerance", options.lsa.tolerance},
        {"lsa_max_iterations", options.lsa.max_iterations},
        {"lsa_seed", options.lsa.seed},
        {"lsa_converged", lsa.converged},
        {"lsa_iterations", lsa.iterations},
        {"l2", classifier.l2},
        {"lr", options.logreg.lr},
        {"epochs", options.logreg.epochs},
        {"batch", options.logreg.batch},
        {"seed", options.logreg.seed},
    };
    wf.extra = {{"vocab", tfidf.vocab.words()}, {"doc_count", tfidf.doc_count}};
    wf.put_vector("idf", tfidf.idf);
    wf.put_matrix("lsa.components", lsa.components);
    wf.put_vector("logreg.w", classifier.weights);
    wf.put_vector("logreg.b", Eigen::VectorXd::Constant(1, classifier.bias));
    return wf;
}

BowModel BowModel::from_weights(const WeightFile& wf) {
    if (wf.kind != "bow") throw parse_error("expected a bow weight file, got '" + wf.kind + "'");
    BowModel m;
    try {
        m.tfidf.vocab = VocabularyIndex(wf.extra.at("vocab").get<std::vector<std::string>>());
        m.tfidf.doc_count = wf.extra.at("doc_count").get<std::size_t>();
        const auto& hp = wf.hyperparameters;
        m.options.k = hp.at("k").get<Eigen::Index>();
        m.options.lsa.tolerance = hp.value("lsa_tolerance", 1e-10);
        m.options.lsa.max_iterations = hp.value("lsa_max_iterations", 1000);
        m.options.lsa.seed = hp.value("lsa_seed", std::uint64_t{0});
        m.options.logreg.l2 = hp.at("l2").get<double>();
        m.options.logreg.lr = hp.value("lr", 0.1);
        m.options.logreg.epochs = hp.value("epochs", 100);
        m.options.logreg.batch = hp.value("batch", 32);
        m.options.logreg.seed = hp.value("seed", std::uint64_t{0});
        m.lsa.converged = hp.value("lsa_converged", false);
        m.lsa.iterations = hp.value("lsa_iterations", 0);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bow manifest: ") + e.what());
    }
    m.tfidf.idf = wf.vector("idf");
    m.lsa.components = wf.matrix("lsa.components");
    m.classifier.weights = wf.vector("logreg.w");
    m.classifier.bias = wf.vector("logreg.b")(0);
    m.classifier.l2 = m.options.logreg.l2;
    const auto v = static_cast<Eigen::Index>(m.tfidf.vocab.size());
    if (m.tfidf.idf.size() != v || m.lsa.components.cols() != v || m.classifier.weights.size() != m.lsa.components.rows())
        throw parse_error("bow weight file has inconsistent tensor shapes");
    return m;
}

BowModel train_bow(std::span<const std::string> texts, std::span<const int> labels, const BowTrainOptions& options) {
    if (texts.size() != labels.size()) throw invalid_argument("texts and labels differ in length");
    std::vector<WordTokens> docs;
    docs.reserve(texts.size());
    for (const auto& t : texts) docs.push_back(textprep::tokenize_words(t));

    BowModel m;
    m.options = options;
    m.tfidf = fit_tfidf(docs);
    round_to_float(m.tfidf.idf);
    const Eigen::SparseMatrix<double> t = tfidf_matrix(m.tfidf, docs);
    const Eigen::Index k = std::min<Eigen::Index>(options.k, std::min(t.rows(), t.cols()));
    m.options.k = k;
    m.lsa = fit_lsa(t, k, options.lsa);
    round_to_float(m.lsa.components);

    Eigen::MatrixXd features(static_cast<Eigen::Index>(docs.size()), k);
    const Eigen::MatrixXd projected = m.lsa.components * t;  // k x |D|
    features = projected.transpose();
    m.classifier = train_logreg(features, labels, options.logreg);
    round_to_float(m.classifier.weights);
    m.classifier.bias = static_cast<float>(m.classifier.bias);
    return m;
}

FragmentScore BowScorer::score_fragment(std::string_view text) const {
    const auto words = textprep::tokenize_words(text);
    const double s = model_.classifier.probability(model_.embed(words));
    return max_pool({s}, {{0, words.size()}});
}

}  // namespace asr::bow
