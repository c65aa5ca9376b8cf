// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "bow/tfidf.hpp"

#include <cmath>
#include <map>

#include "common/error.hpp"

namespace asr::bow {

VocabularyIndex::VocabularyIndex(std::vector<std::string> words) : words_(std::move(words)) {
    rows_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (!rows_.emplace(words_[i], static_cast<Eigen::Index>(i)).second)
            throw validation_error("duplicate vocabulary word '" + words_[i] + "'");
    }
}

Eigen::Index VocabularyIndex::row(const std::string& word) const {
    auto it = rows_.find(word);
    return it == rows_.end() ? -1 : it->second;
}

TfIdfModel fit_tfidf(std::span<const WordTokens> docs) {
    std::vector<std::string> words;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::size_t> df;
    std::vector<std::size_t> last_doc;  // dedupes words within one document
    bool any_word = false;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (const auto& w : docs[d]) {
            any_word = true;
            auto [it, inserted] = index.emplace(w, words.size());
            if (inserted) {
                words.push_back(w);
                df.push_back(0);
                last_doc.push_back(SIZE_MAX);
            }
            const std::size_t v = it->second;
            if (last_doc[v] != d) {
                last_doc[v] = d;
                ++df[v];
            }
        }
    }
    if (!any_word) throw invalid_argument("fit_tfidf needs at least one non-empty document");

    TfIdfModel m;
    m.doc_count = docs.size();
    m.idf.resize(static_cast<Eigen::Index>(words.size()));
    for (std::size_t v = 0; v < words.size(); ++v)
        m.idf(static_cast<Eigen::Index>(v)) = std::log(static_cast<double>(m.doc_count) / static_cast<double>(df[v]));
    m.vocab = VocabularyIndex(std::move(words));
    return m;
}

namespace {

// (row, count) pairs in ascending row order plus the in-vocabulary total.
std::map<Eigen::Index, double> in_vocab_counts(const TfIdfModel& model, const WordTokens& doc, double& total) {
    std::map<Eigen::Index, double> counts;
    total = 0.0;
    for (const auto& w : doc) {
        const Eigen::Index r = model.vocab.row(w);
        if (r < 0) continue;
        counts[r] += 1.0;
        total += 1.0;
    }
    return counts;
}

}  // namespace

Eigen::SparseVector<double> transform_sparse(const TfIdfModel& model, const WordTokens& doc) {
    Eigen::SparseVector<double> out(static_cast<Eigen::Index>(model.vocab.size()));
    double total = 0.0;
    const auto counts = in_vocab_counts(model, doc, total);
    if (total == 0.0) return out;
    out.reserve(static_cast<Eigen::Index>(counts.size()));
    for (const auto& [row, count] : counts) {
        const double value = (count / total) * model.idf(row);
        if (value != 0.0) out.insertBack(row) = value;
    }
    return out;
}

Eigen::VectorXd transform(const TfIdfModel& model, const WordTokens& doc) {
    return Eigen::VectorXd(transform_sparse(model, doc));
}

Eigen::SparseMatrix<double> tfidf_matrix(const TfIdfModel& model, std::span<const WordTokens> docs) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto col = transform_sparse(model, docs[d]);
        for (Eigen::SparseVector<double>::InnerIterator it(col); it; ++it)
            triplets.emplace_back(it.index(), static_cast<Eigen::Index>(d), it.value());
    }
    Eigen::SparseMatrix<double> t(static_cast<Eigen::Index>(model.vocab.size()), static_cast<Eigen::Index>(docs.size()));
    t.setFromTriplets(triplets.begin(), triplets.end());
    return t;
}

}  // namespace asr::bow
