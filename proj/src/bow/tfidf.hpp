// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace asr::bow {

using WordTokens = std::vector<std::string>;

class VocabularyIndex {
public:
    VocabularyIndex() = default;
    explicit VocabularyIndex(std::vector<std::string> words);

    std::size_t size() const { return words_.size(); }
    /// -1 when out of vocabulary.
    Eigen::Index row(const std::string& word) const;
    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, Eigen::Index> rows_;
};

struct TfIdfModel {
    VocabularyIndex vocab;
    Eigen::VectorXd idf;  // ln(|D| / df(v))
    std::size_t doc_count = 0;
};

/// Vocabulary is every word seen, in first-seen order; idf is unsmoothed.
TfIdfModel fit_tfidf(std::span<const WordTokens> docs);

/// Column of the tf-idf matrix for one document. Out-of-vocabulary words are
/// dropped before term frequencies are normalised.
Eigen::VectorXd transform(const TfIdfModel& model, const WordTokens& doc);
Eigen::SparseVector<double> transform_sparse(const TfIdfModel& model, const WordTokens& doc);

/// |V| x |D| tf-idf matrix of a document collection under `model`.
Eigen::SparseMatrix<double> tfidf_matrix(const TfIdfModel& model, std::span<const WordTokens> docs);

}  // namespace asr::bow
