// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <span>
#include <string>
#include <vector>

#include "bow/logreg.hpp"
#include "bow/lsa.hpp"
#include "bow/tfidf.hpp"
#include "common/tensor_file.hpp"
#include "scoring/scorer.hpp"

namespace asr::bow {

struct BowTrainOptions {
    Eigen::Index k = static_cast<Eigen::Index>(kDefaultLsaRank);
    LsaOptions lsa;
    LogRegOptions logreg;
};

/// tf-idf -> LSA -> logistic regression.
struct BowModel {
    TfIdfModel tfidf;
    LsaProjection lsa;
    LogisticClassifier classifier;
    BowTrainOptions options;

    Eigen::VectorXd embed(const WordTokens& doc) const;
    double score(std::string_view text) const;

    WeightFile to_weights() const;
    static BowModel from_weights(const WeightFile& wf);
};

/// Fits all three stages on `texts`. k is clamped to min(|V|, |D|). The
/// returned parameters are rounded to float32, exactly as persisted.
BowModel train_bow(std::span<const std::string> texts, std::span<const int> labels, const BowTrainOptions& options = {});

class BowScorer final : public Scorer {
public:
    BowScorer(BowModel model, std::string model_id) : model_(std::move(model)), id_(std::move(model_id)) {}

    std::string_view kind() const override { return "bow"; }
    const std::string& model_id() const override { return id_; }
    FragmentScore score_fragment(std::string_view text) const override;
    const BowModel& model() const { return model_; }

private:
    BowModel model_;
    std::string id_;
};

}  // namespace asr::bow
