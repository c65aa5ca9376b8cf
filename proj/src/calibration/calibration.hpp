// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "json.hpp"
#include "scoring/scorer.hpp"

namespace asr::calibration {

/// Review percentages reported by default.
inline const std::vector<double> kDefaultPercents = {0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 4.0};

struct ScoreDistribution {
    std::vector<double> scores;  // ascending
    std::size_t n() const { return scores.size(); }
};

/// Sorts `scores`; throws on an empty or non-finite input.
ScoreDistribution make_distribution(std::vector<double> scores);

/// Fragment-level scores of every text, in input order. Work is split over
/// `threads` workers; each result lands in its own slot, so the output does
/// not depend on the worker count. 0 picks the hardware concurrency.
std::vector<double> score_all(const Scorer& scorer, std::span<const std::string> texts, std::size_t threads = 0);

ScoreDistribution build_distribution(const Scorer& scorer, const corpus::ThresholdCorpus& corpus,
                                     std::size_t threads = 0);

/// floor(p * n / 100), the most texts a cutoff for p may flag.
std::size_t max_flagged(std::size_t n, double p);

/// Smallest distribution score c with |{s >= c}| / n <= p / 100. When no
/// score qualifies the result is the next double above max(scores).
double cutoff_for_percent(const ScoreDistribution& dist, double p);

std::size_t count_at_or_above(const ScoreDistribution& dist, double cutoff);

/// 100 * |{v : v >= cutoff}| / |scores|.
double efficacy(std::span<const double> validation_scores, double cutoff);
double efficacy(const Scorer& scorer, const corpus::ValidationSet& validation, double cutoff);

struct CutoffEntry {
    double p = 0.0;
    double cutoff = 0.0;
    std::size_t flagged = 0;
    double flagged_fraction = 0.0;
};

struct CutoffTable {
    std::string model_id;
    std::string corpus_fingerprint;
    std::size_t n = 0;
    std::vector<CutoffEntry> entries;  // ascending p

    /// Throws not_found for a p without an entry.
    const CutoffEntry& at(double p) const;

    nlohmann::json to_json() const;
    static CutoffTable from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static CutoffTable load(const std::string& path);
};

/// Content hash of a threshold corpus (length-prefixed texts, FNV-1a 64).
std::string corpus_fingerprint(std::span<const std::string> texts);

CutoffTable build_cutoff_table(const ScoreDistribution& dist, std::span<const double> percents,
                               const std::string& model_id, const std::string& fingerprint);

struct EfficacyPoint {
    double p = 0.0;
    double cutoff = 0.0;
    double flagged_fraction = 0.0;
    double efficacy = 0.0;
};

struct EfficacyCurve {
    std::string model_id;
    std::vector<EfficacyPoint> points;
};

EfficacyCurve efficacy_curve(const CutoffTable& table, std::span<const double> validation_scores);
EfficacyCurve efficacy_curve(const Scorer& scorer, const corpus::ThresholdCorpus& threshold,
                             const corpus::ValidationSet& validation, std::span<const double> percents,
                             std::size_t threads = 0);

/// CSV with header "model,p,cutoff,flagged_fraction,efficacy".
std::string format_csv(std::span<const EfficacyCurve> curves);
nlohmann::json curves_to_json(std::span<const EfficacyCurve> curves);

/// Message when n < 20 / (p_min / 100), i.e. the smallest percentage would
/// flag fewer than 20 texts.
std::optional<std::string> sizing_warning(std::size_t n, std::span<const double> percents);

}  // namespace asr::calibration
