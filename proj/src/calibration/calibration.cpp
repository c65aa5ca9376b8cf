// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "calibration/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/tensor_file.hpp"

namespace asr::calibration {
namespace {

void check_percent(double p) {
    if (!(p > 0.0 && p <= 100.0)) throw invalid_argument("review percentage must lie in (0, 100], got " + std::to_string(p));
}

}  // namespace

ScoreDistribution make_distribution(std::vector<double> scores) {
    if (scores.empty()) throw invalid_argument("score distribution needs at least one score");
    for (double s : scores)
        if (!std::isfinite(s)) throw invalid_argument("score distribution contains a non-finite score");
    std::sort(scores.begin(), scores.end());
    return {std::move(scores)};
}

std::vector<double> score_all(const Scorer& scorer, std::span<const std::string> texts, std::size_t threads) {
    std::vector<double> out(texts.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(1, texts.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < texts.size(); ++i) out[i] = scorer.score(texts[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            try {
                for (std::size_t i; (i = next.fetch_add(1)) < texts.size();) out[i] = scorer.score(texts[i]);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

ScoreDistribution build_distribution(const Scorer& scorer, const corpus::ThresholdCorpus& corpus, std::size_t threads) {
    if (corpus.texts.empty()) throw invalid_argument("threshold corpus is empty");
    return make_distribution(score_all(scorer, corpus.texts, threads));
}

std::size_t max_flagged(std::size_t n, double p) {
    check_percent(p);
    // the epsilon absorbs representation error in p (0.3 * 1000 / 100)
    const double raw = p * static_cast<double>(n) / 100.0;
    return std::min(n, static_cast<std::size_t>(std::floor(raw + 1e-9)));
}

double cutoff_for_percent(const ScoreDistribution& dist, double p) {
    const auto& s = dist.scores;
    if (s.empty()) throw invalid_argument("score distribution is empty");
    const std::size_t k = max_flagged(s.size(), p);
    const double above_max = std::nextafter(s.back(), INFINITY);
    if (k == 0) return above_max;
    const std::size_t j = s.size() - k;
    const double c = s[j];
    if (j == 0 || s[j - 1] != c) return c;
    // c is tied below position j, so using it would flag more than k
    const auto next = std::upper_bound(s.begin() + static_cast<std::ptrdiff_t>(j), s.end(), c);
    return next == s.end() ? above_max : *next;
}

std::size_t count_at_or_above(const ScoreDistribution& dist, double cutoff) {
    return static_cast<std::size_t>(dist.scores.end() -
                                    std::lower_bound(dist.scores.begin(), dist.scores.end(), cutoff));
}

double efficacy(std::span<const double> validation_scores, double cutoff) {
    if (validation_scores.empty()) throw invalid_argument("validation set is empty");
    const auto hit = std::count_if(validation_scores.begin(), validation_scores.end(),
                                   [&](double v) { return v >= cutoff; });
    return 100.0 * static_cast<double>(hit) / static_cast<double>(validation_scores.size());
}

double efficacy(const Scorer& scorer, const corpus::ValidationSet& validation, double cutoff) {
    std::vector<std::string> texts;
    for (const auto& r : validation.texts) texts.push_back(r.text);
    return efficacy(score_all(scorer, texts, 1), cutoff);
}

const CutoffEntry& CutoffTable::at(double p) const {
    for (const auto& e : entries)
        if (e.p == p) return e;
    throw not_found("no cutoff calibrated for p = " + std::to_string(p));
}

nlohmann::json CutoffTable::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : entries)
        rows.push_back({{"p", e.p}, {"cutoff", e.cutoff}, {"flagged", e.flagged}, {"flagged_fraction", e.flagged_fraction}});
    return {{"model", model_id}, {"threshold_fingerprint", corpus_fingerprint}, {"n", n}, {"entries", rows}};
}

CutoffTable CutoffTable::from_json(const nlohmann::json& j) {
    CutoffTable t;
    try {
        t.model_id = j.at("model").get<std::string>();
        t.corpus_fingerprint = j.at("threshold_fingerprint").get<std::string>();
        t.n = j.at("n").get<std::size_t>();
        for (const auto& r : j.at("entries"))
            t.entries.push_back({r.at("p").get<double>(), r.at("cutoff").get<double>(), r.at("flagged").get<std::size_t>(),
                                 r.at("flagged_fraction").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("cutoff table: ") + e.what());
    }
    if (t.entries.empty()) throw validation_error("cutoff table has no entries");
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        check_percent(t.entries[i].p);
        if (i > 0 && !(t.entries[i].p > t.entries[i - 1].p && t.entries[i].cutoff <= t.entries[i - 1].cutoff))
            throw validation_error("cutoff table must have ascending p and non-increasing cutoffs");
    }
    return t;
}

void CutoffTable::save(const std::string& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

CutoffTable CutoffTable::load(const std::string& path) {
    const std::string content = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("cutoff table '" + path + "': " + e.what());
    }
    return from_json(j);
}

std::string corpus_fingerprint(std::span<const std::string> texts) {
    Fnv1a64 h;
    for (const auto& t : texts) {
        const std::string len = std::to_string(t.size()) + ":";
        h.update(len);
        h.update(t);
    }
    return h.hex();
}

CutoffTable build_cutoff_table(const ScoreDistribution& dist, std::span<const double> percents,
                               const std::string& model_id, const std::string& fingerprint) {
    if (percents.empty()) throw invalid_argument("no review percentages given");
    std::vector<double> ps(percents.begin(), percents.end());
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    CutoffTable t{model_id, fingerprint, dist.n(), {}};
    for (double p : ps) {
        const double c = cutoff_for_percent(dist, p);
        const std::size_t k = count_at_or_above(dist, c);
        t.entries.push_back({p, c, k, static_cast<double>(k) / static_cast<double>(dist.n())});
    }
    return t;
}

EfficacyCurve efficacy_curve(const CutoffTable& table, std::span<const double> validation_scores) {
    EfficacyCurve curve{table.model_id, {}};
    for (const auto& e : table.entries)
        curve.points.push_back({e.p, e.cutoff, e.flagged_fraction, efficacy(validation_scores, e.cutoff)});
    return curve;
}

EfficacyCurve efficacy_curve(const Scorer& scorer, const corpus::ThresholdCorpus& threshold,
                             const corpus::ValidationSet& validation, std::span<const double> percents,
                             std::size_t threads) {
    for (double p : percents) check_percent(p);
    const auto dist = build_distribution(scorer, threshold, threads);
    const auto table = build_cutoff_table(dist, percents, scorer.model_id(), corpus_fingerprint(threshold.texts));
    std::vector<std::string> texts;
    for (const auto& r : validation.texts) texts.push_back(r.text);
    return efficacy_curve(table, score_all(scorer, texts, threads));
}

std::string format_csv(std::span<const EfficacyCurve> curves) {
    std::string out = "model,p,cutoff,flagged_fraction,efficacy\n";
    char buf[256];
    for (const auto& c : curves)
        for (const auto& pt : c.points) {
            std::snprintf(buf, sizeof buf, ",%g,%.17g,%.6f,%.4f\n", pt.p, pt.cutoff, pt.flagged_fraction, pt.efficacy);
            out += c.model_id + buf;
        }
    return out;
}

nlohmann::json curves_to_json(std::span<const EfficacyCurve> curves) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : curves) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& pt : c.points)
            pts.push_back({{"p", pt.p}, {"cutoff", pt.cutoff}, {"flagged_fraction", pt.flagged_fraction}, {"efficacy", pt.efficacy}});
        arr.push_back({{"model", c.model_id}, {"points", pts}});
    }
    return arr;
}

std::optional<std::string> sizing_warning(std::size_t n, std::span<const double> percents) {
    if (percents.empty()) return std::nullopt;
    const double p_min = *std::min_element(percents.begin(), percents.end());
    const double needed = 20.0 / (p_min / 100.0);
    if (static_cast<double>(n) + 1e-9 >= needed) return std::nullopt;
    return "threshold corpus has " + std::to_string(n) + " texts; p = " + std::to_string(p_min) +
           "% needs at least " + std::to_string(static_cast<std::size_t>(std::ceil(needed - 1e-9))) +
           " so that at least 20 texts are flagged";
}

}  // namespace asr::calibration
