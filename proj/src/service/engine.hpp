// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "calibration/calibration.hpp"
#include "common/rng.hpp"
#include "corpus/corpus.hpp"
#include "scoring/scorer.hpp"
#include "service/store.hpp"

namespace asr::service {

/// Milliseconds since the Unix epoch; injectable for tests.
using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

struct SubmittedResponse {
    std::string response_id;
    std::string item_id;
    std::string text;
};

/// Blank-line separated paragraphs with surrounding whitespace trimmed;
/// whitespace-only paragraphs are dropped.
std::vector<std::string> fragment_response(std::string_view text);

/// Stable id of the index-th fragment of a response.
std::string fragment_id(std::string_view response_id, std::size_t index);

struct FlagDecision {
    std::string fragment_id;
    double score = 0.0;
    double cutoff = 0.0;
    bool flagged = false;
};

enum class Outcome { TrueAsr, FalsePositive };
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct Adjudication {
    Outcome outcome = Outcome::FalsePositive;
    std::optional<corpus::RubricCategory> category;
    std::string reviewer_id;
    std::int64_t adjudicated_at = 0;
};

struct AdjudicationRequest {
    Outcome outcome = Outcome::FalsePositive;
    std::optional<corpus::RubricCategory> category;
    std::string reviewer_id;
};

enum class ItemStatus { Pending, Adjudicated };
std::string_view to_string(ItemStatus s);

struct ReviewItem {
    std::string fragment_id;
    std::string response_id;
    std::string item_id;
    std::size_t fragment_index = 0;
    std::string text;
    double score = 0.0;
    double cutoff = 0.0;
    std::vector<double> segment_scores;
    textprep::SegmentSpan best_segment;
    std::string model_id;
    std::int64_t received_at = 0;
    std::uint64_t seq = 0;  // arrival order
    std::optional<Adjudication> adjudication;

    ItemStatus status() const { return adjudication ? ItemStatus::Adjudicated : ItemStatus::Pending; }
    nlohmann::json to_json() const;
    static ReviewItem from_json(const nlohmann::json& j);
};

struct QueuePage {
    std::vector<ReviewItem> items;
    std::size_t page = 0;
    std::size_t page_size = 0;
    std::size_t total = 0;
};

struct MetricsSnapshot {
    std::uint64_t fragments_processed = 0;
    std::uint64_t flagged = 0;
    std::uint64_t adjudicated = 0;
    std::uint64_t responses = 0;
    std::size_t pending = 0;
    double flagged_fraction = 0.0;
    double latency_p50_ms = 0.0;
    double latency_p95_ms = 0.0;
    double throughput_per_second = 0.0;

    nlohmann::json to_json() const;
};

struct ServiceConfig {
    std::string data_dir;
    std::size_t max_payload_bytes = 1 << 20;
    std::size_t default_page_size = 50;
    std::size_t max_page_size = 1000;
    std::size_t snapshot_every = 10000;  // log records between compactions
    std::size_t latency_reservoir = 4096;
    Clock clock;                          // defaults to the system clock
    CrashHook crash_hook;                 // tests only
};

/// The review-queue engine: scoring, routing, persistence and adjudication.
/// Scoring runs concurrently; queue mutations go through one writer lock.
class TriageEngine {
public:
    explicit TriageEngine(ServiceConfig config);

    /// Installs a scorer and its cutoff table with p as the active entry.
    /// The table must have been calibrated for this scorer.
    void configure(std::shared_ptr<const Scorer> scorer, calibration::CutoffTable table, double p);
    bool configured() const;
    /// Switches the active percentage; `model` must name the loaded scorer.
    void set_active_percent(const std::string& model, double p);
    nlohmann::json calibration_json() const;

    std::vector<FlagDecision> submit(const SubmittedResponse& r);

    /// status: nullopt lists everything. Order: score desc, arrival asc, id asc.
    QueuePage list_queue(std::optional<ItemStatus> status, std::size_t page, std::size_t page_size) const;
    ReviewItem get_item(const std::string& fragment_id) const;
    ReviewItem adjudicate(const std::string& fragment_id, const AdjudicationRequest& request);
    /// Adjudicated items with adjudicated_at >= since, as corpus JSONL.
    std::string export_adjudications(std::int64_t since) const;

    MetricsSnapshot metrics() const;
    /// Forces a snapshot and truncates the log.
    void compact();

    const ServiceConfig& config() const { return config_; }

private:
    struct Active {
        std::shared_ptr<const Scorer> scorer;
        calibration::CutoffTable table;
        double p = 0.0;
        double cutoff = 0.0;
    };

    std::int64_t now() const { return config_.clock(); }
    void crash(CrashPoint p) const {
        if (config_.crash_hook) config_.crash_hook(p);
    }
    void replay(const Store::Replay& r);
    void apply_enqueue(ReviewItem item);
    nlohmann::json state_json() const;
    void maybe_compact();
    void record_latency(double ms);

    ServiceConfig config_;

    mutable std::shared_mutex active_mu_;
    std::shared_ptr<const Active> active_;

    mutable std::mutex queue_mu_;  // single writer; guards store_, items_, next_seq_
    Store store_;
    std::map<std::string, ReviewItem> items_;
    std::uint64_t next_seq_ = 0;

    mutable std::mutex metrics_mu_;
    std::uint64_t processed_ = 0, flagged_ = 0, responses_ = 0;
    std::vector<double> reservoir_;
    std::uint64_t latency_seen_ = 0;
    Rng reservoir_rng_{0x5eed};
    std::optional<std::chrono::steady_clock::time_point> first_submit_, last_submit_;
};

}  // namespace asr::service
