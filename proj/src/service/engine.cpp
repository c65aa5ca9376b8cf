// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "service/engine.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/hash.hpp"

namespace asr::service {
namespace {

bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(b, e - b + 1);
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

std::int64_t system_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::vector<std::string> fragment_response(std::string_view text) {
    std::vector<std::string> out;
    std::size_t para_start = std::string_view::npos, pos = 0;
    auto flush = [&](std::size_t end) {
        if (para_start == std::string_view::npos) return;
        const auto t = trim(text.substr(para_start, end - para_start));
        if (!t.empty()) out.emplace_back(t);
        para_start = std::string_view::npos;
    };
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        if (is_blank(text.substr(pos, end - pos))) {
            flush(pos);
        } else if (para_start == std::string_view::npos) {
            para_start = pos;
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    flush(text.size());
    return out;
}

std::string fragment_id(std::string_view response_id, std::size_t index) {
    Fnv1a64 h;
    h.update(response_id);
    h.update("#");
    h.update(std::to_string(index));
    return "frag-" + h.hex();
}

std::string_view to_string(Outcome o) { return o == Outcome::TrueAsr ? "true_asr" : "false_positive"; }

Outcome outcome_from_string(std::string_view s) {
    if (s == "true_asr") return Outcome::TrueAsr;
    if (s == "false_positive") return Outcome::FalsePositive;
    throw validation_error("outcome must be \"true_asr\" or \"false_positive\", got \"" + std::string(s) + "\"");
}

std::string_view to_string(ItemStatus s) { return s == ItemStatus::Pending ? "pending" : "adjudicated"; }

nlohmann::json ReviewItem::to_json() const {
    nlohmann::json j = {
        {"fragment_id", fragment_id},
        {"response_id", response_id},
        {"item_id", item_id},
        {"fragment_index", fragment_index},
        {"text", text},
        {"score", score},
        {"cutoff", cutoff},
        {"segment_scores", segment_scores},
        {"best_segment", {{"start", best_segment.start}, {"length", best_segment.length}}},
        {"model", model_id},
        {"received_at", received_at},
        {"seq", seq},
        {"status", to_string(status())},
        {"adjudication", nullptr},
    };
    if (adjudication) {
        j["adjudication"] = {
            {"outcome", to_string(adjudication->outcome)},
            {"category", adjudication->category ? nlohmann::json(corpus::to_string(*adjudication->category)) : nlohmann::json()},
            {"reviewer_id", adjudication->reviewer_id},
            {"adjudicated_at", adjudication->adjudicated_at},
        };
    }
    return j;
}

ReviewItem ReviewItem::from_json(const nlohmann::json& j) {
    ReviewItem r;
    try {
        r.fragment_id = j.at("fragment_id").get<std::string>();
        r.response_id = j.at("response_id").get<std::string>();
        r.item_id = j.at("item_id").get<std::string>();
        r.fragment_index = j.at("fragment_index").get<std::size_t>();
        r.text = j.at("text").get<std::string>();
        r.score = j.at("score").get<double>();
        r.cutoff = j.at("cutoff").get<double>();
        r.segment_scores = j.at("segment_scores").get<std::vector<double>>();
        r.best_segment = {j.at("best_segment").at("start").get<std::size_t>(),
                          j.at("best_segment").at("length").get<std::size_t>()};
        r.model_id = j.at("model").get<std::string>();
        r.received_at = j.at("received_at").get<std::int64_t>();
        r.seq = j.at("seq").get<std::uint64_t>();
        const auto& a = j.at("adjudication");
        if (!a.is_null()) {
            Adjudication adj;
            adj.outcome = outcome_from_string(a.at("outcome").get<std::string>());
            if (!a.at("category").is_null()) adj.category = corpus::category_from_string(a.at("category").get<std::string>());
            adj.reviewer_id = a.at("reviewer_id").get<std::string>();
            adj.adjudicated_at = a.at("adjudicated_at").get<std::int64_t>();
            r.adjudication = adj;
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("review item: ") + e.what());
    }
    return r;
}

nlohmann::json MetricsSnapshot::to_json() const {
    return {{"fragments_processed", fragments_processed},
            {"flagged", flagged},
            {"adjudicated", adjudicated},
            {"responses", responses},
            {"pending", pending},
            {"flagged_fraction", flagged_fraction},
            {"latency_ms", {{"p50", latency_p50_ms}, {"p95", latency_p95_ms}}},
            {"throughput_per_second", throughput_per_second}};
}

TriageEngine::TriageEngine(ServiceConfig config)
    : config_(std::move(config)), store_(config_.data_dir, config_.crash_hook) {
    if (config_.data_dir.empty()) throw config_error("service data directory is not set");
    if (!config_.clock) config_.clock = system_clock_ms;
    if (config_.latency_reservoir == 0) config_.latency_reservoir = 1;
    std::lock_guard lock(queue_mu_);
    replay(store_.open());
}

void TriageEngine::replay(const Store::Replay& r) {
    if (!r.snapshot.is_null()) {
        try {
            next_seq_ = r.snapshot.at("next_seq").get<std::uint64_t>();
            for (const auto& j : r.snapshot.at("items")) {
                auto item = ReviewItem::from_json(j);
                items_.emplace(item.fragment_id, std::move(item));
            }
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("snapshot: ") + e.what());
        }
    }
    for (const auto& rec : r.records) {
        const std::string op = rec.value("op", "");
        if (op == "enqueue") {
            apply_enqueue(ReviewItem::from_json(rec.at("item")));
        } else if (op == "adjudicate") {
            const auto id = rec.at("fragment_id").get<std::string>();
            auto it = items_.find(id);
            if (it == items_.end()) throw parse_error("queue log adjudicates unknown item " + id);
            // a replayed duplicate (after compaction crashed) is already applied
            if (!it->second.adjudication) it->second.adjudication = ReviewItem::from_json(rec.at("item")).adjudication;
        } else {
            throw parse_error("queue log has unknown op '" + op + "'");
        }
    }
    for (const auto& [id, item] : items_) next_seq_ = std::max(next_seq_, item.seq + 1);
}

void TriageEngine::apply_enqueue(ReviewItem item) {
    // ids are deterministic, so a retried submission collapses here
    items_.emplace(item.fragment_id, std::move(item));
}

void TriageEngine::configure(std::shared_ptr<const Scorer> scorer, calibration::CutoffTable table, double p) {
    if (!scorer) throw config_error("no scorer given");
    if (table.model_id != scorer->model_id())
        throw config_error("cutoff table was calibrated for model '" + table.model_id + "' but the loaded model is '" +
                           scorer->model_id() + "'");
    const double cutoff = table.at(p).cutoff;
    auto a = std::make_shared<Active>(Active{std::move(scorer), std::move(table), p, cutoff});
    std::unique_lock lock(active_mu_);
    active_ = std::move(a);
}

bool TriageEngine::configured() const {
    std::shared_lock lock(active_mu_);
    return active_ != nullptr;
}

void TriageEngine::set_active_percent(const std::string& model, double p) {
    std::unique_lock lock(active_mu_);
    if (!active_) throw unavailable("no model is configured");
    if (model != active_->scorer->model_id())
        throw validation_error("model '" + model + "' is not loaded; active model is '" + active_->scorer->model_id() + "'");
    const double cutoff = [&] {
        try {
            return active_->table.at(p).cutoff;
        } catch (const Error&) {
            throw validation_error("no calibrated cutoff for p = " + std::to_string(p));
        }
    }();
    active_ = std::make_shared<Active>(Active{active_->scorer, active_->table, p, cutoff});
}

nlohmann::json TriageEngine::calibration_json() const {
    std::shared_lock lock(active_mu_);
    if (!active_) throw unavailable("no model is configured");
    return {{"model", active_->scorer->model_id()},
            {"kind", active_->scorer->kind()},
            {"p", active_->p},
            {"cutoff", active_->cutoff},
            {"table", active_->table.to_json()}};
}

void TriageEngine::record_latency(double ms) {
    // caller holds metrics_mu_; classic reservoir sampling
    ++latency_seen_;
    if (reservoir_.size() < config_.latency_reservoir) {
        reservoir_.push_back(ms);
    } else {
        const auto j = reservoir_rng_.below(latency_seen_);
        if (j < reservoir_.size()) reservoir_[j] = ms;
    }
}

std::vector<FlagDecision> TriageEngine::submit(const SubmittedResponse& r) {
    std::shared_ptr<const Active> active;
    {
        std::shared_lock lock(active_mu_);
        active = active_;
    }
    if (!active) throw unavailable("no model is configured; load weights and a cutoff table first");
    if (r.response_id.empty()) throw validation_error("response_id must not be empty");
    if (r.text.size() > config_.max_payload_bytes)
        throw Error(ErrorCode::PayloadTooLarge, "response text is " + std::to_string(r.text.size()) +
                                                    " bytes; the limit is " + std::to_string(config_.max_payload_bytes));

    const auto started = std::chrono::steady_clock::now();
    const std::int64_t received = now();
    const auto fragments = fragment_response(r.text);

    std::vector<FlagDecision> decisions;
    std::vector<ReviewItem> to_enqueue;
    std::vector<double> latencies;
    for (std::size_t i = 0; i < fragments.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        FragmentScore fs = active->scorer->score_fragment(fragments[i]);
        latencies.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        FlagDecision d{fragment_id(r.response_id, i), fs.score, active->cutoff, fs.score >= active->cutoff};
        if (d.flagged) {
            ReviewItem item;
            item.fragment_id = d.fragment_id;
            item.response_id = r.response_id;
            item.item_id = r.item_id;
            item.fragment_index = i;
            item.text = fragments[i];
            item.score = fs.score;
            item.cutoff = active->cutoff;
            item.best_segment = fs.best_segment();
            item.segment_scores = std::move(fs.segment_scores);
            item.model_id = active->scorer->model_id();
            item.received_at = received;
            to_enqueue.push_back(std::move(item));
        }
        decisions.push_back(std::move(d));
    }
    crash(CrashPoint::AfterScore);

    if (!to_enqueue.empty()) {
        std::lock_guard lock(queue_mu_);
        for (auto& item : to_enqueue) {
            if (items_.count(item.fragment_id)) continue;
            item.seq = next_seq_;
            store_.append({{"op", "enqueue"}, {"item", item.to_json()}});
            ++next_seq_;
            apply_enqueue(std::move(item));
        }
        maybe_compact();
    }

    {
        std::lock_guard lock(metrics_mu_);
        processed_ += decisions.size();
        for (const auto& d : decisions) flagged_ += d.flagged ? 1 : 0;
        ++responses_;
        for (double ms : latencies) record_latency(ms);
        if (!first_submit_ || started < *first_submit_) first_submit_ = started;
        const auto end = std::chrono::steady_clock::now();
        if (!last_submit_ || end > *last_submit_) last_submit_ = end;
    }
    crash(CrashPoint::BeforeAck);
    return decisions;
}

QueuePage TriageEngine::list_queue(std::optional<ItemStatus> status, std::size_t page, std::size_t page_size) const {
    if (page_size == 0) page_size = config_.default_page_size;
    if (page_size > config_.max_page_size)
        throw validation_error("page_size may not exceed " + std::to_string(config_.max_page_size));
    std::vector<const ReviewItem*> sel;
    std::lock_guard lock(queue_mu_);
    for (const auto& [id, item] : items_)
        if (!status || item.status() == *status) sel.push_back(&item);
    std::sort(sel.begin(), sel.end(), [](const ReviewItem* a, const ReviewItem* b) {
        if (a->score != b->score) return a->score > b->score;
        if (a->received_at != b->received_at) return a->received_at < b->received_at;
        if (a->seq != b->seq) return a->seq < b->seq;
        return a->fragment_id < b->fragment_id;
    });
    QueuePage out{{}, page, page_size, sel.size()};
    const std::size_t begin = std::min(sel.size(), page * page_size);
    const std::size_t end = std::min(sel.size(), begin + page_size);
    for (std::size_t i = begin; i < end; ++i) out.items.push_back(*sel[i]);
    return out;
}

ReviewItem TriageEngine::get_item(const std::string& id) const {
    std::lock_guard lock(queue_mu_);
    const auto it = items_.find(id);
    if (it == items_.end()) throw not_found("no review item '" + id + "'");
    return it->second;
}

ReviewItem TriageEngine::adjudicate(const std::string& id, const AdjudicationRequest& req) {
    if (req.reviewer_id.empty()) throw validation_error("reviewer_id is required");
    if (req.outcome == Outcome::TrueAsr && !req.category)
        throw validation_error("a true_asr adjudication needs a rubric category");
    if (req.outcome == Outcome::FalsePositive && req.category)
        throw validation_error("rubric categories apply to true_asr adjudications only");

    std::lock_guard lock(queue_mu_);
    const auto it = items_.find(id);
    if (it == items_.end()) throw not_found("no review item '" + id + "'");
    ReviewItem& item = it->second;
    if (item.adjudication) {
        const auto& a = *item.adjudication;
        if (a.outcome == req.outcome && a.category == req.category && a.reviewer_id == req.reviewer_id) return item;
        throw conflict("item '" + id + "' was already adjudicated as " + std::string(to_string(a.outcome)) + " by " +
                       a.reviewer_id);
    }
    ReviewItem updated = item;
    updated.adjudication = Adjudication{req.outcome, req.category, req.reviewer_id, now()};
    store_.append({{"op", "adjudicate"}, {"fragment_id", id}, {"item", updated.to_json()}});
    item = updated;
    maybe_compact();
    return item;
}

std::string TriageEngine::export_adjudications(std::int64_t since) const {
    std::vector<const ReviewItem*> sel;
    std::lock_guard lock(queue_mu_);
    for (const auto& [id, item] : items_)
        if (item.adjudication && item.adjudication->adjudicated_at >= since) sel.push_back(&item);
    std::sort(sel.begin(), sel.end(), [](const ReviewItem* a, const ReviewItem* b) {
        if (a->adjudication->adjudicated_at != b->adjudication->adjudicated_at)
            return a->adjudication->adjudicated_at < b->adjudication->adjudicated_at;
        return a->fragment_id < b->fragment_id;
    });
    std::vector<corpus::LabeledText> out;
    for (const auto* item : sel) {
        const bool asr = item->adjudication->outcome == Outcome::TrueAsr;
        out.push_back({item->fragment_id, item->text, asr ? 1 : 0, corpus::Source::Student,
                       asr ? item->adjudication->category : std::nullopt});
    }
    return corpus::format_labeled(out);
}

MetricsSnapshot TriageEngine::metrics() const {
    MetricsSnapshot m;
    {
        std::lock_guard lock(queue_mu_);
        for (const auto& [id, item] : items_) {
            if (item.adjudication) ++m.adjudicated; else ++m.pending;
        }
    }
    std::lock_guard lock(metrics_mu_);
    m.fragments_processed = processed_;
    m.flagged = flagged_;
    m.responses = responses_;
    m.flagged_fraction = processed_ ? static_cast<double>(flagged_) / static_cast<double>(processed_) : 0.0;
    m.latency_p50_ms = percentile(reservoir_, 0.50);
    m.latency_p95_ms = percentile(reservoir_, 0.95);
    if (first_submit_ && last_submit_) {
        const double secs = std::chrono::duration<double>(*last_submit_ - *first_submit_).count();
        if (secs > 0) m.throughput_per_second = static_cast<double>(processed_) / secs;
    }
    return m;
}

nlohmann::json TriageEngine::state_json() const {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& [id, item] : items_) items.push_back(item.to_json());
    return {{"version", 1}, {"next_seq", next_seq_}, {"items", items}};
}

void TriageEngine::maybe_compact() {
    if (config_.snapshot_every > 0 && store_.log_records() >= config_.snapshot_every) store_.compact(state_json());
}

void TriageEngine::compact() {
    std::lock_guard lock(queue_mu_);
    store_.compact(state_json());
}

}  // namespace asr::service
