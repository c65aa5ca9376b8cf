// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace asr::service {

/// Points at which tests may abort a write to simulate a crash.
enum class CrashPoint {
    AfterScore,       // fragments scored, nothing written yet
    MidAppend,        // half of a log line is on disk
    AfterAppend,      // log line durable, in-memory state not yet updated
    BeforeAck,        // everything durable, response not yet returned
    AfterSnapshot,    // snapshot renamed into place, log not yet truncated
};

using CrashHook = std::function<void(CrashPoint)>;

/// Append-only JSONL log plus a compacting snapshot in one directory.
/// Every append is fsync'd before it returns. Not thread-safe; the engine
/// serialises access.
class Store {
public:
    struct Replay {
        nlohmann::json snapshot;               // null when absent
        std::vector<nlohmann::json> records;   // log records after the snapshot
        bool dropped_torn_tail = false;
    };

    explicit Store(std::string dir, CrashHook hook = {});
    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    /// Reads the snapshot and the log. A torn final line (a crash mid-append)
    /// is discarded and truncated away; a corrupt line elsewhere is an error.
    Replay open();

    void append(const nlohmann::json& record);
    /// Writes `state` as the new snapshot, then empties the log.
    void compact(const nlohmann::json& state);

    std::size_t log_records() const { return log_records_; }
    const std::string& dir() const { return dir_; }

private:
    std::string log_path() const;
    std::string snapshot_path() const;
    void crash(CrashPoint p) const {
        if (hook_) hook_(p);
    }

    std::string dir_;
    CrashHook hook_;
    int fd_ = -1;
    std::size_t log_records_ = 0;
};

}  // namespace asr::service
