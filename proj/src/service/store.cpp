// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "service/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

#include "common/error.hpp"
#include "common/tensor_file.hpp"

namespace asr::service {
namespace {

void write_all(int fd, const char* data, std::size_t n, const std::string& what) {
    while (n > 0) {
        const ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw io_error("write to " + what + " failed: " + std::strerror(errno));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void fsync_dir(const std::string& dir) {
    const int d = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (d >= 0) {
        ::fsync(d);
        ::close(d);
    }
}

}  // namespace

Store::Store(std::string dir, CrashHook hook) : dir_(std::move(dir)), hook_(std::move(hook)) {}

Store::~Store() {
    if (fd_ >= 0) ::close(fd_);
}

std::string Store::log_path() const { return (std::filesystem::path(dir_) / "queue.log").string(); }
std::string Store::snapshot_path() const { return (std::filesystem::path(dir_) / "snapshot.json").string(); }

Store::Replay Store::open() {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw io_error("cannot create data directory '" + dir_ + "': " + ec.message());

    Replay out;
    if (std::filesystem::exists(snapshot_path())) {
        try {
            out.snapshot = nlohmann::json::parse(read_file(snapshot_path()));
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("snapshot '" + snapshot_path() + "' is corrupt: " + e.what());
        }
    }

    std::string log;
    if (std::filesystem::exists(log_path())) log = read_file(log_path());
    std::size_t pos = 0, good_end = 0, line_no = 0;
    while (pos < log.size()) {
        const std::size_t nl = log.find('\n', pos);
        ++line_no;
        if (nl == std::string::npos) {
            out.dropped_torn_tail = true;  // no terminator: the write never finished
            break;
        }
        const std::string_view line(log.data() + pos, nl - pos);
        try {
            out.records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("queue log line " + std::to_string(line_no) + " is corrupt: " + e.what());
        }
        pos = nl + 1;
        good_end = pos;
    }

    fd_ = ::open(log_path().c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw io_error("cannot open queue log '" + log_path() + "': " + std::strerror(errno));
    if (out.dropped_torn_tail) {
        if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0)
            throw io_error("cannot truncate torn queue log: " + std::string(std::strerror(errno)));
        ::fsync(fd_);
    }
    log_records_ = out.records.size();
    return out;
}

void Store::append(const nlohmann::json& record) {
    if (fd_ < 0) throw io_error("store is not open");
    const std::string line = record.dump() + "\n";
    if (hook_) {
        // the torn-write case: a prefix reaches the disk, then the process dies
        const std::size_t half = line.size() / 2;
        write_all(fd_, line.data(), half, log_path());
        try {
            crash(CrashPoint::MidAppend);
        } catch (...) {
            ::fsync(fd_);
            throw;
        }
        write_all(fd_, line.data() + half, line.size() - half, log_path());
    } else {
        write_all(fd_, line.data(), line.size(), log_path());
    }
    if (::fsync(fd_) != 0) throw io_error("fsync of queue log failed: " + std::string(std::strerror(errno)));
    ++log_records_;
    crash(CrashPoint::AfterAppend);
}

void Store::compact(const nlohmann::json& state) {
    write_file_atomic(snapshot_path(), state.dump());
    fsync_dir(dir_);
    crash(CrashPoint::AfterSnapshot);
    if (::ftruncate(fd_, 0) != 0) throw io_error("cannot truncate queue log: " + std::string(std::strerror(errno)));
    ::fsync(fd_);
    log_records_ = 0;
}

}  // namespace asr::service
