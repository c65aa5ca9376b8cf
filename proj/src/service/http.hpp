// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <memory>
#include <string>

#include "common/error.hpp"
#include "service/engine.hpp"

namespace asr::service {

/// HTTP status for an engine error code.
int http_status(ErrorCode code);
std::string_view error_slug(ErrorCode code);

/// JSON API over a TriageEngine. Routes live under /v1.
class HttpServer {
public:
    explicit HttpServer(TriageEngine& engine);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port; port 0 picks a free one. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Call after bind().
    void listen();
    /// listen() on a background thread; returns once the socket accepts.
    void start();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace asr::service
