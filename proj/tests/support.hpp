// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "common/error.hpp"
#include "doctest.h"

namespace asr::test {

/// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "asr-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline double rel_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

}  // namespace asr::test

/// Checks that `expr` throws asr::Error carrying `code`.
#define CHECK_ASR_ERROR(expr, code_)                                    \
    do {                                                                \
        bool thrown_ = false;                                           \
        try {                                                           \
            (void)(expr);                                               \
        } catch (const asr::Error& e_) {                                \
            thrown_ = true;                                             \
            CHECK_MESSAGE(e_.code() == (code_), e_.what());             \
        }                                                               \
        CHECK_MESSAGE(thrown_, "expected asr::Error from " #expr);      \
    } while (0)

#include "common/hash.hpp"
#include "scoring/scorer.hpp"

namespace asr::test {

/// Scores are a hash of the text mapped to [0, 1): a stand-in for a scorer
/// with no signal at all.
class UniformHashScorer final : public Scorer {
public:
    explicit UniformHashScorer(std::uint64_t salt = 0) : salt_(salt), id_("uniform-" + std::to_string(salt)) {}
    std::string_view kind() const override { return "uniform"; }
    const std::string& model_id() const override { return id_; }
    FragmentScore score_fragment(std::string_view text) const override {
        Fnv1a64 h;
        h.update(std::to_string(salt_));
        h.update(text);
        // splitmix finaliser spreads the FNV state before taking 53 bits
        std::uint64_t z = h.digest() + 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return max_pool({static_cast<double>(z >> 11) * 0x1.0p-53}, {{0, 1}});
    }

private:
    std::uint64_t salt_;
    std::string id_;
};

/// Always returns the same score.
class ConstantScorer final : public Scorer {
public:
    explicit ConstantScorer(double v) : v_(v) {}
    std::string_view kind() const override { return "constant"; }
    const std::string& model_id() const override { return id_; }
    FragmentScore score_fragment(std::string_view) const override { return max_pool({v_}, {{0, 1}}); }

private:
    double v_;
    std::string id_ = "constant";
};

}  // namespace asr::test
