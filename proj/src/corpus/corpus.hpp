// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace asr::corpus {

/// Closed rubric taxonomy used by reviewers and by the synthetic generator.
enum class RubricCategory {
    HarmToSelf,
    HarmToAnother,
    HarmFromAnother,
    SevereDepressionTrauma,
    SeriousRequestForHelp,
};

inline constexpr RubricCategory kAllCategories[] = {
    RubricCategory::HarmToSelf,          RubricCategory::HarmToAnother,
    RubricCategory::HarmFromAnother,     RubricCategory::SevereDepressionTrauma,
    RubricCategory::SeriousRequestForHelp,
};

std::string_view to_string(RubricCategory c);
/// Throws a validation error for anything outside the five names.
RubricCategory category_from_string(std::string_view s);

enum class Source { Student, Supplementary };
std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct LabeledText {
    std::string id;
    std::string text;
    int label = 0;  // 0 normal, 1 alarming
    Source source = Source::Student;
    std::optional<RubricCategory> category;

    bool operator==(const LabeledText&) const = default;
};

struct CorpusSplit {
    std::set<std::string> train_ids;
    std::set<std::string> dev_ids;
    std::uint64_t seed = 0;
};

struct ThresholdCorpus {
    std::vector<std::string> texts;
    std::size_t declared_size = 0;
};

struct ValidationSet {
    std::vector<LabeledText> texts;
};

/// One canonical JSONL line (sorted keys, no trailing newline).
std::string to_jsonl_line(const LabeledText& r);
LabeledText from_jsonl_line(std::string_view line, std::size_t line_no);

std::vector<LabeledText> parse_labeled(std::string_view content);
std::vector<LabeledText> load_labeled(const std::string& path);
std::string format_labeled(const std::vector<LabeledText>& records);
void write_labeled(const std::string& path, const std::vector<LabeledText>& records);

ThresholdCorpus parse_threshold(std::string_view content);
ThresholdCorpus load_threshold(const std::string& path);
void write_threshold(const std::string& path, const std::vector<std::string>& texts);

ValidationSet load_validation(const std::string& path);
ValidationSet to_validation(std::vector<LabeledText> records);

/// Stratified split. |train| == round(ratio * N); when a class has at least
/// two members it appears on both sides.
CorpusSplit split(const std::vector<LabeledText>& corpus, double ratio, std::uint64_t seed);

/// Templated synthetic corpus; byte-deterministic for a fixed seed.
std::vector<LabeledText> generate_synthetic(std::size_t n_normal, std::size_t n_asr, std::uint64_t seed);

}  // namespace asr::corpus
