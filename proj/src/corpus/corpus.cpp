// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "common/tensor_file.hpp"
#include "json.hpp"

namespace asr::corpus {

using nlohmann::json;

std::string_view to_string(RubricCategory c) {
    switch (c) {
        case RubricCategory::HarmToSelf: return "harm_to_self";
        case RubricCategory::HarmToAnother: return "harm_to_another";
        case RubricCategory::HarmFromAnother: return "harm_from_another";
        case RubricCategory::SevereDepressionTrauma: return "severe_depression_trauma";
        case RubricCategory::SeriousRequestForHelp: return "serious_request_for_help";
    }
    return "";
}

RubricCategory category_from_string(std::string_view s) {
    for (auto c : kAllCategories)
        if (to_string(c) == s) return c;
    throw validation_error("unknown rubric category '" + std::string(s) + "'");
}

std::string_view to_string(Source s) { return s == Source::Student ? "student" : "supplementary"; }

Source source_from_string(std::string_view s) {
    if (s == "student") return Source::Student;
    if (s == "supplementary") return Source::Supplementary;
    throw validation_error("unknown source '" + std::string(s) + "'");
}

std::string to_jsonl_line(const LabeledText& r) {
    json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["label"] = r.label;
    j["source"] = std::string(to_string(r.source));
    if (r.category) j["category"] = std::string(to_string(*r.category));
    return j.dump();
}

LabeledText from_jsonl_line(std::string_view line, std::size_t line_no) {
    const std::string where = "line " + std::to_string(line_no) + ": ";
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw parse_error(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw parse_error(where + "record is not a JSON object");
    for (const char* key : {"id", "text", "label", "source"})
        if (!j.contains(key)) throw parse_error(where + "missing field \"" + key + "\"");
    for (const auto& [key, _] : j.items())
        if (key != "id" && key != "text" && key != "label" && key != "source" && key != "category")
            throw parse_error(where + "unexpected field \"" + key + "\"");

    LabeledText r;
    try {
        if (!j["id"].is_string()) throw parse_error(where + "\"id\" must be a string");
        if (!j["text"].is_string()) throw parse_error(where + "\"text\" must be a string");
        if (!j["label"].is_number_integer()) throw parse_error(where + "\"label\" must be 0 or 1");
        if (!j["source"].is_string()) throw parse_error(where + "\"source\" must be a string");
        r.id = j["id"].get<std::string>();
        r.text = j["text"].get<std::string>();
        r.label = j["label"].get<int>();
        r.source = source_from_string(j["source"].get<std::string>());
        if (j.contains("category") && !j["category"].is_null()) {
            if (!j["category"].is_string()) throw parse_error(where + "\"category\" must be a string");
            r.category = category_from_string(j["category"].get<std::string>());
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Parse) throw;
        throw parse_error(where + e.what());
    }
    if (r.id.empty()) throw parse_error(where + "\"id\" is empty");
    if (r.label != 0 && r.label != 1) throw parse_error(where + "\"label\" must be 0 or 1");
    return r;
}

std::vector<LabeledText> parse_labeled(std::string_view content) {
    std::vector<LabeledText> out;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        LabeledText r = from_jsonl_line(line, line_no);
        if (!seen.insert(r.id).second)
            throw validation_error("line " + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<LabeledText> load_labeled(const std::string& path) { return parse_labeled(read_file(path)); }

std::string format_labeled(const std::vector<LabeledText>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_jsonl_line(r);
        out += '\n';
    }
    return out;
}

void write_labeled(const std::string& path, const std::vector<LabeledText>& records) {
    write_file_atomic(path, format_labeled(records));
}

ThresholdCorpus parse_threshold(std::string_view content) {
    ThresholdCorpus tc;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        tc.texts.emplace_back(line);
        pos = end + 1;
    }
    tc.declared_size = tc.texts.size();
    return tc;
}

ThresholdCorpus load_threshold(const std::string& path) { return parse_threshold(read_file(path)); }

void write_threshold(const std::string& path, const std::vector<std::string>& texts) {
    std::string out;
    for (const auto& t : texts) {
        if (t.find('\n') != std::string::npos)
            throw invalid_argument("threshold texts must not contain newlines");
        out += t;
        out += '\n';
    }
    write_file_atomic(path, out);
}

ValidationSet to_validation(std::vector<LabeledText> records) {
    for (const auto& r : records)
        if (r.label != 1) throw validation_error("validation record '" + r.id + "' has label " + std::to_string(r.label) + "; must be 1");
    return ValidationSet{std::move(records)};
}

ValidationSet load_validation(const std::string& path) { return to_validation(load_labeled(path)); }

CorpusSplit split(const std::vector<LabeledText>& corpus, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw invalid_argument("split ratio must lie in (0, 1)");
    if (corpus.size() < 2) throw invalid_argument("cannot stratify a corpus with fewer than two records");

    Rng rng(seed);
    std::vector<std::string> by_label[2];
    for (const auto& r : corpus) by_label[r.label == 1 ? 1 : 0].push_back(r.id);
    // Input order must not leak into the split beyond the seed.
    for (auto& ids : by_label) {
        std::sort(ids.begin(), ids.end());
        rng.shuffle(ids);
    }

    const auto n = static_cast<double>(corpus.size());
    const auto target = static_cast<std::size_t>(std::llround(ratio * n));

    // largest-remainder apportionment of `target` over the two classes
    std::size_t take[2];
    double frac[2];
    std::size_t assigned = 0;
    for (int c = 0; c < 2; ++c) {
        const double quota = ratio * static_cast<double>(by_label[c].size());
        take[c] = std::min(by_label[c].size(), static_cast<std::size_t>(std::floor(quota)));
        frac[c] = quota - std::floor(quota);
        assigned += take[c];
    }
    while (assigned < target) {
        int c = frac[1] >= frac[0] ? 1 : 0;
        if (take[c] == by_label[c].size()) c = 1 - c;
        ++take[c];
        frac[c] = -1.0;
        ++assigned;
    }

    // both sides keep at least one member of a class that has two or more
    for (int c = 0; c < 2; ++c) {
        const std::size_t size = by_label[c].size();
        const int other = 1 - c;
        if (size < 2) continue;
        if (take[c] == size && take[other] < by_label[other].size()) {
            --take[c];
            ++take[other];
        } else if (take[c] == 0 && take[other] > 0) {
            ++take[c];
            --take[other];
        }
    }

    CorpusSplit s;
    s.seed = seed;
    for (int c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < by_label[c].size(); ++i) {
            (i < take[c] ? s.train_ids : s.dev_ids).insert(by_label[c][i]);
        }
    }
    return s;
}

}  // namespace asr::corpus
