// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <memory>
#include <string>

#include "scoring/scorer.hpp"
#include "textprep/textprep.hpp"
#include "transformer/onnx_export.hpp"

namespace asr::transformer {

/// Where an externally executed graph and its vocabulary live.
struct ExternalModelHandle {
    std::string graph_path;
    std::string vocab_path;
    std::string input_ids_name = kOnnxInputIds;
    std::string attention_mask_name = kOnnxAttentionMask;
    std::string logits_name = kOnnxLogits;
    std::size_t window = textprep::kDefaultWindow;
    std::size_t overlap = textprep::kDefaultOverlap;
};

/// Path of the ONNX Runtime shared library that would be loaded: the
/// ASR_ONNXRUNTIME_LIB environment variable, else the build-time default.
std::string onnxruntime_library_path();
/// True when the runtime library can be loaded.
bool onnxruntime_available();

/// Scores through ONNX Runtime with the native segmentation and max-pooling
/// contract. All windows of a fragment run as one padded, masked batch.
class ExternalScorer final : public Scorer {
public:
    /// Throws a configuration error when the runtime or graph is missing.
    explicit ExternalScorer(ExternalModelHandle handle, std::string model_id = {});
    ~ExternalScorer() override;

    std::string_view kind() const override { return "onnx"; }
    const std::string& model_id() const override { return id_; }
    FragmentScore score_fragment(std::string_view text) const override;

    /// Probabilities for a batch of content-id sequences ([CLS]/[SEP] added here).
    std::vector<double> run(const std::vector<std::vector<textprep::TokenId>>& segments) const;

private:
    struct Session;
    ExternalModelHandle handle_;
    textprep::SubwordVocabulary vocab_;
    std::string id_;
    std::unique_ptr<Session> session_;
};

}  // namespace asr::transformer
