// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <string>
#include <vector>

#include "common/tensor_file.hpp"
#include "corpus/corpus.hpp"

namespace asr::pipeline {

struct TrainedModel {
    std::string kind;
    std::string bytes;     // serialised weight file
    std::string model_id;  // kind + "-" + content hash, as load_scorer reports it
    nlohmann::json report = nlohmann::json::object();
};

/// Trains one scorer family on a labelled corpus. `options` overrides the
/// family defaults; unknown keys are rejected.
///   bow:         k, lsa_tolerance, lsa_max_iterations, l2, lr, epochs, batch, seed
///   rnn:         embed, hidden, attention, lr, epochs, batch, clip_norm, seed, glove
///   transformer: hidden, heads, layers, ffn, embed, max_positions, vocab_size,
///                window, overlap, lr, batch, epochs, weight_decay, seed
TrainedModel train(const std::string& kind, const std::vector<corpus::LabeledText>& records,
                   const nlohmann::json& options = nlohmann::json::object());

/// Defaults for a family, in the same keys `train` accepts.
nlohmann::json default_options(const std::string& kind);

/// Model id of serialised weights.
std::string model_id_for(const std::string& kind, std::string_view bytes);

}  // namespace asr::pipeline
