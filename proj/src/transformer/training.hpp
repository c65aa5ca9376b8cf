// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "transformer/encoder.hpp"

namespace asr::transformer {

struct FineTuneConfig {
    double lr = 2.5e-5;
    std::size_t batch = 32;
    std::size_t epochs = 2;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

/// Content ids of one window (no specials) and its inherited label.
struct LabeledSegment {
    std::vector<TokenId> ids;
    int label = 0;
};

/// Encodes and windows every text; each window inherits its text's label.
/// Empty texts contribute nothing.
std::vector<LabeledSegment> make_training_segments(std::span<const std::string> texts, std::span<const int> labels,
                                                   const textprep::SubwordVocabulary& vocab, std::size_t window,
                                                   std::size_t overlap);

/// Cross-entropy of one segment wrapped as [CLS] ids [SEP]; adds its
/// gradient into `grad` (a stack shaped like `stack`).
double loss_and_grad(const EncoderStack& stack, std::span<const TokenId> ids, int label, EncoderStack& grad);

/// Mean cross-entropy over segments, no gradient.
double mean_loss(const EncoderStack& stack, std::span<const LabeledSegment> data);

struct FineTuneReport {
    std::vector<double> step_losses;  // batch mean before each update
    std::vector<double> learning_rates;
    std::size_t steps = 0;
};

/// AdamW with decoupled decay (matrices only), linear decay from cfg.lr to 0
/// over epochs * ceil(N / batch) steps, reshuffled each epoch.
/// `on_step`, when set, sees the stack after every update.
using StepObserver = std::function<void(std::size_t step, const EncoderStack& stack)>;
EncoderStack fine_tune(std::span<const LabeledSegment> data, const FineTuneConfig& cfg, EncoderStack stack,
                       FineTuneReport* report = nullptr, const StepObserver& on_step = {});

}  // namespace asr::transformer
