// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "textprep/textprep.hpp"

namespace asr {

/// Per-fragment result: the fragment score is the max over segment scores.
struct FragmentScore {
    double score = 0.0;
    std::vector<double> segment_scores;
    std::vector<textprep::SegmentSpan> segments;
    std::size_t best = 0;

    textprep::SegmentSpan best_segment() const {
        return segments.empty() ? textprep::SegmentSpan{} : segments[best];
    }
};

/// Builds a FragmentScore from per-segment scores (empty input scores 0).
FragmentScore max_pool(std::vector<double> segment_scores, std::vector<textprep::SegmentSpan> segments);

/// One scoring contract for every model family. Implementations are
/// immutable after construction and safe to call concurrently.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual std::string_view kind() const = 0;
    /// Stable identifier of the loaded parameters.
    virtual const std::string& model_id() const = 0;
    virtual FragmentScore score_fragment(std::string_view text) const = 0;

    double score(std::string_view text) const { return score_fragment(text).score; }
};

/// Opens any native weight file, dispatching on its manifest kind.
std::shared_ptr<const Scorer> load_scorer(const std::string& weights_path);

}  // namespace asr
