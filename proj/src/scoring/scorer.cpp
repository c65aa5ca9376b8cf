// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "scoring/scorer.hpp"

#include "bow/bow_model.hpp"
#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/tensor_file.hpp"
#include "rnn/rnn_model.hpp"
#include "transformer/encoder.hpp"

namespace asr {

FragmentScore max_pool(std::vector<double> segment_scores, std::vector<textprep::SegmentSpan> segments) {
    FragmentScore out;
    out.segment_scores = std::move(segment_scores);
    out.segments = std::move(segments);
    for (std::size_t i = 0; i < out.segment_scores.size(); ++i) {
        if (i == 0 || out.segment_scores[i] > out.score) {
            out.score = out.segment_scores[i];
            out.best = i;
        }
    }
    return out;
}

std::shared_ptr<const Scorer> load_scorer(const std::string& weights_path) {
    const std::string bytes = read_file(weights_path);
    const WeightFile wf = WeightFile::parse(bytes);
    const std::string id = wf.kind + "-" + fnv1a_hex(bytes);
    if (wf.kind == "bow") return std::make_shared<bow::BowScorer>(bow::BowModel::from_weights(wf), id);
    if (wf.kind == "rnn") return std::make_shared<rnn::RnnScorer>(rnn::RnnModel::from_weights(wf), id);
    if (wf.kind == "transformer")
        return std::make_shared<transformer::TransformerScorer>(transformer::EncoderStack::from_weights(wf), id);
    throw parse_error("unknown model kind '" + wf.kind + "' in " + weights_path);
}

}  // namespace asr
