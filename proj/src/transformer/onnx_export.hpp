// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <string>

#include "transformer/encoder.hpp"

namespace asr::transformer {

/// Graph interface names shared by the exporter and the external runtime.
inline constexpr const char* kOnnxInputIds = "input_ids";
inline constexpr const char* kOnnxAttentionMask = "attention_mask";
inline constexpr const char* kOnnxLogits = "logits";

/// Serialises the stack as an ONNX model (opset 17, float32 weights).
/// Inputs: input_ids int64 [batch, seq], attention_mask int64 [batch, seq].
/// Output: logits float [batch, 2] read at position 0. Callers add [CLS]/[SEP].
std::string export_onnx(const EncoderStack& stack);
void save_onnx(const EncoderStack& stack, const std::string& path);

}  // namespace asr::transformer
