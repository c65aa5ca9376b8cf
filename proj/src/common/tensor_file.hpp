// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace asr {

/// Shared weight container:
///   8-byte magic "ASRW0001"
///   uint64 little-endian manifest length, then the UTF-8 JSON manifest
///   raw float32 little-endian tensor bytes, offsets relative to the end of
///   the manifest.
class WeightFile {
public:
    static constexpr std::string_view kMagic = "ASRW0001";

    struct Tensor {
        std::string name;
        std::vector<std::int64_t> shape;
        std::vector<float> data;
    };

    std::string kind;
    nlohmann::json hyperparameters = nlohmann::json::object();
    // Non-tensor payload such as vocabularies.
    nlohmann::json extra = nlohmann::json::object();

    void put_matrix(const std::string& name, const Eigen::MatrixXd& m);
    void put_vector(const std::string& name, const Eigen::VectorXd& v);

    bool has(const std::string& name) const;
    const Tensor& tensor(const std::string& name) const;
    Eigen::MatrixXd matrix(const std::string& name) const;
    Eigen::VectorXd vector(const std::string& name) const;
    const std::vector<Tensor>& tensors() const { return tensors_; }

    std::string serialize() const;
    static WeightFile parse(std::string_view bytes);

    void save(const std::string& path) const;
    static WeightFile load(const std::string& path);

private:
    std::vector<Tensor> tensors_;
};

/// Rounds every entry to float32 so in-memory parameters match what a
/// save/load cycle would produce.
void round_to_float(Eigen::MatrixXd& m);
void round_to_float(Eigen::VectorXd& v);

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, std::string_view bytes);

}  // namespace asr
