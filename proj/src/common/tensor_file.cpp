// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "common/tensor_file.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace asr {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

void WeightFile::put_matrix(const std::string& name, const Eigen::MatrixXd& m) {
    Tensor t;
    t.name = name;
    t.shape = {m.rows(), m.cols()};
    t.data.resize(static_cast<std::size_t>(m.size()));
    // row-major on disk
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.data[k++] = static_cast<float>(m(r, c));
    tensors_.push_back(std::move(t));
}

void WeightFile::put_vector(const std::string& name, const Eigen::VectorXd& v) {
    Tensor t;
    t.name = name;
    t.shape = {v.size()};
    t.data.resize(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
    tensors_.push_back(std::move(t));
}

bool WeightFile::has(const std::string& name) const {
    for (const auto& t : tensors_)
        if (t.name == name) return true;
    return false;
}

const WeightFile::Tensor& WeightFile::tensor(const std::string& name) const {
    for (const auto& t : tensors_)
        if (t.name == name) return t;
    throw parse_error("weight file has no tensor named '" + name + "'");
}

Eigen::MatrixXd WeightFile::matrix(const std::string& name) const {
    const Tensor& t = tensor(name);
    if (t.shape.size() != 2) throw parse_error("tensor '" + name + "' is not a matrix");
    Eigen::MatrixXd m(t.shape[0], t.shape[1]);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[k++];
    return m;
}

Eigen::VectorXd WeightFile::vector(const std::string& name) const {
    const Tensor& t = tensor(name);
    if (t.shape.size() != 1) throw parse_error("tensor '" + name + "' is not a vector");
    Eigen::VectorXd v(t.shape[0]);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = t.data[static_cast<std::size_t>(i)];
    return v;
}

std::string WeightFile::serialize() const {
    nlohmann::json manifest;
    manifest["kind"] = kind;
    manifest["hyperparameters"] = hyperparameters;
    manifest["extra"] = extra;
    auto table = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors_) {
        const std::uint64_t nbytes = t.data.size() * sizeof(float);
        table.push_back({{"name", t.name}, {"dtype", "float32"}, {"shape", t.shape}, {"offset", offset}, {"nbytes", nbytes}});
        offset += nbytes;
    }
    manifest["tensors"] = std::move(table);

    const std::string text = manifest.dump();
    std::string out;
    out.reserve(kMagic.size() + 8 + text.size() + offset);
    out.append(kMagic);
    const std::uint64_t len = text.size();
    out.append(reinterpret_cast<const char*>(&len), sizeof len);
    out.append(text);
    for (const auto& t : tensors_)
        out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
    return out;
}

WeightFile WeightFile::parse(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic)
        throw parse_error("not a weight file (bad magic)");
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + kMagic.size(), sizeof len);
    const std::size_t header = kMagic.size() + 8;
    if (len > bytes.size() - header) throw parse_error("weight file manifest truncated");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(header, len));
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("weight file manifest: ") + e.what());
    }
    const std::string_view payload = bytes.substr(header + len);

    WeightFile wf;
    try {
        wf.kind = manifest.at("kind").get<std::string>();
        wf.hyperparameters = manifest.value("hyperparameters", nlohmann::json::object());
        wf.extra = manifest.value("extra", nlohmann::json::object());
        for (const auto& entry : manifest.at("tensors")) {
            if (entry.at("dtype") != "float32") throw parse_error("unsupported dtype in weight file");
            Tensor t;
            t.name = entry.at("name").get<std::string>();
            t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
            std::uint64_t count = 1;
            for (auto d : t.shape) {
                if (d < 0) throw parse_error("negative dimension in tensor '" + t.name + "'");
                count *= static_cast<std::uint64_t>(d);
            }
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const std::uint64_t nbytes = count * sizeof(float);
            if (offset > payload.size() || nbytes > payload.size() - offset)
                throw parse_error("tensor '" + t.name + "' exceeds file size");
            t.data.resize(count);
            std::memcpy(t.data.data(), payload.data() + offset, nbytes);
            wf.tensors_.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("weight file manifest: ") + e.what());
    }
    return wf;
}

void WeightFile::save(const std::string& path) const { write_file_atomic(path, serialize()); }

WeightFile WeightFile::load(const std::string& path) { return parse(read_file(path)); }

void round_to_float(Eigen::MatrixXd& m) {
    m = m.cast<float>().cast<double>();
}

void round_to_float(Eigen::VectorXd& v) {
    v = v.cast<float>().cast<double>();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
    const std::string tmp = path + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw io_error("cannot write '" + tmp + "': " + std::strerror(errno));
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t w = ::write(fd, bytes.data() + done, bytes.size() - done);
        if (w < 0 && errno == EINTR) continue;
        if (w < 0) {
            ::close(fd);
            throw io_error("short write to '" + tmp + "': " + std::strerror(errno));
        }
        done += static_cast<std::size_t>(w);
    }
    // contents must be durable before the rename publishes them
    const bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced) throw io_error("fsync of '" + tmp + "' failed");
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace asr
