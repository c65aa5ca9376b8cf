// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "transformer/onnx_export.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "common/error.hpp"
#include "common/tensor_file.hpp"

namespace asr::transformer {
namespace {

// Minimal protobuf wire-format writer; only what ModelProto needs.
class Proto {
public:
    void varint(std::uint32_t field, std::uint64_t v) {
        tag(field, 0);
        raw_varint(v);
    }
    void bytes(std::uint32_t field, std::string_view b) {
        tag(field, 2);
        raw_varint(b.size());
        out_.append(b);
    }
    void message(std::uint32_t field, const Proto& m) { bytes(field, m.out_); }
    void fixed32(std::uint32_t field, float f) {
        tag(field, 5);
        const auto u = std::bit_cast<std::uint32_t>(f);
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    const std::string& str() const { return out_; }

private:
    void tag(std::uint32_t field, std::uint32_t wire) { raw_varint((static_cast<std::uint64_t>(field) << 3) | wire); }
    void raw_varint(std::uint64_t v) {
        while (v >= 0x80) {
            out_.push_back(static_cast<char>((v & 0x7f) | 0x80));
            v >>= 7;
        }
        out_.push_back(static_cast<char>(v));
    }
    std::string out_;
};

static_assert(std::endian::native == std::endian::little, "raw tensor data is written little-endian");

// ONNX enum values
constexpr int kFloat = 1, kInt64 = 7;
constexpr int kAttrFloat = 1, kAttrInt = 2, kAttrInts = 7;

struct Attr {
    std::string name;
    int type;
    double f = 0;
    std::int64_t i = 0;
    std::vector<std::int64_t> ints;
};

Attr attr_i(std::string n, std::int64_t v) { return {std::move(n), kAttrInt, 0, v, {}}; }
Attr attr_f(std::string n, double v) { return {std::move(n), kAttrFloat, v, 0, {}}; }
Attr attr_ints(std::string n, std::vector<std::int64_t> v) { return {std::move(n), kAttrInts, 0, 0, std::move(v)}; }

class GraphBuilder {
public:
    std::string node(const std::string& op, std::vector<std::string> inputs, std::vector<Attr> attrs = {}) {
        const std::string out = op + "_" + std::to_string(counter_++);
        Proto n;
        for (const auto& in : inputs) n.bytes(1, in);
        n.bytes(2, out);
        n.bytes(3, out);
        n.bytes(4, op);
        for (const auto& a : attrs) {
            Proto p;
            p.bytes(1, a.name);
            if (a.type == kAttrFloat) p.fixed32(2, static_cast<float>(a.f));
            if (a.type == kAttrInt) p.varint(3, static_cast<std::uint64_t>(a.i));
            for (auto v : a.ints) p.varint(8, static_cast<std::uint64_t>(v));
            p.varint(20, static_cast<std::uint64_t>(a.type));
            n.message(5, p);
        }
        graph_.message(1, n);
        return out;
    }

    std::string float_tensor(const std::string& name, const std::vector<std::int64_t>& dims, const std::vector<float>& v) {
        Proto t;
        for (auto d : dims) t.varint(1, static_cast<std::uint64_t>(d));
        t.varint(2, kFloat);
        t.bytes(8, name);
        t.bytes(9, std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float)));
        initializers_.push_back(std::move(t));
        return name;
    }

    std::string int_tensor(const std::string& name, const std::vector<std::int64_t>& dims,
                           const std::vector<std::int64_t>& v) {
        Proto t;
        for (auto d : dims) t.varint(1, static_cast<std::uint64_t>(d));
        t.varint(2, kInt64);
        t.bytes(8, name);
        t.bytes(9, std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(std::int64_t)));
        initializers_.push_back(std::move(t));
        return name;
    }

    // Row-major copy of M (or of its transpose).
    std::string matrix(const std::string& name, const Eigen::MatrixXd& m, bool transpose) {
        const Eigen::MatrixXd src = transpose ? Eigen::MatrixXd(m.transpose()) : m;
        std::vector<float> v;
        v.reserve(static_cast<std::size_t>(src.size()));
        for (Eigen::Index r = 0; r < src.rows(); ++r)
            for (Eigen::Index c = 0; c < src.cols(); ++c) v.push_back(static_cast<float>(src(r, c)));
        return float_tensor(name, {src.rows(), src.cols()}, v);
    }
    std::string vector(const std::string& name, const Eigen::VectorXd& x) {
        std::vector<float> v(x.data(), x.data() + x.size());
        return float_tensor(name, {x.size()}, v);
    }
    std::string scalar(const std::string& name, float f) { return float_tensor(name, {}, {f}); }

    // y = x W^T + b for an (out x in) W
    std::string linear(const std::string& x, const std::string& prefix, const Eigen::MatrixXd& W,
                       const Eigen::VectorXd& b) {
        return node("Add", {node("MatMul", {x, matrix(prefix + ".W_t", W, true)}), vector(prefix + ".b", b)});
    }

    void io(std::uint32_t field, const std::string& name, int elem, const std::vector<std::string>& dims) {
        Proto shape;
        for (const auto& d : dims) {
            Proto dim;
            dim.bytes(2, d);
            shape.message(1, dim);
        }
        Proto tensor;
        tensor.varint(1, static_cast<std::uint64_t>(elem));
        tensor.message(2, shape);
        Proto type;
        type.message(1, tensor);
        Proto vi;
        vi.bytes(1, name);
        vi.message(2, type);
        io_.emplace_back(field, std::move(vi));
    }

    std::string finish(const std::string& output_from) {
        node_identity(output_from);
        graph_.bytes(2, "asr_transformer");
        for (const auto& t : initializers_) graph_.message(5, t);
        for (const auto& [field, vi] : io_) graph_.message(field, vi);

        Proto opset;
        opset.bytes(1, "");
        opset.varint(2, 17);
        Proto model;
        model.varint(1, 8);  // IR version
        model.bytes(2, "asr-triage");
        model.bytes(3, "1");
        model.message(7, graph_);
        model.message(8, opset);
        return model.str();
    }

private:
    void node_identity(const std::string& from) {
        Proto n;
        n.bytes(1, from);
        n.bytes(2, kOnnxLogits);
        n.bytes(3, "logits_out");
        n.bytes(4, "Identity");
        graph_.message(1, n);
    }

    Proto graph_;
    std::vector<Proto> initializers_;
    std::vector<std::pair<std::uint32_t, Proto>> io_;
    int counter_ = 0;
};

}  // namespace

std::string export_onnx(const EncoderStack& stack) {
    const EncoderConfig& cfg = stack.config;
    const std::int64_t heads = cfg.heads, dh = cfg.head_dim(), hidden = cfg.hidden;
    GraphBuilder g;
    g.io(11, kOnnxInputIds, kInt64, {"batch", "seq"});
    g.io(11, kOnnxAttentionMask, kInt64, {"batch", "seq"});
    g.io(12, kOnnxLogits, kFloat, {"batch", "2"});

    // embeddings: token rows plus the first seq position rows
    const auto tok = g.node("Gather", {g.matrix("emb.token", stack.token_embedding, false), kOnnxInputIds},
                            {attr_i("axis", 0)});
    const auto seq_len = g.node("Shape", {kOnnxInputIds}, {attr_i("start", 1), attr_i("end", 2)});
    const auto zero = g.int_tensor("const.zero", {1}, {0});
    const auto pos = g.node("Slice", {g.matrix("emb.position", stack.position_embedding, false), zero, seq_len, zero});
    auto x = g.linear(g.node("Add", {tok, pos}), "emb.proj", stack.embed_W, stack.embed_b);

    // additive key bias [batch, 1, 1, seq]: 0 for real tokens, -1e9 for padding
    const auto mask_f = g.node("Cast", {kOnnxAttentionMask}, {attr_i("to", kFloat)});
    const auto bias = g.node("Mul", {g.node("Sub", {g.scalar("const.one", 1.0f), mask_f}), g.scalar("const.neg", -1e9f)});
    const auto key_bias = g.node("Unsqueeze", {bias, g.int_tensor("const.axes12", {2}, {1, 2})});

    const auto split_shape = g.int_tensor("const.split_heads", {4}, {0, 0, heads, dh});
    const auto merge_shape = g.int_tensor("const.merge_heads", {3}, {0, 0, hidden});
    const auto scale = g.scalar("const.scale", static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh))));
    const auto eps = static_cast<double>(cfg.layer_norm_eps);

    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const EncoderLayer& L = stack.layers[l];
        const std::string p = "layer" + std::to_string(l);
        auto heads_of = [&](const std::string& name, const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                            std::vector<std::int64_t> perm) {
            return g.node("Transpose", {g.node("Reshape", {g.linear(x, p + ".attn." + name, W, b), split_shape})},
                          {attr_ints("perm", std::move(perm))});
        };
        const auto q = heads_of("q", L.Wq, L.bq, {0, 2, 1, 3});  // [b, h, n, d]
        const auto kt = heads_of("k", L.Wk, L.bk, {0, 2, 3, 1});  // [b, h, d, n]
        const auto v = heads_of("v", L.Wv, L.bv, {0, 2, 1, 3});
        const auto logits = g.node("Add", {g.node("Mul", {g.node("MatMul", {q, kt}), scale}), key_bias});
        const auto probs = g.node("Softmax", {logits}, {attr_i("axis", -1)});
        const auto ctx = g.node(
            "Reshape",
            {g.node("Transpose", {g.node("MatMul", {probs, v})}, {attr_ints("perm", {0, 2, 1, 3})}), merge_shape});
        const auto attn = g.linear(ctx, p + ".attn.o", L.Wo, L.bo);
        const auto x1 = g.node("LayerNormalization",
                               {g.node("Add", {x, attn}), g.vector(p + ".ln1.gamma", L.ln1_gamma),
                                g.vector(p + ".ln1.beta", L.ln1_beta)},
                               {attr_i("axis", -1), attr_f("epsilon", eps)});
        // exact GELU: 0.5 x (1 + erf(x / sqrt 2))
        const auto pre = g.linear(x1, p + ".ffn.1", L.W1, L.b1);
        const auto erf = g.node("Erf", {g.node("Mul", {pre, g.scalar(p + ".const.rsqrt2", static_cast<float>(M_SQRT1_2))})});
        const auto act = g.node(
            "Mul", {g.node("Mul", {pre, g.scalar(p + ".const.half", 0.5f)}),
                    g.node("Add", {erf, g.scalar(p + ".const.one", 1.0f)})});
        const auto ff = g.linear(act, p + ".ffn.2", L.W2, L.b2);
        x = g.node("LayerNormalization",
                   {g.node("Add", {x1, ff}), g.vector(p + ".ln2.gamma", L.ln2_gamma),
                    g.vector(p + ".ln2.beta", L.ln2_beta)},
                   {attr_i("axis", -1), attr_f("epsilon", eps)});
    }

    const auto first = g.node("Gather", {x, g.int_tensor("const.pos0", {}, {0})}, {attr_i("axis", 1)});
    return g.finish(g.linear(first, "head", stack.head_W, stack.head_b));
}

void save_onnx(const EncoderStack& stack, const std::string& path) { write_file_atomic(path, export_onnx(stack)); }

}  // namespace asr::transformer
