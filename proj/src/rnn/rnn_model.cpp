// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "rnn/rnn_model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "textprep/textprep.hpp"

namespace asr::rnn {
namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double x = z(i);
        if (x >= 0) {
            out(i) = 1.0 / (1.0 + std::exp(-x));
        } else {
            const double e = std::exp(x);
            out(i) = e / (1.0 + e);
        }
    }
    return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& e) {
    const double m = e.maxCoeff();
    Eigen::VectorXd p = (e.array() - m).exp().matrix();
    return p / p.sum();
}

// Per-direction activations for backprop, columns indexed by position.
struct DirectionCache {
    Eigen::MatrixXd gates;  // 4h x T, post-activation (i, f, g, o)
    Eigen::MatrixXd c;      // h x T
    Eigen::MatrixXd h;      // h x T
};

DirectionCache run_direction(const Eigen::MatrixXd& x, const LstmCellParams& p, bool reverse) {
    const Eigen::Index hs = p.hidden();
    const Eigen::Index steps = x.cols();
    DirectionCache cache{Eigen::MatrixXd(4 * hs, steps), Eigen::MatrixXd(hs, steps), Eigen::MatrixXd(hs, steps)};
    const Eigen::MatrixXd zx = (p.W * x).colwise() + p.b;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hs);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(hs);
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::Index t = reverse ? steps - 1 - k : k;
        const Eigen::VectorXd z = zx.col(t) + p.U * h;
        const Eigen::VectorXd i = sigmoid(z.segment(0, hs));
        const Eigen::VectorXd f = sigmoid(z.segment(hs, hs));
        const Eigen::VectorXd g = z.segment(2 * hs, hs).array().tanh().matrix();
        const Eigen::VectorXd o = sigmoid(z.segment(3 * hs, hs));
        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        h = o.cwiseProduct(c.array().tanh().matrix());
        cache.gates.col(t) << i, f, g, o;
        cache.c.col(t) = c;
        cache.h.col(t) = h;
    }
    return cache;
}

// Backprop through one direction. d_out is the gradient on cache.h; returns
// the gradient on x and accumulates parameter gradients into `grad`.
Eigen::MatrixXd backprop_direction(const Eigen::MatrixXd& x, const LstmCellParams& p, const DirectionCache& cache,
                                   const Eigen::MatrixXd& d_out, bool reverse, LstmCellParams& grad) {
    const Eigen::Index hs = p.hidden();
    const Eigen::Index steps = x.cols();
    Eigen::MatrixXd dz_all(4 * hs, steps);
    Eigen::MatrixXd h_prev_all = Eigen::MatrixXd::Zero(hs, steps);
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hs);
    Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(hs);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(hs);
    for (Eigen::Index k = steps - 1; k >= 0; --k) {
        const Eigen::Index t = reverse ? steps - 1 - k : k;
        const bool first = k == 0;
        const Eigen::Index prev = reverse ? t + 1 : t - 1;
        const auto i = cache.gates.col(t).segment(0, hs).array();
        const auto f = cache.gates.col(t).segment(hs, hs).array();
        const auto g = cache.gates.col(t).segment(2 * hs, hs).array();
        const auto o = cache.gates.col(t).segment(3 * hs, hs).array();
        const Eigen::ArrayXd c_prev = first ? Eigen::ArrayXd(zero.array()) : Eigen::ArrayXd(cache.c.col(prev).array());
        const Eigen::ArrayXd tc = cache.c.col(t).array().tanh();

        const Eigen::ArrayXd dh = (d_out.col(t) + dh_next).array();
        const Eigen::ArrayXd d_o = dh * tc;
        const Eigen::ArrayXd dc = dc_next.array() + dh * o * (1.0 - tc.square());
        const Eigen::ArrayXd di = dc * g;
        const Eigen::ArrayXd dg = dc * i;
        const Eigen::ArrayXd df = dc * c_prev;
        dc_next = (dc * f).matrix();

        auto dz = dz_all.col(t);
        dz.segment(0, hs) = (di * i * (1.0 - i)).matrix();
        dz.segment(hs, hs) = (df * f * (1.0 - f)).matrix();
        dz.segment(2 * hs, hs) = (dg * (1.0 - g.square())).matrix();
        dz.segment(3 * hs, hs) = (d_o * o * (1.0 - o)).matrix();
        if (!first) h_prev_all.col(t) = cache.h.col(prev);
        dh_next = p.U.transpose() * dz;
    }
    grad.W.noalias() += dz_all * x.transpose();
    grad.U.noalias() += dz_all * h_prev_all.transpose();
    grad.b += dz_all.rowwise().sum();
    return p.W.transpose() * dz_all;
}

void init_cell(LstmCellParams& p, Eigen::Index in, Eigen::Index hs, Rng* rng) {
    p.W = Eigen::MatrixXd::Zero(4 * hs, in);
    p.U = Eigen::MatrixXd::Zero(4 * hs, hs);
    p.b = Eigen::VectorXd::Zero(4 * hs);
    if (!rng) return;
    const double bound = 1.0 / std::sqrt(static_cast<double>(hs));
    for (Eigen::Index k = 0; k < p.W.size(); ++k) p.W.data()[k] = (2.0 * rng->uniform() - 1.0) * bound;
    for (Eigen::Index k = 0; k < p.U.size(); ++k) p.U.data()[k] = (2.0 * rng->uniform() - 1.0) * bound;
    p.b.segment(hs, hs).setOnes();  // forget-gate bias
}

void check(bool ok, const std::string& what) {
    if (!ok) throw invalid_argument("dimension mismatch: " + what);
}

const char* kLayerNames[2] = {"l1", "l2"};
const char* kDirNames[2] = {"fwd", "bwd"};

}  // namespace

void LstmCellParams::validate() const {
    const Eigen::Index hs = U.cols();
    check(U.rows() == 4 * hs, "U must be 4h x h");
    check(W.rows() == 4 * hs, "W must have 4h rows");
    check(b.size() == 4 * hs, "b must have 4h entries");
}

LstmState lstm_cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                    const LstmCellParams& p) {
    p.validate();
    const Eigen::Index hs = p.hidden();
    check(x.size() == p.input(), "x must match W columns");
    check(h_prev.size() == hs && c_prev.size() == hs, "states must have h entries");
    const Eigen::VectorXd z = p.W * x + p.U * h_prev + p.b;
    const Eigen::VectorXd i = sigmoid(z.segment(0, hs));
    const Eigen::VectorXd f = sigmoid(z.segment(hs, hs));
    const Eigen::VectorXd g = z.segment(2 * hs, hs).array().tanh().matrix();
    const Eigen::VectorXd o = sigmoid(z.segment(3 * hs, hs));
    LstmState s;
    s.c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    s.h = o.cwiseProduct(s.c.array().tanh().matrix());
    return s;
}

void BiLstmStack::validate() const {
    const Eigen::Index hs = hidden();
    for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 2; ++d) {
            layers[l][d].validate();
            check(layers[l][d].hidden() == hs, "all cells share the hidden size");
        }
    check(layers[0][0].input() == layers[0][1].input(), "layer 1 directions share the input size");
    check(layers[1][0].input() == 2 * hs && layers[1][1].input() == 2 * hs, "layer 2 input must be 2h");
}

Eigen::MatrixXd bilstm_forward(const Eigen::MatrixXd& embedded, const BiLstmStack& stack) {
    if (embedded.cols() == 0) throw invalid_argument("bilstm_forward needs a non-empty sequence");
    stack.validate();
    check(embedded.rows() == stack.layers[0][0].input(), "embedding size must match layer 1 input");
    const Eigen::Index hs = stack.hidden();
    Eigen::MatrixXd x = embedded;
    for (int l = 0; l < 2; ++l) {
        Eigen::MatrixXd out(2 * hs, x.cols());
        out.topRows(hs) = run_direction(x, stack.layers[l][0], false).h;
        out.bottomRows(hs) = run_direction(x, stack.layers[l][1], true).h;
        x = std::move(out);
    }
    return x;
}

AttentionResult additive_attention(const Eigen::MatrixXd& states, const AttentionParams& p) {
    if (states.cols() == 0) throw invalid_argument("additive_attention needs at least one state");
    check(p.W.cols() == states.rows() && p.v.size() == p.W.rows(), "attention parameters");
    const Eigen::MatrixXd u = (p.W * states).array().tanh().matrix();
    AttentionResult r;
    r.weights = softmax(u.transpose() * p.v);
    r.context = states * r.weights;
    return r;
}

EmbeddingTable load_glove(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open embeddings '" + path + "'");
    std::vector<std::string> words;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (!ss.eof()) throw parse_error("embeddings line " + std::to_string(line_no) + ": non-numeric value");
        if (v.empty() || (!rows.empty() && v.size() != rows.front().size()))
            throw parse_error("embeddings line " + std::to_string(line_no) + ": inconsistent dimension");
        words.push_back(word);
        rows.push_back(std::move(v));
    }
    if (rows.empty()) throw parse_error("embeddings file '" + path + "' is empty");
    EmbeddingTable t;
    t.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) t.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    t.vocab = bow::VocabularyIndex(std::move(words));
    return t;
}

RnnModel RnnModel::zeros(std::vector<std::string> words, const RnnConfig& config) {
    RnnModel m;
    m.config = config;
    const auto v = static_cast<Eigen::Index>(words.size());
    m.embedding.vocab = bow::VocabularyIndex(std::move(words));
    m.embedding.matrix = Eigen::MatrixXd::Zero(v, config.embed);
    for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 2; ++d)
            init_cell(m.stack.layers[l][d], l == 0 ? config.embed : 2 * config.hidden, config.hidden, nullptr);
    m.attention.W = Eigen::MatrixXd::Zero(config.attention, 2 * config.hidden);
    m.attention.v = Eigen::VectorXd::Zero(config.attention);
    m.head_W = Eigen::MatrixXd::Zero(2, 2 * config.hidden);
    m.head_b = Eigen::VectorXd::Zero(2);
    return m;
}

RnnModel RnnModel::random(std::vector<std::string> words, const RnnConfig& config, std::uint64_t seed) {
    RnnModel m = zeros(std::move(words), config);
    Rng rng(seed);
    for (Eigen::Index k = 0; k < m.embedding.matrix.size(); ++k) m.embedding.matrix.data()[k] = rng.normal() * 0.1;
    for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 2; ++d)
            init_cell(m.stack.layers[l][d], l == 0 ? config.embed : 2 * config.hidden, config.hidden, &rng);
    const double ab = 1.0 / std::sqrt(static_cast<double>(2 * config.hidden));
    for (Eigen::Index k = 0; k < m.attention.W.size(); ++k) m.attention.W.data()[k] = (2.0 * rng.uniform() - 1.0) * ab;
    const double vb = 1.0 / std::sqrt(static_cast<double>(config.attention));
    for (Eigen::Index k = 0; k < m.attention.v.size(); ++k) m.attention.v(k) = (2.0 * rng.uniform() - 1.0) * vb;
    for (Eigen::Index k = 0; k < m.head_W.size(); ++k) m.head_W.data()[k] = (2.0 * rng.uniform() - 1.0) * ab;
    return m;
}

std::vector<ParamView> RnnModel::params() {
    std::vector<ParamView> p;
    p.emplace_back("emb", embedding.matrix, false);
    for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 2; ++d) {
            const std::string prefix = std::string(kLayerNames[l]) + "." + kDirNames[d] + ".";
            auto& cell = stack.layers[l][d];
            p.emplace_back(prefix + "W", cell.W, true);
            p.emplace_back(prefix + "U", cell.U, true);
            p.emplace_back(prefix + "b", cell.b, false);
        }
    p.emplace_back("attn.W", attention.W, true);
    p.emplace_back("attn.v", attention.v, true);
    p.emplace_back("head.W", head_W, true);
    p.emplace_back("head.b", head_b, false);
    return p;
}

std::vector<Eigen::Index> RnnModel::lookup(const bow::WordTokens& words) const {
    std::vector<Eigen::Index> rows;
    rows.reserve(words.size());
    for (const auto& w : words) rows.push_back(embedding.vocab.row(w));
    return rows;
}

Eigen::MatrixXd RnnModel::embed(std::span<const Eigen::Index> rows) const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(embedding.dim(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        if (rows[t] >= 0) x.col(static_cast<Eigen::Index>(t)) = embedding.matrix.row(rows[t]).transpose();
    return x;
}

Eigen::Vector2d RnnModel::logits(std::span<const Eigen::Index> rows) const {
    const Eigen::MatrixXd states = bilstm_forward(embed(rows), stack);
    const AttentionResult a = additive_attention(states, attention);
    return head_W * a.context + head_b;
}

double RnnModel::score(std::string_view text) const {
    const auto words = textprep::tokenize_words(text);
    if (words.empty()) return 0.0;
    const auto rows = lookup(words);
    return softmax(logits(rows))(1);
}

double RnnModel::loss_and_grad(std::span<const Eigen::Index> rows, int label, RnnModel& grad) const {
    if (rows.empty()) throw invalid_argument("cannot train on an empty sequence");
    const Eigen::Index hs = config.hidden;
    const Eigen::MatrixXd x0 = embed(rows);

    // forward with caches
    DirectionCache c1f = run_direction(x0, stack.layers[0][0], false);
    DirectionCache c1b = run_direction(x0, stack.layers[0][1], true);
    Eigen::MatrixXd x1(2 * hs, x0.cols());
    x1 << c1f.h, c1b.h;
    DirectionCache c2f = run_direction(x1, stack.layers[1][0], false);
    DirectionCache c2b = run_direction(x1, stack.layers[1][1], true);
    Eigen::MatrixXd s(2 * hs, x0.cols());
    s << c2f.h, c2b.h;

    const Eigen::MatrixXd u = (attention.W * s).array().tanh().matrix();
    const Eigen::VectorXd alpha = softmax(u.transpose() * attention.v);
    const Eigen::VectorXd ctx = s * alpha;
    const Eigen::VectorXd logit = head_W * ctx + head_b;
    const Eigen::VectorXd prob = softmax(logit);
    const double loss = -std::log(std::max(prob(label), 1e-300));

    // head
    Eigen::VectorXd dlogit = prob;
    dlogit(label) -= 1.0;
    grad.head_W.noalias() += dlogit * ctx.transpose();
    grad.head_b += dlogit;
    const Eigen::VectorXd dctx = head_W.transpose() * dlogit;

    // attention
    Eigen::MatrixXd ds = dctx * alpha.transpose();
    const Eigen::VectorXd dalpha = s.transpose() * dctx;
    const Eigen::VectorXd de = alpha.cwiseProduct((dalpha.array() - alpha.dot(dalpha)).matrix());
    grad.attention.v.noalias() += u * de;
    const Eigen::MatrixXd dpre = (attention.v * de.transpose()).cwiseProduct((1.0 - u.array().square()).matrix());
    grad.attention.W.noalias() += dpre * s.transpose();
    ds.noalias() += attention.W.transpose() * dpre;

    // layer 2, then layer 1
    Eigen::MatrixXd dx1 = backprop_direction(x1, stack.layers[1][0], c2f, ds.topRows(hs), false, grad.stack.layers[1][0]);
    dx1 += backprop_direction(x1, stack.layers[1][1], c2b, ds.bottomRows(hs), true, grad.stack.layers[1][1]);
    Eigen::MatrixXd dx0 = backprop_direction(x0, stack.layers[0][0], c1f, dx1.topRows(hs), false, grad.stack.layers[0][0]);
    dx0 += backprop_direction(x0, stack.layers[0][1], c1b, dx1.bottomRows(hs), true, grad.stack.layers[0][1]);

    for (std::size_t t = 0; t < rows.size(); ++t)
        if (rows[t] >= 0) grad.embedding.matrix.row(rows[t]) += dx0.col(static_cast<Eigen::Index>(t)).transpose();
    return loss;
}

WeightFile RnnModel::to_weights() const {
    WeightFile wf;
    wf.kind = "rnn";
    wf.hyperparameters = {
        {"embed", config.embed},
        {"hidden", config.hidden},
        {"attention", config.attention},
        {"lr", train_options.lr},
        {"epochs", train_options.epochs},
        {"batch", train_options.batch},
        {"clip_norm", train_options.clip_norm},
        {"seed", train_options.seed},
    };
    wf.extra = {{"vocab", embedding.vocab.words()}};
    wf.put_matrix("emb", embedding.matrix);
    for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 2; ++d) {
            const std::string prefix = std::string(kLayerNames[l]) + "." + kDirNames[d] + ".";
            const auto& cell = stack.layers[l][d];
            wf.put_matrix(prefix + "W", cell.W);
            wf.put_matrix(prefix + "U", cell.U);
            wf.put_vector(prefix + "b", cell.b);
        }
    wf.put_matrix("attn.W", attention.W);
    wf.put_vector("attn.v", attention.v);
    wf.put_matrix("head.W", head_W);
    wf.put_vector("head.b", head_b);
    return wf;
}

RnnModel RnnModel::from_weights(const WeightFile& wf) {
    if (wf.kind != "rnn") throw parse_error("expected an rnn weight file, got '" + wf.kind + "'");
    RnnModel m;
    try {
        const auto& hp = wf.hyperparameters;
        m.config.embed = hp.at("embed").get<Eigen::Index>();
        m.config.hidden = hp.at("hidden").get<Eigen::Index>();
        m.config.attention = hp.at("attention").get<Eigen::Index>();
        m.train_options.lr = hp.value("lr", 5e-3);
        m.train_options.epochs = hp.value("epochs", 2);
        m.train_options.batch = hp.value("batch", 32);
        m.train_options.clip_norm = hp.value("clip_norm", 5.0);
        m.train_options.seed = hp.value("seed", std::uint64_t{0});
        m.train_options.config = m.config;
        m.embedding.vocab = bow::VocabularyIndex(wf.extra.at("vocab").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("rnn manifest: ") + e.what());
    }
    m.embedding.matrix = wf.matrix("emb");
    for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 2; ++d) {
            const std::string prefix = std::string(kLayerNames[l]) + "." + kDirNames[d] + ".";
            auto& cell = m.stack.layers[l][d];
            cell.W = wf.matrix(prefix + "W");
            cell.U = wf.matrix(prefix + "U");
            cell.b = wf.vector(prefix + "b");
        }
    m.attention.W = wf.matrix("attn.W");
    m.attention.v = wf.vector("attn.v");
    m.head_W = wf.matrix("head.W");
    m.head_b = wf.vector("head.b");
    try {
        m.stack.validate();
    } catch (const Error& e) {
        throw parse_error(std::string("rnn weight file: ") + e.what());
    }
    if (m.embedding.matrix.rows() != static_cast<Eigen::Index>(m.embedding.vocab.size()) ||
        m.embedding.matrix.cols() != m.stack.layers[0][0].input() || m.head_W.rows() != 2 ||
        m.head_W.cols() != 2 * m.stack.hidden() || m.attention.W.cols() != 2 * m.stack.hidden())
        throw parse_error("rnn weight file has inconsistent tensor shapes");
    return m;
}

RnnModel train_rnn(std::span<const std::string> texts, std::span<const int> labels, const RnnTrainOptions& options) {
    if (texts.size() != labels.size()) throw invalid_argument("texts and labels differ in length");
    bool has[2] = {false, false};
    for (int y : labels) {
        if (y != 0 && y != 1) throw invalid_argument("labels must be 0 or 1");
        has[y] = true;
    }
    if (!has[0] || !has[1]) throw invalid_argument("training needs both classes present");

    std::vector<bow::WordTokens> docs;
    docs.reserve(texts.size());
    std::vector<std::string> words;
    std::map<std::string, bool> seen;
    for (const auto& t : texts) {
        docs.push_back(textprep::tokenize_words(t));
        for (const auto& w : docs.back())
            if (seen.emplace(w, true).second) words.push_back(w);
    }
    RnnConfig config = options.config;
    if (options.pretrained) config.embed = options.pretrained->dim();

    RnnModel model = RnnModel::random(std::move(words), config, options.seed);
    model.train_options = options;
    model.train_options.config = config;
    model.train_options.pretrained = nullptr;
    if (options.pretrained) {
        const auto& vocab = model.embedding.vocab.words();
        for (std::size_t r = 0; r < vocab.size(); ++r) {
            const Eigen::Index src = options.pretrained->vocab.row(vocab[r]);
            if (src >= 0) model.embedding.matrix.row(static_cast<Eigen::Index>(r)) = options.pretrained->matrix.row(src);
        }
    }

    std::vector<std::vector<Eigen::Index>> rows;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        rows.push_back(model.lookup(docs[i]));
        if (!rows.back().empty()) order.push_back(i);
    }

    RnnModel grad = RnnModel::zeros({}, config);
    grad.embedding.matrix = Eigen::MatrixXd::Zero(model.embedding.matrix.rows(), config.embed);
    auto params = model.params();
    auto grads = grad.params();
    AdamW opt(params);
    Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto batch = static_cast<std::size_t>(std::max(1, options.batch));
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            zero_all(grads);
            for (std::size_t j = start; j < end; ++j) model.loss_and_grad(rows[order[j]], labels[order[j]], grad);
            scale_all(grads, 1.0 / static_cast<double>(end - start));
            const double norm = global_norm(grads);
            if (options.clip_norm > 0 && norm > options.clip_norm) scale_all(grads, options.clip_norm / norm);
            opt.step(params, grads, options.lr, 0.0);
        }
    }
    for (auto& p : params) p.values = p.values.cast<float>().cast<double>();
    return model;
}

FragmentScore RnnScorer::score_fragment(std::string_view text) const {
    const auto words = textprep::tokenize_words(text);
    const double s = words.empty() ? 0.0 : softmax(model_.logits(model_.lookup(words)))(1);
    return max_pool({s}, {{0, words.size()}});
}

}  // namespace asr::rnn
