// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

// Acceptance suite: one PASS/FAIL line per criterion. Independent oracles
// live here rather than being shared with the unit tests, so a bug in a
// shared helper cannot hide in both places at once.
//
// Usage: acceptance [criterion-number ...]   (no arguments runs all)

#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "bow/logreg.hpp"
#include "bow/lsa.hpp"
#include "bow/tfidf.hpp"
#include "calibration/calibration.hpp"
#include "common/tensor_file.hpp"
#include "corpus/corpus.hpp"
#include "httplib.h"
#include "pipeline/train.hpp"
#include "service/engine.hpp"
#include "service/http.hpp"
// Only TempDir and the uniform scorer are needed from the unit-test helpers.
#define DOCTEST_CONFIG_DISABLE
#include "support.hpp"
#include "textprep/textprep.hpp"
#include "transformer/attention.hpp"
#include "transformer/encoder.hpp"
#include "transformer/training.hpp"

using namespace asr;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- reporting

class Report {
public:
    void check(bool ok, const std::string& what) {
        ++checks_;
        if (!ok && failures_.size() < 8) failures_.push_back(what);
        if (!ok) ++failed_;
    }
    void note(const std::string& n) { notes_.push_back(n); }
    bool ok() const { return failed_ == 0 && checks_ > 0; }

    std::string summary() const {
        std::ostringstream o;
        o << checks_ << " checks";
        if (failed_) o << ", " << failed_ << " failed";
        for (const auto& n : notes_) o << "; " << n;
        for (const auto& f : failures_) o << "\n      - " << f;
        return o.str();
    }

private:
    std::size_t checks_ = 0, failed_ = 0;
    std::vector<std::string> failures_, notes_;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(prec);
    o << v;
    return o.str();
}

std::string sci(double v) {
    std::ostringstream o;
    o.setf(std::ios::scientific);
    o.precision(2);
    o << v;
    return o.str();
}

double rel_error(double a, double b) { return test::rel_error(a, b); }

Eigen::MatrixXd randm(Eigen::Index r, Eigen::Index c, std::mt19937_64& g, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(g);
    return m;
}

std::vector<std::string> texts_of(const std::vector<corpus::LabeledText>& recs) {
    std::vector<std::string> out;
    out.reserve(recs.size());
    for (const auto& r : recs) out.push_back(r.text);
    return out;
}

// ------------------------------------------------------- shared benchmark

// Toy-scale settings that keep the whole suite within a few minutes on one core.
const json kBowOptions = json::object();
const json kRnnOptions = {{"hidden", 16}, {"embed", 32}, {"attention", 16}, {"epochs", 2}};
const json kTransformerOptions = {{"hidden", 32}, {"heads", 2},    {"layers", 2},  {"ffn", 128},
                                  {"embed", 32},  {"vocab_size", 2000}, {"lr", 1e-3}, {"batch", 32},
                                  {"epochs", 2}};

struct Trained {
    std::string kind;
    std::shared_ptr<const Scorer> scorer;
    calibration::ScoreDistribution dist;
    calibration::CutoffTable table;
    std::vector<double> validation_scores;
    double train_seconds = 0.0;
};

struct Bench {
    test::TempDir dir;
    std::vector<std::string> threshold;
    corpus::ValidationSet validation;
    std::map<std::string, Trained> models;  // bow, rnn, transformer
};

Bench& bench() {
    static std::unique_ptr<Bench> b;
    if (b) return *b;
    b = std::make_unique<Bench>();
    const auto train = corpus::generate_synthetic(20000, 400, 1);
    b->threshold = texts_of(corpus::generate_synthetic(9950, 50, 2));
    b->validation = corpus::to_validation(corpus::generate_synthetic(0, 200, 3));
    const corpus::ThresholdCorpus thr{b->threshold, b->threshold.size()};
    const std::string fp = calibration::corpus_fingerprint(b->threshold);
    const std::vector<std::pair<std::string, json>> families = {
        {"bow", kBowOptions}, {"rnn", kRnnOptions}, {"transformer", kTransformerOptions}};
    for (const auto& [kind, opts] : families) {
        Trained t;
        t.kind = kind;
        const auto t0 = std::chrono::steady_clock::now();
        const auto m = pipeline::train(kind, train, opts);
        t.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string path = b->dir.file(kind + ".asrw");
        write_file_atomic(path, m.bytes);
        t.scorer = load_scorer(path);
        t.dist = calibration::build_distribution(*t.scorer, thr);
        t.table = calibration::build_cutoff_table(t.dist, calibration::kDefaultPercents, t.scorer->model_id(), fp);
        std::vector<std::string> vtexts;
        for (const auto& r : b->validation.texts) vtexts.push_back(r.text);
        t.validation_scores = calibration::score_all(*t.scorer, vtexts);
        std::cerr << "  trained " << kind << " in " << fmt(t.train_seconds, 1) << "s\n";
        b->models.emplace(kind, std::move(t));
    }
    return *b;
}

// -------------------------------------------------------------- 1. tf-idf

std::map<std::string, double> brute_tfidf(const std::vector<bow::WordTokens>& train, const bow::WordTokens& doc) {
    std::map<std::string, int> df;
    for (const auto& d : train) {
        std::set<std::string> uniq(d.begin(), d.end());
        for (const auto& w : uniq) ++df[w];
    }
    std::map<std::string, int> counts;
    int total = 0;
    for (const auto& w : doc)
        if (df.count(w)) {
            ++counts[w];
            ++total;
        }
    std::map<std::string, double> out;
    for (const auto& [w, c] : counts)
        out[w] = (static_cast<double>(c) / total) * std::log(static_cast<double>(train.size()) / df[w]);
    return out;
}

void tfidf_oracle(Report& r) {
    const std::vector<std::string> corpus = {
        "the cat sat on the mat",        "the dog sat on the log",       "the cat chased the dog",
        "I want to go to the home",      "the weather is nice the",      "home is where the heart is",
        "the dog and the cat are friends", "nobody likes the rain",      "the sun will come out tomorrow",
        "the end",
    };
    std::vector<bow::WordTokens> docs;
    for (const auto& t : corpus) docs.push_back(textprep::tokenize_words(t));
    const auto model = bow::fit_tfidf(docs);
    const auto the = model.vocab.row("the");
    r.check(the >= 0 && model.idf(the) == 0.0, "idf of a word in every document is exactly 0");

    auto probes = docs;
    probes.push_back(textprep::tokenize_words("the cat wants unseen words"));
    probes.push_back(textprep::tokenize_words("the the the"));
    probes.push_back(textprep::tokenize_words("zzz qqq"));
    double worst = 0.0;
    for (const auto& doc : probes) {
        const Eigen::VectorXd v = bow::transform(model, doc);
        const auto oracle = brute_tfidf(docs, doc);
        for (std::size_t i = 0; i < model.vocab.size(); ++i) {
            const auto& w = model.vocab.words()[i];
            const double expected = oracle.count(w) ? oracle.at(w) : 0.0;
            worst = std::max(worst, std::abs(v(static_cast<Eigen::Index>(i)) - expected));
        }
    }
    r.check(worst <= 1e-12, "max |transform - brute| = " + std::to_string(worst));
    r.note("max abs error " + sci(worst));
}

// ----------------------------------------------------------------- 2. LSA

void lsa_oracle(Report& r) {
    std::mt19937_64 g(2026);
    double worst_gram = 0.0, worst_orth = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd t = randm(15, 12, g);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::Index rank = svd.rank();
        const auto lsa = bow::fit_lsa(t, rank);
        const Eigen::MatrixXd c = lsa.components;
        worst_orth = std::max(worst_orth, (c * c.transpose() - Eigen::MatrixXd::Identity(rank, rank)).cwiseAbs().maxCoeff());
        // Gram of the projected columns against the dense-SVD reconstruction.
        const Eigen::MatrixXd s = svd.singularValues().head(rank).asDiagonal();
        const Eigen::MatrixXd v = svd.matrixV().leftCols(rank);
        const Eigen::MatrixXd oracle = v * s * s * v.transpose();
        const Eigen::MatrixXd projected = c * t;
        worst_gram = std::max(worst_gram, (projected.transpose() * projected - oracle).cwiseAbs().maxCoeff());
    }
    r.check(worst_gram <= 1e-6, "Gram error " + std::to_string(worst_gram));
    r.check(worst_orth <= 1e-8, "orthonormality error " + std::to_string(worst_orth));
    r.note("gram err " + sci(worst_gram) + ", orth err " + sci(worst_orth));
}

// ----------------------------------------------------------- 3. gradients

void gradient_checks(Report& r) {
    std::mt19937_64 g(303);
    double worst_logreg = 0.0;
    int logreg_instances = 0;
    for (int inst = 0; inst < 6; ++inst, ++logreg_instances) {
        const Eigen::Index n = 10 + 3 * inst, k = 2 + inst;
        const Eigen::MatrixXd x = randm(n, k, g);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (auto& v : y) v = static_cast<int>(g() % 2);
        const Eigen::VectorXd w = randm(k, 1, g);
        const double b = 0.2 * inst - 0.4, l2 = 0.03 * inst;
        const auto obj = bow::logreg_objective(w, b, x, y, l2);
        const double h = 1e-6;
        auto loss = [&](const Eigen::VectorXd& ww, double bb) { return bow::logreg_objective(ww, bb, x, y, l2).loss; };
        for (Eigen::Index j = 0; j < k; ++j) {
            Eigen::VectorXd wp = w, wm = w;
            wp(j) += h;
            wm(j) -= h;
            worst_logreg = std::max(worst_logreg, rel_error(obj.grad_w(j), (loss(wp, b) - loss(wm, b)) / (2 * h)));
        }
        worst_logreg = std::max(worst_logreg, rel_error(obj.grad_b, (loss(w, b + h) - loss(w, b - h)) / (2 * h)));
    }

    // Transformer head: perturbed tiny encoder, loss summed over a mini-batch.
    std::vector<std::string> words = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    for (int i = 0; i < 12; ++i) words.push_back("w" + std::to_string(i));
    transformer::EncoderConfig cfg;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.ffn = 16;
    cfg.embed = 6;
    cfg.max_positions = 24;
    double worst_head = 0.0;
    int head_instances = 0;
    for (std::uint64_t inst = 0; inst < 5; ++inst, ++head_instances) {
        auto stack = transformer::EncoderStack::random(cfg, textprep::SubwordVocabulary(words), 40 + inst);
        std::mt19937_64 pg(90 + inst);
        for (auto& p : stack.params()) p.values += randm(p.values.size(), 1, pg, 0.2);
        std::vector<transformer::LabeledSegment> batch;
        for (int e = 0; e < 4; ++e) {
            transformer::LabeledSegment s;
            for (std::size_t k = 0; k < 3 + inst; ++k) s.ids.push_back(4 + static_cast<textprep::TokenId>(pg() % 12));
            s.label = e % 2;
            batch.push_back(s);
        }
        auto grad = transformer::EncoderStack::zeros(cfg, stack.vocab);
        for (const auto& s : batch) transformer::loss_and_grad(stack, s.ids, s.label, grad);
        auto ps = stack.params();
        auto gs = grad.params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (ps[i].name.rfind("head.", 0) != 0) continue;
            for (Eigen::Index j = 0; j < ps[i].values.size(); ++j) {
                const double keep = ps[i].values(j), h = 1e-5;
                ps[i].values(j) = keep + h;
                const double lp = transformer::mean_loss(stack, batch) * batch.size();
                ps[i].values(j) = keep - h;
                const double lm = transformer::mean_loss(stack, batch) * batch.size();
                ps[i].values(j) = keep;
                worst_head = std::max(worst_head, rel_error(gs[i].values(j), (lp - lm) / (2 * h)));
            }
        }
    }
    r.check(logreg_instances >= 5 && worst_logreg < 1e-4, "logreg rel err " + std::to_string(worst_logreg));
    r.check(head_instances >= 5 && worst_head < 1e-3, "head rel err " + std::to_string(worst_head));
    r.note("logreg " + sci(worst_logreg) + " over " + std::to_string(logreg_instances) + ", head " +
           sci(worst_head) + " over " + std::to_string(head_instances));
}

// ----------------------------------------------------------- 4. attention

Eigen::MatrixXd naive_attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v) {
    const Eigen::Index n = q.rows(), m = k.rows(), d = q.cols();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, v.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> s(static_cast<std::size_t>(m));
        double mx = -INFINITY;
        for (Eigen::Index j = 0; j < m; ++j) {
            double acc = 0;
            for (Eigen::Index c = 0; c < d; ++c) acc += q(i, c) * k(j, c);
            s[static_cast<std::size_t>(j)] = acc / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, s[static_cast<std::size_t>(j)]);
        }
        double z = 0;
        for (auto& x : s) z += (x = std::exp(x - mx));
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += s[static_cast<std::size_t>(j)] / z * v(j, c);
    }
    return out;
}

void attention_oracle(Report& r) {
    std::mt19937_64 g(404);
    double worst = 0.0, worst_rows = 0.0, worst_shift = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(g() % 8), d = 1 + static_cast<Eigen::Index>(g() % 8);
        const Eigen::MatrixXd q = randm(n, d, g), k = randm(n, d, g), v = randm(n, d, g);
        const auto a = transformer::attention(q, k, v);
        worst = std::max(worst, (a.output - naive_attention(q, k, v)).cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < n; ++i) worst_rows = std::max(worst_rows, std::abs(a.weights.row(i).sum() - 1.0));
        const double shift = std::uniform_real_distribution<double>(-50.0, 50.0)(g);
        const auto shifted = transformer::attention(q, k, v, Eigen::RowVectorXd::Constant(n, shift));
        worst_shift = std::max(worst_shift, (shifted.output - a.output).cwiseAbs().maxCoeff());
        Eigen::MatrixXd logits = randm(n, n, g, 3.0), moved = logits;
        moved.array() += shift;
        worst_shift = std::max(
            worst_shift,
            (transformer::softmax_rows(moved) - transformer::softmax_rows(logits)).cwiseAbs().maxCoeff());
    }
    r.check(worst <= 1e-10, "oracle error " + std::to_string(worst));
    r.check(worst_rows <= 1e-12, "row sum error " + std::to_string(worst_rows));
    r.check(worst_shift <= 1e-10, "shift error " + std::to_string(worst_shift));
    r.note("max errs " + sci(worst) + " / " + sci(worst_rows) + " / " + sci(worst_shift));
}

// -------------------------------------------------------- 5. segmentation

void segmentation_property(Report& r) {
    std::mt19937_64 g(505);
    int trials = 0;
    for (int trial = 0; trial < 5000; ++trial, ++trials) {
        std::size_t n = g() % 5001, window = 2 + g() % 511, overlap = g() % window;
        // pin the edges of the ranges
        if (trial < 4) n = trial < 2 ? 0 : 5000;
        if (trial % 50 == 1) window = trial % 100 == 1 ? 2 : 512;
        if (trial % 7 == 0) overlap = window - 1;
        if (trial % 7 == 1) overlap = 0;
        overlap = std::min(overlap, window - 1);
        const std::size_t stride = window - overlap;
        const auto s = textprep::segment_spans(n, window, overlap);
        std::vector<char> covered(n, 0);
        bool ok = n == 0 ? s.empty() : !s.empty();
        for (std::size_t k = 0; k < s.size() && ok; ++k) {
            ok = s[k].start == k * stride && s[k].length >= 1 && s[k].length <= window &&
                 s[k].start + s[k].length <= n;
            if (k > 0) ok = ok && (s[k - 1].start + s[k - 1].length) - s[k].start == overlap;
            // only the last window may be short, and only because the text ends
            if (k + 1 < s.size()) ok = ok && s[k].length == window;
            for (std::size_t i = s[k].start; ok && i < s[k].start + s[k].length; ++i) covered[i] = 1;
        }
        if (ok && !s.empty()) ok = s.back().start + s.back().length == n;
        // no redundant trailing window: the previous one must not already reach n
        if (ok && s.size() > 1) ok = s[s.size() - 2].start + s[s.size() - 2].length < n;
        ok = ok && std::all_of(covered.begin(), covered.end(), [](char c) { return c == 1; });
        r.check(ok, "n=" + std::to_string(n) + " window=" + std::to_string(window) +
                        " overlap=" + std::to_string(overlap));
    }
    const auto ex = textprep::segment_spans(300, 256, 32);
    r.check(ex.size() == 2 && ex[0].start == 0 && ex[1].start == 224, "(300, 256, 32) starts {0, 224}");
    r.note(std::to_string(trials) + " random geometries");
}

// ---------------------------------------------------------- 6. max pooling

void max_pooling(Report& r) {
    const auto& t = bench().models.at("transformer");
    const auto* ts = dynamic_cast<const transformer::TransformerScorer*>(t.scorer.get());
    r.check(ts != nullptr, "transformer scorer type");
    if (!ts) return;
    const auto& stack = ts->stack();
    // Random synthetic texts, several glued together so they span windows.
    std::mt19937_64 g(606);
    const auto pool = texts_of(corpus::generate_synthetic(300, 30, 66));
    int multi = 0;
    struct Geometry {
        std::size_t window, overlap;
    };
    const std::vector<Geometry> geoms = {{stack.window, stack.overlap}, {24, 6}, {16, 0}};
    for (int i = 0; i < 100; ++i) {
        std::string text;
        const int parts = 1 + static_cast<int>(g() % 4);
        for (int p = 0; p < parts; ++p) text += pool[g() % pool.size()] + " ";
        const auto ids = textprep::subword_encode(text, stack.vocab);
        for (const auto& geo : geoms) {
            const auto fs = geo.window == stack.window && geo.overlap == stack.overlap
                                ? ts->score_fragment(text)
                                : transformer::score_fragment(text, stack, geo.window, geo.overlap);
            // Recompute every window by hand, independently of segment_spans.
            double best = ids.empty() ? 0.0 : -1.0;
            std::size_t windows = 0;
            for (std::size_t start = 0; start < ids.size(); start += geo.window - geo.overlap) {
                const std::size_t len = std::min(geo.window, ids.size() - start);
                best = std::max(best, transformer::encoder_forward(std::span(ids).subspan(start, len), stack).prob);
                ++windows;
                if (start + geo.window >= ids.size()) break;
            }
            if (windows > 1) ++multi;
            r.check(fs.score == best, "text " + std::to_string(i) + " window " + std::to_string(geo.window) +
                                          ": " + std::to_string(fs.score) + " vs " + std::to_string(best));
            r.check(fs.segment_scores.size() == windows, "segment count");
        }
    }
    r.check(multi > 50, "enough multi-window cases");
    r.note(std::to_string(multi) + " multi-window cases, exact equality");
}

// ---------------------------------------------------------- 7. calibration

// Smallest distinct score whose tail fraction is <= p (hundredths of a percent).
std::optional<double> brute_cutoff(const std::vector<double>& scores, long p_hundredths) {
    std::set<double> candidates(scores.begin(), scores.end());
    const long n = static_cast<long>(scores.size());
    for (double c : candidates) {
        long k = 0;
        for (double s : scores) k += s >= c ? 1 : 0;
        if (k * 10000 <= p_hundredths * n) return c;
    }
    return std::nullopt;
}

void check_distribution(Report& r, const std::string& label, const std::vector<double>& scores) {
    const auto dist = calibration::make_distribution(scores);
    const long n = static_cast<long>(scores.size());
    for (double p : calibration::kDefaultPercents) {
        const long ph = std::lround(p * 100.0);
        const double c = calibration::cutoff_for_percent(dist, p);
        const auto oracle = brute_cutoff(scores, ph);
        r.check(oracle ? c == *oracle : c > dist.scores.back(), label + " p=" + fmt(p, 2) + " cutoff mismatch");
        const long k = static_cast<long>(calibration::count_at_or_above(dist, c));
        r.check(k * 10000 <= ph * n, label + " p=" + fmt(p, 2) + " flags too many");
        // Lower bound of the flagged fraction. It can only be missed when the
        // score just below the cutoff is tied, so that admitting it would
        // overshoot p; check exactly that in the tied case.
        const bool strict = k * 10000 > ph * n - 10000;
        if (!strict) {
            const auto below = std::lower_bound(dist.scores.begin(), dist.scores.end(), c);
            const bool tie_blocked = below != dist.scores.begin() && [&] {
                const double prev = *(below - 1);
                const long k2 = static_cast<long>(calibration::count_at_or_above(dist, prev));
                return k2 - k > 1 && k2 * 10000 > ph * n;
            }();
            r.check(tie_blocked, label + " p=" + fmt(p, 2) + " flags too few (" + std::to_string(k) + ")");
        }
    }
}

void calibration_criterion(Report& r) {
    std::mt19937_64 g(707);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> cont(10000), skew(10000);
    for (auto& x : cont) x = u(g);
    for (auto& x : skew) x = std::pow(u(g), 8.0);
    check_distribution(r, "uniform", cont);
    check_distribution(r, "skewed", skew);

    auto& b = bench();
    for (const char* kind : {"bow", "rnn", "transformer"}) {
        const auto& t = b.models.at(kind);
        r.check(t.dist.n() == 10000, std::string(kind) + " threshold size");
        check_distribution(r, kind, t.dist.scores);
        const auto curve = calibration::efficacy_curve(t.table, t.validation_scores);
        double prev = -1.0;
        std::string es;
        for (const auto& pt : curve.points) {
            r.check(pt.efficacy >= prev, std::string(kind) + " E not non-decreasing at p=" + fmt(pt.p, 2));
            prev = pt.efficacy;
            es += (es.empty() ? "" : ",") + fmt(pt.efficacy, 1);
        }
        r.note(std::string(kind) + " E=[" + es + "]");
    }
}

// ----------------------------------------------------- 8. uniform scorer

void uniform_sanity(Report& r) {
    const test::UniformHashScorer scorer(8);
    corpus::ThresholdCorpus thr;
    for (int i = 0; i < 10000; ++i) thr.texts.push_back("threshold response number " + std::to_string(i));
    thr.declared_size = thr.texts.size();
    corpus::ValidationSet val;
    for (int i = 0; i < 1000; ++i)
        val.texts.push_back({"v" + std::to_string(i), "validation response " + std::to_string(i), 1,
                             corpus::Source::Student, corpus::RubricCategory::HarmToSelf});
    const auto curve = calibration::efficacy_curve(scorer, thr, val, calibration::kDefaultPercents);
    double worst_z = 0.0;
    for (const auto& pt : curve.points) {
        const double q = pt.p / 100.0;
        const double sigma = 100.0 * std::sqrt(q * (1 - q) / 1000.0);
        const double z = std::abs(pt.efficacy - pt.p) / sigma;
        worst_z = std::max(worst_z, z);
        r.check(z <= 3.0, "p=" + fmt(pt.p, 2) + " E=" + fmt(pt.efficacy, 2));
    }
    r.note("worst |z| " + fmt(worst_z, 2));
}

// ------------------------------------------------------------ 9. benchmark

void synthetic_benchmark(Report& r) {
    auto& b = bench();
    std::map<std::string, double> e2;
    for (const auto& [kind, t] : b.models) {
        const double e = calibration::efficacy(t.validation_scores, t.table.at(2.0).cutoff);
        e2[kind] = e;
        r.note(kind + " E(2%)=" + fmt(e, 1) + " train " + fmt(t.train_seconds, 0) + "s");
    }
    r.check(e2["bow"] >= 80.0, "BoW E(2%) " + fmt(e2["bow"], 1) + " < 80");
    r.check(e2["transformer"] >= e2["bow"] - 5.0, "toy transformer E(2%) below BoW - 5");
    const bool full_order = e2["transformer"] >= e2["rnn"] && e2["rnn"] >= e2["bow"];
    r.note(std::string("transformer >= rnn >= bow ") + (full_order ? "holds" : "does not hold") +
           " (full-scale expectation, not asserted)");
}

// -------------------------------------------------------------- 10. service

service::ServiceConfig service_config(const std::string& dir) {
    service::ServiceConfig c;
    c.data_dir = dir;
    return c;
}

struct Crash {};

std::string join_fragments(const std::vector<std::string>& parts) {
    std::string s;
    for (const auto& p : parts) s += (s.empty() ? "" : "\n\n") + p;
    return s;
}

bool queue_ordered(const std::vector<service::ReviewItem>& items) {
    for (std::size_t i = 1; i < items.size(); ++i) {
        const auto& a = items[i - 1];
        const auto& b = items[i];
        const auto ka = std::make_tuple(-a.score, a.received_at, a.seq, a.fragment_id);
        const auto kb = std::make_tuple(-b.score, b.received_at, b.seq, b.fragment_id);
        if (!(ka < kb)) return false;
    }
    return true;
}

void service_criterion(Report& r) {
    auto& b = bench();
    const auto& bow = b.models.at("bow");
    const double p = 2.0;
    const double cutoff = bow.table.at(p).cutoff;

    // Crash injection. Responses mix high- and low-scoring threshold texts so
    // each one carries flags.
    const auto all_scores = calibration::score_all(*bow.scorer, b.threshold);
    std::vector<std::pair<double, std::string>> ranked;
    for (std::size_t i = 0; i < b.threshold.size(); ++i) ranked.push_back({all_scores[i], b.threshold[i]});
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    std::vector<service::SubmittedResponse> responses;
    for (int i = 0; i < 8; ++i) {
        std::vector<std::string> parts = {ranked[static_cast<std::size_t>(2 * i)].second,
                                          ranked[5000 + static_cast<std::size_t>(i)].second,
                                          ranked[static_cast<std::size_t>(2 * i + 1)].second,
                                          ranked[9000 + static_cast<std::size_t>(i)].second};
        responses.push_back({"crash-" + std::to_string(i), "item-1", join_fragments(parts)});
    }
    std::set<std::string> expected;
    for (const auto& resp : responses) {
        const auto frags = service::fragment_response(resp.text);
        for (std::size_t i = 0; i < frags.size(); ++i)
            if (bow.scorer->score(frags[i]) >= cutoff) expected.insert(service::fragment_id(resp.response_id, i));
    }
    r.check(expected.size() >= 16, "crash workload has flags");
    const service::CrashPoint points[] = {service::CrashPoint::AfterScore, service::CrashPoint::MidAppend,
                                          service::CrashPoint::AfterAppend, service::CrashPoint::BeforeAck,
                                          service::CrashPoint::AfterSnapshot};
    int scenarios = 0;
    for (auto point : points) {
        for (int nth = 1; nth <= 3; ++nth, ++scenarios) {
            test::TempDir dir;
            auto cfg = service_config(dir.path().string());
            cfg.snapshot_every = 3;
            auto seen = std::make_shared<int>(0);
            cfg.crash_hook = [point, nth, seen](service::CrashPoint at) {
                if (at == point && ++*seen == nth) throw Crash{};
            };
            auto open = [&] {
                auto e = std::make_unique<service::TriageEngine>(cfg);
                e->configure(bow.scorer, bow.table, p);
                return e;
            };
            auto engine = open();
            std::set<std::string> acked;
            bool crashed = false, gave_up = false;
            for (const auto& resp : responses) {
                for (int attempt = 0;; ++attempt) {
                    if (attempt == 3) {
                        gave_up = true;
                        break;
                    }
                    try {
                        for (const auto& d : engine->submit(resp))
                            if (d.flagged) acked.insert(d.fragment_id);
                        break;
                    } catch (const Crash&) {
                        crashed = true;
                        engine.reset();
                        engine = open();
                    }
                }
            }
            engine.reset();
            cfg.crash_hook = {};
            engine = open();
            const auto page = engine->list_queue(std::nullopt, 0, 1000);
            std::set<std::string> queued;
            for (const auto& it : page.items) queued.insert(it.fragment_id);
            const std::string tag = "crash scenario " + std::to_string(static_cast<int>(point)) + "/" + std::to_string(nth);
            r.check(crashed && !gave_up, tag + " did not exercise the crash");
            r.check(queued.size() == page.items.size(), tag + " duplicate queue entries");
            r.check(std::includes(queued.begin(), queued.end(), acked.begin(), acked.end()), tag + " lost an acked flag");
            r.check(queued == expected, tag + " queue differs from expected flags");
        }
    }
    r.note(std::to_string(scenarios) + " crash scenarios, " + std::to_string(expected.size()) + " flags each");

    // 10k-fragment load from the threshold distribution (fresh sample).
    const auto load = texts_of(corpus::generate_synthetic(9950, 50, 4));
    for (double lp : {1.0, 2.0, 4.0}) {
        test::TempDir dir;
        service::TriageEngine engine(service_config(dir.path().string()));
        engine.configure(bow.scorer, bow.table, lp);
        for (std::size_t i = 0; i < load.size(); i += 20) {
            std::vector<std::string> parts(load.begin() + static_cast<std::ptrdiff_t>(i),
                                           load.begin() + static_cast<std::ptrdiff_t>(std::min(i + 20, load.size())));
            engine.submit({"load-" + std::to_string(i), "item", join_fragments(parts)});
        }
        const auto m = engine.metrics();
        const double pct = 100.0 * static_cast<double>(m.flagged) / static_cast<double>(m.fragments_processed);
        r.check(m.fragments_processed == 10000, "load processed " + std::to_string(m.fragments_processed));
        r.check(std::abs(pct - lp) <= 0.5, "flagged " + fmt(pct, 3) + "% at p=" + fmt(lp, 2));
        r.note("p=" + fmt(lp, 0) + " flagged " + fmt(pct, 2) + "%");

        if (lp != 2.0) continue;
        // Stable total order across re-listing, paging, adjudication and restart.
        const auto full = engine.list_queue(std::nullopt, 0, 1000).items;
        r.check(queue_ordered(full), "queue order violates the ranking keys");
        std::vector<std::string> ids;
        for (const auto& it : full) ids.push_back(it.fragment_id);
        auto list_ids = [](const service::TriageEngine& e, std::size_t page_size) {
            std::vector<std::string> out;
            for (std::size_t pg = 0;; ++pg) {
                const auto page = e.list_queue(std::nullopt, pg, page_size);
                for (const auto& it : page.items) out.push_back(it.fragment_id);
                if (page.items.empty() || out.size() >= page.total) break;
            }
            return out;
        };
        r.check(list_ids(engine, 1000) == ids, "re-list differs");
        r.check(list_ids(engine, 7) == ids, "paged listing differs");
        for (std::size_t i = 0; i < ids.size(); i += 5)
            engine.adjudicate(ids[i], {service::Outcome::FalsePositive, std::nullopt, "acceptance"});
        r.check(list_ids(engine, 13) == ids, "order changed after adjudication");
        service::TriageEngine reopened(service_config(dir.path().string()));
        reopened.configure(bow.scorer, bow.table, lp);
        r.check(list_ids(reopened, 50) == ids, "order changed after restart");
    }
}

// ---------------------------------------------------------- 11. throughput

void throughput_criterion(Report& r) {
    auto& b = bench();
    const auto& bow = b.models.at("bow");
    test::TempDir dir;
    service::TriageEngine engine(service_config(dir.path().string()));
    engine.configure(bow.scorer, bow.table, 2.0);
    service::HttpServer server(engine);
    const int port = server.bind("127.0.0.1", 0);
    server.start();
    httplib::Client client("127.0.0.1", port);
    const auto load = texts_of(corpus::generate_synthetic(9950, 50, 5));
    bool all_ok = true;
    for (std::size_t i = 0; i < load.size(); i += 50) {
        std::vector<std::string> parts(load.begin() + static_cast<std::ptrdiff_t>(i),
                                       load.begin() + static_cast<std::ptrdiff_t>(std::min(i + 50, load.size())));
        const json body = {{"response_id", "tp-" + std::to_string(i)}, {"text", join_fragments(parts)}};
        const auto res = client.Post("/v1/responses", body.dump(), "application/json");
        all_ok = all_ok && res && res->status == 200;
    }
    const auto res = client.Get("/v1/metrics");
    server.stop();
    r.check(all_ok, "every submission returned 200");
    r.check(res && res->status == 200, "metrics endpoint");
    if (!res || res->status != 200) return;
    const json m = json::parse(res->body);
    const double rate = m.at("throughput_per_second").get<double>();
    r.check(m.at("fragments_processed").get<std::uint64_t>() == 10000, "processed count");
    r.check(rate >= 1000.0, "throughput " + fmt(rate, 0) + "/s");
    r.note(fmt(rate, 0) + " fragments/s over HTTP, p95 latency " + fmt(m.at("latency_ms").at("p95").get<double>(), 3) +
           " ms");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Report&)>>> criteria = {
        {"tf-idf oracle", tfidf_oracle},
        {"LSA oracle", lsa_oracle},
        {"gradient checks", gradient_checks},
        {"attention correctness", attention_oracle},
        {"segmentation properties", segmentation_property},
        {"max-pooling inference", max_pooling},
        {"calibration", calibration_criterion},
        {"uniform scorer sanity", uniform_sanity},
        {"synthetic benchmark", synthetic_benchmark},
        {"service durability, load and ordering", service_criterion},
        {"throughput", throughput_criterion},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(number)) continue;
        Report report;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].second(report);
        } catch (const std::exception& e) {
            report.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!report.ok()) ++failed;
        std::cout << (report.ok() ? "PASS" : "FAIL") << " [" << number << "] " << criteria[i].first << " ("
                  << fmt(secs, 1) << "s): " << report.summary() << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
