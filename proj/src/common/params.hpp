// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

namespace asr {

/// Flat view over one trainable tensor. `decay` marks tensors subject to
/// weight decay (matrices; not biases or normalisation parameters).
struct ParamView {
    std::string name;
    Eigen::Map<Eigen::VectorXd> values;
    bool decay;

    ParamView(std::string n, Eigen::MatrixXd& m, bool d) : name(std::move(n)), values(m.data(), m.size()), decay(d) {}
    ParamView(std::string n, Eigen::VectorXd& v, bool d) : name(std::move(n)), values(v.data(), v.size()), decay(d) {}
};

inline double global_norm(const std::vector<ParamView>& grads) {
    double s = 0.0;
    for (const auto& g : grads) s += g.values.squaredNorm();
    return std::sqrt(s);
}

inline void scale_all(std::vector<ParamView>& grads, double factor) {
    for (auto& g : grads) g.values *= factor;
}

inline void zero_all(std::vector<ParamView>& grads) {
    for (auto& g : grads) g.values.setZero();
}

/// Adam with decoupled weight decay. With lr == 0 parameters are untouched.
class AdamW {
public:
    AdamW(const std::vector<ParamView>& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params) {
            m_.push_back(Eigen::VectorXd::Zero(p.values.size()));
            v_.push_back(Eigen::VectorXd::Zero(p.values.size()));
        }
    }

    void step(std::vector<ParamView>& params, const std::vector<ParamView>& grads, double lr, double weight_decay) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i].values;
            const auto& g = grads[i].values;
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            if (lr == 0.0) continue;
            const Eigen::VectorXd update =
                (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps_);
            if (params[i].decay && weight_decay != 0.0) p -= lr * weight_decay * p;
            p -= lr * update;
        }
    }

    long steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::VectorXd> m_, v_;
};

}  // namespace asr
