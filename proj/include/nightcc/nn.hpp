#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nightcc/common.hpp"

namespace nightcc::rl {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

/// Named view of one parameter tensor and its gradient accumulator.
template <class S>
struct ParamRef {
    std::string name;
    S* data = nullptr;
    S* grad = nullptr;
    std::vector<int> shape; // Eigen column-major storage order
    std::size_t count = 0;
};

template <class S>
using ParamList = std::vector<ParamRef<S>>;

/// Fully connected layer, batch rows by feature columns.
template <class S>
struct Linear {
    MatX<S> w;  // in x out
    RowX<S> b;
    MatX<S> gw;
    RowX<S> gb;
    MatX<S> in_cache;

    void init(int in, int out, std::mt19937_64& rng) {
        // Uniform fan-in scaling.
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        w.resize(in, out);
        b.resize(out);
        for (int c = 0; c < out; ++c)
            for (int r = 0; r < in; ++r) w(r, c) = static_cast<S>(u(rng));
        for (int c = 0; c < out; ++c) b(c) = static_cast<S>(u(rng));
        gw = MatX<S>::Zero(in, out);
        gb = RowX<S>::Zero(out);
    }

    MatX<S> forward(const MatX<S>& x) {
        in_cache = x;
        return (x * w).rowwise() + b;
    }

    MatX<S> backward(const MatX<S>& gy, bool accumulate = true) {
        if (accumulate) {
            gw.noalias() += in_cache.transpose() * gy;
            gb += gy.colwise().sum();
        }
        return gy * w.transpose();
    }

    void zero_grad() {
        gw.setZero();
        gb.setZero();
    }

    void collect(ParamList<S>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", w.data(), gw.data(), {static_cast<int>(w.rows()), static_cast<int>(w.cols())},
                       static_cast<std::size_t>(w.size())});
        out.push_back({prefix + ".b", b.data(), gb.data(), {static_cast<int>(b.size())},
                       static_cast<std::size_t>(b.size())});
    }
};

/// Stack of Linear layers with a rectifier between them; the final layer is
/// linear. `hidden_relu_last` additionally rectifies the final output
/// (used by the encoder branches whose embeddings are activated).
template <class S>
struct ReluMlp {
    std::vector<Linear<S>> layers;
    std::vector<MatX<S>> act_cache; // post-relu activations per hidden layer
    MatX<S> out_cache;
    bool relu_on_output = false;

    void init(const std::vector<int>& dims, std::mt19937_64& rng, bool relu_last = false) {
        relu_on_output = relu_last;
        layers.resize(dims.size() - 1);
        for (size_t i = 0; i + 1 < dims.size(); ++i) layers[i].init(dims[i], dims[i + 1], rng);
    }

    MatX<S> forward(const MatX<S>& x) {
        act_cache.clear();
        MatX<S> h = x;
        for (size_t i = 0; i < layers.size(); ++i) {
            h = layers[i].forward(h);
            if (i + 1 < layers.size() || relu_on_output) {
                h = h.cwiseMax(S(0));
                act_cache.push_back(h);
            }
        }
        out_cache = h;
        return h;
    }

    MatX<S> backward(const MatX<S>& gy, bool accumulate = true) {
        MatX<S> g = gy;
        size_t nrelu = act_cache.size();
        if (relu_on_output) {
            g = g.cwiseProduct((act_cache[--nrelu].array() > S(0)).template cast<S>().matrix());
        }
        for (size_t i = layers.size(); i-- > 0;) {
            g = layers[i].backward(g, accumulate);
            if (i > 0)
                g = g.cwiseProduct((act_cache[--nrelu].array() > S(0)).template cast<S>().matrix());
        }
        return g;
    }

    void zero_grad() {
        for (auto& l : layers) l.zero_grad();
    }

    void collect(ParamList<S>& out, const std::string& prefix) {
        for (size_t i = 0; i < layers.size(); ++i)
            layers[i].collect(out, prefix + ".l" + std::to_string(i));
    }
};

/// Adam over a fixed parameter list.
template <class S>
class Adam {
public:
    explicit Adam(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void attach(const ParamList<S>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.emplace_back(p.count, S(0));
            v_.emplace_back(p.count, S(0));
        }
        t_ = 0;
    }

    void step(const ParamList<S>& params) {
        ++t_;
        const S bc1 = S(1) - S(std::pow(beta1_, t_));
        const S bc2 = S(1) - S(std::pow(beta2_, t_));
        const S b1 = S(beta1_), b2 = S(beta2_);
        const S lr = S(lr_), eps = S(eps_);
        for (size_t i = 0; i < params.size(); ++i) {
            const auto n = static_cast<Eigen::Index>(params[i].count);
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> x(params[i].data, n);
            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> g(params[i].grad, n);
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> m(m_[i].data(), n);
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> v(v_[i].data(), n);
            m = b1 * m + (S(1) - b1) * g;
            v = b2 * v + (S(1) - b2) * g.square();
            x -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
        }
    }

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<std::vector<S>> m_, v_;
    long t_ = 0;
};

} // namespace nightcc::rl
