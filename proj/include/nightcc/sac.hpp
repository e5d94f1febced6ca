#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

#include "nightcc/env.hpp"
#include "nightcc/nn.hpp"

namespace nightcc::rl {

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 4.0;
inline constexpr double kTanhEps = 1e-6;

struct NetDims {
    int hist_in = 3 * 60 * 60;
    int hist_hidden = 256;
    int embed = 64;
    int history_in = kHistoryDim;
    int history_hidden = 32;
    int head_hidden = 64;
    int action_dim = 2;
    int fused() const { return 2 * embed; }
};

/// A batch of states. Histogram rows are deduplicated: transitions of the
/// same image share one row of `hist_unique`, and `idx` maps each batch row
/// to its histogram. This keeps the wide first layer proportional to the
/// number of distinct images rather than the batch size, with gradients
/// group-summed exactly.
template <class S>
struct StateBatch {
    const MatX<S>* hist_unique = nullptr;
    const std::vector<int>* idx = nullptr;
    const MatX<S>* history = nullptr;
    int rows() const { return static_cast<int>(idx->size()); }
};

/// Two-branch MLP encoder: histogram and history each map to an `embed`-dim
/// rectified embedding; the fused state is their concatenation.
template <class S>
struct DualBranchEncoder {
    ReluMlp<S> hist_branch;
    ReluMlp<S> history_branch;
    std::vector<int> idx_cache;
    int unique_cache = 0;

    void init(const NetDims& d, std::mt19937_64& rng) {
        hist_branch.init({d.hist_in, d.hist_hidden, d.embed}, rng, /*relu_last=*/true);
        history_branch.init({d.history_in, d.history_hidden, d.embed}, rng, /*relu_last=*/true);
    }

    MatX<S> forward(const StateBatch<S>& sb) {
        MatX<S> hu = hist_branch.forward(*sb.hist_unique); // U x embed
        MatX<S> hh = history_branch.forward(*sb.history);  // B x embed
        idx_cache = *sb.idx;
        unique_cache = static_cast<int>(hu.rows());
        int embed = static_cast<int>(hu.cols());
        MatX<S> fused(sb.rows(), 2 * embed);
        for (int i = 0; i < sb.rows(); ++i) {
            fused.row(i).head(embed) = hu.row(idx_cache[i]);
            fused.row(i).tail(embed) = hh.row(i);
        }
        return fused;
    }

    void backward(const MatX<S>& gfused, bool accumulate = true) {
        int embed = static_cast<int>(gfused.cols()) / 2;
        MatX<S> ghu = MatX<S>::Zero(unique_cache, embed);
        for (int i = 0; i < gfused.rows(); ++i)
            ghu.row(idx_cache[i]) += gfused.row(i).head(embed);
        hist_branch.backward(ghu, accumulate);
        history_branch.backward(gfused.rightCols(embed), accumulate);
    }

    void zero_grad() {
        hist_branch.zero_grad();
        history_branch.zero_grad();
    }
    void collect(ParamList<S>& out, const std::string& prefix) {
        hist_branch.collect(out, prefix + ".hist");
        history_branch.collect(out, prefix + ".history");
    }
};

/// Squashed-Gaussian policy: the head emits mean and log-variance for two
/// actions, sampling is reparameterized, and tanh squashes to [-1,1]. The
/// log-density carries the tanh change-of-variables correction.
template <class S>
struct Actor {
    DualBranchEncoder<S> encoder;
    ReluMlp<S> head;
    // caches from the last stochastic forward
    MatX<S> a_cache, eps_cache, sigma_cache;
    MatX<S> clamp_mask; // 1 where log-variance was not clamped

    void init(const NetDims& d, std::mt19937_64& rng) {
        encoder.init(d, rng);
        head.init({d.fused(), d.head_hidden, 2 * d.action_dim}, rng);
    }

    struct Sample {
        MatX<S> actions; // B x 2, in [-1,1]
        VecX<S> logp;    // B
    };

    Sample sample(const StateBatch<S>& sb, const MatX<S>& eps, bool deterministic = false) {
        MatX<S> out = head.forward(encoder.forward(sb));
        int adim = static_cast<int>(out.cols()) / 2;
        int b = static_cast<int>(out.rows());
        MatX<S> mu = out.leftCols(adim);
        MatX<S> logvar = out.rightCols(adim);
        clamp_mask = MatX<S>::Ones(b, adim);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < adim; ++j) {
                if (logvar(i, j) < S(kLogVarMin)) {
                    logvar(i, j) = S(kLogVarMin);
                    clamp_mask(i, j) = S(0);
                } else if (logvar(i, j) > S(kLogVarMax)) {
                    logvar(i, j) = S(kLogVarMax);
                    clamp_mask(i, j) = S(0);
                }
            }
        Sample s;
        if (deterministic) {
            s.actions = mu.array().tanh();
            s.logp = VecX<S>::Zero(b);
            return s;
        }
        sigma_cache = (logvar * S(0.5)).array().exp();
        eps_cache = eps;
        MatX<S> z = mu + sigma_cache.cwiseProduct(eps);
        a_cache = z.array().tanh();
        s.actions = a_cache;

        const S half_log_2pi = S(0.5 * std::log(2.0 * 3.14159265358979323846));
        s.logp = VecX<S>::Zero(b);
        for (int i = 0; i < b; ++i) {
            S acc = S(0);
            for (int j = 0; j < adim; ++j) {
                S a = a_cache(i, j);
                acc += -half_log_2pi - S(0.5) * logvar(i, j) - S(0.5) * eps(i, j) * eps(i, j);
                acc -= std::log(S(1) - a * a + S(kTanhEps));
            }
            s.logp(i) = acc;
        }
        return s;
    }

    /// Backpropagates d(loss)/d(actions) and d(loss)/d(logp) from the last
    /// stochastic sample into the network parameters.
    void backward(const MatX<S>& d_a, const VecX<S>& d_logp, bool accumulate = true) {
        int b = static_cast<int>(a_cache.rows());
        int adim = static_cast<int>(a_cache.cols());
        MatX<S> ghead(b, 2 * adim);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < adim; ++j) {
                S a = a_cache(i, j);
                S one_m_a2 = S(1) - a * a;
                S dz_dlv = S(0.5) * sigma_cache(i, j) * eps_cache(i, j);
                // d logp / dz through the tanh correction
                S dlogp_dz = S(2) * a * one_m_a2 / (one_m_a2 + S(kTanhEps));
                S dmu = d_a(i, j) * one_m_a2 + d_logp(i) * dlogp_dz;
                S dlv = d_a(i, j) * one_m_a2 * dz_dlv +
                        d_logp(i) * (S(-0.5) + dlogp_dz * dz_dlv);
                ghead(i, j) = dmu;
                ghead(i, adim + j) = dlv * clamp_mask(i, j);
            }
        encoder.backward(head.backward(ghead, accumulate), accumulate);
    }

    void zero_grad() {
        encoder.zero_grad();
        head.zero_grad();
    }
    void collect(ParamList<S>& out, const std::string& prefix) {
        encoder.collect(out, prefix + ".enc");
        head.collect(out, prefix + ".head");
    }
};

/// Q-network over (state, action); the normalized action joins the fused
/// state embedding at the head input.
template <class S>
struct Critic {
    DualBranchEncoder<S> encoder;
    ReluMlp<S> head;
    int action_dim = 2;

    void init(const NetDims& d, std::mt19937_64& rng) {
        action_dim = d.action_dim;
        encoder.init(d, rng);
        head.init({d.fused() + d.action_dim, d.head_hidden, 1}, rng);
    }

    VecX<S> forward(const StateBatch<S>& sb, const MatX<S>& actions_norm) {
        MatX<S> fused = encoder.forward(sb);
        MatX<S> in(fused.rows(), fused.cols() + actions_norm.cols());
        in << fused, actions_norm;
        return head.forward(in).col(0);
    }

    /// Returns d(loss)/d(actions) so the actor update can differentiate
    /// through the Q-value; parameter gradients accumulate only on request.
    MatX<S> backward(const VecX<S>& dq, bool accumulate = true) {
        MatX<S> gin = head.backward(dq, accumulate);
        encoder.backward(gin.leftCols(gin.cols() - action_dim), accumulate);
        return gin.rightCols(action_dim);
    }

    void zero_grad() {
        encoder.zero_grad();
        head.zero_grad();
    }
    void collect(ParamList<S>& out, const std::string& prefix) {
        encoder.collect(out, prefix + ".enc");
        head.collect(out, prefix + ".head");
    }
};

/// A replay batch in network form.
template <class S>
struct SacBatch {
    MatX<S> hist_unique;
    std::vector<int> idx, idx_next;
    MatX<S> history, history_next;
    MatX<S> actions_norm;
    VecX<S> rewards;
    VecX<S> done;

    StateBatch<S> state() const { return {&hist_unique, &idx, &history}; }
    StateBatch<S> next_state() const { return {&hist_unique, &idx_next, &history_next}; }
    int rows() const { return static_cast<int>(idx.size()); }
};

template <class S>
struct SacNets {
    Actor<S> actor;
    Critic<S> q1, q2;
    Critic<S> tq1, tq2;
    S log_alpha = S(0);
    S g_log_alpha = S(0);
    NetDims dims;

    void init(const NetDims& d, std::uint64_t seed) {
        dims = d;
        std::mt19937_64 r1(mix_seed(seed, "actor")), r2(mix_seed(seed, "q1")),
            r3(mix_seed(seed, "q2"));
        actor.init(d, r1);
        q1.init(d, r2);
        q2.init(d, r3);
        tq1 = q1;
        tq2 = q2;
        log_alpha = S(0);
    }

    S alpha() const { return std::exp(log_alpha); }

    ParamList<S> actor_params() {
        ParamList<S> p;
        actor.collect(p, "actor");
        return p;
    }
    ParamList<S> critic_params() {
        ParamList<S> p;
        q1.collect(p, "q1");
        q2.collect(p, "q2");
        return p;
    }
    ParamList<S> alpha_params() {
        return {{"log_alpha", &log_alpha, &g_log_alpha, {1}, 1}};
    }
    /// Everything that goes into a checkpoint.
    ParamList<S> all_params() {
        ParamList<S> p;
        actor.collect(p, "actor");
        q1.collect(p, "q1");
        q2.collect(p, "q2");
        tq1.collect(p, "tq1");
        tq2.collect(p, "tq2");
        p.push_back({"log_alpha", &log_alpha, &g_log_alpha, {1}, 1});
        return p;
    }
};

/// Bootstrap target y = r + gamma * (1-done) * (min target Q - alpha*logp'),
/// with the next action freshly sampled from the current policy. No
/// gradients flow through any of it.
template <class S>
VecX<S> compute_critic_targets(SacNets<S>& nets, const SacBatch<S>& batch, double gamma,
                               const MatX<S>& eps_next) {
    auto next = batch.next_state();
    auto s = nets.actor.sample(next, eps_next);
    VecX<S> q1n = nets.tq1.forward(next, s.actions);
    VecX<S> q2n = nets.tq2.forward(next, s.actions);
    S alpha = nets.alpha();
    VecX<S> y(batch.rows());
    for (int i = 0; i < batch.rows(); ++i) {
        S soft = std::min(q1n(i), q2n(i)) - alpha * s.logp(i);
        y(i) = batch.rewards(i) + S(gamma) * (S(1) - batch.done(i)) * soft;
    }
    return y;
}

/// Half-MSE critic losses against fixed targets; accumulates gradients into
/// both critics and returns J_Q1 + J_Q2.
template <class S>
S critic_loss_grad(SacNets<S>& nets, const SacBatch<S>& batch, const VecX<S>& y,
                   bool accumulate = true) {
    auto state = batch.state();
    S inv_b = S(1) / S(batch.rows());
    S loss = S(0);
    for (Critic<S>* c : {&nets.q1, &nets.q2}) {
        VecX<S> q = c->forward(state, batch.actions_norm);
        VecX<S> d = q - y;
        loss += S(0.5) * d.squaredNorm() * inv_b;
        c->backward(d * inv_b, accumulate);
    }
    return loss;
}

/// Entropy-regularized policy objective J = mean(alpha*logp - min Q(s, a))
/// with a freshly reparameterized action; gradients accumulate into the
/// actor only (the critics are differentiated through, not updated).
template <class S>
S actor_loss_grad(SacNets<S>& nets, const SacBatch<S>& batch, const MatX<S>& eps,
                  VecX<S>* logp_out = nullptr, bool accumulate = true) {
    auto state = batch.state();
    auto s = nets.actor.sample(state, eps);
    VecX<S> qa1 = nets.q1.forward(state, s.actions);
    VecX<S> qa2 = nets.q2.forward(state, s.actions);
    VecX<S> dq1 = VecX<S>::Zero(batch.rows());
    VecX<S> dq2 = VecX<S>::Zero(batch.rows());
    S alpha = nets.alpha();
    S inv_b = S(1) / S(batch.rows());
    S loss = S(0);
    for (int i = 0; i < batch.rows(); ++i) {
        S qmin = std::min(qa1(i), qa2(i));
        loss += (alpha * s.logp(i) - qmin) * inv_b;
        if (qa1(i) <= qa2(i))
            dq1(i) = -inv_b;
        else
            dq2(i) = -inv_b;
    }
    // Each critic owns its caches, so both backward passes stay valid here.
    MatX<S> d_a = nets.q1.backward(dq1, /*accumulate=*/false);
    d_a += nets.q2.backward(dq2, /*accumulate=*/false);
    VecX<S> d_logp = VecX<S>::Constant(batch.rows(), alpha * inv_b);
    nets.actor.backward(d_a, d_logp, accumulate);
    if (logp_out) *logp_out = s.logp;
    return loss;
}

/// Temperature objective J = -log_alpha * mean(logp + target_entropy);
/// returns the loss and stores the gradient on the nets.
template <class S>
S alpha_loss_grad(SacNets<S>& nets, const VecX<S>& logp, double target_entropy) {
    S mean = S(0);
    for (int i = 0; i < logp.size(); ++i) mean += logp(i) + S(target_entropy);
    mean /= S(logp.size());
    nets.g_log_alpha = -mean;
    return -nets.log_alpha * mean;
}

/// Polyak blend of target parameters toward the online ones. The endpoint
/// taus short-circuit so full copies and no-ops are bit-exact, and the
/// delta form keeps converged targets at their fixed point.
template <class S>
void soft_update_params(const ParamList<S>& online, ParamList<S>& target, double tau) {
    if (online.size() != target.size())
        throw std::logic_error("soft update over mismatched parameter lists");
    for (size_t i = 0; i < online.size(); ++i) {
        if (online[i].count != target[i].count)
            throw std::logic_error("soft update over mismatched tensor shapes");
        if (tau == 0.0) continue;
        const auto n = static_cast<Eigen::Index>(online[i].count);
        Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> t(target[i].data, n);
        Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> o(online[i].data, n);
        if (tau == 1.0)
            t = o;
        else
            t += S(tau) * (o - t);
    }
}

/// Ring buffer of transitions with a uniform-with-replacement sampler.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
        if (capacity_ == 0)
            throw config_error("replay capacity must be positive");
    }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return items_.size(); }
    const Transition& operator[](std::size_t i) const { return items_[i]; }

    std::size_t sample_index(std::mt19937_64& rng) const {
        return std::uniform_int_distribution<std::size_t>(0, items_.size() - 1)(rng);
    }

    template <class S>
    SacBatch<S> sample(std::mt19937_64& rng, int batch_size) const {
        if (items_.empty())
            throw std::logic_error("sampling from an empty replay buffer");
        SacBatch<S> b;
        b.history.resize(batch_size, kHistoryDim);
        b.history_next.resize(batch_size, kHistoryDim);
        b.actions_norm.resize(batch_size, 2);
        b.rewards.resize(batch_size);
        b.done.resize(batch_size);
        b.idx.resize(batch_size);
        b.idx_next.resize(batch_size);

        std::vector<const HistogramFeature*> uniq;
        std::unordered_map<const HistogramFeature*, int> lookup;
        auto intern = [&](const std::shared_ptr<const HistogramFeature>& h) {
            auto [it, inserted] = lookup.try_emplace(h.get(), static_cast<int>(uniq.size()));
            if (inserted) uniq.push_back(h.get());
            return it->second;
        };
        std::vector<const Transition*> chosen(batch_size);
        for (int i = 0; i < batch_size; ++i) chosen[i] = &items_[sample_index(rng)];
        for (int i = 0; i < batch_size; ++i) {
            const Transition& t = *chosen[i];
            b.idx[i] = intern(t.state.histogram);
            b.idx_next[i] = intern(t.next_state.histogram);
            for (int j = 0; j < kHistoryDim; ++j) {
                b.history(i, j) = S(t.state.history[j]);
                b.history_next(i, j) = S(t.next_state.history[j]);
            }
            b.actions_norm(i, 0) = S(t.action[0] / kActionScaleN);
            b.actions_norm(i, 1) = S(t.action[1] / kActionScaleP);
            b.rewards(i) = S(t.reward);
            b.done(i) = t.done ? S(1) : S(0);
        }
        int dim = static_cast<int>(uniq.front()->values.size());
        b.hist_unique.resize(static_cast<int>(uniq.size()), dim);
        for (size_t u = 0; u < uniq.size(); ++u)
            for (int j = 0; j < dim; ++j) b.hist_unique(static_cast<int>(u), j) = S(uniq[u]->values[j]);
        return b;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> items_;
};

struct UpdateStats {
    double critic_loss = 0, actor_loss = 0, alpha_loss = 0, alpha = 1, entropy = 0;
};

/// The concrete agent used for training and deployment. Networks run in
/// single precision; the gradient-check suite instantiates the same
/// templates in double.
class SacAgent {
public:
    SacAgent(const NetDims& dims, double learning_rate, double target_entropy, std::uint64_t seed)
        : target_entropy_(target_entropy),
          opt_actor_(learning_rate),
          opt_critic_(learning_rate),
          opt_alpha_(learning_rate),
          action_rng_(mix_seed(seed, "actions")),
          batch_rng_(mix_seed(seed, "batches")) {
        nets_.init(dims, mix_seed(seed, "weights"));
        opt_actor_.attach(nets_.actor_params());
        opt_critic_.attach(nets_.critic_params());
        opt_alpha_.attach(nets_.alpha_params());
    }

    struct ActionOut {
        std::array<double, 2> rescaled{0, 0};
        double logp = 0;
    };

    ActionOut sample_action(const EnvState& state, bool deterministic) {
        MatX<float> hist(1, static_cast<int>(state.histogram->values.size()));
        for (int j = 0; j < hist.cols(); ++j) hist(0, j) = state.histogram->values[j];
        std::vector<int> idx{0};
        MatX<float> history(1, kHistoryDim);
        for (int j = 0; j < kHistoryDim; ++j) history(0, j) = static_cast<float>(state.history[j]);
        StateBatch<float> sb{&hist, &idx, &history};

        MatX<float> eps = MatX<float>::Zero(1, 2);
        if (!deterministic) {
            std::normal_distribution<double> n(0.0, 1.0);
            eps(0, 0) = static_cast<float>(n(action_rng_));
            eps(0, 1) = static_cast<float>(n(action_rng_));
        }
        auto s = nets_.actor.sample(sb, eps, deterministic);
        ActionOut out;
        out.rescaled = {static_cast<double>(s.actions(0, 0)) * kActionScaleN,
                        static_cast<double>(s.actions(0, 1)) * kActionScaleP};
        out.logp = deterministic ? 0.0 : static_cast<double>(s.logp(0));
        return out;
    }

    UpdateStats update(const ReplayBuffer& buffer, int batch_size, double gamma) {
        SacBatch<float> batch = buffer.sample<float>(batch_rng_, batch_size);
        MatX<float> eps_next = normal_matrix(batch_size, 2);
        MatX<float> eps_pi = normal_matrix(batch_size, 2);

        VecX<float> y = compute_critic_targets(nets_, batch, gamma, eps_next);

        for (auto& p : nets_.critic_params())
            std::fill(p.grad, p.grad + p.count, 0.0f);
        UpdateStats st;
        st.critic_loss = critic_loss_grad(nets_, batch, y);
        opt_critic_.step(nets_.critic_params());

        for (auto& p : nets_.actor_params())
            std::fill(p.grad, p.grad + p.count, 0.0f);
        VecX<float> logp;
        st.actor_loss = actor_loss_grad(nets_, batch, eps_pi, &logp);
        opt_actor_.step(nets_.actor_params());

        st.alpha_loss = alpha_loss_grad(nets_, logp, target_entropy_);
        opt_alpha_.step(nets_.alpha_params());

        st.alpha = nets_.alpha();
        st.entropy = -static_cast<double>(logp.mean());
        if (!std::isfinite(st.critic_loss) || !std::isfinite(st.actor_loss) ||
            !std::isfinite(st.alpha_loss))
            throw divergence_error("non-finite SAC loss (critic=" + fmt_g(st.critic_loss) +
                                   " actor=" + fmt_g(st.actor_loss) + ")");
        return st;
    }

    void soft_update(double tau) {
        auto o1 = param_list_of(nets_.q1, "q1");
        auto t1 = param_list_of(nets_.tq1, "tq1");
        soft_update_params(o1, t1, tau);
        auto o2 = param_list_of(nets_.q2, "q2");
        auto t2 = param_list_of(nets_.tq2, "tq2");
        soft_update_params(o2, t2, tau);
    }

    SacNets<float>& nets() { return nets_; }
    const NetDims& dims() const { return nets_.dims; }

private:
    static ParamList<float> param_list_of(Critic<float>& c, const std::string& prefix) {
        ParamList<float> p;
        c.collect(p, prefix);
        return p;
    }

    MatX<float> normal_matrix(int rows, int cols) {
        std::normal_distribution<double> n(0.0, 1.0);
        MatX<float> m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = static_cast<float>(n(action_rng_));
        return m;
    }

    SacNets<float> nets_;
    double target_entropy_;
    Adam<float> opt_actor_, opt_critic_, opt_alpha_;
    std::mt19937_64 action_rng_, batch_rng_;
};

} // namespace nightcc::rl
