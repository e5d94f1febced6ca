#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "nightcc/features.hpp"
#include "nightcc/metrics.hpp"
#include "nightcc/sgp.hpp"

namespace nightcc::rl {

inline constexpr double kRewardEpsilon = 1e-3;
inline constexpr double kRewardAlpha = 0.6;
inline constexpr double kActionLambda = 0.1;

/// Relative error-improvement reward, normalized by the episode's initial
/// error and softened by the pool-average difficulty c1.
inline double reward_err(double e0, double et, double c1) {
    return (e0 - et) / (e0 + kRewardEpsilon + std::pow(e0 / c1, kRewardAlpha));
}

/// Action-magnitude cost; actions are given in rescaled units.
inline double reward_act(double a1, double a2) {
    double n1 = a1 / kActionScaleN, n2 = a2 / kActionScaleP;
    return -kActionLambda * std::sqrt(n1 * n1 + n2 * n2);
}

/// Termination bonus tiered on the improvement ratio of final vs initial error.
inline double terminal_bonus(double e0, double et) {
    double rho = et / std::max(e0, 1e-12);
    if (rho < 0.8) return 50.0;
    if (rho < 0.9) return 30.0;
    if (rho < 0.95) return 20.0;
    if (rho < 1.0) return 10.0;
    return -10.0;
}

/// Average and maximum initial error over the curriculum pool.
struct PoolStats {
    double c1 = 1.0;
    double c2 = 1.0;
};

struct EnvConfig {
    sgp::SgpParams init_params{}; // episode starting point: N = 0.5%, p = 2.0
    int t_max = 15;
    double stability_tol_deg = 0.1; // estimate-direction change counted as stable
    int stability_needed = 3;
    int hist_m = 60;
    double hist_span = 3.2;
};

/// Replay record.
struct Transition {
    EnvState state;
    std::array<double, 2> action{0, 0}; // rescaled deltas
    double reward = 0.0;
    EnvState next_state;
    bool done = false;
};

/// One tuning episode over one image: relative (N, p) updates, reward from
/// angular-error improvement, termination on estimate stability or the step
/// cap. Without ground truth the environment runs in deployment mode: the
/// reward channel is disabled and termination uses the same stability rule.
class AwbEnv {
public:
    /// `histogram` may carry a precomputed feature so environments rebuilt
    /// on the same image share one state row (replay batches dedupe on it).
    AwbEnv(std::shared_ptr<const LinearImage> image,
           std::optional<std::array<double, 3>> gt_illuminant, PoolStats pool, EnvConfig cfg = {},
           std::shared_ptr<const HistogramFeature> histogram = nullptr)
        : image_(std::move(image)), gt_(gt_illuminant), pool_(pool), cfg_(cfg),
          histogram_(std::move(histogram)) {
        if (!image_ || image_->empty())
            throw data_error("environment needs a nonempty image");
        if (gt_ && !(pool_.c1 > 0.0 && pool_.c2 > 0.0))
            throw config_error("pool statistics must be positive");
        if (!histogram_)
            histogram_ = std::make_shared<HistogramFeature>(
                rgb_uv_histogram(*image_, cfg_.hist_m, cfg_.hist_span, cfg_.init_params.log_eps));
    }

    EnvState reset() {
        params_ = cfg_.init_params;
        params_.clamp_to_bounds();
        estimate_ = sgp::estimate(*image_, params_);
        e0_ = et_ = gt_ ? recovery_angular_error(estimate_.rgb, *gt_) : 0.0;
        t_ = 0;
        stability_ = 0;
        done_ = false;
        actions_.clear();
        return state();
    }

    struct StepOut {
        EnvState next;
        double reward = 0.0;
        bool done = false;
    };

    StepOut step(const std::array<double, 2>& action) {
        if (done_)
            throw std::logic_error("step() after the episode ended");
        params_.n_percent += action[0];
        params_.minkowski_p += action[1];
        params_.clamp_to_bounds();

        sgp::IlluminantEstimate prev = estimate_;
        estimate_ = sgp::estimate(*image_, params_);
        double change = recovery_angular_error(estimate_.rgb, prev.rgb);
        stability_ = change < cfg_.stability_tol_deg ? stability_ + 1 : 0;
        ++t_;
        done_ = stability_ >= cfg_.stability_needed || t_ >= cfg_.t_max;

        double reward = 0.0;
        if (gt_) {
            et_ = recovery_angular_error(estimate_.rgb, *gt_);
            reward = reward_err(e0_, et_, pool_.c1) +
                     (1.0 - e0_ / pool_.c2) * reward_act(action[0], action[1]);
            if (done_) reward += terminal_bonus(e0_, et_);
        }
        actions_.push_back(Action{action[0], action[1]});
        return {state(), reward, done_};
    }

    EnvState state() const {
        return EnvState{histogram_, encode_history(actions_, t_, cfg_.t_max)};
    }

    const sgp::SgpParams& params() const { return params_; }
    const sgp::IlluminantEstimate& current_estimate() const { return estimate_; }
    double initial_error() const { return e0_; }
    double current_error() const { return et_; }
    double improvement_ratio() const { return et_ / std::max(e0_, 1e-12); }
    int steps() const { return t_; }
    bool done() const { return done_; }
    bool training_mode() const { return gt_.has_value(); }
    const std::shared_ptr<const HistogramFeature>& histogram() const { return histogram_; }
    const EnvConfig& config() const { return cfg_; }

private:
    std::shared_ptr<const LinearImage> image_;
    std::optional<std::array<double, 3>> gt_;
    PoolStats pool_;
    EnvConfig cfg_;
    std::shared_ptr<const HistogramFeature> histogram_;

    sgp::SgpParams params_{};
    sgp::IlluminantEstimate estimate_{};
    double e0_ = 0.0, et_ = 0.0;
    int t_ = 0;
    int stability_ = 0;
    bool done_ = true;
    std::vector<Action> actions_;
};

/// Episode-to-image assignment. Stage 1 repeats a single image; stage 2
/// cycles through the pool, spending `episodes_per_image` consecutive
/// episodes on each entry before moving on (wrapping at the end).
class CurriculumSchedule {
public:
    CurriculumSchedule(int stage, std::size_t pool_size, int episodes_per_image = 5)
        : stage_(stage), pool_size_(pool_size), episodes_per_image_(episodes_per_image) {
        if (pool_size_ == 0)
            throw config_error("curriculum pool is empty");
        if (stage_ == 1 && pool_size_ != 1)
            throw config_error("stage 1 uses a single-image pool");
        if (stage_ != 1 && stage_ != 2)
            throw config_error("curriculum stage must be 1 or 2");
        if (episodes_per_image_ < 1)
            throw config_error("episodes_per_image must be >= 1");
    }

    std::size_t next() {
        if (stage_ == 1) return 0;
        std::size_t img = cursor_;
        if (++count_ >= episodes_per_image_) {
            count_ = 0;
            cursor_ = (cursor_ + 1) % pool_size_;
        }
        return img;
    }

private:
    int stage_;
    std::size_t pool_size_;
    int episodes_per_image_;
    std::size_t cursor_ = 0;
    int count_ = 0;
};

} // namespace nightcc::rl
