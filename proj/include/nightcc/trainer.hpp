#pragma once

#include <deque>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "nightcc/sac.hpp"

namespace nightcc::rl {

struct TrainerConfig {
    int batch_size = 256;
    double gamma = 0.99;
    double tau = 0.005;
    double learning_rate = 3e-4;
    int n_envs = 16;
    long total_timesteps = 150000;
    int learning_starts = 100;
    double target_entropy = -2.0;
    std::size_t replay_capacity = 100000;
    long stage1_max_steps = 20000;      // hard budget for stage 1
    int stage1_stable_episodes = 50;    // switch window: all rho < 1, mean length < t_max
    int episodes_per_image = 5;

    void validate() const {
        if (batch_size < 1 || n_envs < 1 || total_timesteps < 0 || learning_starts < 0)
            throw config_error("trainer sizes must be positive");
        if (!(gamma > 0.0 && gamma < 1.0) || !(tau > 0.0 && tau < 1.0))
            throw config_error("gamma and tau must lie in (0,1)");
        if (!(learning_rate > 0.0))
            throw config_error("learning rate must be positive");
    }

    /// CI-sized override; full-paper constants stay the defaults.
    void apply_desk_scale() {
        n_envs = 1;
        total_timesteps = 20000;
    }
};

struct PoolImage {
    std::string id;
    std::shared_ptr<const LinearImage> image;
    std::array<double, 3> gt{0, 0, 0};
};

struct EpisodeRow {
    long step = 0; // global env step at episode end
    int stage = 1;
    std::string image_id;
    double episode_return = 0;
    int length = 0;
    double rho = 0; // final/initial error ratio
    double critic_loss = 0, actor_loss = 0, alpha = 1, entropy = 0;
};

struct TrainResult {
    std::vector<EpisodeRow> episodes;
    long stage1_steps = 0;
    long total_steps = 0;
    PoolStats stage1_stats, stage2_stats;
};

/// Two-stage curriculum trainer. Stage 1 drills one image until behavior
/// stabilizes (or its step budget runs out); stage 2 cycles the full pool.
/// Environments step round-robin so runs with a fixed seed are reproducible.
class Trainer {
public:
    Trainer(std::vector<PoolImage> pool, TrainerConfig tc, EnvConfig ec)
        : pool_(std::move(pool)), tc_(tc), ec_(ec) {
        tc_.validate();
        if (pool_.empty())
            throw config_error("training pool is empty");
    }

    /// Mean/max initial error over a set of pool entries.
    PoolStats pool_statistics(std::size_t count) const {
        PoolStats st{0.0, 0.0};
        for (std::size_t i = 0; i < count; ++i) {
            sgp::SgpParams p = ec_.init_params;
            p.clamp_to_bounds();
            auto est = sgp::estimate(*pool_[i].image, p);
            double e0 = recovery_angular_error(est.rgb, pool_[i].gt);
            st.c1 += e0;
            st.c2 = std::max(st.c2, e0);
        }
        st.c1 /= static_cast<double>(count);
        st.c1 = std::max(st.c1, 1e-6);
        st.c2 = std::max(st.c2, 1e-6);
        return st;
    }

    TrainResult run(SacAgent& agent) {
        TrainResult result;
        ReplayBuffer buffer(tc_.replay_capacity);

        int stage = 1;
        result.stage1_stats = pool_statistics(1);
        PoolStats stats = result.stage1_stats;
        auto schedule = std::make_unique<CurriculumSchedule>(1, 1, tc_.episodes_per_image);

        std::vector<std::unique_ptr<AwbEnv>> envs(tc_.n_envs);
        std::vector<std::size_t> env_image(tc_.n_envs, 0);
        std::vector<EnvState> states(tc_.n_envs);
        std::vector<double> ep_return(tc_.n_envs, 0.0);
        std::vector<int> ep_len(tc_.n_envs, 0);

        std::vector<std::shared_ptr<const HistogramFeature>> hist_cache(pool_.size());
        auto assign = [&](int i) {
            std::size_t img = schedule->next();
            if (!envs[i] || env_image[i] != img) {
                if (!hist_cache[img])
                    hist_cache[img] = std::make_shared<HistogramFeature>(rgb_uv_histogram(
                        *pool_[img].image, ec_.hist_m, ec_.hist_span, ec_.init_params.log_eps));
                envs[i] = std::make_unique<AwbEnv>(pool_[img].image, pool_[img].gt, stats, ec_,
                                                   hist_cache[img]);
                env_image[i] = img;
            }
            states[i] = envs[i]->reset();
            ep_return[i] = 0.0;
            ep_len[i] = 0;
        };
        for (int i = 0; i < tc_.n_envs; ++i) assign(i);

        std::deque<std::pair<double, int>> window; // (rho, length) of recent stage-1 episodes
        long global_step = 0, stage_steps = 0;
        UpdateStats last{};

        auto switch_to_stage2 = [&]() {
            stage = 2;
            result.stage1_steps = global_step;
            result.stage2_stats = pool_statistics(pool_.size());
            stats = result.stage2_stats;
            schedule = std::make_unique<CurriculumSchedule>(2, pool_.size(), tc_.episodes_per_image);
            stage_steps = 0;
            for (auto& e : envs) e.reset(); // stale pool statistics
            for (int i = 0; i < tc_.n_envs; ++i) assign(i);
        };
        if (tc_.stage1_max_steps <= 0 && pool_.size() > 1) switch_to_stage2();

        while (global_step < tc_.total_timesteps) {
            for (int i = 0; i < tc_.n_envs && global_step < tc_.total_timesteps; ++i) {
                auto act = agent.sample_action(states[i], /*deterministic=*/false);
                auto out = envs[i]->step(act.rescaled);
                buffer.push(Transition{states[i], act.rescaled, out.reward, out.next, out.done});
                states[i] = out.next;
                ep_return[i] += out.reward;
                ++ep_len[i];
                ++global_step;
                ++stage_steps;

                if (global_step > tc_.learning_starts &&
                    buffer.size() >= static_cast<std::size_t>(tc_.batch_size)) {
                    last = agent.update(buffer, tc_.batch_size, tc_.gamma);
                    agent.soft_update(tc_.tau);
                }

                if (out.done) {
                    EpisodeRow row;
                    row.step = global_step;
                    row.stage = stage;
                    row.image_id = pool_[env_image[i]].id;
                    row.episode_return = ep_return[i];
                    row.length = ep_len[i];
                    row.rho = envs[i]->improvement_ratio();
                    row.critic_loss = last.critic_loss;
                    row.actor_loss = last.actor_loss;
                    row.alpha = last.alpha;
                    row.entropy = last.entropy;
                    result.episodes.push_back(row);

                    if (stage == 1) {
                        window.emplace_back(row.rho, row.length);
                        if (window.size() > static_cast<std::size_t>(tc_.stage1_stable_episodes))
                            window.pop_front();
                    }
                    assign(i);
                }

                if (stage == 1 && pool_.size() > 1) {
                    bool budget = stage_steps >= tc_.stage1_max_steps;
                    bool stable = false;
                    if (window.size() == static_cast<std::size_t>(tc_.stage1_stable_episodes)) {
                        stable = true;
                        double mean_len = 0;
                        for (auto& [rho, len] : window) {
                            if (rho >= 1.0) stable = false;
                            mean_len += len;
                        }
                        mean_len /= static_cast<double>(window.size());
                        if (mean_len >= ec_.t_max) stable = false;
                    }
                    if (budget || stable) switch_to_stage2();
                }
            }
        }
        if (stage == 1) result.stage1_steps = global_step;
        result.total_steps = global_step;
        return result;
    }

private:
    std::vector<PoolImage> pool_;
    TrainerConfig tc_;
    EnvConfig ec_;
};

/// One greedy tuning episode without ground truth: deterministic policy,
/// termination by estimate stability or the step cap.
struct TuneStep {
    int step = 0;
    double n_percent = 0, minkowski_p = 0;
    sgp::IlluminantEstimate estimate;
};

struct TuneTrace {
    std::vector<TuneStep> steps; // step 0 is the pre-action state
    sgp::SgpParams final_params;
    sgp::IlluminantEstimate final_estimate;
};

inline TuneTrace run_deployment_episode(AwbEnv& env, SacAgent& agent) {
    TuneTrace trace;
    EnvState state = env.reset();
    trace.steps.push_back({0, env.params().n_percent, env.params().minkowski_p, env.current_estimate()});
    while (!env.done()) {
        auto act = agent.sample_action(state, /*deterministic=*/true);
        auto out = env.step(act.rescaled);
        state = out.next;
        trace.steps.push_back(
            {env.steps(), env.params().n_percent, env.params().minkowski_p, env.current_estimate()});
    }
    trace.final_params = env.params();
    trace.final_estimate = env.current_estimate();
    return trace;
}

} // namespace nightcc::rl
