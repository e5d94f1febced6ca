#include <catch2/catch_amalgamated.hpp>

#include "nightcc/synth.hpp"
#include "nightcc/trainer.hpp"

using namespace nightcc;
using namespace nightcc::rl;

namespace {

std::vector<PoolImage> tiny_pool(int count, int size = 32) {
    std::vector<PoolImage> pool;
    for (int i = 0; i < count; ++i) {
        synth::SceneSpec spec;
        spec.width = spec.height = size;
        spec.gray_fraction = 0.45;
        spec.noise_sigma = 0.02;
        spec.seed = 100 + i;
        spec.illuminant = {0.75 - 0.03 * i, 0.5, 0.3 + 0.02 * i};
        synth::Scene s = synth::render(spec);
        PoolImage p;
        p.id = "img" + std::to_string(i);
        p.image = std::make_shared<LinearImage>(std::move(s.image));
        p.gt = s.gt.illuminant;
        pool.push_back(std::move(p));
    }
    return pool;
}

EnvConfig small_env() {
    EnvConfig ec;
    ec.hist_m = 8; // keeps the first layer small for fast tests
    return ec;
}

NetDims small_dims() {
    NetDims d;
    d.hist_in = 3 * 8 * 8;
    d.hist_hidden = 16;
    d.embed = 8;
    d.history_hidden = 8;
    d.head_hidden = 8;
    return d;
}

TrainerConfig small_trainer(long steps) {
    TrainerConfig tc;
    tc.batch_size = 16;
    tc.n_envs = 1;
    tc.total_timesteps = steps;
    tc.learning_starts = 20;
    tc.stage1_max_steps = steps / 2;
    tc.stage1_stable_episodes = 5;
    tc.replay_capacity = 2000;
    return tc;
}

} // namespace

TEST_CASE("zero timesteps return the untouched initial policy") {
    auto pool = tiny_pool(1);
    SacAgent agent(small_dims(), 3e-4, -2.0, 7);
    SacAgent reference(small_dims(), 3e-4, -2.0, 7);
    Trainer trainer(pool, small_trainer(0), small_env());
    TrainResult r = trainer.run(agent);
    CHECK(r.total_steps == 0);
    CHECK(r.episodes.empty());
    auto pa = agent.nets().all_params();
    auto pb = reference.nets().all_params();
    for (size_t i = 0; i < pa.size(); ++i)
        for (size_t j = 0; j < pa[i].count; ++j) REQUIRE(pa[i].data[j] == pb[i].data[j]);
}

TEST_CASE("pool statistics are the mean and max initial errors") {
    auto pool = tiny_pool(3);
    Trainer trainer(pool, small_trainer(0), small_env());
    PoolStats st = trainer.pool_statistics(3);
    sgp::SgpParams init{};
    init.clamp_to_bounds();
    double sum = 0, mx = 0;
    for (const auto& p : pool) {
        double e = recovery_angular_error(sgp::estimate(*p.image, init).rgb, p.gt);
        sum += e;
        mx = std::max(mx, e);
    }
    CHECK_THAT(st.c1, Catch::Matchers::WithinRel(sum / 3.0, 1e-12));
    CHECK_THAT(st.c2, Catch::Matchers::WithinRel(mx, 1e-12));
}

TEST_CASE("training is reproducible with a single environment") {
    auto pool = tiny_pool(2);
    auto run = [&] {
        SacAgent agent(small_dims(), 3e-4, -2.0, 99);
        Trainer trainer(pool, small_trainer(260), small_env());
        return trainer.run(agent);
    };
    TrainResult a = run();
    TrainResult b = run();
    REQUIRE(a.episodes.size() == b.episodes.size());
    REQUIRE(!a.episodes.empty());
    for (size_t i = 0; i < a.episodes.size(); ++i) {
        CHECK(a.episodes[i].step == b.episodes[i].step);
        CHECK(a.episodes[i].episode_return == b.episodes[i].episode_return);
        CHECK(a.episodes[i].rho == b.episodes[i].rho);
        CHECK(a.episodes[i].image_id == b.episodes[i].image_id);
    }
}

TEST_CASE("stage switch respects the step budget and visits the pool") {
    auto pool = tiny_pool(2);
    SacAgent agent(small_dims(), 3e-4, -2.0, 11);
    TrainerConfig tc = small_trainer(300);
    tc.stage1_max_steps = 60;
    Trainer trainer(pool, tc, small_env());
    TrainResult r = trainer.run(agent);
    CHECK(r.stage1_steps <= 60 + 1);
    bool saw_second = false;
    for (const auto& e : r.episodes)
        if (e.stage == 2 && e.image_id == "img1") saw_second = true;
    CHECK(saw_second);
    CHECK(r.total_steps == 300);
}

TEST_CASE("deployment episodes with a zero policy keep the initial parameters") {
    auto pool = tiny_pool(1);
    SacAgent agent(small_dims(), 3e-4, -2.0, 5);
    for (auto& p : agent.nets().actor_params()) std::fill(p.data, p.data + p.count, 0.0f);

    AwbEnv env(pool[0].image, std::nullopt, PoolStats{}, small_env());
    TuneTrace trace = run_deployment_episode(env, agent);
    CHECK(trace.final_params.n_percent == 0.5);
    CHECK(trace.final_params.minkowski_p == 2.0);
    CHECK(trace.steps.size() == 4); // initial snapshot + three stable steps
    sgp::SgpParams init{};
    init.clamp_to_bounds();
    auto direct = sgp::estimate(*pool[0].image, init);
    for (int c = 0; c < 3; ++c) CHECK(trace.final_estimate.rgb[c] == direct.rgb[c]);
}

TEST_CASE("trainer aborts on a diverging update without corrupting state") {
    auto pool = tiny_pool(1);
    SacAgent agent(small_dims(), 3e-4, -2.0, 13);
    // poison the critic weights so the first update is non-finite
    auto params = agent.nets().critic_params();
    params[0].data[0] = std::numeric_limits<float>::infinity();
    Trainer trainer(pool, small_trainer(120), small_env());
    CHECK_THROWS_AS(trainer.run(agent), divergence_error);
}
