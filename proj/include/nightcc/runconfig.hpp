#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nightcc/common.hpp"
#include "nightcc/env.hpp"
#include "nightcc/synth.hpp"
#include "nightcc/trainer.hpp"

namespace nightcc {

/// Flat key = value config document; '#' starts a comment, whitespace is
/// ignored around keys and values. CLI flags override file values.
inline std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + " is not key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key.empty())
            throw config_error("empty key on config line " + std::to_string(lineno));
        kv[key] = value;
    }
    return kv;
}

/// Everything a CLI run resolves to. The config hash covers every field
/// here, so equal hashes imply byte-identical primary outputs.
struct RunConfig {
    std::string dataset_dir;
    std::string out_dir;
    std::string checkpoint;
    std::string pool = "first-5"; // or "ids:a,b,c"
    std::uint64_t seed = 0;
    bool desk_scale = false;
    int threads = 0; // 0 = hardware default
    double saturation_level = 0.98;
    double black_level = 0.0;
    int source_bit_depth = 0; // 0 = container depth

    sgp::SgpParams sgp{};
    rl::EnvConfig env{};
    rl::TrainerConfig trainer{};
    synth::SceneSpec scene{};
    int synth_count = 5;

    void set(const std::string& key, const std::string& value) {
        auto d = [&] {
            try {
                return std::stod(value);
            } catch (const std::exception&) {
                throw config_error("expected a number for " + key + ", got '" + value + "'");
            }
        };
        auto b = [&] {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw config_error("expected a boolean for " + key + ", got '" + value + "'");
        };
        if (key == "seed") {
            try {
                seed = std::stoull(value);
            } catch (const std::exception&) {
                throw config_error("expected an integer seed, got '" + value + "'");
            }
        }
        else if (key == "dataset") dataset_dir = value;
        else if (key == "out") out_dir = value;
        else if (key == "checkpoint") checkpoint = value;
        else if (key == "pool") pool = value;
        else if (key == "threads") threads = static_cast<int>(d());
        else if (key == "io.saturation_level") saturation_level = d();
        else if (key == "io.black_level") black_level = d();
        else if (key == "io.source_bit_depth") source_bit_depth = static_cast<int>(d());
        else if (key == "sgp.n_percent") sgp.n_percent = d();
        else if (key == "sgp.minkowski_p") sgp.minkowski_p = d();
        else if (key == "sgp.var_th") sgp.var_th = d();
        else if (key == "sgp.color_th") sgp.color_th = d();
        else if (key == "sgp.log_eps") sgp.log_eps = d();
        else if (key == "sgp.sigma") sgp.sigma = d();
        else if (key == "sgp.window") sgp.window = static_cast<int>(d());
        else if (key == "sgp.filters_enabled") sgp.filters_enabled = b();
        else if (key == "sgp.n_min") sgp.bounds.n_min = d();
        else if (key == "sgp.n_max") sgp.bounds.n_max = d();
        else if (key == "sgp.p_min") sgp.bounds.p_min = d();
        else if (key == "sgp.p_max") sgp.bounds.p_max = d();
        else if (key == "env.t_max") env.t_max = static_cast<int>(d());
        else if (key == "env.stability_tol_deg") env.stability_tol_deg = d();
        else if (key == "env.hist_m") env.hist_m = static_cast<int>(d());
        else if (key == "env.hist_span") env.hist_span = d();
        else if (key == "trainer.batch_size") trainer.batch_size = static_cast<int>(d());
        else if (key == "trainer.gamma") trainer.gamma = d();
        else if (key == "trainer.tau") trainer.tau = d();
        else if (key == "trainer.learning_rate") trainer.learning_rate = d();
        else if (key == "trainer.n_envs") trainer.n_envs = static_cast<int>(d());
        else if (key == "trainer.total_timesteps") trainer.total_timesteps = static_cast<long>(d());
        else if (key == "trainer.learning_starts") trainer.learning_starts = static_cast<int>(d());
        else if (key == "trainer.target_entropy") trainer.target_entropy = d();
        else if (key == "trainer.replay_capacity") trainer.replay_capacity = static_cast<std::size_t>(d());
        else if (key == "trainer.stage1_max_steps") trainer.stage1_max_steps = static_cast<long>(d());
        else if (key == "trainer.stage1_stable_episodes") trainer.stage1_stable_episodes = static_cast<int>(d());
        else if (key == "trainer.episodes_per_image") trainer.episodes_per_image = static_cast<int>(d());
        else if (key == "synth.count") synth_count = static_cast<int>(d());
        else if (key == "synth.width") scene.width = static_cast<int>(d());
        else if (key == "synth.height") scene.height = static_cast<int>(d());
        else if (key == "synth.gray_fraction") scene.gray_fraction = d();
        else if (key == "synth.texture_scale") scene.texture_scale = d();
        else if (key == "synth.noise_sigma") scene.noise_sigma = d();
        else if (key == "synth.patches_x") scene.patches_x = static_cast<int>(d());
        else if (key == "synth.patches_y") scene.patches_y = static_cast<int>(d());
        else throw config_error("unknown config key: " + key);
    }

    void load_file(const std::filesystem::path& path) {
        for (const auto& [k, v] : parse_config_file(path)) set(k, v);
    }

    /// Canonical serialization of every resolved value that can influence
    /// output content; the order is fixed so the hash is stable. The output
    /// directory is deliberately absent: runs differing only in destination
    /// hash equal and must produce byte-identical artifacts.
    std::vector<std::pair<std::string, std::string>> resolved() const {
        std::vector<std::pair<std::string, std::string>> kv;
        auto add = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
        add("dataset", dataset_dir);
        add("checkpoint", checkpoint);
        add("pool", pool);
        add("seed", std::to_string(seed));
        add("desk_scale", desk_scale ? "true" : "false");
        add("io.saturation_level", fmt_g(saturation_level, 17));
        add("io.black_level", fmt_g(black_level, 17));
        add("io.source_bit_depth", std::to_string(source_bit_depth));
        add("sgp.n_percent", fmt_g(sgp.n_percent, 17));
        add("sgp.minkowski_p", fmt_g(sgp.minkowski_p, 17));
        add("sgp.var_th", fmt_g(sgp.var_th, 17));
        add("sgp.color_th", fmt_g(sgp.color_th, 17));
        add("sgp.log_eps", fmt_g(sgp.log_eps, 17));
        add("sgp.sigma", fmt_g(sgp.sigma, 17));
        add("sgp.window", std::to_string(sgp.window));
        add("sgp.filters_enabled", sgp.filters_enabled ? "true" : "false");
        add("sgp.n_min", fmt_g(sgp.bounds.n_min, 17));
        add("sgp.n_max", fmt_g(sgp.bounds.n_max, 17));
        add("sgp.p_min", fmt_g(sgp.bounds.p_min, 17));
        add("sgp.p_max", fmt_g(sgp.bounds.p_max, 17));
        add("env.t_max", std::to_string(env.t_max));
        add("env.stability_tol_deg", fmt_g(env.stability_tol_deg, 17));
        add("env.hist_m", std::to_string(env.hist_m));
        add("env.hist_span", fmt_g(env.hist_span, 17));
        add("trainer.batch_size", std::to_string(trainer.batch_size));
        add("trainer.gamma", fmt_g(trainer.gamma, 17));
        add("trainer.tau", fmt_g(trainer.tau, 17));
        add("trainer.learning_rate", fmt_g(trainer.learning_rate, 17));
        add("trainer.n_envs", std::to_string(trainer.n_envs));
        add("trainer.total_timesteps", std::to_string(trainer.total_timesteps));
        add("trainer.learning_starts", std::to_string(trainer.learning_starts));
        add("trainer.target_entropy", fmt_g(trainer.target_entropy, 17));
        add("trainer.replay_capacity", std::to_string(trainer.replay_capacity));
        add("trainer.stage1_max_steps", std::to_string(trainer.stage1_max_steps));
        add("trainer.stage1_stable_episodes", std::to_string(trainer.stage1_stable_episodes));
        add("trainer.episodes_per_image", std::to_string(trainer.episodes_per_image));
        add("synth.count", std::to_string(synth_count));
        add("synth.width", std::to_string(scene.width));
        add("synth.height", std::to_string(scene.height));
        add("synth.gray_fraction", fmt_g(scene.gray_fraction, 17));
        add("synth.texture_scale", fmt_g(scene.texture_scale, 17));
        add("synth.noise_sigma", fmt_g(scene.noise_sigma, 17));
        add("synth.patches_x", std::to_string(scene.patches_x));
        add("synth.patches_y", std::to_string(scene.patches_y));
        return kv;
    }

    std::string config_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& [k, v] : resolved()) {
            h = fnv1a64(k, h);
            h = fnv1a64("=", h);
            h = fnv1a64(v, h);
            h = fnv1a64("\n", h);
        }
        return to_hex16(h);
    }
};

/// Resolves a pool selector against a dataset: either the first M entries
/// in sidecar order ("first-M") or an explicit id list ("ids:a,b,c").
inline std::vector<std::size_t> resolve_pool(const std::string& pool,
                                             const std::vector<std::string>& image_ids) {
    std::vector<std::size_t> out;
    if (pool.rfind("first-", 0) == 0) {
        int m = 0;
        try {
            m = std::stoi(pool.substr(6));
        } catch (const std::exception&) {
            throw config_error("bad pool selector: " + pool);
        }
        if (m < 1 || static_cast<std::size_t>(m) > image_ids.size())
            throw config_error("pool size out of range: " + pool);
        for (int i = 0; i < m; ++i) out.push_back(i);
        return out;
    }
    if (pool.rfind("ids:", 0) == 0) {
        for (const auto& id : split(pool.substr(4), ',')) {
            auto it = std::find(image_ids.begin(), image_ids.end(), trim(id));
            if (it == image_ids.end())
                throw config_error("pool image not in dataset: " + trim(id));
            out.push_back(static_cast<std::size_t>(it - image_ids.begin()));
        }
        if (out.empty())
            throw config_error("empty pool id list");
        return out;
    }
    throw config_error("pool selector must be first-M or ids:...: " + pool);
}

} // namespace nightcc
