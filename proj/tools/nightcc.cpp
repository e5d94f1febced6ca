// Batch CLI for the nighttime auto-white-balance toolkit: fixed-parameter
// estimation, agent training, per-image tuning, report tables, and
// synthetic dataset generation.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "nightcc/checkpoint.hpp"
#include "nightcc/dataset.hpp"
#include "nightcc/metrics.hpp"
#include "nightcc/png_io.hpp"
#include "nightcc/runconfig.hpp"
#include "nightcc/sgp.hpp"
#include "nightcc/synth.hpp"
#include "nightcc/trainer.hpp"

namespace fs = std::filesystem;
using namespace nightcc;

namespace {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::ofstream open_output(const fs::path& path, const RunConfig& cfg, const std::string& command) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary); // binary keeps \n exact
    if (!out)
        throw data_error("cannot write output: " + path.string());
    out << "# nightcc " << command << "\n";
    out << "# seed=" << cfg.seed << "\n";
    out << "# config_hash=" << cfg.config_hash() << "\n";
    return out;
}

LinearImage load_dataset_image(const RunConfig& cfg, const Dataset& ds, const std::string& id) {
    return load_linear_image(ds.image_path(id).string(), cfg.black_level, cfg.saturation_level,
                             cfg.source_bit_depth);
}

struct EstimateRow {
    std::string image_id;
    sgp::IlluminantEstimate est;
    std::optional<double> recovery, reproduction;
};

std::string estimate_row_csv(const EstimateRow& r) {
    std::string line = r.image_id;
    for (double v : r.est.rgb) line += "," + fmt_g(v);
    line += ",";
    if (r.recovery) line += fmt_g(*r.recovery);
    line += ",";
    if (r.reproduction) line += fmt_g(*r.reproduction);
    line += r.est.fallback ? ",1" : ",0";
    return line;
}

void append_summary(std::ofstream& out, const std::vector<EstimateRow>& rows) {
    std::vector<double> errors;
    for (const auto& r : rows)
        if (r.recovery) errors.push_back(*r.recovery);
    if (errors.empty()) return;
    ErrorSummary s = summarize(errors);
    out << "# summary,median=" << fmt_g(s.median) << ",mean=" << fmt_g(s.mean)
        << ",tri_mean=" << fmt_g(s.tri_mean) << ",best25=" << fmt_g(s.best25)
        << ",worst25=" << fmt_g(s.worst25) << ",count=" << s.count << "\n";
}

int cmd_estimate(const RunConfig& cfg) {
    Dataset ds = open_dataset(cfg.dataset_dir);
    sgp::SgpParams params = cfg.sgp;
    params.clamp_to_bounds();
    params.validate();

    std::vector<EstimateRow> rows(ds.image_ids.size());
    parallel_for(ds.image_ids.size(), cfg.threads, [&](std::size_t i) {
        LinearImage img = load_dataset_image(cfg, ds, ds.image_ids[i]);
        EstimateRow row;
        row.image_id = ds.image_ids[i];
        row.est = sgp::estimate(img, params);
        if (ds.ground_truth[i]) {
            row.recovery = recovery_angular_error(row.est.rgb, ds.ground_truth[i]->illuminant);
            row.reproduction = reproduction_angular_error(row.est.rgb, ds.ground_truth[i]->illuminant);
        }
        rows[i] = std::move(row);
    });
    std::sort(rows.begin(), rows.end(),
              [](const EstimateRow& a, const EstimateRow& b) { return a.image_id < b.image_id; });

    auto out = open_output(fs::path(cfg.out_dir) / "estimates.csv", cfg, "estimate");
    out << "image_id,e_r,e_g,e_b,recovery_err,reproduction_err,fallback\n";
    for (const auto& r : rows) out << estimate_row_csv(r) << "\n";
    append_summary(out, rows);
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "estimates.csv").string() << " (" << rows.size()
              << " images)\n";
    return 0;
}

std::vector<rl::PoolImage> load_pool(const RunConfig& cfg, const Dataset& ds,
                                     const std::vector<std::size_t>& indices) {
    std::vector<rl::PoolImage> pool(indices.size());
    parallel_for(indices.size(), cfg.threads, [&](std::size_t k) {
        std::size_t i = indices[k];
        if (!ds.ground_truth[i])
            throw data_error("pool image lacks ground truth: " + ds.image_ids[i]);
        rl::PoolImage p;
        p.id = ds.image_ids[i];
        p.image = std::make_shared<LinearImage>(load_dataset_image(cfg, ds, ds.image_ids[i]));
        p.gt = ds.ground_truth[i]->illuminant;
        pool[k] = std::move(p);
    });
    return pool;
}

rl::NetDims dims_for(const RunConfig& cfg) {
    rl::NetDims d;
    d.hist_in = 3 * cfg.env.hist_m * cfg.env.hist_m;
    return d;
}

rl::EnvConfig env_config(const RunConfig& cfg) {
    rl::EnvConfig ec = cfg.env;
    ec.init_params = cfg.sgp;
    return ec;
}

void write_manifest(const RunConfig& cfg, const fs::path& path, const nlohmann::json& extra) {
    nlohmann::json j;
    for (const auto& [k, v] : cfg.resolved()) j["config"][k] = v;
    j["config_hash"] = cfg.config_hash();
    j["seed"] = cfg.seed;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
}

int cmd_train(const RunConfig& cfg) {
    Dataset ds = open_dataset(cfg.dataset_dir);
    auto indices = resolve_pool(cfg.pool, ds.image_ids);
    auto pool = load_pool(cfg, ds, indices);

    rl::TrainerConfig tc = cfg.trainer;
    if (cfg.desk_scale) tc.apply_desk_scale();

    rl::SacAgent agent(dims_for(cfg), tc.learning_rate, tc.target_entropy, cfg.seed);
    rl::Trainer trainer(pool, tc, env_config(cfg));
    rl::TrainResult result = trainer.run(agent);

    fs::create_directories(cfg.out_dir);
    {
        auto out = open_output(fs::path(cfg.out_dir) / "metrics.csv", cfg, "train");
        out << "step,episode_return,critic_loss,actor_loss,alpha,entropy\n";
        for (const auto& e : result.episodes)
            out << e.step << ',' << fmt_g(e.episode_return) << ',' << fmt_g(e.critic_loss) << ','
                << fmt_g(e.actor_loss) << ',' << fmt_g(e.alpha) << ',' << fmt_g(e.entropy) << "\n";
    }
    {
        auto out = open_output(fs::path(cfg.out_dir) / "episodes.csv", cfg, "train");
        out << "step,stage,image_id,episode_return,length,rho\n";
        for (const auto& e : result.episodes)
            out << e.step << ',' << e.stage << ',' << e.image_id << ',' << fmt_g(e.episode_return)
                << ',' << e.length << ',' << fmt_g(e.rho) << "\n";
    }
    auto tensors = agent.nets().all_params();
    rl::save_checkpoint(fs::path(cfg.out_dir) / "checkpoint", tensors, cfg.config_hash(), cfg.seed);
    write_manifest(cfg, fs::path(cfg.out_dir) / "manifest.json",
                   {{"stage1_steps", result.stage1_steps},
                    {"total_steps", result.total_steps},
                    {"episodes", result.episodes.size()}});
    std::cout << "trained " << result.total_steps << " steps (" << result.episodes.size()
              << " episodes), checkpoint in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_tune(const RunConfig& cfg) {
    Dataset ds = open_dataset(cfg.dataset_dir);
    rl::SacAgent agent(dims_for(cfg), cfg.trainer.learning_rate, cfg.trainer.target_entropy,
                       cfg.seed);
    auto tensors = agent.nets().all_params();
    fs::path stem = cfg.checkpoint;
    if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
    rl::load_checkpoint(stem, tensors);

    rl::EnvConfig ec = env_config(cfg);

    struct TuneRow {
        std::string image_id;
        rl::TuneTrace trace;
        std::optional<std::array<double, 3>> gt;
    };
    std::vector<TuneRow> rows(ds.image_ids.size());
    for (std::size_t i = 0; i < ds.image_ids.size(); ++i) {
        auto img = std::make_shared<LinearImage>(load_dataset_image(cfg, ds, ds.image_ids[i]));
        // Deployment mode: ground truth never enters the episode.
        rl::AwbEnv env(img, std::nullopt, rl::PoolStats{}, ec);
        rows[i].image_id = ds.image_ids[i];
        rows[i].trace = rl::run_deployment_episode(env, agent);
        if (ds.ground_truth[i]) rows[i].gt = ds.ground_truth[i]->illuminant;
    }
    std::sort(rows.begin(), rows.end(),
              [](const TuneRow& a, const TuneRow& b) { return a.image_id < b.image_id; });

    auto out = open_output(fs::path(cfg.out_dir) / "tuned.csv", cfg, "tune");
    out << "image_id,n_percent,minkowski_p,steps,e_r,e_g,e_b,recovery_err,reproduction_err,fallback\n";
    auto traj = open_output(fs::path(cfg.out_dir) / "trajectories.jsonl", cfg, "tune");
    for (const auto& r : rows) {
        const auto& est = r.trace.final_estimate;
        out << r.image_id << ',' << fmt_g(r.trace.final_params.n_percent) << ','
            << fmt_g(r.trace.final_params.minkowski_p) << ',' << (r.trace.steps.size() - 1);
        for (double v : est.rgb) out << ',' << fmt_g(v);
        out << ',';
        if (r.gt) out << fmt_g(recovery_angular_error(est.rgb, *r.gt));
        out << ',';
        if (r.gt) out << fmt_g(reproduction_angular_error(est.rgb, *r.gt));
        out << (est.fallback ? ",1" : ",0") << "\n";

        for (const auto& s : r.trace.steps) {
            nlohmann::json j{{"image_id", r.image_id},
                             {"step", s.step},
                             {"n_percent", s.n_percent},
                             {"minkowski_p", s.minkowski_p},
                             {"estimate", {s.estimate.rgb[0], s.estimate.rgb[1], s.estimate.rgb[2]}}};
            if (r.gt) j["recovery_err"] = recovery_angular_error(s.estimate.rgb, *r.gt);
            traj << j.dump() << "\n";
        }
    }
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "tuned.csv").string() << " (" << rows.size()
              << " images)\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const RunConfig& cfg) {
    struct Row {
        std::string method;
        ErrorSummary s;
    };
    std::vector<Row> table;
    for (const auto& in_path : inputs) {
        std::ifstream in(in_path);
        if (!in)
            throw data_error("cannot open report input: " + in_path);
        std::string line;
        std::vector<double> errors;
        bool header_seen = false;
        while (std::getline(in, line)) {
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (!header_seen) { // column header
                header_seen = true;
                continue;
            }
            auto f = split(t, ',');
            if (f.size() < 5)
                throw data_error("malformed estimate CSV row in " + in_path);
            std::string err = trim(f[4]);
            if (!err.empty()) errors.push_back(std::stod(err));
        }
        if (errors.empty())
            throw data_error("no recovery errors found in " + in_path);
        table.push_back({fs::path(in_path).stem().string(), summarize(errors)});
    }

    auto csv = open_output(fs::path(cfg.out_dir) / "report.csv", cfg, "report");
    csv << "method,median,mean,tri_mean,best25,worst25,count\n";
    for (const auto& r : table)
        csv << r.method << ',' << fmt_fixed(r.s.median, 2) << ',' << fmt_fixed(r.s.mean, 2) << ','
            << fmt_fixed(r.s.tri_mean, 2) << ',' << fmt_fixed(r.s.best25, 2) << ','
            << fmt_fixed(r.s.worst25, 2) << ',' << r.s.count << "\n";

    std::size_t name_w = 6;
    for (const auto& r : table) name_w = std::max(name_w, r.method.size());
    auto txt = open_output(fs::path(cfg.out_dir) / "report.txt", cfg, "report");
    auto emit = [&](std::ostream& os) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %9s %8s %8s %7s\n", static_cast<int>(name_w),
                      "method", "median", "mean", "tri-mean", "b-25%", "w-25%", "count");
        os << buf;
        for (const auto& r : table) {
            std::snprintf(buf, sizeof(buf), "%-*s %8.2f %8.2f %9.2f %8.2f %8.2f %7zu\n",
                          static_cast<int>(name_w), r.method.c_str(), r.s.median, r.s.mean,
                          r.s.tri_mean, r.s.best25, r.s.worst25, r.s.count);
            os << buf;
        }
    };
    emit(txt);
    emit(std::cout);
    return 0;
}

int cmd_synth(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::mt19937_64 rng(mix_seed(cfg.seed, "synth-illuminants"));
    std::uniform_real_distribution<double> ur(0.5, 0.85), ug(0.35, 0.55), ub(0.18, 0.45);

    std::vector<GroundTruthRecord> gt;
    for (int i = 0; i < cfg.synth_count; ++i) {
        synth::SceneSpec spec = cfg.scene;
        spec.seed = mix_seed(cfg.seed, "scene-" + std::to_string(i));
        spec.illuminant = {ur(rng), ug(rng), ub(rng)};
        synth::Scene scene = synth::render(spec);

        char id[32];
        std::snprintf(id, sizeof(id), "synth_%04d", i);
        scene.gt.image_id = id;
        write_linear_image((fs::path(cfg.out_dir) / (std::string(id) + ".png")).string(), scene.image);
        gt.push_back(scene.gt);
    }
    write_ground_truth(fs::path(cfg.out_dir) / "gt.csv", gt);
    write_manifest(cfg, fs::path(cfg.out_dir) / "manifest.json", {{"count", cfg.synth_count}});
    std::cout << "wrote " << cfg.synth_count << " scenes to " << cfg.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nighttime auto-white-balance toolkit"};
    app.require_subcommand(1);

    // Flag values are collected as key/value overrides; the config file
    // loads first and flags win on top of it.
    std::string config_file;
    bool no_filters = false, desk_scale = false;
    std::vector<std::string> kv_overrides; // alternating key, value
    std::vector<std::string> report_inputs;

    auto add_common = [&](CLI::App* sub, bool needs_dataset) {
        sub->add_option("--config", config_file, "key = value config file");
        auto push = [&kv_overrides](const std::string& key) {
            return [&kv_overrides, key](const std::string& v) {
                kv_overrides.push_back(key);
                kv_overrides.push_back(v);
            };
        };
        if (needs_dataset)
            sub->add_option_function<std::string>("--dataset", push("dataset"), "dataset directory")
                ->required();
        sub->add_option_function<std::string>("--out", push("out"), "output directory")->required();
        sub->add_option_function<std::string>("--seed", push("seed"), "master seed");
        sub->add_option_function<std::string>("--threads", push("threads"), "worker threads (0 = auto)");
        sub->add_flag("--no-filters", no_filters,
                      "disable the variance and color-deviation filters (daytime adaptation)");
        sub->add_option_function<std::vector<std::string>>(
               "--set",
               [&kv_overrides](const std::vector<std::string>& vs) {
                   for (const auto& v : vs) kv_overrides.push_back(v);
               },
               "override a config key, e.g. --set sgp.n_percent 1.0")
            ->type_size(2)
            ->take_all();
        return push;
    };

    auto* est = app.add_subcommand("estimate", "fixed-parameter illuminant estimation");
    add_common(est, true);

    auto* train = app.add_subcommand("train", "two-stage curriculum training");
    {
        auto push = add_common(train, true);
        train->add_option_function<std::string>("--pool", push("pool"),
                                                "curriculum pool: first-M or ids:a,b,c");
        train->add_flag("--desk-scale", desk_scale, "CI-sized trainer overrides");
    }

    auto* tune = app.add_subcommand("tune", "per-image parameter tuning with a trained policy");
    {
        auto push = add_common(tune, true);
        tune->add_option_function<std::string>("--checkpoint", push("checkpoint"),
                                               "checkpoint stem or manifest path")
            ->required();
    }

    auto* report = app.add_subcommand("report", "summary table from estimate CSVs");
    add_common(report, false);
    report->add_option("inputs", report_inputs, "estimate CSV files")->required();

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    {
        auto push = add_common(synth_cmd, false);
        synth_cmd->add_option_function<std::string>("--count", push("synth.count"), "number of scenes");
        synth_cmd->add_option_function<std::string>("--width", push("synth.width"), "scene width");
        synth_cmd->add_option_function<std::string>("--height", push("synth.height"), "scene height");
        synth_cmd->add_option_function<std::string>("--gray-fraction", push("synth.gray_fraction"),
                                                    "achromatic patch fraction");
        synth_cmd->add_option_function<std::string>("--noise-sigma", push("synth.noise_sigma"),
                                                    "additive noise std");
        synth_cmd->add_option_function<std::string>("--texture-scale", push("synth.texture_scale"),
                                                    "reflectance texture frequency");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_file.empty()) cfg.load_file(config_file);
        for (size_t i = 0; i + 1 < kv_overrides.size(); i += 2)
            cfg.set(kv_overrides[i], kv_overrides[i + 1]);
        if (no_filters) cfg.sgp.filters_enabled = false;
        if (desk_scale) cfg.desk_scale = true;

        if (est->parsed()) return cmd_estimate(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (tune->parsed()) return cmd_tune(cfg);
        if (report->parsed()) return cmd_report(report_inputs, cfg);
        if (synth_cmd->parsed()) return cmd_synth(cfg);
        throw config_error("no subcommand selected");
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const divergence_error& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 4;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
