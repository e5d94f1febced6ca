#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "nightcc/common.hpp"

namespace nightcc {

/// Annotated scene illuminant, as shipped in a dataset's gt.csv sidecar.
struct GroundTruthRecord {
    std::string image_id;
    std::array<double, 3> illuminant{0, 0, 0}; // unit L2 norm
    std::string camera_id;
    std::optional<int> iso;

    void normalize_and_validate() {
        double n = std::sqrt(illuminant[0] * illuminant[0] + illuminant[1] * illuminant[1] +
                             illuminant[2] * illuminant[2]);
        if (!(n > 0.0))
            throw data_error("ground-truth illuminant must be nonzero: " + image_id);
        for (double& v : illuminant) v /= n;
        for (double v : illuminant)
            if (!(v > 0.0))
                throw data_error("ground-truth illuminant components must be positive: " + image_id);
    }
};

inline const std::string kGroundTruthHeader = "image_id,r,g,b,camera_id,iso";

inline std::vector<GroundTruthRecord> load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw data_error("cannot open ground truth CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw data_error("empty ground truth CSV: " + path.string());
    if (trim(line) != kGroundTruthHeader)
        throw data_error("unexpected ground truth header in " + path.string());

    std::vector<GroundTruthRecord> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto f = split(t, ',');
        if (f.size() != 6)
            throw data_error("bad ground truth row " + std::to_string(lineno) + " in " + path.string());
        GroundTruthRecord r;
        r.image_id = trim(f[0]);
        try {
            r.illuminant = {std::stod(f[1]), std::stod(f[2]), std::stod(f[3])};
        } catch (const std::exception&) {
            throw data_error("non-numeric illuminant at row " + std::to_string(lineno));
        }
        r.camera_id = trim(f[4]);
        std::string iso = trim(f[5]);
        if (!iso.empty()) r.iso = std::stoi(iso);
        r.normalize_and_validate();
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_ground_truth(const std::filesystem::path& path,
                               const std::vector<GroundTruthRecord>& records) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot write ground truth CSV: " + path.string());
    out << kGroundTruthHeader << "\n";
    for (const auto& r : records) {
        out << r.image_id << ',' << fmt_g(r.illuminant[0]) << ',' << fmt_g(r.illuminant[1]) << ','
            << fmt_g(r.illuminant[2]) << ',' << r.camera_id << ','
            << (r.iso ? std::to_string(*r.iso) : std::string()) << "\n";
    }
}

/// A dataset directory: <id>.png rasters plus an optional gt.csv sidecar.
/// Entries keep the gt.csv row order; without a sidecar, PNGs are listed in
/// lexicographic id order with no annotations.
struct Dataset {
    std::filesystem::path dir;
    std::vector<std::string> image_ids;
    std::vector<std::optional<GroundTruthRecord>> ground_truth; // aligned with image_ids

    std::filesystem::path image_path(const std::string& id) const { return dir / (id + ".png"); }
    bool has_ground_truth() const {
        for (const auto& g : ground_truth)
            if (g) return true;
        return false;
    }
};

inline Dataset open_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw data_error("dataset directory not found: " + dir.string());
    Dataset ds;
    ds.dir = dir;
    fs::path gt = dir / "gt.csv";
    if (fs::exists(gt)) {
        for (auto& r : load_ground_truth(gt)) {
            ds.image_ids.push_back(r.image_id);
            ds.ground_truth.emplace_back(std::move(r));
        }
    } else {
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png")
                ds.image_ids.push_back(e.path().stem().string());
        std::sort(ds.image_ids.begin(), ds.image_ids.end());
        ds.ground_truth.assign(ds.image_ids.size(), std::nullopt);
    }
    if (ds.image_ids.empty())
        throw data_error("dataset contains no images: " + dir.string());
    return ds;
}

} // namespace nightcc
