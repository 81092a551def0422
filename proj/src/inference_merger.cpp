#include "tofmap/inference_merger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tofmap/dataset_splitter.hpp"
#include "tofmap/errors.hpp"
#include "tofmap/geotiff.hpp"

namespace tofmap {

SoftmaxAccumulator::SoftmaxAccumulator(int height, int width, int classes, VoteMode mode)
    : height_(height), width_(width), classes_(classes), mode_(mode) {
    if (height < 1 || width < 1) throw ParameterError("accumulator extent must be positive");
    if (classes < 1) throw ParameterError("accumulator needs at least one class");
    const std::size_t n = static_cast<std::size_t>(height) * width;
    sums_.assign(n * classes, 0.0);
    coverage_.assign(n, 0);
}

void SoftmaxAccumulator::accumulate(const SoftmaxPatch& patch, double tolerance) {
    if (patch.classes != classes_) {
        throw ValidationError("patch has " + std::to_string(patch.classes) + " classes, expected " +
                              std::to_string(classes_));
    }
    if (patch.row < 0 || patch.col < 0 || patch.height < 1 || patch.width < 1 ||
        patch.row + patch.height > height_ || patch.col + patch.width > width_) {
        throw BoundsError("window at (" + std::to_string(patch.row) + "," +
                          std::to_string(patch.col) + ") size " + std::to_string(patch.height) +
                          "x" + std::to_string(patch.width) + " leaves the " +
                          std::to_string(height_) + "x" + std::to_string(width_) + " extent");
    }
    const std::size_t k = static_cast<std::size_t>(classes_);
    if (patch.probs.size() != static_cast<std::size_t>(patch.height) * patch.width * k) {
        throw ValidationError("patch probability array has the wrong size");
    }
    // Validate the whole window before touching the sums.
    for (int r = 0; r < patch.height; ++r) {
        for (int c = 0; c < patch.width; ++c) {
            const float* p = &patch.probs[(static_cast<std::size_t>(r) * patch.width + c) * k];
            double s = 0.0;
            bool in_range = true;
            for (std::size_t j = 0; j < k; ++j) {
                s += p[j];
                in_range = in_range && p[j] >= 0.0f && p[j] <= 1.0f;
            }
            if (!in_range || !(std::abs(s - 1.0) <= tolerance)) {
                throw ValidationError("unnormalized probabilities at window pixel (" +
                                      std::to_string(r) + "," + std::to_string(c) +
                                      "), tile pixel (" + std::to_string(patch.row + r) + "," +
                                      std::to_string(patch.col + c) + "): sum " + std::to_string(s));
            }
        }
    }
    for (int r = 0; r < patch.height; ++r) {
        for (int c = 0; c < patch.width; ++c) {
            const float* p = &patch.probs[(static_cast<std::size_t>(r) * patch.width + c) * k];
            const std::size_t pix = static_cast<std::size_t>(patch.row + r) * width_ + patch.col + c;
            double* dst = &sums_[pix * k];
            if (mode_ == VoteMode::Soft) {
                for (std::size_t j = 0; j < k; ++j) dst[j] += p[j];
            } else {
                dst[std::max_element(p, p + k) - p] += 1.0;
            }
            ++coverage_[pix];
        }
    }
}

void SoftmaxAccumulator::merge(const SoftmaxAccumulator& other) {
    if (other.height_ != height_ || other.width_ != width_ || other.classes_ != classes_ ||
        other.mode_ != mode_) {
        throw ParameterError("cannot merge accumulators with different extents or modes");
    }
    for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
    for (std::size_t i = 0; i < coverage_.size(); ++i) coverage_[i] += other.coverage_[i];
}

MergeResult SoftmaxAccumulator::finalize() const {
    const auto uncovered = static_cast<std::size_t>(
        std::count(coverage_.begin(), coverage_.end(), std::uint32_t{0}));
    if (uncovered > 0) throw IncompleteCoverageError(uncovered);

    MergeResult out;
    out.height = height_;
    out.width = width_;
    out.classes = classes_;
    out.labels.resize(coverage_.size());
    out.mean.resize(sums_.size());
    const std::size_t k = static_cast<std::size_t>(classes_);
    for (std::size_t pix = 0; pix < coverage_.size(); ++pix) {
        const double n = coverage_[pix];
        std::size_t best = 0;
        for (std::size_t j = 0; j < k; ++j) {
            out.mean[pix * k + j] = sums_[pix * k + j] / n;
            if (sums_[pix * k + j] > sums_[pix * k + best]) best = j;
        }
        out.labels[pix] = static_cast<std::uint8_t>(best);
    }
    return out;
}

RasterGrid MergeResult::label_raster(const GeoTransform& transform) const {
    RasterGrid g = make_label_raster(width, height, transform);
    auto dst = g.band(0);
    for (std::size_t i = 0; i < labels.size(); ++i) dst[i] = labels[i];
    return g;
}

RasterGrid MergeResult::probability_raster(const GeoTransform& transform) const {
    RasterGrid g = RasterGrid::create(width, height, classes, SampleType::Float32, transform);
    const std::size_t k = static_cast<std::size_t>(classes);
    for (std::size_t pix = 0; pix < labels.size(); ++pix)
        for (std::size_t j = 0; j < k; ++j) g.bands[j][pix] = static_cast<float>(mean[pix * k + j]);
    return g;
}

std::vector<int> axis_coverage(int extent, int window, int stride) {
    std::vector<int> cov(static_cast<std::size_t>(extent), 0);
    for (int o : window_origins(extent, window, stride))
        for (int i = o; i < o + window; ++i) ++cov[i];
    return cov;
}

namespace {

std::filesystem::path sidecar_of(const std::filesystem::path& tif) {
    auto p = tif;
    p.replace_extension(".json");
    return p;
}

}  // namespace

SoftmaxPatch read_softmax_patch(const std::filesystem::path& tif_path) {
    const auto json_path = sidecar_of(tif_path);
    std::ifstream in(json_path);
    if (!in) throw IoError("missing patch sidecar '" + json_path.string() + "'");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid sidecar '" + json_path.string() + "': " + e.what());
    }
    const RasterGrid grid = read_geotiff(tif_path);
    SoftmaxPatch p;
    try {
        p.row = meta.at("origin").at(0).get<int>();
        p.col = meta.at("origin").at(1).get<int>();
    } catch (const nlohmann::json::exception&) {
        throw DataError("sidecar '" + json_path.string() + "' needs \"origin\": [row, col]");
    }
    if (meta.contains("window")) {
        const int w = meta["window"].get<int>();
        if (w != grid.width || w != grid.height) {
            throw DataError("sidecar window " + std::to_string(w) + " does not match raster " +
                            std::to_string(grid.width) + "x" + std::to_string(grid.height));
        }
    }
    p.height = grid.height;
    p.width = grid.width;
    p.classes = grid.band_count();
    const std::size_t k = static_cast<std::size_t>(p.classes);
    p.probs.resize(grid.pixel_count() * k);
    for (std::size_t pix = 0; pix < grid.pixel_count(); ++pix)
        for (std::size_t j = 0; j < k; ++j) p.probs[pix * k + j] = grid.bands[j][pix];
    return p;
}

void write_softmax_patch(const std::filesystem::path& tif_path, const SoftmaxPatch& patch) {
    RasterGrid g = RasterGrid::create(patch.width, patch.height, patch.classes, SampleType::Float32,
                                      GeoTransform{});
    const std::size_t k = static_cast<std::size_t>(patch.classes);
    for (std::size_t pix = 0; pix < g.pixel_count(); ++pix)
        for (std::size_t j = 0; j < k; ++j) g.bands[j][pix] = patch.probs[pix * k + j];
    write_geotiff(tif_path, g);
    nlohmann::json meta = {{"origin", {patch.row, patch.col}}};
    if (patch.height == patch.width) meta["window"] = patch.width;
    std::ofstream out(sidecar_of(tif_path));
    if (!out) throw IoError("cannot write sidecar for '" + tif_path.string() + "'");
    out << meta.dump() << '\n';
}

MergeResult merge_patch_directory(const std::filesystem::path& dir, const MergeOptions& options) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: '" + dir.string() + "'");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".tif" || ext == ".tiff")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw EmptyInputError("no patch rasters in '" + dir.string() + "'");

    std::optional<SoftmaxAccumulator> acc;
    std::set<std::pair<int, int>> origins;
    int window = 0;
    for (const auto& f : files) {
        const SoftmaxPatch p = read_softmax_patch(f);
        if (!acc) acc.emplace(options.height, options.width, p.classes, options.mode);
        acc->accumulate(p);
        origins.emplace(p.row, p.col);
        window = p.height;
    }
    if (options.stride) {
        std::size_t missing = 0;
        for (int r : window_origins(options.height, window, *options.stride))
            for (int c : window_origins(options.width, window, *options.stride))
                if (!origins.contains({r, c})) ++missing;
        if (missing > 0) {
            throw DataError(std::to_string(missing) + " window(s) of the stride-" +
                            std::to_string(*options.stride) + " grid are missing");
        }
    }
    return acc->finalize();
}

}  // namespace tofmap
