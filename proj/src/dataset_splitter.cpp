#include "tofmap/dataset_splitter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tofmap/errors.hpp"

namespace tofmap {

ClassFractions tile_distribution(const RasterGrid& labels) {
    labels.validate();
    if (labels.band_count() != 1) throw ShapeError("label raster must be single-band");
    std::array<std::size_t, kClassCount> counts{};
    for (const float v : labels.band(0)) {
        const auto c = static_cast<int>(v);
        if (static_cast<float>(c) != v || c < 0 || c >= kClassCount) {
            throw DataError("label raster contains invalid class code " + std::to_string(v));
        }
        ++counts[static_cast<std::size_t>(c)];
    }
    ClassFractions f{};
    const double total = static_cast<double>(labels.pixel_count());
    for (int c = 0; c < kClassCount; ++c) f[c] = static_cast<double>(counts[c]) / total;
    return f;
}

ClassFractions aggregate_fractions(std::span<const TileManifest> tiles,
                                   std::span<const std::size_t> subset) {
    ClassFractions f{};
    double total = 0.0;
    for (std::size_t i : subset) {
        const auto& t = tiles[i];
        total += t.pixel_count();
        for (int c = 0; c < kClassCount; ++c) f[c] += t.fractions[c] * t.pixel_count();
    }
    if (total > 0.0)
        for (double& v : f) v /= total;
    return f;
}

ClassFractions aggregate_fractions(std::span<const TileManifest> tiles) {
    std::vector<std::size_t> all(tiles.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return aggregate_fractions(tiles, all);
}

double max_woody_deviation_pp(const ClassFractions& subset, const ClassFractions& reference) {
    double worst = 0.0;
    for (TofClass c : kWoodyClasses) {
        const auto i = static_cast<std::size_t>(c);
        worst = std::max(worst, 100.0 * std::abs(subset[i] - reference[i]));
    }
    return worst;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// Unbiased draw in [0, bound) from raw 64-bit engine output; the result
// depends only on the engine, not on the standard library's distributions.
std::size_t bounded(std::mt19937_64& rng, std::size_t bound) {
    const std::uint64_t b = bound;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % b;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % b);
}

struct AreaGroup {
    std::string name;
    std::vector<std::size_t> members;  // manifest indices
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    std::mt19937_64 rng;
};

void draw(AreaGroup& g, int n_val, int n_test) {
    auto& m = g.members;
    const std::size_t take = static_cast<std::size_t>(n_val + n_test);
    for (std::size_t i = 0; i < take; ++i) std::swap(m[i], m[i + bounded(g.rng, m.size() - i)]);
    g.val.assign(m.begin(), m.begin() + n_val);
    g.test.assign(m.begin() + n_val, m.begin() + static_cast<std::ptrdiff_t>(take));
}

}  // namespace

SplitPlan select_validation_test(std::span<const TileManifest> tiles, std::uint64_t seed,
                                 const SplitOptions& options) {
    if (options.val_per_area < 1 || options.test_per_area < 1) {
        throw ParameterError("validation and test counts must be >= 1");
    }
    if (options.max_attempts == 0) throw ParameterError("attempt budget must be >= 1");
    {
        std::set<std::string> ids;
        for (const auto& t : tiles)
            if (!ids.insert(t.tile_id).second) throw ParameterError("duplicate tile id '" + t.tile_id + "'");
    }

    std::map<std::string, AreaGroup> by_name;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        auto& g = by_name[tiles[i].study_area];
        g.name = tiles[i].study_area;
        g.members.push_back(i);
    }
    if (by_name.empty()) throw EmptyInputError("tile manifest is empty");
    const std::size_t needed = static_cast<std::size_t>(
        options.val_per_area + options.test_per_area + options.min_train_per_area);
    std::vector<AreaGroup> groups;
    for (auto& [name, g] : by_name) {
        if (g.members.size() < needed) {
            throw ParameterError("study area '" + name + "' has " + std::to_string(g.members.size()) +
                                 " tiles; at least " + std::to_string(needed) + " required");
        }
        g.rng.seed(seed ^ fnv1a(name));
        groups.push_back(std::move(g));
    }

    const double limit = options.max_deviation_pp;
    double achieved = 0.0;
    double best = std::numeric_limits<double>::infinity();

    auto fail = [&](const std::string& where) {
        throw ConstraintInfeasibleError(
            "no validation/test draw within " + std::to_string(limit) + " pp after " +
                std::to_string(options.max_attempts) + " attempts (" + where +
                "); best max deviation " + std::to_string(best) + " pp",
            best);
    };

    if (options.scope == SelectionScope::PerArea) {
        for (auto& g : groups) {
            const ClassFractions ref = aggregate_fractions(tiles, g.members);
            // Draws permute `members`; keep the reference list stable.
            bool ok = false;
            best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < options.max_attempts; ++a) {
                draw(g, options.val_per_area, options.test_per_area);
                const double dv = max_woody_deviation_pp(aggregate_fractions(tiles, g.val), ref);
                const double dt = max_woody_deviation_pp(aggregate_fractions(tiles, g.test), ref);
                const double d = std::max(dv, dt);
                best = std::min(best, d);
                if (dv <= limit && dt <= limit) {
                    achieved = std::max(achieved, d);
                    ok = true;
                    break;
                }
            }
            if (!ok) fail("study area '" + g.name + "'");
        }
    } else {
        const ClassFractions ref = aggregate_fractions(tiles);
        bool ok = false;
        for (std::size_t a = 0; a < options.max_attempts && !ok; ++a) {
            std::vector<std::size_t> val, test;
            for (auto& g : groups) {
                draw(g, options.val_per_area, options.test_per_area);
                val.insert(val.end(), g.val.begin(), g.val.end());
                test.insert(test.end(), g.test.begin(), g.test.end());
            }
            const double dv = max_woody_deviation_pp(aggregate_fractions(tiles, val), ref);
            const double dt = max_woody_deviation_pp(aggregate_fractions(tiles, test), ref);
            const double d = std::max(dv, dt);
            best = std::min(best, d);
            if (dv <= limit && dt <= limit) {
                achieved = d;
                ok = true;
            }
        }
        if (!ok) fail("global scope");
    }

    std::vector<int> role(tiles.size(), 0);  // 0 train, 1 val, 2 test
    for (const auto& g : groups) {
        for (std::size_t i : g.val) role[i] = 1;
        for (std::size_t i : g.test) role[i] = 2;
    }
    SplitPlan plan;
    plan.seed = seed;
    plan.achieved_max_deviation_pp = achieved;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        auto& list = role[i] == 0 ? plan.train : role[i] == 1 ? plan.val : plan.test;
        list.push_back(tiles[i].tile_id);
    }
    return plan;
}

std::vector<int> window_origins(int extent, int window, int stride) {
    if (window < 1 || extent < 1) throw ParameterError("extent and window must be >= 1");
    if (stride < 1) throw ParameterError("stride must be >= 1");
    if (window > extent) {
        throw ParameterError("window " + std::to_string(window) + " exceeds extent " +
                             std::to_string(extent));
    }
    std::vector<int> out;
    for (int o = 0; o + window <= extent; o += stride) out.push_back(o);
    if (out.back() != extent - window) out.push_back(extent - window);
    return out;
}

std::string_view augmentation_name(Augmentation a) noexcept {
    switch (a) {
        case Augmentation::Original: return "orig";
        case Augmentation::HorizontalFlip: return "hflip";
        case Augmentation::VerticalFlip: return "vflip";
    }
    return "unknown";
}

RasterGrid crop(const RasterGrid& grid, int row, int col, int height, int width) {
    if (row < 0 || col < 0 || height < 1 || width < 1 || row + height > grid.height ||
        col + width > grid.width) {
        throw BoundsError("crop window outside raster");
    }
    const MapPoint o = grid.transform.pixel_to_map(col, row);
    RasterGrid out = RasterGrid::create(
        width, height, grid.band_count(), grid.type,
        {o.x, o.y, grid.transform.pixel_size_x, grid.transform.pixel_size_y});
    out.epsg = grid.epsg;
    out.nodata = grid.nodata;
    for (int b = 0; b < grid.band_count(); ++b) {
        for (int r = 0; r < height; ++r) {
            const auto src = grid.bands[b].begin() + static_cast<std::ptrdiff_t>(grid.index(row + r, col));
            std::copy(src, src + width,
                      out.bands[b].begin() + static_cast<std::ptrdiff_t>(out.index(r, 0)));
        }
    }
    return out;
}

RasterGrid flip_horizontal(const RasterGrid& grid) {
    RasterGrid out = grid;
    for (auto& band : out.bands) {
        for (int r = 0; r < grid.height; ++r) {
            auto first = band.begin() + static_cast<std::ptrdiff_t>(grid.index(r, 0));
            std::reverse(first, first + grid.width);
        }
    }
    return out;
}

RasterGrid flip_vertical(const RasterGrid& grid) {
    RasterGrid out = grid;
    for (std::size_t b = 0; b < grid.bands.size(); ++b) {
        for (int r = 0; r < grid.height; ++r) {
            const auto src = grid.bands[b].begin() + static_cast<std::ptrdiff_t>(grid.index(r, 0));
            std::copy(src, src + grid.width,
                      out.bands[b].begin() +
                          static_cast<std::ptrdiff_t>(grid.index(grid.height - 1 - r, 0)));
        }
    }
    return out;
}

std::size_t patch_count(int tile_width, int tile_height, const PatchOptions& options) {
    const auto cols = window_origins(tile_width, options.window, options.stride).size();
    const auto rows = window_origins(tile_height, options.window, options.stride).size();
    return rows * cols * (options.augment ? 3 : 1);
}

void extract_patches_augmented(const RasterGrid& tile, const RasterGrid& labels,
                               const PatchOptions& options,
                               const std::function<void(const PatchPair&)>& sink) {
    tile.validate();
    labels.validate();
    if (tile.width != labels.width || tile.height != labels.height ||
        !same_grid(tile.transform, labels.transform, 1e-6)) {
        throw AlignmentError("image and label rasters are not aligned");
    }
    const auto rows = window_origins(tile.height, options.window, options.stride);
    const auto cols = window_origins(tile.width, options.window, options.stride);
    for (int r : rows) {
        for (int c : cols) {
            PatchPair p{r, c, Augmentation::Original,
                        crop(tile, r, c, options.window, options.window),
                        crop(labels, r, c, options.window, options.window)};
            sink(p);
            if (!options.augment) continue;
            sink(PatchPair{r, c, Augmentation::HorizontalFlip, flip_horizontal(p.image),
                           flip_horizontal(p.labels)});
            sink(PatchPair{r, c, Augmentation::VerticalFlip, flip_vertical(p.image),
                           flip_vertical(p.labels)});
        }
    }
}

std::vector<AreaCombination> generalization_plan(std::span<const std::string> areas) {
    if (areas.size() < 2) throw ParameterError("generalization needs at least two study areas");
    std::set<std::string> seen;
    for (const auto& a : areas)
        if (!seen.insert(a).second) throw ParameterError("duplicate study area '" + a + "'");
    std::vector<AreaCombination> out;
    for (std::size_t i = 0; i < areas.size(); ++i) {
        AreaCombination c;
        c.name = "Combination " + std::to_string(i + 1);
        c.test_area = areas[i];
        for (std::size_t j = 0; j < areas.size(); ++j)
            if (j != i) c.train_val_areas.push_back(areas[j]);
        out.push_back(std::move(c));
    }
    return out;
}

SplitPlan expand_combination(const AreaCombination& combination, const SplitPlan& base,
                             std::span<const TileManifest> tiles) {
    std::map<std::string, std::string> area_of;
    for (const auto& t : tiles) area_of[t.tile_id] = t.study_area;
    const std::set<std::string> train_areas(combination.train_val_areas.begin(),
                                            combination.train_val_areas.end());
    auto in_areas = [&](const std::string& id, bool test) {
        const auto it = area_of.find(id);
        if (it == area_of.end()) throw DataError("tile '" + id + "' missing from manifest");
        return test ? it->second == combination.test_area : train_areas.contains(it->second);
    };
    SplitPlan out;
    out.seed = base.seed;
    out.achieved_max_deviation_pp = base.achieved_max_deviation_pp;
    for (const auto& id : base.train)
        if (in_areas(id, false)) out.train.push_back(id);
    for (const auto& id : base.val)
        if (in_areas(id, false)) out.val.push_back(id);
    for (const auto& id : base.test)
        if (in_areas(id, true)) out.test.push_back(id);
    return out;
}

void write_manifest_csv(const std::filesystem::path& path, std::span<const TileManifest> tiles) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "tile_id,study_area,width,height,background,forest,patch,linear,tree\n";
    out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& t : tiles) {
        out << t.tile_id << ',' << t.study_area << ',' << t.width << ',' << t.height;
        for (double f : t.fractions) out << ',' << f;
        out << '\n';
    }
}

std::vector<TileManifest> read_manifest_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::string line;
    std::getline(in, line);  // header
    std::vector<TileManifest> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 9 columns");
        }
        TileManifest t;
        try {
            t.tile_id = cells[0];
            t.study_area = cells[1];
            t.width = std::stoi(cells[2]);
            t.height = std::stoi(cells[3]);
            for (int c = 0; c < kClassCount; ++c) t.fractions[c] = std::stod(cells[4 + c]);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
        for (double f : t.fractions)
            if (f < 0.0 || f > 1.0) throw DataError("fraction outside [0,1] for tile " + t.tile_id);
        out.push_back(std::move(t));
    }
    return out;
}

std::string split_plan_to_json(const SplitPlan& plan) {
    nlohmann::json j = {{"seed", plan.seed},
                        {"achieved_max_deviation_pp", plan.achieved_max_deviation_pp},
                        {"train", plan.train},
                        {"val", plan.val},
                        {"test", plan.test}};
    return j.dump(2);
}

SplitPlan split_plan_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SplitPlan p;
        p.seed = j.at("seed").get<std::uint64_t>();
        p.achieved_max_deviation_pp = j.at("achieved_max_deviation_pp").get<double>();
        p.train = j.at("train").get<std::vector<std::string>>();
        p.val = j.at("val").get<std::vector<std::string>>();
        p.test = j.at("test").get<std::vector<std::string>>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid split plan JSON: ") + e.what());
    }
}

}  // namespace tofmap
