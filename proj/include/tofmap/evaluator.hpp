#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tofmap/raster.hpp"
#include "tofmap/tof_classifier.hpp"

namespace tofmap {

/// 5x5 pixel counts; rows are ground truth, columns predictions, both in
/// class-code order (BG, Forest, Patch, Linear, Tree).
class ConfusionMatrix {
public:
    using Counts = std::array<std::array<std::uint64_t, kClassCount>, kClassCount>;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(const Counts& counts) : counts_(counts) {}

    /// Streams one tile. Throws ShapeError on extent mismatch and DataError
    /// on codes outside 0..4.
    void accumulate(const RasterGrid& gt, const RasterGrid& pred);
    void accumulate(std::span<const std::uint8_t> gt, std::span<const std::uint8_t> pred);
    void add(int gt, int pred, std::uint64_t n = 1);

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;

    std::uint64_t at(int gt, int pred) const { return counts_[gt][pred]; }
    std::uint64_t row_sum(int gt) const;
    std::uint64_t col_sum(int pred) const;
    std::uint64_t total() const;
    const Counts& counts() const noexcept { return counts_; }

private:
    Counts counts_{};
};

struct ClassMetrics {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou = 0.0;
};

struct MetricsReport {
    std::array<ClassMetrics, kClassCount> per_class{};
};

/// Zero denominators yield 0. Throws EmptyInputError for an empty matrix.
MetricsReport per_class_metrics(const ConfusionMatrix& cm);

struct MacroSummary {
    double miou = 0.0;
    double mf1 = 0.0;
};

/// Unweighted means over Forest, Patch, Linear and Tree; Background excluded.
MacroSummary macro_summary(const MetricsReport& report);

struct NormalizedMatrix {
    /// Row percentages; rows without ground-truth pixels are all zero.
    std::array<std::array<double, kClassCount>, kClassCount> percent{};
    std::vector<int> empty_rows;
};

NormalizedMatrix normalized_matrix(const ConfusionMatrix& cm);

/// Two-decimal rendering by largest remainder, so each non-empty row adds up
/// to exactly 100.00.
std::array<std::array<double, kClassCount>, kClassCount> rounded_percentages(
    const NormalizedMatrix& m);

/// CSV with a header row and one row per ground-truth class, two decimals.
std::string normalized_matrix_csv(const NormalizedMatrix& m);

struct GroupEvaluation {
    std::string group;
    ConfusionMatrix matrix;
    MetricsReport metrics;
    MacroSummary macro;
};

/// Per-group results plus the pooled matrix, and the mean / population
/// standard deviation of the per-group metrics.
struct EvaluationReport {
    std::vector<GroupEvaluation> groups;
    GroupEvaluation overall;
    std::array<double, kClassCount> iou_mean{}, iou_std{}, f1_mean{}, f1_std{};
    MacroSummary macro_mean;
    MacroSummary macro_std;
};

EvaluationReport evaluate_groups(const std::map<std::string, ConfusionMatrix>& groups);

std::string report_to_json(const EvaluationReport& report);
/// One row per class per group: group,class,precision,recall,f1,iou,tp,fp,fn.
std::string report_to_csv(const EvaluationReport& report);

}  // namespace tofmap
