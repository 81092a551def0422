#include "tofmap/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tofmap/errors.hpp"

namespace tofmap {

void ConfusionMatrix::add(int gt, int pred, std::uint64_t n) {
    if (gt < 0 || gt >= kClassCount || pred < 0 || pred >= kClassCount) {
        throw DataError("class code outside 0..4 (gt " + std::to_string(gt) + ", pred " +
                        std::to_string(pred) + ")");
    }
    counts_[gt][pred] += n;
}

void ConfusionMatrix::accumulate(std::span<const std::uint8_t> gt,
                                 std::span<const std::uint8_t> pred) {
    if (gt.size() != pred.size()) throw ShapeError("ground truth and prediction sizes differ");
    Counts local{};
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] >= kClassCount || pred[i] >= kClassCount) {
            throw DataError("class code outside 0..4 at pixel " + std::to_string(i));
        }
        ++local[gt[i]][pred[i]];
    }
    *this += ConfusionMatrix(local);
}

void ConfusionMatrix::accumulate(const RasterGrid& gt, const RasterGrid& pred) {
    gt.validate();
    pred.validate();
    if (gt.width != pred.width || gt.height != pred.height) {
        throw ShapeError("ground truth " + std::to_string(gt.width) + "x" +
                         std::to_string(gt.height) + " vs prediction " +
                         std::to_string(pred.width) + "x" + std::to_string(pred.height));
    }
    if (gt.band_count() != 1 || pred.band_count() != 1) throw ShapeError("label rasters must be single-band");
    auto to_codes = [](std::span<const float> v) {
        std::vector<std::uint8_t> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const float x = v[i];
            if (!(x >= 0.0f && x < static_cast<float>(kClassCount)) || std::floor(x) != x) {
                throw DataError("invalid class code " + std::to_string(x) + " at pixel " +
                                std::to_string(i));
            }
            out[i] = static_cast<std::uint8_t>(x);
        }
        return out;
    };
    const auto g = to_codes(gt.band(0));
    const auto p = to_codes(pred.band(0));
    accumulate(g, p);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    for (int g = 0; g < kClassCount; ++g)
        for (int p = 0; p < kClassCount; ++p) counts_[g][p] += other.counts_[g][p];
    return *this;
}

std::uint64_t ConfusionMatrix::row_sum(int gt) const {
    return std::accumulate(counts_[gt].begin(), counts_[gt].end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::col_sum(int pred) const {
    std::uint64_t s = 0;
    for (int g = 0; g < kClassCount; ++g) s += counts_[g][pred];
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (int g = 0; g < kClassCount; ++g) s += row_sum(g);
    return s;
}

MetricsReport per_class_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw EmptyInputError("confusion matrix is empty");
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    MetricsReport r;
    for (int c = 0; c < kClassCount; ++c) {
        ClassMetrics& m = r.per_class[c];
        m.tp = cm.at(c, c);
        m.fp = cm.col_sum(c) - m.tp;
        m.fn = cm.row_sum(c) - m.tp;
        const double tp = static_cast<double>(m.tp);
        m.precision = ratio(tp, tp + static_cast<double>(m.fp));
        m.recall = ratio(tp, tp + static_cast<double>(m.fn));
        m.iou = ratio(tp, tp + static_cast<double>(m.fp) + static_cast<double>(m.fn));
        m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    }
    return r;
}

MacroSummary macro_summary(const MetricsReport& report) {
    MacroSummary s;
    for (TofClass c : kWoodyClasses) {
        s.miou += report.per_class[static_cast<std::size_t>(c)].iou;
        s.mf1 += report.per_class[static_cast<std::size_t>(c)].f1;
    }
    s.miou /= static_cast<double>(kWoodyClasses.size());
    s.mf1 /= static_cast<double>(kWoodyClasses.size());
    return s;
}

NormalizedMatrix normalized_matrix(const ConfusionMatrix& cm) {
    NormalizedMatrix m;
    for (int g = 0; g < kClassCount; ++g) {
        const std::uint64_t row = cm.row_sum(g);
        if (row == 0) {
            m.empty_rows.push_back(g);
            continue;
        }
        for (int p = 0; p < kClassCount; ++p)
            m.percent[g][p] = 100.0 * static_cast<double>(cm.at(g, p)) / static_cast<double>(row);
    }
    return m;
}

std::array<std::array<double, kClassCount>, kClassCount> rounded_percentages(
    const NormalizedMatrix& m) {
    std::array<std::array<double, kClassCount>, kClassCount> out{};
    for (int g = 0; g < kClassCount; ++g) {
        if (std::find(m.empty_rows.begin(), m.empty_rows.end(), g) != m.empty_rows.end()) continue;
        // Work in hundredths of a percent: 10000 units per row.
        std::array<long long, kClassCount> units{};
        std::array<double, kClassCount> remainder{};
        long long assigned = 0;
        for (int p = 0; p < kClassCount; ++p) {
            const double exact = m.percent[g][p] * 100.0;
            units[p] = static_cast<long long>(std::floor(exact + 1e-9));
            remainder[p] = exact - static_cast<double>(units[p]);
            assigned += units[p];
        }
        std::array<int, kClassCount> order{};
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return remainder[a] > remainder[b]; });
        for (long long left = 10000 - assigned, i = 0; left > 0; --left, ++i)
            ++units[order[static_cast<std::size_t>(i % kClassCount)]];
        for (int p = 0; p < kClassCount; ++p) out[g][p] = static_cast<double>(units[p]) / 100.0;
    }
    return out;
}

std::string normalized_matrix_csv(const NormalizedMatrix& m) {
    const auto r = rounded_percentages(m);
    std::ostringstream os;
    os << "gt";
    for (int p = 0; p < kClassCount; ++p) os << ',' << class_name(static_cast<TofClass>(p));
    os << '\n';
    char buf[32];
    for (int g = 0; g < kClassCount; ++g) {
        os << class_name(static_cast<TofClass>(g));
        for (int p = 0; p < kClassCount; ++p) {
            std::snprintf(buf, sizeof(buf), "%.2f", r[g][p]);
            os << ',' << buf;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

GroupEvaluation evaluate_one(const std::string& name, const ConfusionMatrix& cm) {
    GroupEvaluation g{name, cm, per_class_metrics(cm), {}};
    g.macro = macro_summary(g.metrics);
    return g;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    sd = std::sqrt(acc / static_cast<double>(v.size()));
}

nlohmann::json group_json(const GroupEvaluation& g) {
    nlohmann::json classes = nlohmann::json::object();
    for (int c = 0; c < kClassCount; ++c) {
        const auto& m = g.metrics.per_class[c];
        classes[std::string(class_name(static_cast<TofClass>(c)))] = {
            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"iou", m.iou},
            {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}};
    }
    nlohmann::json matrix = nlohmann::json::array();
    for (const auto& row : g.matrix.counts()) matrix.push_back(row);
    return {{"group", g.group},
            {"miou", g.macro.miou},
            {"mf1", g.macro.mf1},
            {"classes", classes},
            {"confusion_matrix", matrix},
            {"normalized_matrix", rounded_percentages(normalized_matrix(g.matrix))}};
}

}  // namespace

EvaluationReport evaluate_groups(const std::map<std::string, ConfusionMatrix>& groups) {
    if (groups.empty()) throw EmptyInputError("no groups to evaluate");
    EvaluationReport r;
    ConfusionMatrix pooled;
    for (const auto& [name, cm] : groups) {
        r.groups.push_back(evaluate_one(name, cm));
        pooled += cm;
    }
    r.overall = evaluate_one("overall", pooled);
    for (int c = 0; c < kClassCount; ++c) {
        std::vector<double> iou, f1;
        for (const auto& g : r.groups) {
            iou.push_back(g.metrics.per_class[c].iou);
            f1.push_back(g.metrics.per_class[c].f1);
        }
        mean_std(iou, r.iou_mean[c], r.iou_std[c]);
        mean_std(f1, r.f1_mean[c], r.f1_std[c]);
    }
    std::vector<double> miou, mf1;
    for (const auto& g : r.groups) {
        miou.push_back(g.macro.miou);
        mf1.push_back(g.macro.mf1);
    }
    mean_std(miou, r.macro_mean.miou, r.macro_std.miou);
    mean_std(mf1, r.macro_mean.mf1, r.macro_std.mf1);
    return r;
}

std::string report_to_json(const EvaluationReport& report) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : report.groups) groups.push_back(group_json(g));
    nlohmann::json across = nlohmann::json::object();
    for (int c = 0; c < kClassCount; ++c) {
        across[std::string(class_name(static_cast<TofClass>(c)))] = {
            {"iou_mean", report.iou_mean[c]},
            {"iou_std", report.iou_std[c]},
            {"f1_mean", report.f1_mean[c]},
            {"f1_std", report.f1_std[c]}};
    }
    nlohmann::json j = {{"groups", groups},
                        {"overall", group_json(report.overall)},
                        {"across_groups",
                         {{"miou_mean", report.macro_mean.miou},
                          {"miou_std", report.macro_std.miou},
                          {"mf1_mean", report.macro_mean.mf1},
                          {"mf1_std", report.macro_std.mf1},
                          {"classes", across}}}};
    return j.dump(2);
}

std::string report_to_csv(const EvaluationReport& report) {
    std::ostringstream os;
    os.precision(10);
    os << "group,class,precision,recall,f1,iou,tp,fp,fn\n";
    auto rows = [&](const GroupEvaluation& g) {
        for (int c = 0; c < kClassCount; ++c) {
            const auto& m = g.metrics.per_class[c];
            os << g.group << ',' << class_name(static_cast<TofClass>(c)) << ',' << m.precision
               << ',' << m.recall << ',' << m.f1 << ',' << m.iou << ',' << m.tp << ',' << m.fp
               << ',' << m.fn << '\n';
        }
    };
    for (const auto& g : report.groups) rows(g);
    rows(report.overall);
    return os.str();
}

}  // namespace tofmap
