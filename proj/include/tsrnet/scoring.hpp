#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tsrnet/loss.hpp"
#include "tsrnet/peaks.hpp"
#include "tsrnet/signal.hpp"
#include "tsrnet/tensor.hpp"

namespace tsrnet {

// Restoration error restricted to the peak windows, pooled over all leads.
// ||mask|| counts index-lead pairs. An empty mask falls back to the
// full-signal mean so the score is always defined.
inline double peak_error(const Tensor& y, const Tensor& sigma, const Tensor& x,
                         const PeakMask& mask) {
    check_loss_inputs(y, sigma, x);
    const int D = y.dim(0);
    const int N = y.dim(1);
    if (mask.indices.empty())
        return restoration_loss(y, sigma, x).total;

    double sum = 0.0;
    for (int idx : mask.indices) {
        if (idx < 0 || idx >= D) throw std::out_of_range("peak_error: mask index out of bounds");
        for (int lead = 0; lead < N; ++lead) {
            const double r = y.at(idx, lead) - x.at(idx, lead);
            sum += std::exp(-sigma.at(idx, lead)) * r * r + sigma.at(idx, lead);
        }
    }
    return sum / (static_cast<double>(mask.indices.size()) * N);
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> points;
};

// label true = abnormal (positive class). AUC is the Mann-Whitney statistic
// with half credit for ties; the ROC curve sweeps a threshold through every
// distinct score.
inline RocResult roc_auc(const std::vector<std::pair<bool, double>>& labeled_scores) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& [is_abnormal, score] : labeled_scores) {
        (void)score;
        if (is_abnormal) ++n_pos; else ++n_neg;
    }
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_auc: need at least one normal and one abnormal");

    std::vector<std::pair<double, bool>> sorted;
    sorted.reserve(labeled_scores.size());
    for (const auto& [is_abnormal, score] : labeled_scores)
        sorted.emplace_back(score, is_abnormal);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    RocResult out;
    out.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    double pair_sum = 0.0;   // Mann-Whitney accumulator
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        std::size_t tie_pos = 0, tie_neg = 0;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) {
            if (sorted[j].second) ++tie_pos; else ++tie_neg;
            ++j;
        }
        // Positives in this tie group beat all lower-scored negatives and tie
        // with this group's negatives.
        pair_sum += static_cast<double>(tie_pos) *
                    (static_cast<double>(n_neg - fp - tie_neg) + 0.5 * static_cast<double>(tie_neg));
        tp += tie_pos;
        fp += tie_neg;
        out.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                              static_cast<double>(tp) / static_cast<double>(n_pos)});
        i = j;
    }
    out.auc = pair_sum / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return out;
}

inline double trapezoid_auc(const std::vector<RocPoint>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += 0.5 * (points[i].tpr + points[i - 1].tpr) * (points[i].fpr - points[i - 1].fpr);
    return area;
}

struct RecordScore {
    std::string record_id;
    Label label = Label::unlabeled;
    double score = 0.0;
};

struct ScoreReport {
    std::vector<RecordScore> per_record;
    double auc = 0.0;
    std::vector<RocPoint> roc_points;
    std::string config_fingerprint;
};

inline ScoreReport assemble_report(std::vector<RecordScore> scores, std::string fingerprint) {
    ScoreReport report;
    report.per_record = std::move(scores);
    report.config_fingerprint = std::move(fingerprint);
    std::vector<std::pair<bool, double>> labeled;
    for (const auto& rs : report.per_record)
        if (rs.label != Label::unlabeled)
            labeled.emplace_back(rs.label == Label::abnormal, rs.score);
    RocResult roc = roc_auc(labeled);
    report.auc = roc.auc;
    report.roc_points = std::move(roc.points);
    return report;
}

// Flat text table plus a summary block. Deterministic for a fixed report
// (timestamps belong in a separate metadata file).
inline void save_report(const std::filesystem::path& path, const ScoreReport& report) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("report: cannot write " + path.string());
    os << std::setprecision(17);
    os << "# record_id\tlabel\tscore\n";
    for (const auto& rs : report.per_record)
        os << rs.record_id << "\t" << label_name(rs.label) << "\t" << rs.score << "\n";
    os << "# summary\n";
    os << "# auc\t" << report.auc << "\n";
    os << "# records\t" << report.per_record.size() << "\n";
    os << "# config_fingerprint\t" << report.config_fingerprint << "\n";
}

inline void save_roc_points(const std::filesystem::path& path, const ScoreReport& report) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("report: cannot write " + path.string());
    os << std::setprecision(17);
    os << "fpr\ttpr\n";
    for (const auto& p : report.roc_points) os << p.fpr << "\t" << p.tpr << "\n";
}

// Reads a report table back (records only; the summary is recomputed).
inline std::vector<RecordScore> load_report_scores(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("report: cannot open " + path.string());
    std::vector<RecordScore> scores;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw std::runtime_error("report: malformed line: " + line);
        scores.push_back({line.substr(0, t1),
                          label_from_name(line.substr(t1 + 1, t2 - t1 - 1)),
                          std::stod(line.substr(t2 + 1))});
    }
    return scores;
}

} // namespace tsrnet
