#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tsrnet/signal.hpp"

namespace tsrnet {

struct PeakDetectorParams {
    double refractory_s = 0.2;        // minimum spacing between peaks
    double integration_window_s = 0.15;
    double threshold_factor = 0.35;   // fraction of the integrated signal's max
    double search_halfwidth_s = 0.08; // refine to the local |x| maximum
};

struct PeakMask {
    std::vector<int> indices;         // sorted union of windows, clipped to [0, D)
    std::vector<int> peak_positions;  // sorted
    int window_halfwidth = 0;
};

// Pan-Tompkins-style detector: derivative -> squaring -> moving-window
// integration -> threshold at a fraction of the maximum, then refinement to
// the nearest |x| maximum with a refractory rule.
inline std::vector<int> detect_r_peaks(const EcgRecord& record, int lead,
                                       const PeakDetectorParams& params = {}) {
    if (lead < 0 || lead >= record.num_leads())
        throw std::invalid_argument("detect_r_peaks: lead out of range");
    const int D = record.num_samples();
    const double fs = record.sampling_rate_hz;
    const int win = std::max(1, static_cast<int>(params.integration_window_s * fs));
    if (D < win + 2) return {};

    std::vector<double> x(static_cast<std::size_t>(D));
    for (int i = 0; i < D; ++i) x[static_cast<std::size_t>(i)] = record.samples.at(i, lead);

    // Derivative and squaring.
    std::vector<double> sq(static_cast<std::size_t>(D), 0.0);
    for (int i = 1; i + 1 < D; ++i) {
        const double d = 0.5 * (x[static_cast<std::size_t>(i + 1)] - x[static_cast<std::size_t>(i - 1)]);
        sq[static_cast<std::size_t>(i)] = d * d;
    }

    // Moving-window integration (running sum, O(D)).
    std::vector<double> integ(static_cast<std::size_t>(D), 0.0);
    double acc = 0.0;
    for (int i = 0; i < D; ++i) {
        acc += sq[static_cast<std::size_t>(i)];
        if (i >= win) acc -= sq[static_cast<std::size_t>(i - win)];
        integ[static_cast<std::size_t>(i)] = acc / win;
    }

    const double peak_val = *std::max_element(integ.begin(), integ.end());
    if (peak_val <= 0.0) return {};
    const double threshold = params.threshold_factor * peak_val;

    const int refractory = std::max(1, static_cast<int>(params.refractory_s * fs));
    const int search = std::max(1, static_cast<int>(params.search_halfwidth_s * fs));

    std::vector<int> peaks;
    int i = 0;
    while (i < D) {
        if (integ[static_cast<std::size_t>(i)] < threshold) {
            ++i;
            continue;
        }
        // Above-threshold run: take its integrated maximum, then snap to the
        // largest |x| nearby (integration lags the R wave by ~win/2).
        int run_end = i;
        int arg = i;
        while (run_end < D && integ[static_cast<std::size_t>(run_end)] >= threshold) {
            if (integ[static_cast<std::size_t>(run_end)] > integ[static_cast<std::size_t>(arg)]) arg = run_end;
            ++run_end;
        }
        int lo = std::max(0, arg - win);
        int hi = std::min(D - 1, arg + search);
        int best = lo;
        for (int j = lo; j <= hi; ++j)
            if (std::fabs(x[static_cast<std::size_t>(j)]) > std::fabs(x[static_cast<std::size_t>(best)])) best = j;
        if (peaks.empty() || best - peaks.back() >= refractory) {
            peaks.push_back(best);
        } else if (std::fabs(x[static_cast<std::size_t>(best)]) > std::fabs(x[static_cast<std::size_t>(peaks.back())])) {
            peaks.back() = best;   // refractory: keep the taller of the two
        }
        i = run_end;
    }
    return peaks;
}

// Union of [p - w, p + w] windows clipped to [0, D); overlaps merged.
inline PeakMask build_peak_mask(const std::vector<int>& peaks, int window_halfwidth, int D) {
    if (window_halfwidth < 0) throw std::invalid_argument("build_peak_mask: negative halfwidth");
    PeakMask mask;
    mask.peak_positions = peaks;
    mask.window_halfwidth = window_halfwidth;
    std::vector<char> hit(static_cast<std::size_t>(D), 0);
    for (int p : peaks) {
        if (p < 0 || p >= D) throw std::out_of_range("build_peak_mask: peak out of bounds");
        const int lo = std::max(0, p - window_halfwidth);
        const int hi = std::min(D - 1, p + window_halfwidth);
        for (int j = lo; j <= hi; ++j) hit[static_cast<std::size_t>(j)] = 1;
    }
    for (int j = 0; j < D; ++j)
        if (hit[static_cast<std::size_t>(j)]) mask.indices.push_back(j);
    return mask;
}

} // namespace tsrnet
