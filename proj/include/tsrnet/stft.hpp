#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/signal.hpp"
#include "tsrnet/tensor.hpp"

namespace tsrnet {

enum class WindowKind { hann, rect };

struct StftParams {
    int n_fft = 64;
    int hop = 8;
    WindowKind window = WindowKind::hann;

    int num_bins() const { return n_fft / 2 + 1; }
    int num_frames(int D) const { return (D - n_fft) / hop + 1; }

    void validate(int D) const {
        if (hop <= 0) throw std::invalid_argument("StftParams: hop must be positive");
        if (n_fft < hop) throw std::invalid_argument("StftParams: hop must not exceed n_fft");
        if (n_fft > D)
            throw std::invalid_argument("StftParams: n_fft " + std::to_string(n_fft) +
                                        " exceeds record length " + std::to_string(D));
    }
};

// One-sided magnitude spectrogram, one H x W image per lead.
struct Spectrogram {
    Tensor magnitudes;   // [N x H x W]
    StftParams params;

    int num_leads() const { return magnitudes.dim(0); }
    int num_bins() const { return magnitudes.dim(1); }
    int num_frames() const { return magnitudes.dim(2); }
};

inline std::vector<double> make_window(WindowKind kind, int n) {
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (kind == WindowKind::hann) {
        for (int k = 0; k < n; ++k)
            w[static_cast<std::size_t>(k)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * k / n));
    }
    return w;
}

// Naive windowed DFT. Frames that do not fully fit are dropped; the same
// frame positions are used for all leads.
inline Spectrogram stft_magnitude(const EcgRecord& record, const StftParams& params) {
    const int D = record.num_samples();
    const int N = record.num_leads();
    params.validate(D);

    const int H = params.num_bins();
    const int W = params.num_frames(D);
    const int n = params.n_fft;
    const std::vector<double> win = make_window(params.window, n);

    // Precompute the DFT basis once per call.
    std::vector<double> cos_t(static_cast<std::size_t>(H) * n), sin_t(static_cast<std::size_t>(H) * n);
    for (int f = 0; f < H; ++f) {
        for (int k = 0; k < n; ++k) {
            const double ang = -2.0 * M_PI * f * k / n;
            cos_t[static_cast<std::size_t>(f) * n + k] = std::cos(ang);
            sin_t[static_cast<std::size_t>(f) * n + k] = std::sin(ang);
        }
    }

    Spectrogram spec;
    spec.params = params;
    spec.magnitudes = Tensor({N, H, W});
    std::vector<double> frame(static_cast<std::size_t>(n));
    for (int lead = 0; lead < N; ++lead) {
        for (int t = 0; t < W; ++t) {
            const int start = t * params.hop;
            for (int k = 0; k < n; ++k)
                frame[static_cast<std::size_t>(k)] = win[static_cast<std::size_t>(k)] *
                    record.samples.at(start + k, lead);
            for (int f = 0; f < H; ++f) {
                double re = 0.0, im = 0.0;
                const double* ct = &cos_t[static_cast<std::size_t>(f) * n];
                const double* st = &sin_t[static_cast<std::size_t>(f) * n];
                for (int k = 0; k < n; ++k) {
                    re += frame[static_cast<std::size_t>(k)] * ct[k];
                    im += frame[static_cast<std::size_t>(k)] * st[k];
                }
                spec.magnitudes.at(lead, f, t) = std::sqrt(re * re + im * im);
            }
        }
    }
    return spec;
}

// Single mean/std z-score over all N*H*W entries, applied before masking.
inline Spectrogram zscore_spectrogram(const Spectrogram& spec) {
    constexpr double kEps = 1e-8;
    const std::size_t n = spec.magnitudes.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += spec.magnitudes[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = spec.magnitudes[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / (std::sqrt(var) + kEps);
    Spectrogram out = spec;
    for (std::size_t i = 0; i < n; ++i)
        out.magnitudes[i] = (spec.magnitudes[i] - mean) * inv;
    return out;
}

} // namespace tsrnet
