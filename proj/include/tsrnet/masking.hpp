#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tsrnet/rng.hpp"
#include "tsrnet/tensor.hpp"

namespace tsrnet {

// Masked-out positions for one training step: per-lead time-series point
// indices plus a single stripe set of spectrogram frames shared by all leads.
struct MaskSpec {
    std::vector<std::vector<int>> time_mask;   // per lead, sorted sample indices
    std::vector<int> stripe_mask;              // sorted frame indices, lead-independent
    std::uint64_t seed = 0;
};

// floor(ratio*n), guarded against binary-fraction rounding (0.3*1000 must be 300).
inline int mask_count(double ratio, int n) {
    return static_cast<int>(std::floor(ratio * n + 1e-9));
}

// Exactly floor(ratio*D) distinct indices per lead, leads drawn independently.
inline std::vector<std::vector<int>> sample_time_mask(int D, int N, double ratio, std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("sample_time_mask: ratio out of [0,1]");
    const int k = mask_count(ratio, D);
    std::vector<std::vector<int>> mask(static_cast<std::size_t>(N));
    for (int lead = 0; lead < N; ++lead) {
        Rng rng(mix_seed(seed, 0x7 /* time-mask domain */, static_cast<std::uint64_t>(lead)));
        mask[static_cast<std::size_t>(lead)] = rng.sample_without_replacement(D, k);
    }
    return mask;
}

// Exactly floor(ratio*W) distinct frames; stripes are individual frames by
// default, block_len > 1 masks contiguous runs of frames per draw.
inline std::vector<int> sample_stripe_mask(int W, double ratio, std::uint64_t seed, int block_len = 1) {
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("sample_stripe_mask: ratio out of [0,1]");
    if (block_len < 1) throw std::invalid_argument("sample_stripe_mask: block_len must be >= 1");
    const int k = mask_count(ratio, W);
    Rng rng(mix_seed(seed, 0x5 /* stripe-mask domain */));
    if (block_len == 1) return rng.sample_without_replacement(W, k);

    // Block mode: draw block anchors until k frames are covered, trimming the
    // final block so the cardinality invariant still holds exactly.
    std::vector<char> hit(static_cast<std::size_t>(W), 0);
    int covered = 0;
    while (covered < k) {
        int anchor = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(W)));
        for (int j = anchor; j < W && j < anchor + block_len && covered < k; ++j) {
            if (!hit[static_cast<std::size_t>(j)]) {
                hit[static_cast<std::size_t>(j)] = 1;
                ++covered;
            }
        }
    }
    std::vector<int> frames;
    frames.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < W; ++j)
        if (hit[static_cast<std::size_t>(j)]) frames.push_back(j);
    return frames;
}

struct MaskRatios {
    double time_ratio = 0.30;
    double stripe_ratio = 0.20;
    int stripe_block = 1;
};

inline MaskSpec sample_masks(int D, int N, int W, const MaskRatios& ratios, std::uint64_t seed) {
    MaskSpec m;
    m.seed = seed;
    m.time_mask = sample_time_mask(D, N, ratios.time_ratio, seed);
    m.stripe_mask = sample_stripe_mask(W, ratios.stripe_ratio, seed, ratios.stripe_block);
    return m;
}

// Masked positions become 0; everything else is copied bit-exactly.
// ecg is [D x N], spec is [N x H x W].
inline Tensor apply_time_mask(const Tensor& ecg, const MaskSpec& masks) {
    const int D = ecg.dim(0);
    const int N = ecg.dim(1);
    if (static_cast<int>(masks.time_mask.size()) != N)
        throw std::invalid_argument("apply_time_mask: lead count mismatch");
    Tensor out = ecg;
    for (int lead = 0; lead < N; ++lead) {
        for (int idx : masks.time_mask[static_cast<std::size_t>(lead)]) {
            if (idx < 0 || idx >= D) throw std::out_of_range("apply_time_mask: index out of bounds");
            out.at(idx, lead) = 0.0;
        }
    }
    return out;
}

inline Tensor apply_stripe_mask(const Tensor& spec, const MaskSpec& masks) {
    const int N = spec.dim(0);
    const int H = spec.dim(1);
    const int W = spec.dim(2);
    Tensor out = spec;
    for (int frame : masks.stripe_mask) {
        if (frame < 0 || frame >= W) throw std::out_of_range("apply_stripe_mask: frame out of bounds");
        for (int lead = 0; lead < N; ++lead)
            for (int f = 0; f < H; ++f)
                out.at(lead, f, frame) = 0.0;
    }
    return out;
}

// Per-step seed derived from (global seed, epoch, batch index) so fresh masks
// are drawn every step while runs stay reproducible.
inline std::uint64_t step_mask_seed(std::uint64_t global_seed, int epoch, int batch_index) {
    return mix_seed(global_seed, static_cast<std::uint64_t>(epoch) + 1,
                    static_cast<std::uint64_t>(batch_index) + 1);
}

} // namespace tsrnet
