#pragma once

#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/config.hpp"
#include "tsrnet/dataset.hpp"
#include "tsrnet/masking.hpp"
#include "tsrnet/network.hpp"
#include "tsrnet/scoring.hpp"
#include "tsrnet/signal.hpp"
#include "tsrnet/stft.hpp"

namespace tsrnet {

// A record after normalization and STFT, in network layout.
struct PreparedRecord {
    Tensor ecg;    // [N x D] channel-major, z-scored
    Tensor spec;   // [N x H x W], z-scored
    std::string id;
    Label label = Label::unlabeled;
    double sampling_rate_hz = 0.0;
};

inline PreparedRecord prepare_record(const EcgRecord& record, const StftParams& stft) {
    const EcgRecord norm = zscore_normalize(record);
    PreparedRecord out;
    out.id = record.record_id;
    out.label = record.label;
    out.sampling_rate_hz = record.sampling_rate_hz;
    const int D = norm.num_samples();
    const int N = norm.num_leads();
    out.ecg = Tensor({N, D});
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < D; ++i) out.ecg.at(n, i) = norm.samples.at(i, n);
    out.spec = zscore_spectrogram(stft_magnitude(norm, stft)).magnitudes;
    return out;
}

inline InputDims dims_of(const PreparedRecord& r) {
    return {r.ecg.dim(1), r.ecg.dim(0), r.spec.dim(1), r.spec.dim(2)};
}

// Stacks records into batch tensors, optionally applying per-record masks
// derived from (step_seed, slot).
struct Batch {
    Tensor ecg;      // [B, N, D] masked
    Tensor spec;     // [B, N, H, W] masked
    Tensor target;   // [B, N, D] unmasked
};

inline Batch make_batch(const std::vector<const PreparedRecord*>& records,
                        const MaskRatios* mask_ratios, std::uint64_t step_seed) {
    if (records.empty()) throw std::invalid_argument("make_batch: empty batch");
    const int B = static_cast<int>(records.size());
    const int N = records[0]->ecg.dim(0);
    const int D = records[0]->ecg.dim(1);
    const int H = records[0]->spec.dim(1);
    const int W = records[0]->spec.dim(2);
    Batch batch{Tensor({B, N, D}), Tensor({B, N, H, W}), Tensor({B, N, D})};
    for (int b = 0; b < B; ++b) {
        const PreparedRecord& r = *records[static_cast<std::size_t>(b)];
        Tensor ecg_dn({D, N});   // [D x N] view for the masking ops
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < D; ++i) ecg_dn.at(i, n) = r.ecg.at(n, i);
        Tensor spec_m = r.spec;
        if (mask_ratios) {
            const MaskSpec masks = sample_masks(D, N, W, *mask_ratios,
                                                mix_seed(step_seed, 0x40, static_cast<std::uint64_t>(b)));
            ecg_dn = apply_time_mask(ecg_dn, masks);
            spec_m = apply_stripe_mask(spec_m, masks);
        }
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < D; ++i) {
                batch.ecg.at(b, n, i) = ecg_dn.at(i, n);
                batch.target.at(b, n, i) = r.ecg.at(n, i);
            }
        for (std::size_t i = 0; i < spec_m.size(); ++i)
            batch.spec[static_cast<std::size_t>(b) * spec_m.size() + i] = spec_m[i];
    }
    return batch;
}

// [B, N, D] slice b -> [D x N]
inline Tensor slice_to_dn(const Tensor& t, int b) {
    const int N = t.dim(1), D = t.dim(2);
    Tensor out({D, N});
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < D; ++i) out.at(i, n) = t.at(b, n, i);
    return out;
}

// Scores one prepared record: full-signal forward (no masking), then the
// peak-based error, or the plain restoration loss when peak_based is off.
inline double score_record(TsrNet& net, const PreparedRecord& rec, const ScoringConfig& sc) {
    const int N = rec.ecg.dim(0), D = rec.ecg.dim(1);
    std::vector<const PreparedRecord*> one{&rec};
    Batch batch = make_batch(one, nullptr, 0);
    Restoration rest = net.forward(batch.ecg, batch.spec, /*training=*/false);

    Tensor y = slice_to_dn(rest.y, 0);
    Tensor sigma = slice_to_dn(rest.sigma, 0);
    Tensor x = slice_to_dn(batch.target, 0);

    if (!sc.peak_based) return restoration_loss(y, sigma, x).total;

    EcgRecord norm_rec;
    norm_rec.samples = x;
    norm_rec.sampling_rate_hz = rec.sampling_rate_hz;
    norm_rec.record_id = rec.id;
    const int lead = sc.detection_lead < N ? sc.detection_lead : 0;
    const std::vector<int> peaks = detect_r_peaks(norm_rec, lead, sc.detector);
    const PeakMask mask = build_peak_mask(peaks, sc.window_halfwidth, D);
    return peak_error(y, sigma, x, mask);
}

// Scores every test record; per-record failures are logged and excluded,
// never scored as zero.
inline ScoreReport score_split(TsrNet& net, const DatasetSplit& split, const StftParams& stft,
                               const ScoringConfig& sc, const std::string& fingerprint,
                               std::ostream& log = std::cerr) {
    if (split.test.empty()) throw std::invalid_argument("score_split: empty test split");
    std::vector<RecordScore> scores;
    for (const auto& record : split.test) {
        try {
            PreparedRecord prep = prepare_record(record, stft);
            scores.push_back({record.record_id, record.label, score_record(net, prep, sc)});
        } catch (const std::exception& e) {
            log << "score: record " << record.record_id << ": " << e.what() << ", excluded\n";
        }
    }
    return assemble_report(std::move(scores), fingerprint);
}

} // namespace tsrnet
