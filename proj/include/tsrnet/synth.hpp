#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/rng.hpp"
#include "tsrnet/signal.hpp"

namespace tsrnet {

enum class AnomalyKind { amplitude_spike, dropped_beat, widened_qrs };

inline const char* anomaly_name(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::amplitude_spike: return "amplitude_spike";
        case AnomalyKind::dropped_beat: return "dropped_beat";
        default: return "widened_qrs";
    }
}

inline AnomalyKind anomaly_from_name(const std::string& s) {
    if (s == "amplitude_spike") return AnomalyKind::amplitude_spike;
    if (s == "dropped_beat") return AnomalyKind::dropped_beat;
    if (s == "widened_qrs") return AnomalyKind::widened_qrs;
    throw std::invalid_argument("unknown anomaly kind: " + s);
}

struct SynthSpec {
    int n_normal_train = 500;
    int n_normal_test = 100;
    int n_abnormal_test = 100;
    double duration_s = 10.0;
    double sampling_rate_hz = 100.0;
    double heart_rate_bpm_min = 55.0;
    double heart_rate_bpm_max = 85.0;
    int num_leads = 12;
    double noise_mv = 0.02;
    std::vector<AnomalyKind> anomaly_kinds = {AnomalyKind::amplitude_spike,
                                              AnomalyKind::widened_qrs};

    void validate() const {
        if (n_normal_train < 0 || n_normal_test < 0 || n_abnormal_test < 0)
            throw std::invalid_argument("SynthSpec: negative count");
        if (duration_s <= 0.0) throw std::invalid_argument("SynthSpec: duration must be positive");
        if (sampling_rate_hz <= 0.0) throw std::invalid_argument("SynthSpec: bad sampling rate");
        if (heart_rate_bpm_min <= 0.0 || heart_rate_bpm_max < heart_rate_bpm_min)
            throw std::invalid_argument("SynthSpec: bad heart rate range");
        if (num_leads <= 0) throw std::invalid_argument("SynthSpec: need at least one lead");
    }
};

struct SynthRecord {
    EcgRecord record;
    std::vector<int> r_peaks;        // ground-truth R positions
    AnomalyKind anomaly = AnomalyKind::amplitude_spike;   // meaningful iff abnormal
};

namespace detail {

inline double gaussian_bump(double t, double center, double width) {
    const double d = (t - center) / width;
    return std::exp(-0.5 * d * d);
}

// One quasi-periodic beat train with Gaussian P/QRS/T morphology. Lead
// amplitudes vary smoothly so leads differ but stay in phase.
inline SynthRecord make_beat_train(const SynthSpec& spec, Rng& rng, bool abnormal,
                                   const std::string& id) {
    const double fs = spec.sampling_rate_hz;
    const int D = static_cast<int>(spec.duration_s * fs);
    const int N = spec.num_leads;
    const double bpm = rng.uniform(spec.heart_rate_bpm_min, spec.heart_rate_bpm_max);
    const double rr = 60.0 / bpm;   // seconds per beat

    AnomalyKind kind = AnomalyKind::amplitude_spike;
    if (abnormal) {
        if (spec.anomaly_kinds.empty())
            throw std::invalid_argument("synth_dataset: abnormal records need anomaly kinds");
        kind = spec.anomaly_kinds[rng.bounded(spec.anomaly_kinds.size())];
    }

    // Beat schedule with mild RR jitter.
    std::vector<double> beat_times;
    double t = rng.uniform(0.15, 0.45) * rr;
    while (t < spec.duration_s - 0.2) {
        beat_times.push_back(t);
        t += rr * (1.0 + 0.02 * rng.uniform(-1.0, 1.0));
    }

    int affected = -1;
    if (abnormal && !beat_times.empty())
        affected = 1 + static_cast<int>(rng.bounded(
                       static_cast<std::uint64_t>(std::max<std::size_t>(beat_times.size() - 1, 1))));
    if (affected >= static_cast<int>(beat_times.size())) affected = static_cast<int>(beat_times.size()) - 1;

    SynthRecord out;
    out.anomaly = kind;
    out.record.record_id = id;
    out.record.sampling_rate_hz = fs;
    out.record.label = abnormal ? Label::abnormal : Label::normal;
    out.record.samples = Tensor({D, N});

    std::vector<double> lead_gain(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n)
        lead_gain[static_cast<std::size_t>(n)] = 0.6 + 0.8 * (n + 1) / static_cast<double>(N);

    for (std::size_t bi = 0; bi < beat_times.size(); ++bi) {
        const double bt = beat_times[bi];
        const bool is_affected = (static_cast<int>(bi) == affected);
        if (is_affected && kind == AnomalyKind::dropped_beat) continue;

        double r_amp = 1.0 + 0.05 * rng.uniform(-1.0, 1.0);
        double qrs_width = 0.012;
        if (is_affected && kind == AnomalyKind::amplitude_spike) r_amp *= 2.5;
        if (is_affected && kind == AnomalyKind::widened_qrs) qrs_width *= 4.0;

        const int r_index = static_cast<int>(std::lround(bt * fs));
        if (r_index >= 0 && r_index < D &&
            !(is_affected && kind == AnomalyKind::dropped_beat))
            out.r_peaks.push_back(r_index);

        for (int i = std::max(0, static_cast<int>((bt - 0.45) * fs));
             i < std::min(D, static_cast<int>((bt + 0.55) * fs)); ++i) {
            const double ti = i / fs;
            double v = 0.0;
            v += 0.12 * gaussian_bump(ti, bt - 0.16, 0.025);               // P
            v += -0.15 * gaussian_bump(ti, bt - 0.025, 0.010);             // Q
            v += r_amp * gaussian_bump(ti, bt, qrs_width);                 // R
            v += -0.20 * gaussian_bump(ti, bt + 0.030, 0.012);             // S
            v += 0.30 * gaussian_bump(ti, bt + 0.22, 0.045);               // T
            for (int n = 0; n < N; ++n)
                out.record.samples.at(i, n) += lead_gain[static_cast<std::size_t>(n)] * v;
        }
    }

    for (int i = 0; i < D; ++i)
        for (int n = 0; n < N; ++n)
            out.record.samples.at(i, n) += spec.noise_mv * rng.normal();
    return out;
}

} // namespace detail

struct SynthDataset {
    std::vector<SynthRecord> train;   // all normal
    std::vector<SynthRecord> test;    // mixed
    std::uint64_t seed = 0;
};

// Deterministic: identical (spec, seed) yields bit-identical output.
inline SynthDataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    SynthDataset out;
    out.seed = seed;
    for (int i = 0; i < spec.n_normal_train; ++i) {
        Rng rng(mix_seed(seed, 0x20, static_cast<std::uint64_t>(i)));
        out.train.push_back(detail::make_beat_train(spec, rng, false,
                                                    "synth_train_" + std::to_string(i)));
    }
    for (int i = 0; i < spec.n_normal_test; ++i) {
        Rng rng(mix_seed(seed, 0x21, static_cast<std::uint64_t>(i)));
        out.test.push_back(detail::make_beat_train(spec, rng, false,
                                                   "synth_test_norm_" + std::to_string(i)));
    }
    for (int i = 0; i < spec.n_abnormal_test; ++i) {
        Rng rng(mix_seed(seed, 0x22, static_cast<std::uint64_t>(i)));
        out.test.push_back(detail::make_beat_train(spec, rng, true,
                                                   "synth_test_abn_" + std::to_string(i)));
    }
    return out;
}

} // namespace tsrnet
