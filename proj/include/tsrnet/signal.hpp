#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "tsrnet/tensor.hpp"

namespace tsrnet {

enum class Label { normal, abnormal, unlabeled };

inline const char* label_name(Label l) {
    switch (l) {
        case Label::normal: return "normal";
        case Label::abnormal: return "abnormal";
        default: return "unlabeled";
    }
}

inline Label label_from_name(const std::string& s) {
    if (s == "normal") return Label::normal;
    if (s == "abnormal") return Label::abnormal;
    if (s == "unlabeled") return Label::unlabeled;
    throw std::invalid_argument("unknown label: " + s);
}

// Multi-lead ECG time series, samples in millivolts, shape [D x N]
// (D samples per lead, N leads).
struct EcgRecord {
    Tensor samples;              // [D x N]
    double sampling_rate_hz = 0.0;
    std::string record_id;
    Label label = Label::unlabeled;

    int num_samples() const { return samples.dim(0); }
    int num_leads() const { return samples.dim(1); }

    void validate() const {
        if (samples.rank() != 2)
            throw std::invalid_argument("EcgRecord: samples must be D x N");
        if (sampling_rate_hz <= 0.0)
            throw std::invalid_argument("EcgRecord: sampling rate must be positive");
        if (!samples.all_finite())
            throw std::invalid_argument("EcgRecord '" + record_id + "': non-finite sample");
    }
};

// Per-lead z-score with population variance. Constant leads map to zero
// via the epsilon guard.
inline EcgRecord zscore_normalize(const EcgRecord& record) {
    record.validate();
    const int D = record.num_samples();
    const int N = record.num_leads();
    if (D < 2) throw std::invalid_argument("zscore_normalize: need at least 2 samples per lead");

    constexpr double kEps = 1e-8;
    EcgRecord out = record;
    for (int lead = 0; lead < N; ++lead) {
        double mean = 0.0;
        for (int i = 0; i < D; ++i) mean += record.samples.at(i, lead);
        mean /= D;
        double var = 0.0;
        for (int i = 0; i < D; ++i) {
            double d = record.samples.at(i, lead) - mean;
            var += d * d;
        }
        var /= D;
        // Constant leads have zero residuals, so the epsilon maps them to zero.
        const double inv = 1.0 / (std::sqrt(var) + kEps);
        for (int i = 0; i < D; ++i)
            out.samples.at(i, lead) = (record.samples.at(i, lead) - mean) * inv;
    }
    return out;
}

} // namespace tsrnet
