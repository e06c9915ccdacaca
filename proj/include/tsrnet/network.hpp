#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/layers.hpp"
#include "tsrnet/rng.hpp"
#include "tsrnet/tensor.hpp"

namespace tsrnet {

enum class ModalityMode { combined, time_only, spec_only };

inline const char* modality_name(ModalityMode m) {
    switch (m) {
        case ModalityMode::time_only: return "time_only";
        case ModalityMode::spec_only: return "spec_only";
        default: return "combined";
    }
}

inline ModalityMode modality_from_name(const std::string& s) {
    if (s == "combined") return ModalityMode::combined;
    if (s == "time_only") return ModalityMode::time_only;
    if (s == "spec_only") return ModalityMode::spec_only;
    throw std::invalid_argument("unknown modality mode: " + s);
}

struct Conv1dBlockSpec {
    int channels = 0;
    int kernel = 3;
    int stride = 2;
};

struct Conv2dBlockSpec {
    int channels = 0;
    int kh = 3, kw = 3;
    int sh = 2, sw = 2;
};

// Five encoder blocks per branch, five decoder blocks; the 1D encoder pads
// (kernel/2), the 2D encoder never pads.
struct NetworkConfig {
    std::vector<Conv1dBlockSpec> enc1d;
    std::vector<Conv2dBlockSpec> enc2d;
    int d_model = 512;
    int n_heads = 8;
    std::vector<int> dec_channels;   // 4 intermediate widths; output is 2N
    std::vector<int> dec_kernels;    // 5
    std::vector<int> dec_strides;    // 5
    std::vector<int> dec_pads;       // 5
    double sigma_clamp = 10.0;
    ModalityMode mode = ModalityMode::combined;

    void validate() const {
        if (enc1d.size() != 5 || enc2d.size() != 5)
            throw std::invalid_argument("NetworkConfig: each encoder needs exactly 5 blocks");
        if (dec_channels.size() != 4 || dec_kernels.size() != 5 ||
            dec_strides.size() != 5 || dec_pads.size() != 5)
            throw std::invalid_argument("NetworkConfig: decoder needs exactly 5 blocks");
        if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
            throw std::invalid_argument("NetworkConfig: d_model must be divisible by n_heads");
        if (enc1d.back().channels != d_model)
            throw std::invalid_argument("NetworkConfig: last 1D encoder width must equal d_model");
        if (sigma_clamp <= 0.0)
            throw std::invalid_argument("NetworkConfig: sigma_clamp must be positive");
    }

    // Sized for the published ~4.4M parameter budget at D=1000, N=12,
    // n_fft=64, hop=8.
    static NetworkConfig defaults() {
        NetworkConfig c;
        c.enc1d = {{64, 7, 2}, {128, 5, 2}, {256, 5, 2}, {512, 3, 2}, {512, 3, 2}};
        c.enc2d = {{48, 3, 3, 2, 2}, {96, 3, 3, 2, 2}, {144, 3, 3, 2, 1},
                   {192, 3, 3, 1, 1}, {192, 1, 3, 1, 1}};
        c.d_model = 512;
        c.n_heads = 8;
        c.dec_channels = {512, 256, 128, 64};
        c.dec_kernels = {3, 3, 5, 5, 7};
        c.dec_strides = {2, 2, 2, 2, 2};
        c.dec_pads = {0, 0, 1, 1, 0};
        return c;
    }

    // Small enough for finite-difference gradient checks (D=64, n_fft=16, hop=8).
    static NetworkConfig tiny() {
        NetworkConfig c;
        c.enc1d = {{4, 3, 2}, {4, 3, 2}, {8, 3, 2}, {8, 3, 2}, {8, 3, 2}};
        c.enc2d = {{4, 3, 3, 2, 1}, {4, 3, 3, 2, 1}, {8, 1, 1, 1, 1},
                   {8, 1, 1, 1, 1}, {8, 1, 1, 1, 1}};
        c.d_model = 8;
        c.n_heads = 2;
        c.dec_channels = {8, 8, 8, 8};
        c.dec_kernels = {3, 3, 3, 3, 3};
        c.dec_strides = {2, 2, 2, 2, 2};
        c.dec_pads = {0, 0, 0, 0, 0};
        return c;
    }

    // A middle size for desk-scale experiments at D=1000 (~90k params).
    static NetworkConfig small() {
        NetworkConfig c;
        c.enc1d = {{8, 7, 2}, {16, 5, 2}, {24, 5, 2}, {32, 3, 2}, {32, 3, 2}};
        c.enc2d = {{8, 3, 3, 2, 2}, {16, 3, 3, 2, 2}, {24, 3, 3, 2, 1},
                   {32, 3, 3, 1, 1}, {32, 1, 3, 1, 1}};
        c.d_model = 32;
        c.n_heads = 4;
        c.dec_channels = {32, 32, 24, 16};
        c.dec_kernels = {3, 3, 5, 5, 7};
        c.dec_strides = {2, 2, 2, 2, 2};
        c.dec_pads = {0, 0, 1, 1, 0};
        return c;
    }
};

struct InputDims {
    int D = 0;   // samples per lead
    int N = 0;   // leads
    int H = 0;   // spectrogram bins
    int W = 0;   // spectrogram frames
};

struct Restoration {
    Tensor y;       // [B, N, D]
    Tensor sigma;   // [B, N, D]
};

// The restoration network: 1D encoder, 2D encoder with a frequency-collapse
// convolution, two passes through one shared self-attention layer with skip
// connections, token refinement, and a transposed-conv decoder emitting the
// reconstruction and its uncertainty.
class TsrNet {
public:
    TsrNet(NetworkConfig config, InputDims dims) : cfg_(std::move(config)), dims_(dims) {
        cfg_.validate();
        if (dims_.D <= 0 || dims_.N <= 0 || dims_.H <= 0 || dims_.W <= 0)
            throw std::invalid_argument("TsrNet: invalid input dims");
        build();
        register_params();
    }

    const NetworkConfig& config() const { return cfg_; }
    const InputDims& dims() const { return dims_; }
    int ecg_tokens() const { return l_ecg_; }
    int spec_tokens() const { return l_spec_; }

    void init_params(std::uint64_t seed) {
        Rng rng(mix_seed(seed, 0x11));
        for (auto& b : enc1d_) b.conv->init(rng);
        for (auto& b : enc2d_) b.conv->init(rng);
        collapse_->init(rng);
        attention_->init(rng);
        refine_->init(rng);
        for (auto& b : dec_) b.conv->init(rng);
        if (const_ecg_) {
            init_uniform_fan_in(*const_ecg_, cfg_.d_model, rng);
            init_uniform_fan_in(*const_spec_, cfg_.d_model, rng);
        }
    }

    // ecg: [B, N, D] masked time series; spec: [B, N, H, W] masked spectrogram.
    Restoration forward(const Tensor& ecg, const Tensor& spec, bool training = false) {
        check_inputs(ecg, spec);
        const int B = ecg.dim(0);

        Tensor f_ecg;
        if (cfg_.mode == ModalityMode::spec_only) {
            f_ecg = broadcast_tokens(*const_ecg_, B);
        } else {
            Tensor t = ecg;
            for (auto& b : enc1d_) {
                t = b.conv->forward(t, training);
                t = b.act->forward(t, training);
                t = b.norm->forward(t, training);
            }
            f_ecg = std::move(t);
        }

        Tensor f_spec;
        if (cfg_.mode == ModalityMode::time_only) {
            f_spec = broadcast_tokens(*const_spec_, B);
        } else {
            Tensor t = spec;
            for (auto& b : enc2d_) {
                t = b.conv->forward(t, training);
                t = b.act->forward(t, training);
                t = b.norm->forward(t, training);
            }
            // [B, C, Hf, Wf] -> [B, C*Hf, Wf]; the time axis survives.
            t = t.reshaped({B, collapse_in_, l_spec_});
            f_spec = collapse_->forward(t, training);
        }

        // Token-axis concatenation, then two skip-connected passes through the
        // single shared attention layer.
        Tensor cat({B, cfg_.d_model, l_ecg_ + l_spec_});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < cfg_.d_model; ++c) {
                for (int l = 0; l < l_ecg_; ++l) cat.at(b, c, l) = f_ecg.at(b, c, l);
                for (int l = 0; l < l_spec_; ++l) cat.at(b, c, l_ecg_ + l) = f_spec.at(b, c, l);
            }

        Tensor t1 = transpose_cl(cat);
        Tensor a1 = attention_->forward(t1, training);
        add_inplace(a1, t1);
        Tensor a2 = attention_->forward(a1, training);
        add_inplace(a2, a1);
        Tensor fused = transpose_back_bl(a2);   // back to [B, d, L_ecg + L_spec]

        fused = refine_->forward(fused, training);
        fused = refine_norm_->forward(fused, training);
        fused = refine_act_->forward(fused, training);

        Tensor d = fused;
        for (std::size_t i = 0; i < dec_.size(); ++i) {
            d = dec_[i].conv->forward(d, training);
            if (dec_[i].act) {
                d = dec_[i].act->forward(d, training);
                d = dec_[i].norm->forward(d, training);
            }
        }
        dec_out_len_ = d.dim(2);

        Tensor fitted = crop_or_pad(d, dims_.D);
        Restoration out;
        out.y = Tensor({B, dims_.N, dims_.D});
        out.sigma = Tensor({B, dims_.N, dims_.D});
        clamp_hit_.assign(out.sigma.size(), 0);
        const double clamp = cfg_.sigma_clamp;
        for (int b = 0; b < B; ++b)
            for (int n = 0; n < dims_.N; ++n)
                for (int i = 0; i < dims_.D; ++i) {
                    out.y.at(b, n, i) = fitted.at(b, n, i);
                    double s = fitted.at(b, dims_.N + n, i);
                    const std::size_t flat =
                        (static_cast<std::size_t>(b) * dims_.N + n) * dims_.D + i;
                    if (s > clamp) { s = clamp; clamp_hit_[flat] = 1; }
                    else if (s < -clamp) { s = -clamp; clamp_hit_[flat] = 1; }
                    out.sigma.at(b, n, i) = s;
                }
        if (!out.y.all_finite() || !out.sigma.all_finite())
            throw std::runtime_error("TsrNet::forward: non-finite activations");
        return out;
    }

    // Gradients of a scalar loss w.r.t. (y, sigma); accumulates parameter
    // gradients. Must follow a training-mode forward.
    void backward(const Tensor& g_y, const Tensor& g_sigma) {
        const int B = g_y.dim(0);
        Tensor g_fit({B, 2 * dims_.N, dims_.D});
        for (int b = 0; b < B; ++b)
            for (int n = 0; n < dims_.N; ++n)
                for (int i = 0; i < dims_.D; ++i) {
                    g_fit.at(b, n, i) = g_y.at(b, n, i);
                    const std::size_t flat =
                        (static_cast<std::size_t>(b) * dims_.N + n) * dims_.D + i;
                    g_fit.at(b, dims_.N + n, i) = clamp_hit_[flat] ? 0.0 : g_sigma.at(b, n, i);
                }

        Tensor g = uncrop(g_fit, dec_out_len_);
        for (std::size_t i = dec_.size(); i-- > 0;) {
            if (dec_[i].act) {
                g = dec_[i].norm->backward(g);
                g = dec_[i].act->backward(g);
            }
            g = dec_[i].conv->backward(g);
        }

        g = refine_act_->backward(g);
        g = refine_norm_->backward(g);
        g = refine_->backward(g);

        Tensor ga2 = transpose_cl(g);   // to [B, L, d]
        Tensor g_att2 = attention_->backward(ga2);
        add_inplace(g_att2, ga2);       // skip connection
        Tensor g_att1 = attention_->backward(g_att2);
        add_inplace(g_att1, g_att2);
        Tensor g_cat = transpose_back_bl(g_att1);

        const int L = l_ecg_ + l_spec_;
        Tensor g_ecg_tok({B, cfg_.d_model, l_ecg_});
        Tensor g_spec_tok({B, cfg_.d_model, l_spec_});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < cfg_.d_model; ++c) {
                for (int l = 0; l < l_ecg_; ++l) g_ecg_tok.at(b, c, l) = g_cat.at(b, c, l);
                for (int l = 0; l < l_spec_; ++l)
                    g_spec_tok.at(b, c, l) = g_cat.at(b, c, l_ecg_ + l);
            }
        (void)L;

        if (cfg_.mode == ModalityMode::time_only) {
            accumulate_broadcast(*g_const_spec_, g_spec_tok);
        } else {
            Tensor gs = collapse_->backward(g_spec_tok);
            gs = gs.reshaped({B, enc2d_c_, enc2d_h_, l_spec_});
            for (std::size_t i = enc2d_.size(); i-- > 0;) {
                gs = enc2d_[i].norm->backward(gs);
                gs = enc2d_[i].act->backward(gs);
                gs = enc2d_[i].conv->backward(gs);
            }
        }

        if (cfg_.mode == ModalityMode::spec_only) {
            accumulate_broadcast(*g_const_ecg_, g_ecg_tok);
        } else {
            Tensor ge = std::move(g_ecg_tok);
            for (std::size_t i = enc1d_.size(); i-- > 0;) {
                ge = enc1d_[i].norm->backward(ge);
                ge = enc1d_[i].act->backward(ge);
                ge = enc1d_[i].conv->backward(ge);
            }
        }
    }

    std::vector<ParamRef>& params() { return params_; }

    void zero_grad() {
        for (auto& p : params_)
            if (p.grad) p.grad->zero();
    }

    // Learnable scalars only; the shared attention layer is one storage and
    // therefore counted once.
    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : params_)
            if (p.learnable) n += p.value->size();
        return n;
    }

private:
    struct Block1d {
        std::unique_ptr<Conv1d> conv;
        std::unique_ptr<LeakyRelu> act;
        std::unique_ptr<BatchNorm> norm;
    };
    struct Block2d {
        std::unique_ptr<Conv2d> conv;
        std::unique_ptr<LeakyRelu> act;
        std::unique_ptr<BatchNorm> norm;
    };
    struct BlockDec {
        std::unique_ptr<ConvTranspose1d> conv;
        std::unique_ptr<LeakyRelu> act;   // null on the output layer
        std::unique_ptr<BatchNorm> norm;
    };

    void build() {
        int cin = dims_.N;
        int len = dims_.D;
        for (const auto& s : cfg_.enc1d) {
            const int pad = s.kernel / 2;
            Block1d b;
            b.conv = std::make_unique<Conv1d>(cin, s.channels, s.kernel, s.stride, pad);
            b.act = std::make_unique<LeakyRelu>();
            b.norm = std::make_unique<BatchNorm>(s.channels);
            len = (len + 2 * pad - s.kernel) / s.stride + 1;
            if (len <= 0) throw std::invalid_argument("TsrNet: 1D encoder collapses the signal");
            cin = s.channels;
            enc1d_.push_back(std::move(b));
        }
        l_ecg_ = len;

        int c2 = dims_.N, h = dims_.H, w = dims_.W;
        for (const auto& s : cfg_.enc2d) {
            Block2d b;
            b.conv = std::make_unique<Conv2d>(c2, s.channels, s.kh, s.kw, s.sh, s.sw);
            b.act = std::make_unique<LeakyRelu>();
            b.norm = std::make_unique<BatchNorm>(s.channels);
            h = (h - s.kh) / s.sh + 1;
            w = (w - s.kw) / s.sw + 1;
            if (h <= 0 || w <= 0)
                throw std::invalid_argument("TsrNet: 2D encoder kernel does not fit");
            c2 = s.channels;
            enc2d_.push_back(std::move(b));
        }
        l_spec_ = w;
        collapse_in_ = c2 * h;
        enc2d_c_ = c2;
        enc2d_h_ = h;
        collapse_ = std::make_unique<Conv1d>(collapse_in_, cfg_.d_model, 1, 1, 0);

        attention_ = std::make_unique<MultiheadSelfAttention>(cfg_.d_model, cfg_.n_heads);
        refine_ = std::make_unique<TokenLinear>(l_ecg_ + l_spec_, l_ecg_);
        refine_norm_ = std::make_unique<LayerNormChannels>(cfg_.d_model);
        refine_act_ = std::make_unique<Relu>();

        int dc = cfg_.d_model;
        int dlen = l_ecg_;
        for (int i = 0; i < 5; ++i) {
            const bool last = (i == 4);
            const int cout = last ? 2 * dims_.N : cfg_.dec_channels[static_cast<std::size_t>(i)];
            BlockDec b;
            b.conv = std::make_unique<ConvTranspose1d>(dc, cout, cfg_.dec_kernels[static_cast<std::size_t>(i)],
                                                       cfg_.dec_strides[static_cast<std::size_t>(i)],
                                                       cfg_.dec_pads[static_cast<std::size_t>(i)]);
            if (!last) {
                b.act = std::make_unique<LeakyRelu>();
                b.norm = std::make_unique<BatchNorm>(cout);
            }
            dlen = (dlen - 1) * cfg_.dec_strides[static_cast<std::size_t>(i)] +
                   cfg_.dec_kernels[static_cast<std::size_t>(i)] -
                   2 * cfg_.dec_pads[static_cast<std::size_t>(i)];
            dc = cout;
            dec_.push_back(std::move(b));
        }

        if (cfg_.mode != ModalityMode::combined) {
            const_ecg_ = std::make_unique<Tensor>(Tensor({cfg_.d_model, l_ecg_}));
            const_spec_ = std::make_unique<Tensor>(Tensor({cfg_.d_model, l_spec_}));
            g_const_ecg_ = std::make_unique<Tensor>(Tensor({cfg_.d_model, l_ecg_}));
            g_const_spec_ = std::make_unique<Tensor>(Tensor({cfg_.d_model, l_spec_}));
        }
    }

    void register_params() {
        for (std::size_t i = 0; i < enc1d_.size(); ++i) {
            const std::string p = "enc1d." + std::to_string(i);
            enc1d_[i].conv->collect(p + ".conv", params_);
            enc1d_[i].norm->collect(p + ".bn", params_);
        }
        for (std::size_t i = 0; i < enc2d_.size(); ++i) {
            const std::string p = "enc2d." + std::to_string(i);
            enc2d_[i].conv->collect(p + ".conv", params_);
            enc2d_[i].norm->collect(p + ".bn", params_);
        }
        collapse_->collect("collapse", params_);
        attention_->collect("fusion.attention", params_);
        refine_->collect("fusion.refine", params_);
        refine_norm_->collect("fusion.norm", params_);
        for (std::size_t i = 0; i < dec_.size(); ++i) {
            const std::string p = "decoder." + std::to_string(i);
            dec_[i].conv->collect(p + ".conv", params_);
            if (dec_[i].norm) dec_[i].norm->collect(p + ".bn", params_);
        }
        if (const_ecg_) {
            params_.push_back({"fusion.const_ecg", const_ecg_.get(), g_const_ecg_.get(), true});
            params_.push_back({"fusion.const_spec", const_spec_.get(), g_const_spec_.get(), true});
        }
    }

    void check_inputs(const Tensor& ecg, const Tensor& spec) const {
        if (ecg.rank() != 3 || ecg.dim(1) != dims_.N || ecg.dim(2) != dims_.D)
            throw std::invalid_argument("TsrNet: ecg input must be [B x " +
                                        std::to_string(dims_.N) + " x " + std::to_string(dims_.D) + "]");
        if (spec.rank() != 4 || spec.dim(0) != ecg.dim(0) || spec.dim(1) != dims_.N ||
            spec.dim(2) != dims_.H || spec.dim(3) != dims_.W)
            throw std::invalid_argument("TsrNet: spectrogram input shape mismatch");
        if (!ecg.all_finite() || !spec.all_finite())
            throw std::invalid_argument("TsrNet: non-finite input");
    }

    static void add_inplace(Tensor& dst, const Tensor& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    // [B, L, C] -> [B, C, L]
    static Tensor transpose_back_bl(const Tensor& x) {
        const int B = x.dim(0), L = x.dim(1), C = x.dim(2);
        Tensor y({B, C, L});
        for (int b = 0; b < B; ++b)
            for (int l = 0; l < L; ++l)
                for (int c = 0; c < C; ++c) y.at(b, c, l) = x.at(b, l, c);
        return y;
    }

    Tensor broadcast_tokens(const Tensor& tok, int B) const {
        Tensor out({B, tok.dim(0), tok.dim(1)});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < tok.dim(0); ++c)
                for (int l = 0; l < tok.dim(1); ++l) out.at(b, c, l) = tok.at(c, l);
        return out;
    }

    static void accumulate_broadcast(Tensor& grad, const Tensor& g_batch) {
        const int B = g_batch.dim(0);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < g_batch.dim(1); ++c)
                for (int l = 0; l < g_batch.dim(2); ++l) grad.at(c, l) += g_batch.at(b, c, l);
    }

    // Center-crop (or zero-pad) the decoder output to D samples.
    Tensor crop_or_pad(const Tensor& x, int target) {
        const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
        crop_offset_ = (L - target) / 2;
        Tensor y({B, C, target});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < target; ++i) {
                    const int src = i + crop_offset_;
                    y.at(b, c, i) = (src >= 0 && src < L) ? x.at(b, c, src) : 0.0;
                }
        return y;
    }

    Tensor uncrop(const Tensor& g, int L) const {
        const int B = g.dim(0), C = g.dim(1), target = g.dim(2);
        Tensor out({B, C, L});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < target; ++i) {
                    const int src = i + crop_offset_;
                    if (src >= 0 && src < L) out.at(b, c, src) = g.at(b, c, i);
                }
        return out;
    }

    NetworkConfig cfg_;
    InputDims dims_;
    int l_ecg_ = 0, l_spec_ = 0, collapse_in_ = 0;
    int enc2d_c_ = 0, enc2d_h_ = 0;
    int dec_out_len_ = 0, crop_offset_ = 0;
    std::vector<char> clamp_hit_;

    std::vector<Block1d> enc1d_;
    std::vector<Block2d> enc2d_;
    std::unique_ptr<Conv1d> collapse_;
    std::unique_ptr<MultiheadSelfAttention> attention_;
    std::unique_ptr<TokenLinear> refine_;
    std::unique_ptr<LayerNormChannels> refine_norm_;
    std::unique_ptr<Relu> refine_act_;
    std::vector<BlockDec> dec_;
    std::unique_ptr<Tensor> const_ecg_, const_spec_, g_const_ecg_, g_const_spec_;

    std::vector<ParamRef> params_;
};

} // namespace tsrnet
