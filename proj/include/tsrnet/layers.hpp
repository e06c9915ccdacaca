#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/rng.hpp"
#include "tsrnet/tensor.hpp"

namespace tsrnet {

// A named view into a layer's parameter storage. Buffers (batch-norm running
// statistics) travel with checkpoints but are not learnable.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool learnable = true;
};

inline void init_uniform_fan_in(Tensor& t, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// Conv1d with symmetric zero padding.
// ---------------------------------------------------------------------------
class Conv1d {
public:
    Conv1d(int cin, int cout, int k, int stride, int pad)
        : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
          w_({cout, cin, k}), b_({cout}), gw_({cout, cin, k}), gb_({cout}) {}

    void init(Rng& rng) {
        init_uniform_fan_in(w_, cin_ * k_, rng);
        init_uniform_fan_in(b_, cin_ * k_, rng);
    }

    int out_len(int L) const { return (L + 2 * pad_ - k_) / stride_ + 1; }

    Tensor forward(const Tensor& x, bool /*training*/) {
        const int B = x.dim(0), L = x.dim(2);
        if (x.dim(1) != cin_) throw std::invalid_argument("Conv1d: channel mismatch");
        const int Lo = out_len(L);
        if (Lo <= 0) throw std::invalid_argument("Conv1d: input too short");
        x_ = x;
        Tensor y({B, cout_, Lo});
        for (int b = 0; b < B; ++b)
            for (int co = 0; co < cout_; ++co) {
                double* yp = &y.at(b, co, 0);
                for (int lo = 0; lo < Lo; ++lo) yp[lo] = b_[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin_; ++ci) {
                    const double* xp = &x.at(b, ci, 0);
                    const double* wp = &w_.at(co, ci, 0);
                    for (int kk = 0; kk < k_; ++kk) {
                        const double wv = wp[kk];
                        if (wv == 0.0) continue;
                        for (int lo = 0; lo < Lo; ++lo) {
                            const int li = lo * stride_ + kk - pad_;
                            if (li >= 0 && li < L) yp[lo] += wv * xp[li];
                        }
                    }
                }
            }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = x_.dim(0), L = x_.dim(2), Lo = gy.dim(2);
        Tensor gx(x_.shape());
        for (int b = 0; b < B; ++b)
            for (int co = 0; co < cout_; ++co) {
                const double* gp = &gy.at(b, co, 0);
                double gb_acc = 0.0;
                for (int lo = 0; lo < Lo; ++lo) gb_acc += gp[lo];
                gb_[static_cast<std::size_t>(co)] += gb_acc;
                for (int ci = 0; ci < cin_; ++ci) {
                    const double* xp = &x_.at(b, ci, 0);
                    double* gxp = &gx.at(b, ci, 0);
                    const double* wp = &w_.at(co, ci, 0);
                    double* gwp = &gw_.at(co, ci, 0);
                    for (int kk = 0; kk < k_; ++kk) {
                        const double wv = wp[kk];
                        double gw_acc = 0.0;
                        for (int lo = 0; lo < Lo; ++lo) {
                            const int li = lo * stride_ + kk - pad_;
                            if (li < 0 || li >= L) continue;
                            gw_acc += gp[lo] * xp[li];
                            gxp[li] += gp[lo] * wv;
                        }
                        gwp[kk] += gw_acc;
                    }
                }
            }
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".weight", &w_, &gw_, true});
        out.push_back({prefix + ".bias", &b_, &gb_, true});
    }

private:
    int cin_, cout_, k_, stride_, pad_;
    Tensor w_, b_, gw_, gb_;
    Tensor x_;
};

// ---------------------------------------------------------------------------
// Conv2d, no padding (the 2D encoder never pads).
// ---------------------------------------------------------------------------
class Conv2d {
public:
    Conv2d(int cin, int cout, int kh, int kw, int sh, int sw)
        : cin_(cin), cout_(cout), kh_(kh), kw_(kw), sh_(sh), sw_(sw),
          w_({cout, cin, kh, kw}), b_({cout}), gw_({cout, cin, kh, kw}), gb_({cout}) {}

    void init(Rng& rng) {
        init_uniform_fan_in(w_, cin_ * kh_ * kw_, rng);
        init_uniform_fan_in(b_, cin_ * kh_ * kw_, rng);
    }

    int out_h(int H) const { return (H - kh_) / sh_ + 1; }
    int out_w(int W) const { return (W - kw_) / sw_ + 1; }

    Tensor forward(const Tensor& x, bool /*training*/) {
        const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
        if (x.dim(1) != cin_) throw std::invalid_argument("Conv2d: channel mismatch");
        const int Ho = out_h(H), Wo = out_w(W);
        if (Ho <= 0 || Wo <= 0)
            throw std::invalid_argument("Conv2d: kernel does not fit input " +
                                        std::to_string(H) + "x" + std::to_string(W));
        x_ = x;
        Tensor y({B, cout_, Ho, Wo});
        for (int b = 0; b < B; ++b)
            for (int co = 0; co < cout_; ++co)
                for (int ho = 0; ho < Ho; ++ho)
                    for (int wo = 0; wo < Wo; ++wo) {
                        double acc = b_[static_cast<std::size_t>(co)];
                        for (int ci = 0; ci < cin_; ++ci) {
                            const double* xp = &x.at(b, ci, ho * sh_, wo * sw_);
                            const double* wp = &w_.at(co, ci, 0, 0);
                            for (int ih = 0; ih < kh_; ++ih)
                                for (int iw = 0; iw < kw_; ++iw)
                                    acc += wp[ih * kw_ + iw] * xp[ih * W + iw];
                        }
                        y.at(b, co, ho, wo) = acc;
                    }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = x_.dim(0), H = x_.dim(2), W = x_.dim(3);
        const int Ho = gy.dim(2), Wo = gy.dim(3);
        Tensor gx(x_.shape());
        for (int b = 0; b < B; ++b)
            for (int co = 0; co < cout_; ++co)
                for (int ho = 0; ho < Ho; ++ho)
                    for (int wo = 0; wo < Wo; ++wo) {
                        const double g = gy.at(b, co, ho, wo);
                        gb_[static_cast<std::size_t>(co)] += g;
                        for (int ci = 0; ci < cin_; ++ci) {
                            const double* xp = &x_.at(b, ci, ho * sh_, wo * sw_);
                            double* gxp = &gx.at(b, ci, ho * sh_, wo * sw_);
                            const double* wp = &w_.at(co, ci, 0, 0);
                            double* gwp = &gw_.at(co, ci, 0, 0);
                            for (int ih = 0; ih < kh_; ++ih)
                                for (int iw = 0; iw < kw_; ++iw) {
                                    gwp[ih * kw_ + iw] += g * xp[ih * W + iw];
                                    gxp[ih * W + iw] += g * wp[ih * kw_ + iw];
                                }
                        }
                    }
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".weight", &w_, &gw_, true});
        out.push_back({prefix + ".bias", &b_, &gb_, true});
    }

private:
    int cin_, cout_, kh_, kw_, sh_, sw_;
    Tensor w_, b_, gw_, gb_;
    Tensor x_;
};

// ---------------------------------------------------------------------------
// ConvTranspose1d, stride-2 upsampling in the decoder.
// ---------------------------------------------------------------------------
class ConvTranspose1d {
public:
    ConvTranspose1d(int cin, int cout, int k, int stride, int pad)
        : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
          w_({cin, cout, k}), b_({cout}), gw_({cin, cout, k}), gb_({cout}) {}

    void init(Rng& rng) {
        init_uniform_fan_in(w_, cin_ * k_, rng);
        init_uniform_fan_in(b_, cin_ * k_, rng);
    }

    int out_len(int L) const { return (L - 1) * stride_ + k_ - 2 * pad_; }

    Tensor forward(const Tensor& x, bool /*training*/) {
        const int B = x.dim(0), L = x.dim(2);
        if (x.dim(1) != cin_) throw std::invalid_argument("ConvTranspose1d: channel mismatch");
        const int Lo = out_len(L);
        if (Lo <= 0) throw std::invalid_argument("ConvTranspose1d: empty output");
        x_ = x;
        Tensor y({B, cout_, Lo});
        for (int b = 0; b < B; ++b) {
            for (int co = 0; co < cout_; ++co) {
                double* yp = &y.at(b, co, 0);
                for (int lo = 0; lo < Lo; ++lo) yp[lo] = b_[static_cast<std::size_t>(co)];
            }
            for (int ci = 0; ci < cin_; ++ci) {
                const double* xp = &x.at(b, ci, 0);
                for (int co = 0; co < cout_; ++co) {
                    const double* wp = &w_.at(ci, co, 0);
                    double* yp = &y.at(b, co, 0);
                    for (int l = 0; l < L; ++l) {
                        const double xv = xp[l];
                        const int base = l * stride_ - pad_;
                        for (int kk = 0; kk < k_; ++kk) {
                            const int lo = base + kk;
                            if (lo >= 0 && lo < Lo) yp[lo] += xv * wp[kk];
                        }
                    }
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = x_.dim(0), L = x_.dim(2), Lo = gy.dim(2);
        Tensor gx(x_.shape());
        for (int b = 0; b < B; ++b) {
            for (int co = 0; co < cout_; ++co) {
                const double* gp = &gy.at(b, co, 0);
                double acc = 0.0;
                for (int lo = 0; lo < Lo; ++lo) acc += gp[lo];
                gb_[static_cast<std::size_t>(co)] += acc;
            }
            for (int ci = 0; ci < cin_; ++ci) {
                const double* xp = &x_.at(b, ci, 0);
                double* gxp = &gx.at(b, ci, 0);
                for (int co = 0; co < cout_; ++co) {
                    const double* wp = &w_.at(ci, co, 0);
                    double* gwp = &gw_.at(ci, co, 0);
                    const double* gp = &gy.at(b, co, 0);
                    for (int l = 0; l < L; ++l) {
                        const int base = l * stride_ - pad_;
                        double gx_acc = 0.0;
                        for (int kk = 0; kk < k_; ++kk) {
                            const int lo = base + kk;
                            if (lo < 0 || lo >= Lo) continue;
                            gx_acc += gp[lo] * wp[kk];
                            gwp[kk] += gp[lo] * xp[l];
                        }
                        gxp[l] += gx_acc;
                    }
                }
            }
        }
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".weight", &w_, &gw_, true});
        out.push_back({prefix + ".bias", &b_, &gb_, true});
    }

private:
    int cin_, cout_, k_, stride_, pad_;
    Tensor w_, b_, gw_, gb_;
    Tensor x_;
};

// ---------------------------------------------------------------------------
// BatchNorm over channel axis 1 of a rank-3 or rank-4 tensor.
// ---------------------------------------------------------------------------
class BatchNorm {
public:
    explicit BatchNorm(int channels, double eps = 1e-5, double momentum = 0.1)
        : c_(channels), eps_(eps), momentum_(momentum),
          gamma_({channels}), beta_({channels}), ggamma_({channels}), gbeta_({channels}),
          run_mean_({channels}), run_var_({channels}) {
        gamma_.fill(1.0);
        run_var_.fill(1.0);
    }

    Tensor forward(const Tensor& x, bool training) {
        if (x.dim(1) != c_) throw std::invalid_argument("BatchNorm: channel mismatch");
        const std::size_t spatial = x.size() / (static_cast<std::size_t>(x.dim(0)) * c_);
        const std::size_t group = static_cast<std::size_t>(x.dim(0)) * spatial;
        training_ = training;
        xhat_ = Tensor(x.shape());
        inv_std_.assign(static_cast<std::size_t>(c_), 0.0);
        Tensor y(x.shape());
        for (int ch = 0; ch < c_; ++ch) {
            double mean, var;
            if (training) {
                double s = 0.0;
                for_channel(x, ch, [&](double v, std::size_t) { s += v; });
                mean = s / static_cast<double>(group);
                double v2 = 0.0;
                for_channel(x, ch, [&](double v, std::size_t) { double d = v - mean; v2 += d * d; });
                var = v2 / static_cast<double>(group);
                run_mean_[static_cast<std::size_t>(ch)] =
                    (1.0 - momentum_) * run_mean_[static_cast<std::size_t>(ch)] + momentum_ * mean;
                run_var_[static_cast<std::size_t>(ch)] =
                    (1.0 - momentum_) * run_var_[static_cast<std::size_t>(ch)] + momentum_ * var;
            } else {
                mean = run_mean_[static_cast<std::size_t>(ch)];
                var = run_var_[static_cast<std::size_t>(ch)];
            }
            const double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[static_cast<std::size_t>(ch)] = inv;
            const double g = gamma_[static_cast<std::size_t>(ch)];
            const double be = beta_[static_cast<std::size_t>(ch)];
            for_channel(x, ch, [&](double v, std::size_t i) {
                const double xh = (v - mean) * inv;
                xhat_[i] = xh;
                y[i] = g * xh + be;
            });
        }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const std::size_t group = gy.size() / static_cast<std::size_t>(c_);
        Tensor gx(gy.shape());
        for (int ch = 0; ch < c_; ++ch) {
            const double g = gamma_[static_cast<std::size_t>(ch)];
            const double inv = inv_std_[static_cast<std::size_t>(ch)];
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for_channel(gy, ch, [&](double v, std::size_t i) {
                sum_gy += v;
                sum_gy_xhat += v * xhat_[i];
            });
            gbeta_[static_cast<std::size_t>(ch)] += sum_gy;
            ggamma_[static_cast<std::size_t>(ch)] += sum_gy_xhat;
            if (training_) {
                const double mg = sum_gy / static_cast<double>(group);
                const double mgx = sum_gy_xhat / static_cast<double>(group);
                for_channel(gy, ch, [&](double v, std::size_t i) {
                    gx[i] = g * inv * (v - mg - xhat_[i] * mgx);
                });
            } else {
                for_channel(gy, ch, [&](double v, std::size_t i) { gx[i] = g * inv * v; });
            }
        }
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".gamma", &gamma_, &ggamma_, true});
        out.push_back({prefix + ".beta", &beta_, &gbeta_, true});
        out.push_back({prefix + ".running_mean", &run_mean_, nullptr, false});
        out.push_back({prefix + ".running_var", &run_var_, nullptr, false});
    }

private:
    template <typename F>
    void for_channel(const Tensor& t, int ch, F&& f) const {
        const int B = t.dim(0);
        const std::size_t spatial = t.size() / (static_cast<std::size_t>(B) * c_);
        for (int b = 0; b < B; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * c_ + ch) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) f(t[base + s], base + s);
        }
    }

    int c_;
    double eps_, momentum_;
    Tensor gamma_, beta_, ggamma_, gbeta_, run_mean_, run_var_;
    Tensor xhat_;
    std::vector<double> inv_std_;
    bool training_ = true;
};

// ---------------------------------------------------------------------------
// Pointwise activations.
// ---------------------------------------------------------------------------
class LeakyRelu {
public:
    explicit LeakyRelu(double slope = 0.01) : slope_(slope) {}

    Tensor forward(const Tensor& x, bool /*training*/) {
        x_ = x;
        Tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i)
            y[i] = x[i] > 0.0 ? x[i] : slope_ * x[i];
        return y;
    }

    Tensor backward(const Tensor& gy) {
        Tensor gx(gy.shape());
        for (std::size_t i = 0; i < gy.size(); ++i)
            gx[i] = x_[i] > 0.0 ? gy[i] : slope_ * gy[i];
        return gx;
    }

private:
    double slope_;
    Tensor x_;
};

class Relu {
public:
    Tensor forward(const Tensor& x, bool /*training*/) {
        x_ = x;
        Tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
        return y;
    }

    Tensor backward(const Tensor& gy) {
        Tensor gx(gy.shape());
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = x_[i] > 0.0 ? gy[i] : 0.0;
        return gx;
    }

private:
    Tensor x_;
};

// ---------------------------------------------------------------------------
// LayerNorm over the channel axis of [B, C, L] (per (b, l) group).
// ---------------------------------------------------------------------------
class LayerNormChannels {
public:
    explicit LayerNormChannels(int channels, double eps = 1e-5)
        : c_(channels), eps_(eps), gamma_({channels}), beta_({channels}),
          ggamma_({channels}), gbeta_({channels}) {
        gamma_.fill(1.0);
    }

    Tensor forward(const Tensor& x, bool /*training*/) {
        if (x.dim(1) != c_) throw std::invalid_argument("LayerNorm: channel mismatch");
        const int B = x.dim(0), L = x.dim(2);
        xhat_ = Tensor(x.shape());
        inv_std_ = Tensor({B, L});
        Tensor y(x.shape());
        for (int b = 0; b < B; ++b)
            for (int l = 0; l < L; ++l) {
                double mean = 0.0;
                for (int ch = 0; ch < c_; ++ch) mean += x.at(b, ch, l);
                mean /= c_;
                double var = 0.0;
                for (int ch = 0; ch < c_; ++ch) {
                    const double d = x.at(b, ch, l) - mean;
                    var += d * d;
                }
                var /= c_;
                const double inv = 1.0 / std::sqrt(var + eps_);
                inv_std_.at(b, l) = inv;
                for (int ch = 0; ch < c_; ++ch) {
                    const double xh = (x.at(b, ch, l) - mean) * inv;
                    xhat_.at(b, ch, l) = xh;
                    y.at(b, ch, l) = gamma_[static_cast<std::size_t>(ch)] * xh +
                                     beta_[static_cast<std::size_t>(ch)];
                }
            }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = gy.dim(0), L = gy.dim(2);
        Tensor gx(gy.shape());
        for (int b = 0; b < B; ++b)
            for (int l = 0; l < L; ++l) {
                const double inv = inv_std_.at(b, l);
                double sum_g = 0.0, sum_gx = 0.0;
                for (int ch = 0; ch < c_; ++ch) {
                    const double gyv = gy.at(b, ch, l) * gamma_[static_cast<std::size_t>(ch)];
                    sum_g += gyv;
                    sum_gx += gyv * xhat_.at(b, ch, l);
                }
                for (int ch = 0; ch < c_; ++ch) {
                    const double gyv = gy.at(b, ch, l);
                    gbeta_[static_cast<std::size_t>(ch)] += gyv;
                    ggamma_[static_cast<std::size_t>(ch)] += gyv * xhat_.at(b, ch, l);
                    const double gyg = gyv * gamma_[static_cast<std::size_t>(ch)];
                    gx.at(b, ch, l) = inv * (gyg - sum_g / c_ - xhat_.at(b, ch, l) * sum_gx / c_);
                }
            }
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".gamma", &gamma_, &ggamma_, true});
        out.push_back({prefix + ".beta", &beta_, &gbeta_, true});
    }

private:
    int c_;
    double eps_;
    Tensor gamma_, beta_, ggamma_, gbeta_;
    Tensor xhat_, inv_std_;
};

// ---------------------------------------------------------------------------
// Linear resampling along the token axis: [B, C, Lin] -> [B, C, Lout] with a
// weight shared across channels. This is the fusion refinement map.
// ---------------------------------------------------------------------------
class TokenLinear {
public:
    TokenLinear(int l_in, int l_out)
        : lin_(l_in), lout_(l_out), w_({l_out, l_in}), b_({l_out}),
          gw_({l_out, l_in}), gb_({l_out}) {}

    void init(Rng& rng) {
        init_uniform_fan_in(w_, lin_, rng);
        init_uniform_fan_in(b_, lin_, rng);
    }

    Tensor forward(const Tensor& x, bool /*training*/) {
        if (x.dim(2) != lin_) throw std::invalid_argument("TokenLinear: length mismatch");
        const int B = x.dim(0), C = x.dim(1);
        x_ = x;
        Tensor y({B, C, lout_});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const double* xp = &x.at(b, c, 0);
                double* yp = &y.at(b, c, 0);
                for (int lo = 0; lo < lout_; ++lo) {
                    const double* wp = &w_.at(lo, 0);
                    double acc = b_[static_cast<std::size_t>(lo)];
                    for (int li = 0; li < lin_; ++li) acc += wp[li] * xp[li];
                    yp[lo] = acc;
                }
            }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = x_.dim(0), C = x_.dim(1);
        Tensor gx(x_.shape());
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const double* xp = &x_.at(b, c, 0);
                double* gxp = &gx.at(b, c, 0);
                const double* gp = &gy.at(b, c, 0);
                for (int lo = 0; lo < lout_; ++lo) {
                    const double g = gp[lo];
                    gb_[static_cast<std::size_t>(lo)] += g;
                    const double* wp = &w_.at(lo, 0);
                    double* gwp = &gw_.at(lo, 0);
                    for (int li = 0; li < lin_; ++li) {
                        gwp[li] += g * xp[li];
                        gxp[li] += g * wp[li];
                    }
                }
            }
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".weight", &w_, &gw_, true});
        out.push_back({prefix + ".bias", &b_, &gb_, true});
    }

private:
    int lin_, lout_;
    Tensor w_, b_, gw_, gb_;
    Tensor x_;
};

// ---------------------------------------------------------------------------
// Multi-head self-attention over [B, L, D]. One parameter set; the fusion
// module invokes it twice, so caches form a stack popped in reverse order.
// ---------------------------------------------------------------------------
class MultiheadSelfAttention {
public:
    MultiheadSelfAttention(int d_model, int n_heads)
        : d_(d_model), h_(n_heads), dh_(d_model / n_heads),
          wq_({d_model, d_model}), wk_({d_model, d_model}),
          wv_({d_model, d_model}), wo_({d_model, d_model}),
          bq_({d_model}), bk_({d_model}), bv_({d_model}), bo_({d_model}),
          gwq_({d_model, d_model}), gwk_({d_model, d_model}),
          gwv_({d_model, d_model}), gwo_({d_model, d_model}),
          gbq_({d_model}), gbk_({d_model}), gbv_({d_model}), gbo_({d_model}) {
        if (d_model % n_heads != 0)
            throw std::invalid_argument("attention: d_model must be divisible by n_heads");
    }

    void init(Rng& rng) {
        for (Tensor* w : {&wq_, &wk_, &wv_, &wo_}) init_uniform_fan_in(*w, d_, rng);
        for (Tensor* b : {&bq_, &bk_, &bv_, &bo_}) init_uniform_fan_in(*b, d_, rng);
    }

    Tensor forward(const Tensor& x, bool /*training*/) {
        if (x.dim(2) != d_) throw std::invalid_argument("attention: feature width mismatch");
        const int B = x.dim(0), L = x.dim(1);
        Cache c;
        c.x = x;
        c.q = project(x, wq_, bq_);
        c.k = project(x, wk_, bk_);
        c.v = project(x, wv_, bv_);
        c.attn = Tensor({B, h_, L, L});
        c.concat = Tensor({B, L, d_});
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
        for (int b = 0; b < B; ++b)
            for (int head = 0; head < h_; ++head) {
                const int off = head * dh_;
                for (int i = 0; i < L; ++i) {
                    // scaled dot-product row + softmax
                    double mx = -1e300;
                    for (int j = 0; j < L; ++j) {
                        double s = 0.0;
                        for (int e = 0; e < dh_; ++e)
                            s += c.q.at(b, i, off + e) * c.k.at(b, j, off + e);
                        s *= scale;
                        c.attn.at(b, head, i, j) = s;
                        if (s > mx) mx = s;
                    }
                    double denom = 0.0;
                    for (int j = 0; j < L; ++j) {
                        const double e = std::exp(c.attn.at(b, head, i, j) - mx);
                        c.attn.at(b, head, i, j) = e;
                        denom += e;
                    }
                    for (int j = 0; j < L; ++j) c.attn.at(b, head, i, j) /= denom;
                    for (int e = 0; e < dh_; ++e) {
                        double acc = 0.0;
                        for (int j = 0; j < L; ++j)
                            acc += c.attn.at(b, head, i, j) * c.v.at(b, j, off + e);
                        c.concat.at(b, i, off + e) = acc;
                    }
                }
            }
        Tensor y = project(c.concat, wo_, bo_);
        caches_.push_back(std::move(c));
        return y;
    }

    Tensor backward(const Tensor& gy) {
        if (caches_.empty()) throw std::logic_error("attention: backward without forward");
        Cache c = std::move(caches_.back());
        caches_.pop_back();
        const int B = gy.dim(0), L = gy.dim(1);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));

        Tensor g_concat = project_backward(gy, c.concat, wo_, gwo_, gbo_);
        Tensor gq({B, L, d_}), gk({B, L, d_}), gv({B, L, d_});
        for (int b = 0; b < B; ++b)
            for (int head = 0; head < h_; ++head) {
                const int off = head * dh_;
                for (int i = 0; i < L; ++i) {
                    // grad through the weighted sum of values
                    std::vector<double> g_attn(static_cast<std::size_t>(L), 0.0);
                    for (int j = 0; j < L; ++j) {
                        double acc = 0.0;
                        for (int e = 0; e < dh_; ++e) {
                            const double g = g_concat.at(b, i, off + e);
                            acc += g * c.v.at(b, j, off + e);
                            gv.at(b, j, off + e) += g * c.attn.at(b, head, i, j);
                        }
                        g_attn[static_cast<std::size_t>(j)] = acc;
                    }
                    // softmax backward
                    double dot = 0.0;
                    for (int j = 0; j < L; ++j)
                        dot += g_attn[static_cast<std::size_t>(j)] * c.attn.at(b, head, i, j);
                    for (int j = 0; j < L; ++j) {
                        const double gs = c.attn.at(b, head, i, j) *
                                          (g_attn[static_cast<std::size_t>(j)] - dot) * scale;
                        for (int e = 0; e < dh_; ++e) {
                            gq.at(b, i, off + e) += gs * c.k.at(b, j, off + e);
                            gk.at(b, j, off + e) += gs * c.q.at(b, i, off + e);
                        }
                    }
                }
            }
        Tensor gx = project_backward(gq, c.x, wq_, gwq_, gbq_);
        accumulate(gx, project_backward(gk, c.x, wk_, gwk_, gbk_));
        accumulate(gx, project_backward(gv, c.x, wv_, gwv_, gbv_));
        return gx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".wq", &wq_, &gwq_, true});
        out.push_back({prefix + ".bq", &bq_, &gbq_, true});
        out.push_back({prefix + ".wk", &wk_, &gwk_, true});
        out.push_back({prefix + ".bk", &bk_, &gbk_, true});
        out.push_back({prefix + ".wv", &wv_, &gwv_, true});
        out.push_back({prefix + ".bv", &bv_, &gbv_, true});
        out.push_back({prefix + ".wo", &wo_, &gwo_, true});
        out.push_back({prefix + ".bo", &bo_, &gbo_, true});
    }

private:
    struct Cache {
        Tensor x, q, k, v, attn, concat;
    };

    // y[b,l,:] = x[b,l,:] W + b, W is [D x D] (input index first).
    Tensor project(const Tensor& x, const Tensor& w, const Tensor& b) const {
        const int B = x.dim(0), L = x.dim(1);
        Tensor y({B, L, d_});
        for (int bb = 0; bb < B; ++bb)
            for (int l = 0; l < L; ++l) {
                const double* xp = &x.at(bb, l, 0);
                double* yp = &y.at(bb, l, 0);
                for (int o = 0; o < d_; ++o) yp[o] = b[static_cast<std::size_t>(o)];
                for (int ii = 0; ii < d_; ++ii) {
                    const double xv = xp[ii];
                    const double* wp = &w.at(ii, 0);
                    for (int o = 0; o < d_; ++o) yp[o] += xv * wp[o];
                }
            }
        return y;
    }

    Tensor project_backward(const Tensor& gy, const Tensor& x, const Tensor& w,
                            Tensor& gw, Tensor& gb) const {
        const int B = x.dim(0), L = x.dim(1);
        Tensor gx({B, L, d_});
        for (int bb = 0; bb < B; ++bb)
            for (int l = 0; l < L; ++l) {
                const double* gp = &gy.at(bb, l, 0);
                const double* xp = &x.at(bb, l, 0);
                double* gxp = &gx.at(bb, l, 0);
                for (int o = 0; o < d_; ++o) gb[static_cast<std::size_t>(o)] += gp[o];
                for (int ii = 0; ii < d_; ++ii) {
                    const double* wp = &w.at(ii, 0);
                    double* gwp = &gw.at(ii, 0);
                    double acc = 0.0;
                    const double xv = xp[ii];
                    for (int o = 0; o < d_; ++o) {
                        acc += gp[o] * wp[o];
                        gwp[o] += gp[o] * xv;
                    }
                    gxp[ii] += acc;
                }
            }
        return gx;
    }

    static void accumulate(Tensor& dst, const Tensor& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    int d_, h_, dh_;
    Tensor wq_, wk_, wv_, wo_, bq_, bk_, bv_, bo_;
    Tensor gwq_, gwk_, gwv_, gwo_, gbq_, gbk_, gbv_, gbo_;
    std::vector<Cache> caches_;
};

// [B, C, L] <-> [B, L, C]
inline Tensor transpose_cl(const Tensor& x) {
    const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
    Tensor y({B, L, C});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int l = 0; l < L; ++l) y.at(b, l, c) = x.at(b, c, l);
    return y;
}

} // namespace tsrnet
