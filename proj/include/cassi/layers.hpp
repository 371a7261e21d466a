#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cassi/blas.hpp"
#include "cassi/error.hpp"
#include "cassi/patterns.hpp"
#include "cassi/rng.hpp"
#include "cassi/tensor.hpp"

namespace cassi {

// One optimizable parameter array. Blocks with trainable == false (a frozen
// coding pattern) are visible to serialization but skipped by the optimizer.
// lr_scale multiplies the optimizer's learning rate for this block only.
struct ParamBlock {
    const char* name;
    double* w;
    double* g;
    std::size_t n;
    bool trainable;
    double lr_scale = 1.0;
};

struct LayerSpec {
    enum class Kind { OpticalDense, Conv1d, BatchNorm, ReLU, Dropout, Dense, SoftmaxXent };
    Kind kind{};
    std::size_t shots = 0, bands = 0;                     // optical-dense
    std::size_t in_channels = 0, out_channels = 0, kernel = 0; // conv1d
    std::size_t channels = 0;                             // batchnorm
    double rate = 0.0;                                    // dropout
    double epsilon = 1e-5, momentum = 0.9;                // batchnorm
    std::size_t in = 0, out = 0;                          // dense
    std::size_t classes = 0;                              // softmax head
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    // Gradient w.r.t. the last forward's input; accumulates parameter grads.
    virtual Tensor backward(const Tensor& upstream) = 0;
    virtual void collect_params(std::vector<ParamBlock>&) {}
    virtual LayerSpec spec() const = 0;

    // Serialized state: parameters plus persistent statistics, in a fixed
    // per-layer order (documented with the MDL1 format).
    virtual std::size_t state_size() const { return 0; }
    virtual void save_state(double*) const {}
    virtual void load_state(const double*) {}
};

// ---------------------------------------------------------------------------
// Optical layer: the sensing operator as the first, bias-free dense layer,
// y = phi * f. Accumulation over bands runs ascending into one scalar, the
// same contract as sense(), so a binary phi reproduces it bit-for-bit.
// ---------------------------------------------------------------------------
class OpticalDense : public Layer {
public:
    std::size_t shots, bands;
    std::vector<double> phi, phi_g;
    bool trainable = true;
    // the pattern layer usually trains faster than the classifier; see
    // TrainConfig::phi_lr_scale
    double lr_scale = 1.0;

    OpticalDense(std::size_t s, std::size_t l)
        : shots(s), bands(l), phi(s * l, 0.0), phi_g(s * l, 0.0) {
        require(s >= 1 && s <= l, "optical: need 1 <= S <= L");
    }

    explicit OpticalDense(const CodingPatternSet& set) : OpticalDense(set.shots, set.bands) {
        phi = set.entries;
    }

    // i.i.d. U(0.3, 0.7): away from the regularizer's roots, and off its
    // 0.5 saddle except on a measure-zero set
    void init_uniform(Rng& rng) {
        for (double& e : phi) e = rng.uniform(0.3, 0.7);
    }

    CodingPatternSet pattern() const {
        CodingPatternSet set(shots, bands, PatternMode::Continuous);
        set.entries = phi;
        return set;
    }

    void set_entries(const std::vector<double>& entries) {
        require(entries.size() == phi.size(), "optical: entry count mismatch");
        phi = entries;
    }

    Tensor forward(const Tensor& x, bool) override {
        rank1_ = x.shape.size() == 1;
        Tensor in = x;
        if (rank1_) in.reshape({1, x.size()});
        require(in.shape.size() == 2 && in.shape[1] == bands,
                "optical: input must have L=" + std::to_string(bands) + " bands");
        cached_x_ = in;
        has_cache_ = true;

        std::size_t batch = in.shape[0];
        Tensor y({batch, shots});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* f = in.v.data() + b * bands;
            for (std::size_t s = 0; s < shots; ++s) {
                const double* h = phi.data() + s * bands;
                double acc = 0.0;
                for (std::size_t l = 0; l < bands; ++l) acc += h[l] * f[l];
                y.v[b * shots + s] = acc;
            }
        }
        if (rank1_) y.reshape({shots});
        return y;
    }

    Tensor backward(const Tensor& upstream) override {
        require(has_cache_, "optical: backward before forward");
        Tensor up = upstream;
        if (rank1_) up.reshape({1, upstream.size()});
        std::size_t batch = cached_x_.shape[0];
        require(up.shape.size() == 2 && up.shape[0] == batch && up.shape[1] == shots,
                "optical: upstream shape mismatch");

        if (trainable) {
            // grad_phi[s,l] += sum_b up[b,s] * f[b,l]  (outer product per sample)
            for (std::size_t b = 0; b < batch; ++b) {
                const double* f = cached_x_.v.data() + b * bands;
                const double* u = up.v.data() + b * shots;
                for (std::size_t s = 0; s < shots; ++s) {
                    double us = u[s];
                    if (us == 0.0) continue;
                    double* gp = phi_g.data() + s * bands;
                    for (std::size_t l = 0; l < bands; ++l) gp[l] += us * f[l];
                }
            }
        }

        Tensor dx({batch, bands});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* u = up.v.data() + b * shots;
            double* d = dx.v.data() + b * bands;
            for (std::size_t s = 0; s < shots; ++s) {
                double us = u[s];
                if (us == 0.0) continue;
                const double* h = phi.data() + s * bands;
                for (std::size_t l = 0; l < bands; ++l) d[l] += us * h[l];
            }
        }
        if (rank1_) dx.reshape({bands});
        return dx;
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({"optical.phi", phi.data(), phi_g.data(), phi.size(), trainable,
                       lr_scale});
    }

    LayerSpec spec() const override {
        LayerSpec s;
        s.kind = LayerSpec::Kind::OpticalDense;
        s.shots = shots;
        s.bands = bands;
        return s;
    }

    std::size_t state_size() const override { return phi.size(); }
    void save_state(double* out) const override { std::copy(phi.begin(), phi.end(), out); }
    void load_state(const double* in) override { std::copy(in, in + phi.size(), phi.begin()); }

private:
    Tensor cached_x_;
    bool has_cache_ = false;
    bool rank1_ = false;
};

// ---------------------------------------------------------------------------
// 1D convolution, stride 1, same padding (odd kernel). Activations are
// channel-last, {B, T, C}, so the whole batch is one {B*T, C} matrix and
// each kernel tap is a single GEMM on a row-shifted view of it - no im2col
// buffer. Rows within pad of a sample boundary pick up contributions from
// the neighboring sample in those GEMMs and are recomputed directly.
// Weights per tap: w[(k*Cin + ci)*Cout + co], one bias per output channel.
// ---------------------------------------------------------------------------
class Conv1d : public Layer {
public:
    std::size_t cin, cout, kernel, pad;
    std::vector<double> w, wg, b, bg;

    Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t k, Rng& init)
        : cin(in_ch), cout(out_ch), kernel(k), pad((k - 1) / 2), w(in_ch * k * out_ch),
          wg(w.size(), 0.0), b(out_ch, 0.0), bg(out_ch, 0.0) {
        require(k % 2 == 1, "conv1d: kernel width must be odd for same padding");
        double limit = std::sqrt(6.0 / static_cast<double>(in_ch * k));
        for (double& e : w) e = init.uniform(-limit, limit);
    }

    Tensor forward(const Tensor& x, bool) override {
        Tensor in = x;
        expanded_ = in.shape.size() == 2 && cin == 1;
        if (expanded_) in.reshape({in.shape[0], in.shape[1], 1});
        require(in.shape.size() == 3 && in.shape[2] == cin,
                "conv1d: expected {B,T," + std::to_string(cin) + "} input");
        cached_x_ = in;
        const std::size_t batch = in.shape[0], t_len = in.shape[1];
        const std::size_t rows = batch * t_len;

        Tensor y({batch, t_len, cout});
        const double* xm = in.v.data();
        double* ym = y.v.data();
        if (t_len > pad) {
            for (std::size_t k = 0; k < kernel; ++k) {
                // output row r draws on input row r + d within its sample
                long long d = static_cast<long long>(k) - static_cast<long long>(pad);
                std::size_t start_y = d < 0 ? static_cast<std::size_t>(-d) : 0;
                std::size_t start_x = d > 0 ? static_cast<std::size_t>(d) : 0;
                if (rows <= start_y + start_x) continue;
                std::size_t n_rows = rows - start_y - start_x;
                blas::gemm(false, false, static_cast<int>(n_rows), static_cast<int>(cout),
                           static_cast<int>(cin), 1.0, xm + start_x * cin,
                           static_cast<int>(cin), tap(k), static_cast<int>(cout),
                           k == 0 ? 0.0 : 1.0, ym + start_y * cout, static_cast<int>(cout));
            }
            // rows within pad of a sample boundary saw the neighbor; redo them
            for (std::size_t bi = 0; bi < batch; ++bi) {
                for (std::size_t t = 0; t < std::min(pad, t_len); ++t)
                    recompute_row(in, y, bi, t);
                for (std::size_t t = std::max(t_len - pad, std::min(pad, t_len)); t < t_len; ++t)
                    recompute_row(in, y, bi, t);
            }
        } else {
            // sequences not longer than the pad: do every row directly
            for (std::size_t bi = 0; bi < batch; ++bi)
                for (std::size_t t = 0; t < t_len; ++t) recompute_row(in, y, bi, t);
        }
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t co = 0; co < cout; ++co) ym[r * cout + co] += b[co];
        return y;
    }

    Tensor backward(const Tensor& upstream) override {
        require(cached_x_.size() > 0, "conv1d: backward before forward");
        const std::size_t batch = cached_x_.shape[0], t_len = cached_x_.shape[1];
        const std::size_t rows = batch * t_len;
        require(upstream.shape == std::vector<std::size_t>({batch, t_len, cout}),
                "conv1d: upstream shape mismatch");

        const double* xm = cached_x_.v.data();
        const double* um = upstream.v.data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t co = 0; co < cout; ++co) bg[co] += um[r * cout + co];

        Tensor dx({batch, t_len, cin});
        double* dxm = dx.v.data();
        if (t_len > pad) {
            for (std::size_t k = 0; k < kernel; ++k) {
                long long d = static_cast<long long>(k) - static_cast<long long>(pad);
                std::size_t start_y = d < 0 ? static_cast<std::size_t>(-d) : 0;
                std::size_t start_x = d > 0 ? static_cast<std::size_t>(d) : 0;
                if (rows <= start_y + start_x) continue;
                std::size_t n_rows = rows - start_y - start_x;

                // wg_k += X_view^T * U_view
                blas::gemm(true, false, static_cast<int>(cin), static_cast<int>(cout),
                           static_cast<int>(n_rows), 1.0, xm + start_x * cin,
                           static_cast<int>(cin), um + start_y * cout, static_cast<int>(cout),
                           1.0, tap_grad(k), static_cast<int>(cout));
                // dX_view += U_view * W_k^T
                blas::gemm(false, true, static_cast<int>(n_rows), static_cast<int>(cin),
                           static_cast<int>(cout), 1.0, um + start_y * cout,
                           static_cast<int>(cout), tap(k), static_cast<int>(cout), 1.0,
                           dxm + start_x * cin, static_cast<int>(cin));

                // remove the cross-sample pairs those GEMMs included
                if (d == 0) continue;
                std::size_t off = static_cast<std::size_t>(d < 0 ? -d : d);
                for (std::size_t bi = 1; bi < batch; ++bi) {
                    for (std::size_t i = 0; i < off; ++i) {
                        std::size_t ry, rx; // output row ry wrongly drew on input row rx
                        if (d > 0) {
                            ry = bi * t_len - 1 - i;
                            rx = ry + off;
                        } else {
                            ry = bi * t_len + i;
                            rx = ry - off;
                        }
                        const double* xr = xm + rx * cin;
                        const double* ur = um + ry * cout;
                        double* wgk = tap_grad(k);
                        double* dxr = dxm + rx * cin;
                        const double* wk = tap(k);
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            double acc = 0.0;
                            for (std::size_t co = 0; co < cout; ++co) {
                                wgk[ci * cout + co] -= xr[ci] * ur[co];
                                acc += ur[co] * wk[ci * cout + co];
                            }
                            dxr[ci] -= acc;
                        }
                    }
                }
            }
        } else {
            // short-sequence fallback, direct per-row accumulation
            for (std::size_t bi = 0; bi < batch; ++bi) {
                for (std::size_t t = 0; t < t_len; ++t) {
                    const double* ur = um + (bi * t_len + t) * cout;
                    for (std::size_t k = 0; k < kernel; ++k) {
                        long long tt = static_cast<long long>(t) + static_cast<long long>(k) -
                                       static_cast<long long>(pad);
                        if (tt < 0 || tt >= static_cast<long long>(t_len)) continue;
                        std::size_t rx = bi * t_len + static_cast<std::size_t>(tt);
                        const double* xr = xm + rx * cin;
                        double* wgk = tap_grad(k);
                        const double* wk = tap(k);
                        double* dxr = dxm + rx * cin;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            double acc = 0.0;
                            for (std::size_t co = 0; co < cout; ++co) {
                                wgk[ci * cout + co] += xr[ci] * ur[co];
                                acc += ur[co] * wk[ci * cout + co];
                            }
                            dxr[ci] += acc;
                        }
                    }
                }
            }
        }
        // input arrived as {B,T}; hand the gradient back the same way
        if (expanded_) dx.reshape({batch, t_len});
        return dx;
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({"conv1d.w", w.data(), wg.data(), w.size(), true});
        out.push_back({"conv1d.b", b.data(), bg.data(), b.size(), true});
    }

    LayerSpec spec() const override {
        LayerSpec s;
        s.kind = LayerSpec::Kind::Conv1d;
        s.in_channels = cin;
        s.out_channels = cout;
        s.kernel = kernel;
        return s;
    }

    std::size_t state_size() const override { return w.size() + b.size(); }
    void save_state(double* out) const override {
        std::copy(w.begin(), w.end(), out);
        std::copy(b.begin(), b.end(), out + w.size());
    }
    void load_state(const double* in) override {
        std::copy(in, in + w.size(), w.begin());
        std::copy(in + w.size(), in + w.size() + b.size(), b.begin());
    }

private:
    double* tap(std::size_t k) { return w.data() + k * cin * cout; }
    double* tap_grad(std::size_t k) { return wg.data() + k * cin * cout; }

    // exact convolution for one output row (no bias), used at boundaries
    void recompute_row(const Tensor& in, Tensor& y, std::size_t bi, std::size_t t) {
        const std::size_t t_len = in.shape[1];
        double* out = y.v.data() + (bi * t_len + t) * cout;
        std::fill(out, out + cout, 0.0);
        for (std::size_t k = 0; k < kernel; ++k) {
            long long tt = static_cast<long long>(t) + static_cast<long long>(k) -
                           static_cast<long long>(pad);
            if (tt < 0 || tt >= static_cast<long long>(t_len)) continue;
            const double* xr = in.v.data() + (bi * t_len + static_cast<std::size_t>(tt)) * cin;
            const double* wk = tap(k);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                double xv = xr[ci];
                if (xv == 0.0) continue;
                for (std::size_t co = 0; co < cout; ++co) out[co] += xv * wk[ci * cout + co];
            }
        }
    }

    Tensor cached_x_;
    bool expanded_ = false;
};

// ---------------------------------------------------------------------------
// Batch normalization over the trailing channel axis of {B,T,C} (or {B,C})
// input. Training uses biased batch statistics and keeps exponential
// running averages (r = momentum * r + (1 - momentum) * batch); inference
// uses the running statistics.
// ---------------------------------------------------------------------------
class BatchNorm1d : public Layer {
public:
    std::size_t channels;
    double epsilon, momentum;
    std::vector<double> gamma, beta, gamma_g, beta_g;
    std::vector<double> run_mean, run_var;

    BatchNorm1d(std::size_t c, double eps = 1e-5, double mom = 0.9)
        : channels(c), epsilon(eps), momentum(mom), gamma(c, 1.0), beta(c, 0.0),
          gamma_g(c, 0.0), beta_g(c, 0.0), run_mean(c, 0.0), run_var(c, 1.0) {}

    Tensor forward(const Tensor& x, bool training) override {
        std::size_t batch, t_len;
        unpack_shape(x, batch, t_len);
        if (training)
            require(batch >= 2, "batchnorm: training requires batch size >= 2, got " +
                                    std::to_string(batch));
        cached_x_shape_ = x.shape;
        training_ = training;
        const std::size_t rows = batch * t_len;
        const double n = static_cast<double>(rows);
        const double* xm = x.v.data();

        mean_.assign(channels, 0.0);
        inv_std_.assign(channels, 0.0);
        if (training) {
            std::vector<double> var(channels, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* src = xm + r * channels;
                for (std::size_t c = 0; c < channels; ++c) mean_[c] += src[c];
            }
            for (std::size_t c = 0; c < channels; ++c) mean_[c] /= n;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* src = xm + r * channels;
                for (std::size_t c = 0; c < channels; ++c) {
                    double d = src[c] - mean_[c];
                    var[c] += d * d;
                }
            }
            for (std::size_t c = 0; c < channels; ++c) {
                var[c] /= n;
                inv_std_[c] = 1.0 / std::sqrt(var[c] + epsilon);
                run_mean[c] = momentum * run_mean[c] + (1.0 - momentum) * mean_[c];
                run_var[c] = momentum * run_var[c] + (1.0 - momentum) * var[c];
            }
        } else {
            for (std::size_t c = 0; c < channels; ++c) {
                mean_[c] = run_mean[c];
                inv_std_[c] = 1.0 / std::sqrt(run_var[c] + epsilon);
            }
        }

        Tensor y(x.shape);
        xhat_.assign(x.size(), 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* src = xm + r * channels;
            double* xh = xhat_.data() + r * channels;
            double* dst = y.v.data() + r * channels;
            for (std::size_t c = 0; c < channels; ++c) {
                xh[c] = (src[c] - mean_[c]) * inv_std_[c];
                dst[c] = gamma[c] * xh[c] + beta[c];
            }
        }
        return y;
    }

    Tensor backward(const Tensor& upstream) override {
        require(!xhat_.empty(), "batchnorm: backward before forward");
        require(upstream.shape == cached_x_shape_, "batchnorm: upstream shape mismatch");
        std::size_t batch, t_len;
        unpack_shape(upstream, batch, t_len);
        const std::size_t rows = batch * t_len;
        const double n = static_cast<double>(rows);
        const double* um = upstream.v.data();

        std::vector<double> sum_up(channels, 0.0), sum_up_xhat(channels, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* u = um + r * channels;
            const double* xh = xhat_.data() + r * channels;
            for (std::size_t c = 0; c < channels; ++c) {
                sum_up[c] += u[c];
                sum_up_xhat[c] += u[c] * xh[c];
            }
        }
        for (std::size_t c = 0; c < channels; ++c) {
            gamma_g[c] += sum_up_xhat[c];
            beta_g[c] += sum_up[c];
        }

        Tensor dx(upstream.shape);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* u = um + r * channels;
            const double* xh = xhat_.data() + r * channels;
            double* d = dx.v.data() + r * channels;
            if (training_) {
                for (std::size_t c = 0; c < channels; ++c)
                    d[c] = gamma[c] * inv_std_[c] *
                           (u[c] - sum_up[c] / n - xh[c] * sum_up_xhat[c] / n);
            } else {
                // running statistics are constants
                for (std::size_t c = 0; c < channels; ++c) d[c] = gamma[c] * inv_std_[c] * u[c];
            }
        }
        return dx;
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({"batchnorm.gamma", gamma.data(), gamma_g.data(), gamma.size(), true});
        out.push_back({"batchnorm.beta", beta.data(), beta_g.data(), beta.size(), true});
    }

    LayerSpec spec() const override {
        LayerSpec s;
        s.kind = LayerSpec::Kind::BatchNorm;
        s.channels = channels;
        s.epsilon = epsilon;
        s.momentum = momentum;
        return s;
    }

    std::size_t state_size() const override { return 4 * channels; }
    void save_state(double* out) const override {
        std::copy(gamma.begin(), gamma.end(), out);
        std::copy(beta.begin(), beta.end(), out + channels);
        std::copy(run_mean.begin(), run_mean.end(), out + 2 * channels);
        std::copy(run_var.begin(), run_var.end(), out + 3 * channels);
    }
    void load_state(const double* in) override {
        std::copy(in, in + channels, gamma.begin());
        std::copy(in + channels, in + 2 * channels, beta.begin());
        std::copy(in + 2 * channels, in + 3 * channels, run_mean.begin());
        std::copy(in + 3 * channels, in + 4 * channels, run_var.begin());
    }

private:
    // channels are the last axis: {B,C} or {B,T,C}
    void unpack_shape(const Tensor& x, std::size_t& batch, std::size_t& t_len) const {
        require(x.shape.size() == 2 || x.shape.size() == 3,
                "batchnorm: expected {B,C} or {B,T,C} input");
        require(x.shape.back() == channels,
                "batchnorm: expected " + std::to_string(channels) + " channels");
        batch = x.shape[0];
        t_len = x.shape.size() == 3 ? x.shape[1] : 1;
    }

    std::vector<std::size_t> cached_x_shape_;
    std::vector<double> mean_, inv_std_, xhat_;
    bool training_ = false;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, bool) override {
        mask_.assign(x.size(), 0);
        Tensor y(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x.v[i] > 0.0) {
                y.v[i] = x.v[i];
                mask_[i] = 1;
            }
        }
        return y;
    }

    Tensor backward(const Tensor& upstream) override {
        require(upstream.size() == mask_.size(), "relu: upstream shape mismatch");
        Tensor dx(upstream.shape);
        for (std::size_t i = 0; i < upstream.size(); ++i)
            dx.v[i] = mask_[i] ? upstream.v[i] : 0.0;
        return dx;
    }

    LayerSpec spec() const override {
        LayerSpec s;
        s.kind = LayerSpec::Kind::ReLU;
        return s;
    }

private:
    std::vector<std::uint8_t> mask_;
};

// Inverted dropout: kept activations are scaled by 1/keep so inference is
// the identity. freeze_mask pins the current mask, which the finite
// difference checker needs.
class Dropout : public Layer {
public:
    double rate;
    bool freeze_mask = false;

    Dropout(double r, std::uint64_t seed) : rate(r), rng_(seed) {
        require(r >= 0.0 && r < 1.0, "dropout: rate must lie in [0,1)");
    }

    Tensor forward(const Tensor& x, bool training) override {
        training_ = training;
        if (!training) return x;
        double keep = 1.0 - rate;
        if (!freeze_mask || mask_.size() != x.size()) {
            mask_.assign(x.size(), 0.0);
            for (std::size_t i = 0; i < x.size(); ++i)
                mask_[i] = rng_.bernoulli(keep) ? 1.0 / keep : 0.0;
        }
        Tensor y(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] * mask_[i];
        return y;
    }

    Tensor backward(const Tensor& upstream) override {
        if (!training_) return upstream;
        require(upstream.size() == mask_.size(), "dropout: upstream shape mismatch");
        Tensor dx(upstream.shape);
        for (std::size_t i = 0; i < upstream.size(); ++i) dx.v[i] = upstream.v[i] * mask_[i];
        return dx;
    }

    LayerSpec spec() const override {
        LayerSpec s;
        s.kind = LayerSpec::Kind::Dropout;
        s.rate = rate;
        return s;
    }

private:
    Rng rng_;
    std::vector<double> mask_;
    bool training_ = false;
};

// Fully connected layer; trailing input dimensions are flattened.
class Dense : public Layer {
public:
    std::size_t in, out;
    std::vector<double> w, wg, b, bg; // w[i * out + o]

    Dense(std::size_t in_dim, std::size_t out_dim, Rng& init)
        : in(in_dim), out(out_dim), w(in_dim * out_dim), wg(w.size(), 0.0), b(out_dim, 0.0),
          bg(out_dim, 0.0) {
        double limit = std::sqrt(6.0 / static_cast<double>(in_dim));
        for (double& e : w) e = init.uniform(-limit, limit);
    }

    Tensor forward(const Tensor& x, bool) override {
        require(!x.shape.empty() && x.size() % x.shape[0] == 0, "dense: bad input shape");
        std::size_t batch = x.shape[0];
        require(x.size() / batch == in,
                "dense: expected " + std::to_string(in) + " inputs per sample, got " +
                    std::to_string(x.size() / batch));
        cached_x_ = x;

        Tensor y({batch, out});
        blas::gemm(false, false, static_cast<int>(batch), static_cast<int>(out),
                   static_cast<int>(in), 1.0, x.v.data(), static_cast<int>(in), w.data(),
                   static_cast<int>(out), 0.0, y.v.data(), static_cast<int>(out));
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t o = 0; o < out; ++o) y.v[bi * out + o] += b[o];
        return y;
    }

    Tensor backward(const Tensor& upstream) override {
        require(cached_x_.size() > 0, "dense: backward before forward");
        std::size_t batch = cached_x_.shape[0];
        require(upstream.shape == std::vector<std::size_t>({batch, out}),
                "dense: upstream shape mismatch");

        blas::gemm(true, false, static_cast<int>(in), static_cast<int>(out),
                   static_cast<int>(batch), 1.0, cached_x_.v.data(), static_cast<int>(in),
                   upstream.v.data(), static_cast<int>(out), 1.0, wg.data(),
                   static_cast<int>(out));
        for (std::size_t bi = 0; bi < batch; ++bi)
            for (std::size_t o = 0; o < out; ++o) bg[o] += upstream.v[bi * out + o];

        Tensor dx(cached_x_.shape);
        blas::gemm(false, true, static_cast<int>(batch), static_cast<int>(in),
                   static_cast<int>(out), 1.0, upstream.v.data(), static_cast<int>(out), w.data(),
                   static_cast<int>(out), 0.0, dx.v.data(), static_cast<int>(in));
        return dx;
    }

    void collect_params(std::vector<ParamBlock>& out_blocks) override {
        out_blocks.push_back({"dense.w", w.data(), wg.data(), w.size(), true});
        out_blocks.push_back({"dense.b", b.data(), bg.data(), b.size(), true});
    }

    LayerSpec spec() const override {
        LayerSpec s;
        s.kind = LayerSpec::Kind::Dense;
        s.in = in;
        s.out = out;
        return s;
    }

    std::size_t state_size() const override { return w.size() + b.size(); }
    void save_state(double* out_buf) const override {
        std::copy(w.begin(), w.end(), out_buf);
        std::copy(b.begin(), b.end(), out_buf + w.size());
    }
    void load_state(const double* in_buf) override {
        std::copy(in_buf, in_buf + w.size(), w.begin());
        std::copy(in_buf + w.size(), in_buf + w.size() + b.size(), b.begin());
    }

private:
    Tensor cached_x_;
};

// ---------------------------------------------------------------------------
// Fused softmax + categorical cross-entropy head (numerically stable:
// row max is subtracted before exponentiation). Loss is the batch mean.
// ---------------------------------------------------------------------------
class SoftmaxXent {
public:
    std::size_t classes;

    explicit SoftmaxXent(std::size_t c) : classes(c) {}

    // probabilities only (inference/visualization)
    Tensor softmax(const Tensor& logits) const {
        check_logits(logits);
        std::size_t batch = logits.shape[0];
        Tensor p(logits.shape);
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const double* row = logits.v.data() + bi * classes;
            double* out = p.v.data() + bi * classes;
            double mx = row[0];
            for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
            double sum = 0.0;
            for (std::size_t c = 0; c < classes; ++c) {
                out[c] = std::exp(row[c] - mx);
                sum += out[c];
            }
            for (std::size_t c = 0; c < classes; ++c) out[c] /= sum;
        }
        return p;
    }

    double forward(const Tensor& logits, const std::vector<int>& labels) {
        check_logits(logits);
        std::size_t batch = logits.shape[0];
        require(labels.size() == batch, "softmax_xent: one label per sample required");
        probs_ = Tensor(logits.shape);
        labels_ = labels;

        double loss = 0.0;
        for (std::size_t bi = 0; bi < batch; ++bi) {
            int y = labels[bi];
            require(y >= 0 && static_cast<std::size_t>(y) < classes,
                    "softmax_xent: label out of range");
            const double* row = logits.v.data() + bi * classes;
            double* p = probs_.v.data() + bi * classes;
            double mx = row[0];
            for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
            double sum = 0.0;
            for (std::size_t c = 0; c < classes; ++c) {
                p[c] = std::exp(row[c] - mx);
                sum += p[c];
            }
            for (std::size_t c = 0; c < classes; ++c) p[c] /= sum;
            loss += std::log(sum) - (row[static_cast<std::size_t>(y)] - mx);
        }
        return loss / static_cast<double>(batch);
    }

    // d(mean loss)/d(logits) = (softmax - onehot) / B
    Tensor backward() const {
        require(probs_.size() > 0, "softmax_xent: backward before forward");
        std::size_t batch = probs_.shape[0];
        Tensor g(probs_.shape);
        double inv_b = 1.0 / static_cast<double>(batch);
        for (std::size_t bi = 0; bi < batch; ++bi) {
            for (std::size_t c = 0; c < classes; ++c) {
                double delta = (static_cast<std::size_t>(labels_[bi]) == c) ? 1.0 : 0.0;
                g.v[bi * classes + c] = (probs_.v[bi * classes + c] - delta) * inv_b;
            }
        }
        return g;
    }

    // probabilities cached by the last forward
    const Tensor& last_probs() const {
        require(probs_.size() > 0, "softmax_xent: no cached probabilities");
        return probs_;
    }

    LayerSpec spec() const {
        LayerSpec s;
        s.kind = LayerSpec::Kind::SoftmaxXent;
        s.classes = classes;
        return s;
    }

private:
    void check_logits(const Tensor& logits) const {
        require(logits.shape.size() == 2 && logits.shape[1] == classes,
                "softmax_xent: expected {B," + std::to_string(classes) + "} logits");
    }

    Tensor probs_;
    std::vector<int> labels_;
};

// ---------------------------------------------------------------------------
// Binarization penalty R(phi) = (1/n) sum phi^2 (phi - 1)^2, zero exactly on
// {0,1} entries; gradient (2/n) phi (phi - 1)(2 phi - 1).
// ---------------------------------------------------------------------------
inline double binreg_value(const double* phi, std::size_t n) {
    require(n > 0, "binreg: empty pattern");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double p = phi[i], q = p - 1.0;
        sum += p * p * q * q;
    }
    return sum / static_cast<double>(n);
}

inline double binreg_value(const CodingPatternSet& set) {
    return binreg_value(set.entries.data(), set.entries.size());
}

// grad += scale * dR/dphi
inline void add_binreg_grad(const double* phi, std::size_t n, double scale, double* grad) {
    double k = 2.0 * scale / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double p = phi[i];
        grad[i] += k * p * (p - 1.0) * (2.0 * p - 1.0);
    }
}

inline Tensor binreg_grad(const CodingPatternSet& set) {
    Tensor g({set.shots, set.bands});
    add_binreg_grad(set.entries.data(), set.entries.size(), 1.0, g.v.data());
    return g;
}

} // namespace cassi
