#ifndef SDCM_FUSIONMATH_HPP
#define SDCM_FUSIONMATH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sdcm/core.hpp"

// Forward-only numeric reference of the RCM / MMIF fusion mechanisms and
// the loss functions: dense-array kernels at toy scale, deterministic via
// seeded weight banks.

namespace sdcm::fusion {

// ---------------------------------------------------------------------------
// FeatureMap: channel-major dense rank-3 array

struct FeatureMap {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<double> data;  // [ch * h * w + row * w + col]

    FeatureMap() = default;
    FeatureMap(std::size_t c_, std::size_t h_, std::size_t w_)
        : c(c_), h(h_), w(w_), data(c_ * h_ * w_, 0.0) {}

    double at(std::size_t ch, std::size_t row, std::size_t col) const {
        return data[(ch * h + row) * w + col];
    }
    double& at(std::size_t ch, std::size_t row, std::size_t col) {
        return data[(ch * h + row) * w + col];
    }
    bool same_shape(const FeatureMap& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline void require_same_shape(const FeatureMap& a, const FeatureMap& b,
                               const char* where) {
    if (!a.same_shape(b)) throw ShapeMismatch(std::string(where) + ": shape mismatch");
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Seeded weight banks (uniform +-1/sqrt(fan_in))

inline std::vector<double> weight_bank(Rng& rng, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(count);
    for (auto& x : w) x = rng.uniform(-bound, bound);
    return w;
}

// Dense conv2d, symmetric zero padding, kernel bank laid out
// [out][in][ky][kx]. Spatial dims preserved.
inline FeatureMap conv2d(const FeatureMap& in, const std::vector<double>& kernels,
                         std::size_t out_c, std::size_t k) {
    if (k % 2 == 0) throw ShapeMismatch("conv2d: kernel size must be odd");
    if (kernels.size() != out_c * in.c * k * k)
        throw ShapeMismatch("conv2d: kernel bank size mismatch");
    const int half = static_cast<int>(k / 2);
    FeatureMap out(out_c, in.h, in.w);
    for (std::size_t oc = 0; oc < out_c; ++oc)
        for (std::size_t ic = 0; ic < in.c; ++ic)
            for (std::size_t y = 0; y < in.h; ++y)
                for (std::size_t x = 0; x < in.w; ++x) {
                    double acc = 0.0;
                    for (int ky = -half; ky <= half; ++ky)
                        for (int kx = -half; kx <= half; ++kx) {
                            const int sy = static_cast<int>(y) + ky;
                            const int sx = static_cast<int>(x) + kx;
                            if (sy < 0 || sx < 0 || sy >= static_cast<int>(in.h) ||
                                sx >= static_cast<int>(in.w))
                                continue;
                            const double kv =
                                kernels[((oc * in.c + ic) * k + (ky + half)) * k +
                                        (kx + half)];
                            acc += kv * in.at(ic, sy, sx);
                        }
                    out.at(oc, y, x) += acc;
                }
    return out;
}

// Depthwise 3x3 conv, one kernel per channel, bank [c][3][3].
inline FeatureMap depthwise_conv3(const FeatureMap& in, const std::vector<double>& kernels) {
    if (kernels.size() != in.c * 9) throw ShapeMismatch("depthwise_conv3: bank size mismatch");
    FeatureMap out(in.c, in.h, in.w);
    for (std::size_t ch = 0; ch < in.c; ++ch)
        for (std::size_t y = 0; y < in.h; ++y)
            for (std::size_t x = 0; x < in.w; ++x) {
                double acc = 0.0;
                for (int ky = -1; ky <= 1; ++ky)
                    for (int kx = -1; kx <= 1; ++kx) {
                        const int sy = static_cast<int>(y) + ky;
                        const int sx = static_cast<int>(x) + kx;
                        if (sy < 0 || sx < 0 || sy >= static_cast<int>(in.h) ||
                            sx >= static_cast<int>(in.w))
                            continue;
                        acc += kernels[(ch * 3 + (ky + 1)) * 3 + (kx + 1)] * in.at(ch, sy, sx);
                    }
                out.at(ch, y, x) = acc;
            }
    return out;
}

// ---------------------------------------------------------------------------
// RCM: multi-receptive enhancement and compensatory attention

// F_bar = (1/Z) * SiLU(sum_z Conv(F_{z-1}, ker_z)) + F, cascading the raw
// per-stage outputs as the next stage's input. Banks laid out per stage as
// in conv2d.
inline FeatureMap multi_receptive_enhance(const FeatureMap& f,
                                          const std::vector<std::size_t>& kernel_sizes,
                                          const std::vector<std::vector<double>>& banks) {
    if (kernel_sizes.empty()) throw ShapeMismatch("multi_receptive_enhance: no kernels");
    if (banks.size() != kernel_sizes.size())
        throw ShapeMismatch("multi_receptive_enhance: one bank per kernel size");
    for (auto k : kernel_sizes)
        if (k % 2 == 0) throw ShapeMismatch("multi_receptive_enhance: kernel sizes must be odd");
    FeatureMap stage = f;
    FeatureMap sum(f.c, f.h, f.w);
    for (std::size_t z = 0; z < kernel_sizes.size(); ++z) {
        stage = conv2d(stage, banks[z], f.c, kernel_sizes[z]);
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += stage.data[i];
    }
    const double inv_z = 1.0 / static_cast<double>(kernel_sizes.size());
    FeatureMap out = f;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += inv_z * silu(sum.data[i]);
    return out;
}

inline FeatureMap multi_receptive_enhance(const FeatureMap& f,
                                          const std::vector<std::size_t>& kernel_sizes,
                                          Rng& rng) {
    std::vector<std::vector<double>> banks;
    banks.reserve(kernel_sizes.size());
    for (auto k : kernel_sizes)
        banks.push_back(weight_bank(rng, f.c * f.c * k * k, f.c * k * k));
    return multi_receptive_enhance(f, kernel_sizes, banks);
}

struct AttentionResult {
    FeatureMap f_mimg;
    std::vector<std::vector<double>> softmax;  // C x C rows
    std::vector<double> channel_vector;        // broadcast vector, size C
};

namespace detail {

inline std::vector<double> softmax_row(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (auto& x : out) x /= z;
    return out;
}

inline std::vector<double> channel_average_pool(const FeatureMap& f) {
    std::vector<double> p(f.c, 0.0);
    for (std::size_t ch = 0; ch < f.c; ++ch) {
        double s = 0.0;
        for (std::size_t y = 0; y < f.h; ++y)
            for (std::size_t x = 0; x < f.w; ++x) s += f.at(ch, y, x);
        p[ch] = s / static_cast<double>(f.h * f.w);
    }
    return p;
}

inline std::vector<double> matvec(const std::vector<double>& m,
                                  const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> out(m.size() / n, 0.0);
    for (std::size_t r = 0; r < out.size(); ++r)
        for (std::size_t c = 0; c < n; ++c) out[r] += m[r * n + c] * v[c];
    return out;
}

}  // namespace detail

// Channel attention: query from pooled radar features, key/value from
// pooled image features, each through a seeded 1x1 projection; the attended
// channel vector is broadcast spatially and gates F_img Hadamard-wise.
inline AttentionResult compensatory_attention(const FeatureMap& f_radar_bar,
                                              const FeatureMap& f_img_bar,
                                              const FeatureMap& f_img,
                                              const std::vector<double>& wq,
                                              const std::vector<double>& wk,
                                              const std::vector<double>& wv,
                                              double d_k = 1.0) {
    require_same_shape(f_img_bar, f_img, "compensatory_attention");
    if (f_radar_bar.c != f_img.c)
        throw ShapeMismatch("compensatory_attention: channel counts differ");
    if (!(d_k >= 1.0)) throw ShapeMismatch("compensatory_attention: d_k must be >= 1");
    const std::size_t c = f_img.c;
    if (wq.size() != c * c || wk.size() != c * c || wv.size() != c * c)
        throw ShapeMismatch("compensatory_attention: projection banks must be C x C");
    const auto q = detail::matvec(wq, detail::channel_average_pool(f_radar_bar));
    const auto k = detail::matvec(wk, detail::channel_average_pool(f_img_bar));
    const auto v = detail::matvec(wv, detail::channel_average_pool(f_img_bar));

    AttentionResult res;
    res.softmax.resize(c);
    res.channel_vector.assign(c, 0.0);
    const double scale = 1.0 / std::sqrt(d_k);
    for (std::size_t i = 0; i < c; ++i) {
        std::vector<double> logits(c);
        for (std::size_t j = 0; j < c; ++j) logits[j] = q[i] * k[j] * scale;
        res.softmax[i] = detail::softmax_row(logits);
        for (std::size_t j = 0; j < c; ++j) res.channel_vector[i] += res.softmax[i][j] * v[j];
    }

    res.f_mimg = f_img;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < f_img.h; ++y)
            for (std::size_t x = 0; x < f_img.w; ++x)
                res.f_mimg.at(ch, y, x) *= res.channel_vector[ch];
    return res;
}

inline AttentionResult compensatory_attention(const FeatureMap& f_radar_bar,
                                              const FeatureMap& f_img_bar,
                                              const FeatureMap& f_img, Rng& rng,
                                              double d_k = 1.0) {
    const std::size_t c = f_img.c;
    const auto wq = weight_bank(rng, c * c, c);
    const auto wk = weight_bank(rng, c * c, c);
    const auto wv = weight_bank(rng, c * c, c);
    return compensatory_attention(f_radar_bar, f_img_bar, f_img, wq, wk, wv, d_k);
}

// ---------------------------------------------------------------------------
// MMIF: feature differences, channel transform, Z-order, SSM machinery

struct DifferenceStack {
    FeatureMap delta;
    FeatureMap f_radar_enh;
    FeatureMap f_mimg_enh;
};

// DeltaF = F_radar - F_Mimg; each branch enhanced by a G-fold
// SiLU(DWConv3x3) composition with its own seeded kernels.
inline DifferenceStack feature_difference_stack(
    const FeatureMap& f_radar, const FeatureMap& f_mimg,
    const std::vector<std::vector<double>>& radar_banks,
    const std::vector<std::vector<double>>& img_banks) {
    require_same_shape(f_radar, f_mimg, "feature_difference_stack");
    if (radar_banks.size() != img_banks.size())
        throw ShapeMismatch("feature_difference_stack: branch depths differ");
    DifferenceStack out;
    out.delta = f_radar;
    for (std::size_t i = 0; i < out.delta.data.size(); ++i)
        out.delta.data[i] -= f_mimg.data[i];

    auto enhance = [&](const FeatureMap& f, const std::vector<std::vector<double>>& banks) {
        FeatureMap cur = f;
        for (const auto& bank : banks) {
            cur = depthwise_conv3(cur, bank);
            for (auto& x : cur.data) x = silu(x);
        }
        return cur;
    };
    out.f_radar_enh = enhance(f_radar, radar_banks);
    out.f_mimg_enh = enhance(f_mimg, img_banks);
    return out;
}

inline DifferenceStack feature_difference_stack(const FeatureMap& f_radar,
                                                const FeatureMap& f_mimg, std::size_t g,
                                                Rng& rng) {
    std::vector<std::vector<double>> radar_banks, img_banks;
    for (std::size_t layer = 0; layer < g; ++layer)
        radar_banks.push_back(weight_bank(rng, f_radar.c * 9, 9));
    for (std::size_t layer = 0; layer < g; ++layer)
        img_banks.push_back(weight_bank(rng, f_radar.c * 9, 9));
    return feature_difference_stack(f_radar, f_mimg, radar_banks, img_banks);
}

// Space-to-channel rearrangement: (c, i, j) -> (c*s^2 + (i mod s)*s + j mod s,
// i div s, j div s). Exactly invertible.
inline FeatureMap channel_transform(const FeatureMap& f, std::size_t s) {
    if (s == 0 || f.h % s != 0 || f.w % s != 0)
        throw IndivisibleShape("channel_transform: s must divide H and W");
    FeatureMap out(f.c * s * s, f.h / s, f.w / s);
    for (std::size_t ch = 0; ch < f.c; ++ch)
        for (std::size_t y = 0; y < f.h; ++y)
            for (std::size_t x = 0; x < f.w; ++x)
                out.at(ch * s * s + (y % s) * s + (x % s), y / s, x / s) = f.at(ch, y, x);
    return out;
}

inline FeatureMap channel_transform_inverse(const FeatureMap& f, std::size_t s) {
    if (s == 0 || f.c % (s * s) != 0)
        throw IndivisibleShape("channel_transform_inverse: C must be divisible by s^2");
    FeatureMap out(f.c / (s * s), f.h * s, f.w * s);
    for (std::size_t ch = 0; ch < out.c; ++ch)
        for (std::size_t y = 0; y < out.h; ++y)
            for (std::size_t x = 0; x < out.w; ++x)
                out.at(ch, y, x) = f.at(ch * s * s + (y % s) * s + (x % s), y / s, x / s);
    return out;
}

// Per-channel spatial mean broadcast back over the map.
inline FeatureMap mean_map(const FeatureMap& f) {
    FeatureMap out(f.c, f.h, f.w);
    const auto means = detail::channel_average_pool(f);
    for (std::size_t ch = 0; ch < f.c; ++ch)
        for (std::size_t y = 0; y < f.h; ++y)
            for (std::size_t x = 0; x < f.w; ++x) out.at(ch, y, x) = means[ch];
    return out;
}

struct TokenSequence {
    std::vector<std::vector<double>> tokens;  // per-pixel channel vectors
    std::size_t channels = 0;
    std::size_t padded_h = 0, padded_w = 0;   // power-of-two pad, zeros
    std::size_t orig_h = 0, orig_w = 0;
};

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Morton key with the column bit least significant.
inline std::uint64_t morton_key(std::uint32_t row, std::uint32_t col) {
    std::uint64_t key = 0;
    for (int b = 0; b < 32; ++b) {
        key |= (static_cast<std::uint64_t>((col >> b) & 1u)) << (2 * b);
        key |= (static_cast<std::uint64_t>((row >> b) & 1u)) << (2 * b + 1);
    }
    return key;
}

inline void append_morton(const FeatureMap& f, TokenSequence& seq) {
    const std::size_t ph = next_pow2(f.h);
    const std::size_t pw = next_pow2(f.w);
    const std::size_t side = std::max(ph, pw);
    std::vector<std::pair<std::uint64_t, std::pair<std::size_t, std::size_t>>> order;
    order.reserve(side * side);
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
            order.push_back({morton_key(static_cast<std::uint32_t>(y),
                                        static_cast<std::uint32_t>(x)),
                             {y, x}});
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    seq.padded_h = seq.padded_w = side;
    for (const auto& [key, rc] : order) {
        std::vector<double> tok(f.c, 0.0);
        if (rc.first < f.h && rc.second < f.w)
            for (std::size_t ch = 0; ch < f.c; ++ch) tok[ch] = f.at(ch, rc.first, rc.second);
        seq.tokens.push_back(std::move(tok));
    }
}

}  // namespace detail

// S_bar = ZO(I) then ZO(I_bar): Morton traversal of each map, concatenated.
inline TokenSequence z_order_serialize(const FeatureMap& i, const FeatureMap& i_bar) {
    require_same_shape(i, i_bar, "z_order_serialize");
    TokenSequence seq;
    seq.channels = i.c;
    seq.orig_h = i.h;
    seq.orig_w = i.w;
    detail::append_morton(i, seq);
    detail::append_morton(i_bar, seq);
    return seq;
}

// Restores a map from the first padded_h*padded_w tokens of a sequence.
inline FeatureMap z_order_deserialize_first(const TokenSequence& seq,
                                            const std::vector<std::vector<double>>& tokens) {
    FeatureMap out(seq.channels, seq.orig_h, seq.orig_w);
    std::size_t t = 0;
    std::vector<std::pair<std::uint64_t, std::pair<std::size_t, std::size_t>>> order;
    for (std::size_t y = 0; y < seq.padded_h; ++y)
        for (std::size_t x = 0; x < seq.padded_w; ++x)
            order.push_back({detail::morton_key(static_cast<std::uint32_t>(y),
                                                static_cast<std::uint32_t>(x)),
                             {y, x}});
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, rc] : order) {
        if (rc.first < out.h && rc.second < out.w)
            for (std::size_t ch = 0; ch < out.c; ++ch)
                out.at(ch, rc.first, rc.second) = tokens[t][ch];
        ++t;
    }
    return out;
}

// ---------------------------------------------------------------------------
// SSM machinery (diagonal, stable, LTI)

struct SsmParams {
    std::vector<double> a;  // continuous diagonal A, all < 0
    std::vector<double> b;
    std::vector<double> c;
    double d = 0.0;
    double delta = 1.0;

    void validate() const {
        if (a.empty() || a.size() != b.size() || a.size() != c.size())
            throw ShapeMismatch("SsmParams: A, B, C must have equal nonzero length");
        if (!(delta > 0.0)) throw UnstableParameter("SsmParams: delta must be > 0");
        for (double x : a)
            if (!(x < 0.0)) throw UnstableParameter("SsmParams: A components must be < 0");
    }
};

struct DiscreteSsm {
    std::vector<double> a_bar;
    std::vector<double> b_bar;
};

// ZOH: a_bar = exp(delta a); b_bar = ((a_bar - 1)/a) b.
inline DiscreteSsm zoh_discretize(const SsmParams& p) {
    p.validate();
    DiscreteSsm d;
    d.a_bar.resize(p.a.size());
    d.b_bar.resize(p.a.size());
    for (std::size_t n = 0; n < p.a.size(); ++n) {
        d.a_bar[n] = std::exp(p.delta * p.a[n]);
        d.b_bar[n] = (d.a_bar[n] - 1.0) / p.a[n] * p.b[n];
    }
    return d;
}

// Sequential recurrence h(t) = a_bar h(t-1) + b_bar s_t, y = sum c h + D s.
inline std::vector<double> ssm_scan(const SsmParams& p, const std::vector<double>& s) {
    const auto d = zoh_discretize(p);
    std::vector<double> h(p.a.size(), 0.0);
    std::vector<double> y(s.size(), 0.0);
    for (std::size_t t = 0; t < s.size(); ++t) {
        double out = p.d * s[t];
        for (std::size_t n = 0; n < h.size(); ++n) {
            h[n] = d.a_bar[n] * h[n] + d.b_bar[n] * s[t];
            out += p.c[n] * h[n];
        }
        y[t] = out;
    }
    return y;
}

// k_t = sum_n c_n a_bar^t b_bar, t = 0..L-1.
inline std::vector<double> mamba_kernel(const SsmParams& p, std::size_t length) {
    if (length < 1) throw ValidationError("mamba_kernel: length must be >= 1");
    const auto d = zoh_discretize(p);
    std::vector<double> k(length, 0.0);
    std::vector<double> pow = d.a_bar;
    for (auto& x : pow) x = 1.0;
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t n = 0; n < p.a.size(); ++n) {
            k[t] += p.c[n] * pow[n] * d.b_bar[n];
            pow[n] *= d.a_bar[n];
        }
    }
    return k;
}

inline std::vector<double> causal_convolve(const std::vector<double>& s,
                                           const std::vector<double>& kernel) {
    std::vector<double> y(s.size(), 0.0);
    for (std::size_t t = 0; t < s.size(); ++t) {
        const std::size_t kmax = std::min(t + 1, kernel.size());
        for (std::size_t tau = 0; tau < kmax; ++tau) y[t] += kernel[tau] * s[t - tau];
    }
    return y;
}

// ---------------------------------------------------------------------------
// Mean-Mamba block and interactive fusion

struct MeanMambaResult {
    FeatureMap value;                       // V: C2 x H2 x W2
    std::vector<std::vector<double>> gate;  // W: (H2*W2) x (H2*W2)
    std::vector<std::vector<double>> value_tokens_ln;  // post-LN tokens (tests)
};

namespace detail {

inline std::vector<double> layer_norm(const std::vector<double>& tok) {
    double mean = 0.0;
    for (double x : tok) mean += x;
    mean /= static_cast<double>(tok.size());
    double var = 0.0;
    for (double x : tok) var += (x - mean) * (x - mean);
    var /= static_cast<double>(tok.size());
    std::vector<double> out(tok.size());
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    for (std::size_t i = 0; i < tok.size(); ++i) out[i] = (tok[i] - mean) * inv;
    return out;
}

// Per-channel causal convolution over a token sequence.
inline std::vector<std::vector<double>> convolve_tokens(
    const std::vector<std::vector<double>>& tokens, const std::vector<double>& kernel,
    std::size_t channels) {
    std::vector<std::vector<double>> out(tokens.size(),
                                         std::vector<double>(channels, 0.0));
    for (std::size_t ch = 0; ch < channels; ++ch) {
        std::vector<double> lane(tokens.size());
        for (std::size_t t = 0; t < tokens.size(); ++t) lane[t] = tokens[t][ch];
        const auto y = causal_convolve(lane, kernel);
        for (std::size_t t = 0; t < tokens.size(); ++t) out[t][ch] = y[t];
    }
    return out;
}

}  // namespace detail

// Value path: V = LN(ZO(W1 DeltaF, mean) (*) K_Mamba) + W1 DeltaF.
// Key-query path: I_kq = c^(-1/2) (W2 M)^T (W3 M) over flattened positions,
// serialized with its mean map and convolved with K_Mamba.
inline MeanMambaResult mean_mamba_block(const FeatureMap& delta_h2, const SsmParams& p,
                                        Rng& rng, std::size_t key_channels = 0) {
    p.validate();
    const std::size_t c2 = delta_h2.c;
    const std::size_t hw = delta_h2.h * delta_h2.w;
    const std::size_t kc = key_channels ? key_channels : c2;

    // W1 projection (1x1 channel mix).
    const auto w1 = weight_bank(rng, c2 * c2, c2);
    FeatureMap proj(c2, delta_h2.h, delta_h2.w);
    for (std::size_t y = 0; y < delta_h2.h; ++y)
        for (std::size_t x = 0; x < delta_h2.w; ++x)
            for (std::size_t oc = 0; oc < c2; ++oc) {
                double acc = 0.0;
                for (std::size_t ic = 0; ic < c2; ++ic)
                    acc += w1[oc * c2 + ic] * delta_h2.at(ic, y, x);
                proj.at(oc, y, x) = acc;
            }

    MeanMambaResult res;
    {
        const auto seq = z_order_serialize(proj, mean_map(proj));
        const auto kernel = mamba_kernel(p, seq.tokens.size());
        auto scanned = detail::convolve_tokens(seq.tokens, kernel, c2);
        for (auto& tok : scanned) tok = detail::layer_norm(tok);
        res.value_tokens_ln = scanned;
        res.value = z_order_deserialize_first(seq, scanned);
        for (std::size_t i = 0; i < res.value.data.size(); ++i)
            res.value.data[i] += proj.data[i];
    }

    // Key-query interaction over flattened spatial positions.
    const auto w2 = weight_bank(rng, kc * c2, c2);
    const auto w3 = weight_bank(rng, kc * c2, c2);
    std::vector<std::vector<double>> km(kc, std::vector<double>(hw, 0.0));
    std::vector<std::vector<double>> qm(kc, std::vector<double>(hw, 0.0));
    for (std::size_t r = 0; r < kc; ++r)
        for (std::size_t pos = 0; pos < hw; ++pos) {
            const std::size_t y = pos / delta_h2.w;
            const std::size_t x = pos % delta_h2.w;
            for (std::size_t ic = 0; ic < c2; ++ic) {
                km[r][pos] += w2[r * c2 + ic] * delta_h2.at(ic, y, x);
                qm[r][pos] += w3[r * c2 + ic] * delta_h2.at(ic, y, x);
            }
        }
    FeatureMap ikq(1, hw, hw);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kc));
    for (std::size_t i = 0; i < hw; ++i)
        for (std::size_t j = 0; j < hw; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < kc; ++r) acc += km[r][i] * qm[r][j];
            ikq.at(0, i, j) = scale * acc;
        }
    {
        const auto seq = z_order_serialize(ikq, mean_map(ikq));
        const auto kernel = mamba_kernel(p, seq.tokens.size());
        const auto scanned = detail::convolve_tokens(seq.tokens, kernel, 1);
        const auto wmap = z_order_deserialize_first(seq, scanned);
        res.gate.assign(hw, std::vector<double>(hw, 0.0));
        for (std::size_t i = 0; i < hw; ++i)
            for (std::size_t j = 0; j < hw; ++j) res.gate[i][j] = wmap.at(0, i, j);
    }
    return res;
}

struct GateMap {
    std::size_t h = 0, w = 0;
    std::vector<double> values;  // in [0, 1]

    double at(std::size_t y, std::size_t x) const { return values[y * w + x]; }
};

struct FusionResult {
    GateMap gate;  // E at H1 x W1
    FeatureMap f_radar_hat;
    FeatureMap f_img_hat;
    FeatureMap fused;  // channel concatenation
    std::vector<std::vector<double>> softmax;  // rows over W
};

// E = CT^-1(SoftMax(W) V) reduced to one channel and clamped to [0, 1];
// gated shortcuts per branch; fused = Cat(F_hat_radar, F_hat_img).
inline FusionResult interactive_fuse(const std::vector<std::vector<double>>& w_gate,
                                     const FeatureMap& value, const FeatureMap& f_radar_enh,
                                     const FeatureMap& f_mimg_enh, const FeatureMap& f_radar,
                                     const FeatureMap& f_mimg, std::size_t ct_factor) {
    require_same_shape(f_radar_enh, f_radar, "interactive_fuse");
    require_same_shape(f_mimg_enh, f_mimg, "interactive_fuse");
    require_same_shape(f_radar, f_mimg, "interactive_fuse");
    const std::size_t hw = value.h * value.w;
    if (w_gate.size() != hw) throw ShapeMismatch("interactive_fuse: gate matrix size");

    FusionResult res;
    res.softmax.reserve(hw);
    // Attention over spatial positions: rows of SoftMax(W) mix value tokens.
    FeatureMap mixed(value.c, value.h, value.w);
    for (std::size_t i = 0; i < hw; ++i) {
        const auto row = detail::softmax_row(w_gate[i]);
        res.softmax.push_back(row);
        const std::size_t y = i / value.w;
        const std::size_t x = i % value.w;
        for (std::size_t ch = 0; ch < value.c; ++ch) {
            double acc = 0.0;
            for (std::size_t j = 0; j < hw; ++j)
                acc += row[j] * value.at(ch, j / value.w, j % value.w);
            mixed.at(ch, y, x) = acc;
        }
    }
    const auto restored = channel_transform_inverse(mixed, ct_factor);
    if (restored.h != f_radar.h || restored.w != f_radar.w)
        throw ShapeMismatch("interactive_fuse: restored gate does not match H1 x W1");

    res.gate.h = restored.h;
    res.gate.w = restored.w;
    res.gate.values.assign(restored.h * restored.w, 0.0);
    for (std::size_t y = 0; y < restored.h; ++y)
        for (std::size_t x = 0; x < restored.w; ++x) {
            double acc = 0.0;
            for (std::size_t ch = 0; ch < restored.c; ++ch) acc += restored.at(ch, y, x);
            acc /= static_cast<double>(restored.c);
            res.gate.values[y * restored.w + x] = std::clamp(acc, 0.0, 1.0);
        }

    res.f_radar_hat = f_radar;
    res.f_img_hat = f_mimg;
    for (std::size_t ch = 0; ch < f_radar.c; ++ch)
        for (std::size_t y = 0; y < f_radar.h; ++y)
            for (std::size_t x = 0; x < f_radar.w; ++x) {
                const double e = res.gate.at(y, x);
                res.f_radar_hat.at(ch, y, x) += f_radar_enh.at(ch, y, x) * e;
                res.f_img_hat.at(ch, y, x) += f_mimg_enh.at(ch, y, x) * (1.0 - e);
            }
    res.fused = FeatureMap(2 * f_radar.c, f_radar.h, f_radar.w);
    std::copy(res.f_radar_hat.data.begin(), res.f_radar_hat.data.end(),
              res.fused.data.begin());
    std::copy(res.f_img_hat.data.begin(), res.f_img_hat.data.end(),
              res.fused.data.begin() + static_cast<std::ptrdiff_t>(res.f_radar_hat.data.size()));
    return res;
}

// Applies a precomputed gate map to the four feature inputs; used when the
// gate is constructed directly (tests of the saturation identities).
inline FusionResult apply_gate(const GateMap& gate, const FeatureMap& f_radar_enh,
                               const FeatureMap& f_mimg_enh, const FeatureMap& f_radar,
                               const FeatureMap& f_mimg) {
    FusionResult res;
    res.gate = gate;
    res.f_radar_hat = f_radar;
    res.f_img_hat = f_mimg;
    for (std::size_t ch = 0; ch < f_radar.c; ++ch)
        for (std::size_t y = 0; y < f_radar.h; ++y)
            for (std::size_t x = 0; x < f_radar.w; ++x) {
                const double e = gate.at(y, x);
                res.f_radar_hat.at(ch, y, x) += f_radar_enh.at(ch, y, x) * e;
                res.f_img_hat.at(ch, y, x) += f_mimg_enh.at(ch, y, x) * (1.0 - e);
            }
    res.fused = FeatureMap(2 * f_radar.c, f_radar.h, f_radar.w);
    std::copy(res.f_radar_hat.data.begin(), res.f_radar_hat.data.end(),
              res.fused.data.begin());
    std::copy(res.f_img_hat.data.begin(), res.f_img_hat.data.end(),
              res.fused.data.begin() + static_cast<std::ptrdiff_t>(res.f_radar_hat.data.size()));
    return res;
}

// ---------------------------------------------------------------------------
// Losses (base-2 logarithms)

inline double focal_loss(double p_t, double alpha, double sigma) {
    if (!(p_t > 0.0) || p_t > 1.0)
        throw DomainError("focal_loss: p_t must be in (0, 1]");
    return -alpha * std::pow(1.0 - p_t, sigma) * std::log2(p_t);
}

inline double smooth_l1(double y, double tau, double beta) {
    if (!(beta > 0.0)) throw ValidationError("smooth_l1: beta must be > 0");
    const double r = std::abs(y - tau);
    if (r < beta) return 0.5 / beta * r * r;
    return r - 0.5 * beta;
}

inline double cross_entropy_dir(const std::vector<double>& p_true,
                                const std::vector<double>& p_pred) {
    if (p_true.size() != p_pred.size())
        throw ShapeMismatch("cross_entropy_dir: distribution sizes differ");
    double st = 0.0, sp = 0.0;
    for (std::size_t i = 0; i < p_true.size(); ++i) {
        if (p_true[i] < 0.0 || p_pred[i] < 0.0)
            throw DomainError("cross_entropy_dir: probabilities must be nonnegative");
        st += p_true[i];
        sp += p_pred[i];
    }
    if (std::abs(st - 1.0) > 1e-9 || std::abs(sp - 1.0) > 1e-9)
        throw DomainError("cross_entropy_dir: distributions must sum to 1");
    double loss = 0.0;
    for (std::size_t i = 0; i < p_true.size(); ++i) {
        if (p_true[i] == 0.0) continue;
        if (p_pred[i] <= 0.0)
            throw DomainError("cross_entropy_dir: zero predicted mass on true support");
        loss -= p_true[i] * std::log2(p_pred[i]);
    }
    return loss;
}

inline double total_loss(double cls, double occ, double loc, double dir,
                         const LossConfig& cfg) {
    cfg.validate();
    if (cls < 0.0 || occ < 0.0 || loc < 0.0 || dir < 0.0)
        throw DomainError("total_loss: components must be >= 0");
    return cfg.lambda1 * cls + cfg.lambda2 * occ + cfg.lambda3 * loc + cfg.lambda4 * dir;
}

}  // namespace sdcm::fusion

#endif  // SDCM_FUSIONMATH_HPP
