#ifndef SDCM_FUSIONCHECK_HPP
#define SDCM_FUSIONCHECK_HPP

#include <cmath>
#include <string>
#include <vector>

#include "sdcm/fusionmath.hpp"

// Machine-checkable property suite over the fusion math: each record is one
// property with its measured error and tolerance. Shared by the fusion-check
// CLI mode and the acceptance suite.

namespace sdcm::fusion {

struct PropertyResult {
    std::string name;
    double error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

namespace check_detail {

inline FeatureMap random_map(Rng& rng, std::size_t c, std::size_t h, std::size_t w) {
    FeatureMap f(c, h, w);
    for (auto& x : f.data) x = rng.uniform(-1.0, 1.0);
    return f;
}

inline SsmParams random_ssm(Rng& rng, std::size_t max_state) {
    SsmParams p;
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * max_state) % max_state;
    for (std::size_t i = 0; i < n; ++i) {
        p.a.push_back(-0.05 - 2.0 * rng.uniform());
        p.b.push_back(rng.uniform(-1.0, 1.0));
        p.c.push_back(rng.uniform(-1.0, 1.0));
    }
    p.d = rng.uniform(-1.0, 1.0);
    p.delta = 0.05 + rng.uniform();
    return p;
}

}  // namespace check_detail

inline std::vector<PropertyResult> run_fusion_checks(std::uint64_t seed = 42,
                                                     std::size_t spatial = 4,
                                                     std::size_t channels = 2) {
    std::vector<PropertyResult> results;
    auto record = [&](const std::string& name, double err, double tol) {
        results.push_back({name, err, tol, err <= tol});
    };
    Rng rng(seed);

    // Scan/kernel duality over random stable diagonal systems.
    {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto p = check_detail::random_ssm(rng, 8);
            const std::size_t len =
                8 + static_cast<std::size_t>(rng.uniform() * 120.0);
            std::vector<double> s(len);
            for (auto& x : s) x = rng.uniform(-1.0, 1.0);
            const auto y_scan = ssm_scan(p, s);
            const auto kernel = mamba_kernel(p, len);
            auto y_conv = causal_convolve(s, kernel);
            for (std::size_t t = 0; t < len; ++t) y_conv[t] += p.d * s[t];
            double num = 0.0, den = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                num += (y_scan[t] - y_conv[t]) * (y_scan[t] - y_conv[t]);
                den += y_scan[t] * y_scan[t];
            }
            worst = std::max(worst, std::sqrt(num) / std::max(1e-30, std::sqrt(den)));
        }
        record("ssm_scan_conv_duality", worst, 1e-6);
    }

    // ZOH hand case: a = -1, delta = ln 2 -> (0.5, 0.5).
    {
        SsmParams p;
        p.a = {-1.0};
        p.b = {1.0};
        p.c = {1.0};
        p.delta = std::log(2.0);
        const auto d = zoh_discretize(p);
        const double err =
            std::max(std::abs(d.a_bar[0] - 0.5), std::abs(d.b_bar[0] - 0.5));
        record("zoh_hand_case", err, 1e-15);
    }

    // Softmax normalization in the channel attention.
    {
        const auto fr = check_detail::random_map(rng, channels, spatial, spatial);
        const auto fi = check_detail::random_map(rng, channels, spatial, spatial);
        const auto res = compensatory_attention(fr, fi, fi, rng);
        double worst = 0.0;
        for (const auto& row : res.softmax) {
            double s = 0.0;
            for (double x : row) s += x;
            worst = std::max(worst, std::abs(s - 1.0));
        }
        record("attention_softmax_rows", worst, 1e-12);
    }

    // Gate construction: softmax rows sum to 1 and the two gate factors sum
    // exactly to the all-ones map, over 100 seeded instances.
    {
        double worst_rows = 0.0;
        double worst_gate = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto fr = check_detail::random_map(rng, channels, spatial, spatial);
            const auto fi = check_detail::random_map(rng, channels, spatial, spatial);
            const auto stack = feature_difference_stack(fr, fi, 2, rng);
            const auto delta_h2 = channel_transform(stack.delta, 2);
            SsmParams p = check_detail::random_ssm(rng, 4);
            const auto mm = mean_mamba_block(delta_h2, p, rng);
            const auto fused = interactive_fuse(mm.gate, mm.value, stack.f_radar_enh,
                                                stack.f_mimg_enh, fr, fi, 2);
            for (const auto& row : fused.softmax) {
                double s = 0.0;
                for (double x : row) s += x;
                worst_rows = std::max(worst_rows, std::abs(s - 1.0));
            }
            for (double g : fused.gate.values)
                worst_gate = std::max(worst_gate, std::abs(g + (1.0 - g) - 1.0));
        }
        record("fuse_softmax_rows", worst_rows, 1e-12);
        record("complementary_gating", worst_gate, 0.0);
    }

    // Channel transform bijection (exact round-trip).
    {
        const auto f = check_detail::random_map(rng, 3, 8, 8);
        const auto back = channel_transform_inverse(channel_transform(f, 4), 4);
        double worst = 0.0;
        for (std::size_t i = 0; i < f.data.size(); ++i)
            worst = std::max(worst, std::abs(f.data[i] - back.data[i]));
        record("channel_transform_bijection", worst, 0.0);
    }

    // Layer-norm contract inside the Mean-Mamba value path.
    {
        const auto f = check_detail::random_map(rng, 4, 4, 4);
        SsmParams p = check_detail::random_ssm(rng, 4);
        const auto mm = mean_mamba_block(f, p, rng);
        double worst_mean = 0.0, worst_var = 0.0;
        for (const auto& tok : mm.value_tokens_ln) {
            double mean = 0.0;
            for (double x : tok) mean += x;
            mean /= static_cast<double>(tok.size());
            double var = 0.0;
            for (double x : tok) var += (x - mean) * (x - mean);
            var /= static_cast<double>(tok.size());
            worst_mean = std::max(worst_mean, std::abs(mean));
            worst_var = std::max(worst_var, std::abs(var - 1.0));
        }
        record("layer_norm_token_mean", worst_mean, 1e-10);
        // The normalizer's 1e-12 epsilon bounds the attainable variance when
        // a token's raw spread is small, so the tolerance sits above it.
        record("layer_norm_token_variance", worst_var, 1e-5);
    }

    // Loss arithmetic pinned values.
    {
        const double f = focal_loss(0.5, 0.25, 2.0);
        record("focal_pinned_value", std::abs(f - 0.0625), 1e-15);
        LossConfig lc;
        record("total_loss_pinned_value",
               std::abs(total_loss(1.0, 1.0, 1.0, 1.0, lc) - 4.2), 1e-15);
        record("cross_entropy_uniform4",
               std::abs(cross_entropy_dir({0.25, 0.25, 0.25, 0.25},
                                          {0.25, 0.25, 0.25, 0.25}) -
                        2.0),
               1e-12);
    }

    // Smooth-L1 branch continuity at |y - tau| = beta.
    {
        const double beta = 0.1;
        const double lo = smooth_l1(beta - 1e-9, 0.0, beta);
        const double hi = smooth_l1(beta + 1e-9, 0.0, beta);
        record("smooth_l1_continuity", std::abs(lo - hi), 1e-8);
    }

    // Finite-difference gradient checks (step 1e-5, away from kinks).
    {
        const double h = 1e-5;
        const double ln2 = std::log(2.0);

        auto focal_grad = [&](double p) {
            return 0.25 * 2.0 * (1.0 - p) * std::log2(p) -
                   0.25 * (1.0 - p) * (1.0 - p) / (p * ln2);
        };
        double worst = 0.0;
        for (double p : {0.2, 0.5, 0.8}) {
            const double fd =
                (focal_loss(p + h, 0.25, 2.0) - focal_loss(p - h, 0.25, 2.0)) / (2.0 * h);
            const double an = focal_grad(p);
            worst = std::max(worst, std::abs(fd - an) / std::max(1e-12, std::abs(an)));
        }
        record("focal_gradient_fd", worst, 1e-4);

        worst = 0.0;
        for (double y : {0.03, 0.3, -0.25}) {
            const double fd = (smooth_l1(y + h, 0.0, 0.1) - smooth_l1(y - h, 0.0, 0.1)) /
                              (2.0 * h);
            const double r = std::abs(y);
            const double an = r < 0.1 ? y / 0.1 : (y > 0.0 ? 1.0 : -1.0);
            worst = std::max(worst, std::abs(fd - an) / std::max(1e-12, std::abs(an)));
        }
        record("smooth_l1_gradient_fd", worst, 1e-4);

        // Directional derivative along e_0 - e_1 keeps the simplex intact.
        {
            const std::vector<double> pt = {0.6, 0.4};
            std::vector<double> pp = {0.3, 0.7};
            auto at = [&](double t) {
                return cross_entropy_dir(pt, {pp[0] + t, pp[1] - t});
            };
            const double fd = (at(h) - at(-h)) / (2.0 * h);
            const double an = -pt[0] / (pp[0] * ln2) + pt[1] / (pp[1] * ln2);
            record("cross_entropy_gradient_fd",
                   std::abs(fd - an) / std::max(1e-12, std::abs(an)), 1e-4);
        }
    }

    // SiLU sanity: zero at zero, monotone for x >= 0.
    {
        double worst = std::abs(silu(0.0));
        double prev = silu(0.0);
        for (int i = 1; i <= 200; ++i) {
            const double cur = silu(0.05 * i);
            if (cur < prev) worst = std::max(worst, prev - cur);
            prev = cur;
        }
        record("silu_sanity", worst, 0.0);
    }

    return results;
}

}  // namespace sdcm::fusion

#endif  // SDCM_FUSIONCHECK_HPP
