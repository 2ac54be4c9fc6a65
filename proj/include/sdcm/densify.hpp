#ifndef SDCM_DENSIFY_HPP
#define SDCM_DENSIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sdcm/core.hpp"
#include "sdcm/density.hpp"
#include "sdcm/geometry.hpp"

// The densification pipeline: depth-mode filtering, key-point selection,
// Gaussian surface simulation, curvature outline generation, attribute
// assignment and back-projection.

namespace sdcm {

struct InstancePointSet {
    int instance_id = 0;
    std::vector<ProjectedPoint> points2d;        // mode-filtered (u, v, d)
    double mode_depth = 0.0;                     // representative depth
    std::vector<std::vector<double>> source_attrs;  // aligned with points2d
};

struct KeyPointSet {
    std::vector<Vec3> points3d;  // <= max_key_points entries
    Vec3 center3d;
    Vec2 center2d;
    double cov_uu = 0.0, cov_uv = 0.0, cov_vv = 0.0;  // 2x2 covariance
};

struct DensifiedInstance {
    int instance_id = 0;
    std::vector<Vec2> surface2d;
    std::vector<Vec2> outline2d;
    std::vector<RadarPoint> merged3d;
    std::uint64_t seed = 0;
    bool degenerate_outline = false;  // hull failed, surface-only budget
    std::size_t prior_count = 0;
    std::size_t key_count = 0;
    std::vector<double> segment_curvatures;
};

struct FrameReport {
    std::vector<DensifiedInstance> instances;
    std::vector<int> skipped_instance_ids;          // zero associated points
    std::map<int, std::string> failed_instances;    // id -> error text
};

// ---------------------------------------------------------------------------
// Depth-mode filter (floored-depth mode; ties keep the smallest floor)

inline InstancePointSet depth_mode_filter(const std::vector<ProjectedPoint>& raw,
                                          const std::vector<std::vector<double>>& attrs,
                                          int instance_id) {
    if (raw.empty()) throw ValidationError("depth_mode_filter: empty input");
    std::map<long long, int> freq;
    for (const auto& p : raw) ++freq[static_cast<long long>(std::floor(p.d))];
    long long best_floor = freq.begin()->first;
    int best_count = freq.begin()->second;
    for (const auto& [fl, n] : freq) {
        if (n > best_count) {  // map iterates ascending, so ties keep the nearest
            best_floor = fl;
            best_count = n;
        }
    }
    InstancePointSet out;
    out.instance_id = instance_id;
    double depth_sum = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (static_cast<long long>(std::floor(raw[i].d)) != best_floor) continue;
        out.points2d.push_back(raw[i]);
        if (!attrs.empty()) out.source_attrs.push_back(attrs[i]);
        depth_sum += raw[i].d;
    }
    out.mode_depth = depth_sum / static_cast<double>(out.points2d.size());
    return out;
}

// ---------------------------------------------------------------------------
// Key-point selection: back-project priors, rank by 3-D KDE, keep top-T.

inline KeyPointSet select_key_points(const InstancePointSet& inst,
                                     const CalibratedFrame& frame,
                                     const SimDenConfig& cfg) {
    if (inst.points2d.empty()) throw ValidationError("select_key_points: empty instance");
    const auto pts3d = back_project(inst.points2d, frame);
    std::vector<std::vector<double>> coords;
    coords.reserve(pts3d.size());
    for (const auto& p : pts3d) coords.push_back({p.x, p.y, p.z});

    const auto bw = bandwidth(cfg.bandwidth_rule, coords.size(), 3, cfg.user_bandwidth);
    const auto order = density_rank(coords, bw, cfg.kernel, cfg.gamma, cfg.distance_form);

    KeyPointSet keys;
    const std::size_t t = std::min<std::size_t>(cfg.max_key_points, pts3d.size());
    for (std::size_t i = 0; i < t; ++i) keys.points3d.push_back(pts3d[order[i]]);

    for (const auto& p : keys.points3d) {
        keys.center3d.x += p.x;
        keys.center3d.y += p.y;
        keys.center3d.z += p.z;
    }
    keys.center3d.x /= static_cast<double>(t);
    keys.center3d.y /= static_cast<double>(t);
    keys.center3d.z /= static_cast<double>(t);

    // mu = D_I D_E p_c with perspective division.
    const auto cam = frame.extrinsic.apply_h(keys.center3d);
    const Vec3 pix = frame.intrinsic.apply({cam[0], cam[1], cam[2]});
    if (!(pix.z > 0.0))
        throw ValidationError("select_key_points: key-point center projects behind camera");
    keys.center2d = {pix.x / pix.z, pix.y / pix.z};

    // Covariance from the 2-D priors when >= 3 exist; regularized below by
    // the caller when a mask-derived fallback is needed.
    if (inst.points2d.size() >= 3) {
        double mu_u = 0.0, mu_v = 0.0;
        for (const auto& p : inst.points2d) {
            mu_u += p.u;
            mu_v += p.v;
        }
        mu_u /= static_cast<double>(inst.points2d.size());
        mu_v /= static_cast<double>(inst.points2d.size());
        for (const auto& p : inst.points2d) {
            keys.cov_uu += (p.u - mu_u) * (p.u - mu_u);
            keys.cov_uv += (p.u - mu_u) * (p.v - mu_v);
            keys.cov_vv += (p.v - mu_v) * (p.v - mu_v);
        }
        const double denom = static_cast<double>(inst.points2d.size() - 1);
        keys.cov_uu /= denom;
        keys.cov_uv /= denom;
        keys.cov_vv /= denom;
    }
    keys.cov_uu += 1e-6;
    keys.cov_vv += 1e-6;
    return keys;
}

// ---------------------------------------------------------------------------
// Gaussian surface simulation

namespace detail {

struct MaskBox {
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // inclusive
};

inline MaskBox mask_bbox(const InstanceMask& mask) {
    MaskBox b{mask.width, mask.height, -1, -1};
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                b.min_x = std::min(b.min_x, x);
                b.min_y = std::min(b.min_y, y);
                b.max_x = std::max(b.max_x, x);
                b.max_y = std::max(b.max_y, y);
            }
    return b;
}

inline Vec2 nearest_mask_pixel(const InstanceMask& mask, const Vec2& p) {
    double best = 1e300;
    Vec2 out = p;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double d = (p.u - x) * (p.u - x) + (p.v - y) * (p.v - y);
            if (d < best) {
                best = d;
                out = {static_cast<double>(x), static_cast<double>(y)};
            }
        }
    }
    return out;
}

}  // namespace detail

// Draws n samples from N(mu, Sigma); samples falling outside the mask are
// resampled up to 10 times, then clamped to the nearest mask pixel. Pass
// mask = nullptr to skip the containment step (statistics tests use this).
inline std::vector<Vec2> gaussian_simulate(const KeyPointSet& keys, std::size_t n,
                                           Rng& rng, const InstanceMask* mask = nullptr) {
    // Cholesky of [[cov_uu, cov_uv], [cov_uv, cov_vv]].
    const double l11 = std::sqrt(keys.cov_uu);
    const double l21 = keys.cov_uv / l11;
    const double inner = keys.cov_vv - l21 * l21;
    if (!(inner > 0.0))
        throw ValidationError("gaussian_simulate: covariance not positive definite");
    const double l22 = std::sqrt(inner);

    std::vector<Vec2> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 s;
        bool inside = false;
        for (int attempt = 0; attempt < 10; ++attempt) {
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            s = {keys.center2d.u + l11 * z1, keys.center2d.v + l21 * z1 + l22 * z2};
            if (mask == nullptr ||
                mask->at(static_cast<int>(std::lround(s.u)),
                         static_cast<int>(std::lround(s.v)))) {
                inside = true;
                break;
            }
        }
        if (!inside && mask != nullptr) s = detail::nearest_mask_pixel(*mask, s);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Curvature (circumcircle via the Sine Theorem)

inline double segment_curvature(const Vec2& prev, const Vec2& mid, const Vec2& next,
                                double arc_step) {
    if (arc_step <= 1e-12) throw ZeroSegment("segment_curvature: arc step <= 1e-12");
    const double au = prev.u - mid.u, av = prev.v - mid.v;
    const double bu = next.u - mid.u, bv = next.v - mid.v;
    const double la = std::hypot(au, av);
    const double lb = std::hypot(bu, bv);
    if (la <= 1e-12 || lb <= 1e-12) throw ZeroSegment("segment_curvature: coincident points");
    // |sin| via the cross product; sqrt(1 - cos^2) loses half the digits
    // near collinearity.
    const double sin_t = std::min(1.0, std::abs(au * bv - av * bu) / (la * lb));
    if (sin_t < 1e-12) return 0.0;  // collinear
    return sin_t / arc_step;
}

// Riemann-sum curvature over one edge segment: sum of sin(theta_r) over the
// interior vertices of the (R+2)-point path.
inline double path_curvature(const std::vector<Vec2>& pts) {
    if (pts.size() < 3) throw ValidationError("path_curvature: need >= 3 points");
    double total = 0.0;
    for (std::size_t r = 1; r + 1 < pts.size(); ++r) {
        const double step = std::hypot(pts[r].u - pts[r - 1].u, pts[r].v - pts[r - 1].v);
        total += segment_curvature(pts[r - 1], pts[r], pts[r + 1], step) * step;
    }
    return total;
}

// Equidistant interpolation toward the previous point, weighted by curvature.
inline Vec2 interpolate_outline(const Vec2& p_r, const Vec2& p_prev, double omega) {
    if (omega < 0.0) throw ValidationError("interpolate_outline: omega must be >= 0");
    return {(p_r.u + omega * p_prev.u) / (1.0 + omega),
            (p_r.v + omega * p_prev.v) / (1.0 + omega)};
}

// ---------------------------------------------------------------------------
// Per-instance densification

inline DensifiedInstance densify_instance(const InstancePointSet& inst,
                                          const InstanceMask& mask,
                                          const CalibratedFrame& frame,
                                          const SimDenConfig& cfg, Rng& rng) {
    cfg.validate();
    DensifiedInstance out;
    out.instance_id = inst.instance_id;
    out.seed = rng.seed();
    out.prior_count = inst.points2d.size();

    KeyPointSet keys = select_key_points(inst, frame, cfg);
    out.key_count = keys.points3d.size();

    const auto box = detail::mask_bbox(mask);
    if (inst.points2d.size() < 3) {
        // Too few priors for a covariance estimate: isotropic from the mask
        // bounding box, ~3 sigma inside.
        const double w = static_cast<double>(box.max_x - box.min_x + 1);
        const double h = static_cast<double>(box.max_y - box.min_y + 1);
        keys.cov_uu = (w / 6.0) * (w / 6.0) + 1e-6;
        keys.cov_vv = (h / 6.0) * (h / 6.0) + 1e-6;
        keys.cov_uv = 0.0;
    }

    const int total = cfg.points_per_instance;
    int outline_budget = static_cast<int>(std::floor(total * cfg.outline_fraction));
    int surface_budget = total - outline_budget;

    out.surface2d = gaussian_simulate(keys, static_cast<std::size_t>(surface_budget),
                                      rng, &mask);

    // Outline: hull of priors + surface points, resampled edge points,
    // referring points per segment, curvature-weighted interpolation.
    std::vector<Vec2> candidates;
    if (outline_budget > 0) {
        std::vector<Vec2> cloud;
        cloud.reserve(inst.points2d.size() + out.surface2d.size());
        for (const auto& p : inst.points2d) cloud.push_back({p.u, p.v});
        for (const auto& p : out.surface2d) cloud.push_back(p);
        try {
            const auto edge = extract_edge_points(cloud, cfg.edge_point_count);
            const auto refs = insert_referring_points(edge, cfg.referring_point_count);
            const std::size_t n = edge.vertices.size();
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<Vec2> path;
                path.reserve(refs[i].size() + 2);
                path.push_back(edge.vertices[i]);
                for (const auto& p : refs[i]) path.push_back(p);
                path.push_back(edge.vertices[(i + 1) % n]);
                const double omega = path_curvature(path);
                out.segment_curvatures.push_back(omega);
                for (const auto& p : refs[i])
                    candidates.push_back(interpolate_outline(p, edge.vertices[i], omega));
            }
        } catch (const DegenerateInput&) {
            out.degenerate_outline = true;
        }
    }

    if (out.degenerate_outline || candidates.empty()) {
        // Surface-only fallback keeps the count contract.
        if (outline_budget > 0) {
            auto extra = gaussian_simulate(keys, static_cast<std::size_t>(outline_budget),
                                           rng, &mask);
            out.surface2d.insert(out.surface2d.end(), extra.begin(), extra.end());
        }
        outline_budget = 0;
    } else if (static_cast<int>(candidates.size()) <= outline_budget) {
        out.outline2d = candidates;
        const int short_by = outline_budget - static_cast<int>(candidates.size());
        if (short_by > 0) {
            auto extra = gaussian_simulate(keys, static_cast<std::size_t>(short_by),
                                           rng, &mask);
            out.surface2d.insert(out.surface2d.end(), extra.begin(), extra.end());
        }
    } else {
        // Even stride over the candidate ring.
        out.outline2d.reserve(outline_budget);
        for (int k = 0; k < outline_budget; ++k) {
            const std::size_t idx =
                static_cast<std::size_t>(k) * candidates.size() / outline_budget;
            out.outline2d.push_back(candidates[idx]);
        }
    }

    // Containment: everything stays inside the mask bbox dilated by 2 px.
    auto clamp_box = [&](Vec2& p) {
        p.u = std::clamp(p.u, static_cast<double>(box.min_x - 2),
                         static_cast<double>(box.max_x + 2));
        p.v = std::clamp(p.v, static_cast<double>(box.min_y - 2),
                         static_cast<double>(box.max_y + 2));
    };
    for (auto& p : out.surface2d) clamp_box(p);
    for (auto& p : out.outline2d) clamp_box(p);

    // Back-project with the instance mode depth and copy attributes from
    // the nearest 2-D prior.
    const Mat3 ki = frame.intrinsic.inverse();
    const Mat4 ei = frame.extrinsic.inverse();
    auto emit = [&](const Vec2& p) {
        const Vec3 world = back_project_one(p.u, p.v, inst.mode_depth, ki, ei);
        RadarPoint rp;
        rp.x = world.x;
        rp.y = world.y;
        rp.z = world.z;
        if (!inst.source_attrs.empty()) {
            std::size_t best = 0;
            double best_d = 1e300;
            for (std::size_t i = 0; i < inst.points2d.size(); ++i) {
                const double d = (inst.points2d[i].u - p.u) * (inst.points2d[i].u - p.u) +
                                 (inst.points2d[i].v - p.v) * (inst.points2d[i].v - p.v);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            rp.attrs = inst.source_attrs[best];
        }
        out.merged3d.push_back(rp);
    };
    for (const auto& p : out.surface2d) emit(p);
    for (const auto& p : out.outline2d) emit(p);
    return out;
}

// ---------------------------------------------------------------------------
// Frame-level densification

struct DensifyResult {
    CalibratedFrame frame;  // original points plus all generated points
    FrameReport report;
};

inline DensifyResult densify_frame(const CalibratedFrame& frame,
                                   const std::vector<InstanceMask>& masks,
                                   const SimDenConfig& cfg, std::uint64_t seed) {
    frame.validate();
    cfg.validate();
    DensifyResult res;
    res.frame = frame;

    const auto projected = project_points(frame);
    const auto assoc = associate_masks(projected, masks, frame.image_width,
                                       frame.image_height);
    const Rng parent(seed);

    // Instances processed in ascending instance_id for a stable output order.
    std::vector<std::size_t> order(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return masks[a].instance_id < masks[b].instance_id;
    });

    for (std::size_t k : order) {
        const auto& mask = masks[k];
        if (assoc[k].empty()) {
            res.report.skipped_instance_ids.push_back(mask.instance_id);
            continue;
        }
        try {
            std::vector<std::vector<double>> attrs;
            attrs.reserve(assoc[k].size());
            for (const auto& p : assoc[k]) attrs.push_back(frame.points[p.source_index].attrs);
            const auto inst = depth_mode_filter(assoc[k], attrs, mask.instance_id);
            Rng child(parent.child_seed(static_cast<std::uint64_t>(mask.instance_id)));
            auto densified = densify_instance(inst, mask, frame, cfg, child);
            for (const auto& p : densified.merged3d) res.frame.points.push_back(p);
            res.report.instances.push_back(std::move(densified));
        } catch (const Error& e) {
            res.report.failed_instances[mask.instance_id] = e.what();
        }
    }
    return res;
}

}  // namespace sdcm

#endif  // SDCM_DENSIFY_HPP
