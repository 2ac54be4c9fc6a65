#ifndef SDCM_GEOMETRY_HPP
#define SDCM_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sdcm/core.hpp"

// Projection between 3-D radar space and the image plane, mask association,
// distance matrices, and the edge/referring point machinery used by the
// densification pipeline.

namespace sdcm {

struct Polyline2D {
    std::vector<Vec2> vertices;
    bool closed = false;
};

// ---------------------------------------------------------------------------
// Projection
//
// Homogeneous convention: p_h = D_E * (x, y, z, 1); the first three
// components are then mapped by D_I (3x4 truncation after the extrinsic).
// Depth is the third component before perspective division.

inline std::vector<ProjectedPoint> project_points(const CalibratedFrame& frame) {
    if (std::abs(frame.intrinsic.det()) <= 1e-12)
        throw SingularIntrinsic("intrinsic matrix is singular");
    std::vector<ProjectedPoint> out;
    out.reserve(frame.points.size());
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        const auto& p = frame.points[i];
        const auto cam = frame.extrinsic.apply_h({p.x, p.y, p.z});
        const Vec3 pix = frame.intrinsic.apply({cam[0], cam[1], cam[2]});
        const double d = pix.z;
        if (d <= 0.0) continue;  // behind the camera
        const double u = pix.x / d;
        const double v = pix.y / d;
        if (u < 0.0 || u >= frame.image_width || v < 0.0 || v >= frame.image_height)
            continue;
        out.push_back({u, v, d, i});
    }
    return out;
}

inline Vec3 back_project_one(double u, double v, double d,
                             const Mat3& intrinsic_inv, const Mat4& extrinsic_inv) {
    // Undo perspective division, then the intrinsic, then the extrinsic.
    const Vec3 cam = intrinsic_inv.apply({u * d, v * d, d});
    const auto w = extrinsic_inv.apply_h(cam);
    return {w[0], w[1], w[2]};
}

inline std::vector<Vec3> back_project(const std::vector<ProjectedPoint>& pts,
                                      const CalibratedFrame& frame) {
    const Mat3 ki = frame.intrinsic.inverse();
    Mat4 ei;
    try {
        ei = frame.extrinsic.inverse();
    } catch (const SingularExtrinsic&) {
        throw;
    }
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        if (!(p.d > 0.0)) throw ValidationError("back_project: depth must be > 0");
        out.push_back(back_project_one(p.u, p.v, p.d, ki, ei));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mask association (union semantics: a point inside several masks joins each)

inline std::vector<std::vector<ProjectedPoint>> associate_masks(
    const std::vector<ProjectedPoint>& projected,
    const std::vector<InstanceMask>& masks, int image_width, int image_height) {
    std::vector<std::vector<ProjectedPoint>> sets(masks.size());
    for (std::size_t n = 0; n < masks.size(); ++n) {
        const auto& m = masks[n];
        if (m.width != image_width || m.height != image_height)
            throw DimensionMismatch("mask dimensions do not match the frame");
        for (const auto& p : projected) {
            const int px = static_cast<int>(std::lround(p.u));
            const int py = static_cast<int>(std::lround(p.v));
            if (m.at(px, py)) sets[n].push_back(p);
        }
    }
    return sets;
}

// ---------------------------------------------------------------------------
// Manhattan distance matrix (zero diagonal, symmetric)

inline std::vector<std::vector<double>> manhattan_matrix(
    const std::vector<std::vector<double>>& points) {
    const std::size_t w = points.size();
    std::vector<std::vector<double>> h(w, std::vector<double>(w, 0.0));
    for (std::size_t a = 0; a < w; ++a) {
        for (std::size_t b = a + 1; b < w; ++b) {
            double s = 0.0;
            for (std::size_t j = 0; j < points[a].size(); ++j)
                s += std::abs(points[a][j] - points[b][j]);
            h[a][b] = s;
            h[b][a] = s;
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Convex hull (Andrew monotone chain, strict: collinear candidates dropped)

namespace detail {

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u);
}

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.u < b.u || (a.u == b.u && a.v < b.v);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) {
                              return a.u == b.u && a.v == b.v;
                          }),
              pts.end());
    const std::size_t n = pts.size();
    if (n < 3) throw DegenerateInput("convex hull needs >= 3 distinct points");
    std::vector<Vec2> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) throw DegenerateInput("all points are collinear");
    return hull;  // counter-clockwise
}

inline double dist2(const Vec2& a, const Vec2& b) {
    return std::hypot(a.u - b.u, a.v - b.v);
}

}  // namespace detail

// Hull boundary resampled at `count` positions uniformly spaced by arc
// length, CCW, starting at the hull's first vertex.
inline Polyline2D extract_edge_points(const std::vector<Vec2>& points2d, int count) {
    if (count < 3) throw ValidationError("edge point count must be >= 3");
    const auto hull = detail::convex_hull(points2d);
    const std::size_t h = hull.size();

    std::vector<double> cum(h + 1, 0.0);
    for (std::size_t i = 0; i < h; ++i)
        cum[i + 1] = cum[i] + detail::dist2(hull[i], hull[(i + 1) % h]);
    const double perim = cum[h];

    Polyline2D out;
    out.closed = true;
    out.vertices.reserve(count);
    std::size_t seg = 0;
    for (int k = 0; k < count; ++k) {
        const double s = perim * k / count;
        while (seg + 1 < h && cum[seg + 1] <= s) ++seg;
        const double t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
        const Vec2& a = hull[seg];
        const Vec2& b = hull[(seg + 1) % h];
        out.vertices.push_back({a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Referring points
//
// The boundary path between two edge points is the circular arc through the
// endpoints and a control point pushed away from the outline centroid
// (bulge = chord/4). Collinear construction degrades to the straight chord.

namespace detail {

inline bool circumcenter(const Vec2& a, const Vec2& b, const Vec2& c, Vec2& out) {
    const double d = 2.0 * (a.u * (b.v - c.v) + b.u * (c.v - a.v) + c.u * (a.v - b.v));
    if (std::abs(d) < 1e-12) return false;
    const double a2 = a.u * a.u + a.v * a.v;
    const double b2 = b.u * b.u + b.v * b.v;
    const double c2 = c.u * c.u + c.v * c.v;
    out.u = (a2 * (b.v - c.v) + b2 * (c.v - a.v) + c2 * (a.v - b.v)) / d;
    out.v = (a2 * (c.u - b.u) + b2 * (a.u - c.u) + c2 * (b.u - a.u)) / d;
    return true;
}

}  // namespace detail

// R interior points, equally spaced by arc angle, along the circular arc
// from p0 to p1 passing through `control`. Falls back to equal division of
// the chord when the three points are collinear. Endpoints excluded.
inline std::vector<Vec2> arc_referring_points(const Vec2& p0, const Vec2& p1,
                                              const Vec2& control, int r_count) {
    std::vector<Vec2> out;
    out.reserve(r_count);
    Vec2 c;
    if (!detail::circumcenter(p0, control, p1, c)) {
        for (int k = 1; k <= r_count; ++k) {
            const double t = static_cast<double>(k) / (r_count + 1);
            out.push_back({p0.u + t * (p1.u - p0.u), p0.v + t * (p1.v - p0.v)});
        }
        return out;
    }
    const double radius = std::hypot(p0.u - c.u, p0.v - c.v);
    const double a0 = std::atan2(p0.v - c.v, p0.u - c.u);
    const double a1 = std::atan2(p1.v - c.v, p1.u - c.u);
    const double ac = std::atan2(control.v - c.v, control.u - c.u);
    const double two_pi = 2.0 * 3.14159265358979323846;
    auto wrap = [&](double x) {  // into [0, 2pi)
        x = std::fmod(x, two_pi);
        return x < 0.0 ? x + two_pi : x;
    };
    // Sweep in the direction that passes through the control point.
    double sweep = wrap(a1 - a0);
    if (sweep == 0.0) sweep = two_pi;
    if (!(wrap(ac - a0) < sweep)) sweep -= two_pi;
    for (int k = 1; k <= r_count; ++k) {
        const double a = a0 + sweep * k / (r_count + 1);
        out.push_back({c.u + radius * std::cos(a), c.v + radius * std::sin(a)});
    }
    return out;
}

// Per-segment referring points for a closed edge polyline.
inline std::vector<std::vector<Vec2>> insert_referring_points(const Polyline2D& edge,
                                                              int r_count) {
    if (!edge.closed) throw ValidationError("referring points need a closed edge polyline");
    if (r_count < 1) throw ValidationError("referring_point_count must be >= 1");
    const auto& v = edge.vertices;
    const std::size_t n = v.size();

    Vec2 centroid{0.0, 0.0};
    for (const auto& p : v) {
        centroid.u += p.u;
        centroid.v += p.v;
    }
    centroid.u /= static_cast<double>(n);
    centroid.v /= static_cast<double>(n);

    std::vector<std::vector<Vec2>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p0 = v[i];
        const Vec2& p1 = v[(i + 1) % n];
        const Vec2 mid{(p0.u + p1.u) / 2.0, (p0.v + p1.v) / 2.0};
        const double chord = detail::dist2(p0, p1);
        double du = mid.u - centroid.u;
        double dv = mid.v - centroid.v;
        const double len = std::hypot(du, dv);
        Vec2 control = mid;
        if (len > 1e-12 && chord > 1e-12) {
            control.u += du / len * chord / 4.0;
            control.v += dv / len * chord / 4.0;
        }
        out.push_back(arc_referring_points(p0, p1, control, r_count));
    }
    return out;
}

}  // namespace sdcm

#endif  // SDCM_GEOMETRY_HPP
