#ifndef SDCM_DENSITY_HPP
#define SDCM_DENSITY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "sdcm/core.hpp"

// Kernel density estimation (bandwidth rules, kernels, densities) and the
// density diagnostics: 2-D grid counts, BEV KDE surfaces, pillar statistics.

namespace sdcm {

struct BandwidthVector {
    std::vector<double> b;  // per-dimension, all > 0

    double product() const {
        double p = 1.0;
        for (double x : b) p *= x;
        return p;
    }
};

struct DensityGrid {
    double origin_x = 0.0, origin_y = 0.0;
    double cell_x = 1.0, cell_y = 1.0;
    std::size_t nx = 0, ny = 0;
    std::vector<double> values;  // row-major [iy * nx + ix]

    double at(std::size_t ix, std::size_t iy) const { return values[iy * nx + ix]; }
    double& at(std::size_t ix, std::size_t iy) { return values[iy * nx + ix]; }
};

struct PillarHistogram {
    PillarConfig config;
    std::size_t nx = 0, ny = 0;
    std::vector<int> counts;           // capped at max_points_per_pillar
    std::vector<int> counts_uncapped;  // raw per-pillar totals

    int at(std::size_t ix, std::size_t iy) const { return counts[iy * nx + ix]; }
    int uncapped_at(std::size_t ix, std::size_t iy) const {
        return counts_uncapped[iy * nx + ix];
    }
};

// ---------------------------------------------------------------------------
// Bandwidth rules. Scott: W^(-1/(J+4)); Silverman: [W(J+2)/2]^(-1/(J+4));
// both produce equal components across dimensions.

inline BandwidthVector bandwidth(BandwidthRule rule, std::size_t w, std::size_t j,
                                 double user_value = 1.0) {
    if (w < 1 || j < 1) throw ValidationError("bandwidth: W and J must be >= 1");
    double b = 0.0;
    switch (rule) {
        case BandwidthRule::Scott:
            b = std::pow(static_cast<double>(w), -1.0 / (static_cast<double>(j) + 4.0));
            break;
        case BandwidthRule::Silverman:
            b = std::pow(static_cast<double>(w) * (static_cast<double>(j) + 2.0) / 2.0,
                         -1.0 / (static_cast<double>(j) + 4.0));
            break;
        case BandwidthRule::UserDefined:
            if (!(user_value > 0.0)) throw ValidationError("user_bandwidth must be > 0");
            b = user_value;
            break;
    }
    return {std::vector<double>(j, b)};
}

// ---------------------------------------------------------------------------
// Kernel shapes, evaluated on a nonnegative scaled distance r. The Gauss
// kernel takes gamma into account; the compact kernels ignore it.

inline double kernel_value(Kernel k, double r, double gamma = 1.0) {
    if (r < 0.0) throw ValidationError("kernel_value: r must be >= 0");
    switch (k) {
        case Kernel::Gauss:
            return std::exp(-gamma * r * r / 2.0);
        case Kernel::Epanechnikov:
            return r < 1.0 ? 0.75 * (1.0 - r * r) : 0.0;
        case Kernel::Uniform:
            return r <= 1.0 ? 0.5 : 0.0;
        case Kernel::Triangle:
            return r < 1.0 ? 1.0 - r : 0.0;
        case Kernel::Cosine:
            return r <= 1.0 ? (3.14159265358979323846 / 4.0) *
                                  std::cos(3.14159265358979323846 * r / 2.0)
                            : 0.0;
    }
    return 0.0;
}

namespace detail {

// Scaled distance between query and sample under the chosen form.
inline double scaled_distance(const std::vector<double>& q, const std::vector<double>& s,
                              const BandwidthVector& bw, DistanceForm form) {
    double acc = 0.0;
    if (form == DistanceForm::Manhattan) {
        for (std::size_t j = 0; j < q.size(); ++j)
            acc += std::abs(q[j] - s[j]) / bw.b[j];
        return acc;
    }
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double t = (q[j] - s[j]) / bw.b[j];
        acc += t * t;
    }
    return std::sqrt(acc);
}

}  // namespace detail

// K(p) = [1 / (W prod B_j)] sum_w kernel(r_w). Sample-wise KDE; the Gauss
// branch omits the (2pi)^(J/2) normalizer, so values are comparable for
// ranking, not probabilities.
inline double kde_density(const std::vector<double>& query,
                          const std::vector<std::vector<double>>& samples,
                          const BandwidthVector& bw, Kernel kernel, double gamma = 1.0,
                          DistanceForm form = DistanceForm::PerDimension) {
    if (samples.empty()) throw ValidationError("kde_density: need >= 1 sample");
    double sum = 0.0;
    for (const auto& s : samples)
        sum += kernel_value(kernel, detail::scaled_distance(query, s, bw, form), gamma);
    return sum / (static_cast<double>(samples.size()) * bw.product());
}

// Indices sorted by descending density; ties broken by ascending index.
inline std::vector<std::size_t> density_rank(const std::vector<std::vector<double>>& pts,
                                             const BandwidthVector& bw, Kernel kernel,
                                             double gamma = 1.0,
                                             DistanceForm form = DistanceForm::PerDimension) {
    std::vector<double> k(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        k[i] = kde_density(pts[i], pts, bw, kernel, gamma, form);
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return k[a] > k[b]; });
    return idx;
}

// ---------------------------------------------------------------------------
// 2-D grid-wise density: count points per uniform image grid cell.
// Cells are half-open [k*cell, (k+1)*cell); pixels on the image edge fall
// into the last cell.

inline DensityGrid grid_density_surface(const std::vector<Vec2>& points2d,
                                        int image_width, int image_height,
                                        int grid_cell) {
    if (grid_cell < 1) throw ValidationError("grid_cell must be >= 1 pixel");
    DensityGrid g;
    g.cell_x = g.cell_y = grid_cell;
    g.nx = static_cast<std::size_t>((image_width + grid_cell - 1) / grid_cell);
    g.ny = static_cast<std::size_t>((image_height + grid_cell - 1) / grid_cell);
    g.values.assign(g.nx * g.ny, 0.0);
    for (const auto& p : points2d) {
        if (p.u < 0.0 || p.v < 0.0 || p.u >= image_width || p.v >= image_height) continue;
        std::size_t ix = static_cast<std::size_t>(p.u / grid_cell);
        std::size_t iy = static_cast<std::size_t>(p.v / grid_cell);
        ix = std::min(ix, g.nx - 1);
        iy = std::min(iy, g.ny - 1);
        g.at(ix, iy) += 1.0;
    }
    return g;
}

// ---------------------------------------------------------------------------
// BEV KDE surface: evaluates the (x, y) marginal of the 3-D KDE on a
// lattice. For the Gauss kernel, integrating the z factor out is the same
// as dropping the z term, so only the (x, y) columns enter.

inline DensityGrid kde_surface_3d(const std::vector<Vec3>& points3d,
                                  const BandwidthVector& bw, Kernel kernel, double gamma,
                                  double x_min, double x_max, double y_min, double y_max,
                                  std::size_t nx, std::size_t ny) {
    if (!(x_max > x_min) || !(y_max > y_min) || nx == 0 || ny == 0)
        throw ValidationError("kde_surface_3d: lattice extents must be positive");
    if (points3d.empty()) throw ValidationError("kde_surface_3d: need >= 1 point");
    BandwidthVector bw2{{bw.b[0], bw.b.size() > 1 ? bw.b[1] : bw.b[0]}};
    std::vector<std::vector<double>> samples;
    samples.reserve(points3d.size());
    for (const auto& p : points3d) samples.push_back({p.x, p.y});

    DensityGrid g;
    g.origin_x = x_min;
    g.origin_y = y_min;
    g.cell_x = (x_max - x_min) / static_cast<double>(nx);
    g.cell_y = (y_max - y_min) / static_cast<double>(ny);
    g.nx = nx;
    g.ny = ny;
    g.values.assign(nx * ny, 0.0);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const std::vector<double> q = {x_min + (ix + 0.5) * g.cell_x,
                                           y_min + (iy + 0.5) * g.cell_y};
            g.at(ix, iy) = kde_density(q, samples, bw2, kernel, gamma);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// BEV pillar statistics. Out-of-range points are dropped; counts are
// reported both raw and capped at max_points_per_pillar. When more than
// max_pillars pillars are nonempty, the highest-count pillars are kept.

inline PillarHistogram pillarize(const std::vector<RadarPoint>& points,
                                 const PillarConfig& cfg) {
    cfg.validate();
    PillarHistogram h;
    h.config = cfg;
    h.nx = static_cast<std::size_t>(std::ceil((cfg.x_max - cfg.x_min) / cfg.dx - 1e-9));
    h.ny = static_cast<std::size_t>(std::ceil((cfg.y_max - cfg.y_min) / cfg.dy - 1e-9));
    h.counts_uncapped.assign(h.nx * h.ny, 0);
    for (const auto& p : points) {
        if (p.x < cfg.x_min || p.x >= cfg.x_max) continue;
        if (p.y < cfg.y_min || p.y >= cfg.y_max) continue;
        if (p.z < cfg.z_min || p.z >= cfg.z_max) continue;
        std::size_t ix = static_cast<std::size_t>((p.x - cfg.x_min) / cfg.dx);
        std::size_t iy = static_cast<std::size_t>((p.y - cfg.y_min) / cfg.dy);
        ix = std::min(ix, h.nx - 1);
        iy = std::min(iy, h.ny - 1);
        ++h.counts_uncapped[iy * h.nx + ix];
    }

    // Enforce the pillar cap on the uncapped view before capping per pillar.
    std::vector<std::size_t> nonempty;
    for (std::size_t i = 0; i < h.counts_uncapped.size(); ++i)
        if (h.counts_uncapped[i] > 0) nonempty.push_back(i);
    if (nonempty.size() > static_cast<std::size_t>(cfg.max_pillars)) {
        std::stable_sort(nonempty.begin(), nonempty.end(), [&](std::size_t a, std::size_t b) {
            return h.counts_uncapped[a] > h.counts_uncapped[b];
        });
        for (std::size_t k = static_cast<std::size_t>(cfg.max_pillars);
             k < nonempty.size(); ++k)
            h.counts_uncapped[nonempty[k]] = 0;
    }

    h.counts = h.counts_uncapped;
    for (auto& c : h.counts) c = std::min(c, cfg.max_points_per_pillar);
    return h;
}

}  // namespace sdcm

#endif  // SDCM_DENSITY_HPP
