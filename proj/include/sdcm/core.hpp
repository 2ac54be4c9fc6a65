#ifndef SDCM_CORE_HPP
#define SDCM_CORE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Shared domain types, configuration records and the deterministic RNG
// contract used by every other sdcm header.

namespace sdcm {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularIntrinsic : Error { using Error::Error; };
struct SingularExtrinsic : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct ZeroSegment : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct IndivisibleShape : Error { using Error::Error; };
struct UnstableParameter : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Small dense linear algebra (3x3 and 4x4, row-major)

struct Vec2 {
    double u = 0.0, v = 0.0;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct Mat3 {
    std::array<double, 9> m{};  // row-major

    static Mat3 identity() {
        Mat3 r;
        r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return r;
    }
    double operator()(int r, int c) const { return m[3 * r + c]; }
    double& operator()(int r, int c) { return m[3 * r + c]; }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    Mat3 inverse() const {
        const double d = det();
        if (std::abs(d) <= 1e-12)
            throw SingularIntrinsic("intrinsic matrix is singular (|det| <= 1e-12)");
        Mat3 r;
        r.m = {(m[4] * m[8] - m[5] * m[7]) / d, (m[2] * m[7] - m[1] * m[8]) / d,
               (m[1] * m[5] - m[2] * m[4]) / d, (m[5] * m[6] - m[3] * m[8]) / d,
               (m[0] * m[8] - m[2] * m[6]) / d, (m[2] * m[3] - m[0] * m[5]) / d,
               (m[3] * m[7] - m[4] * m[6]) / d, (m[1] * m[6] - m[0] * m[7]) / d,
               (m[0] * m[4] - m[1] * m[3]) / d};
        return r;
    }

    Vec3 apply(const Vec3& p) const {
        return {m[0] * p.x + m[1] * p.y + m[2] * p.z,
                m[3] * p.x + m[4] * p.y + m[5] * p.z,
                m[6] * p.x + m[7] * p.y + m[8] * p.z};
    }
};

struct Mat4 {
    std::array<double, 16> m{};  // row-major

    static Mat4 identity() {
        Mat4 r;
        for (int i = 0; i < 4; ++i) r.m[5 * i] = 1.0;
        return r;
    }
    double operator()(int r, int c) const { return m[4 * r + c]; }
    double& operator()(int r, int c) { return m[4 * r + c]; }

    // Gauss-Jordan with partial pivoting.
    Mat4 inverse() const {
        std::array<double, 16> a = m;
        Mat4 inv = identity();
        for (int col = 0; col < 4; ++col) {
            int pivot = col;
            for (int r = col + 1; r < 4; ++r)
                if (std::abs(a[4 * r + col]) > std::abs(a[4 * pivot + col])) pivot = r;
            if (std::abs(a[4 * pivot + col]) <= 1e-12)
                throw SingularExtrinsic("extrinsic matrix is singular");
            if (pivot != col) {
                for (int c = 0; c < 4; ++c) {
                    std::swap(a[4 * pivot + c], a[4 * col + c]);
                    std::swap(inv.m[4 * pivot + c], inv.m[4 * col + c]);
                }
            }
            const double p = a[4 * col + col];
            for (int c = 0; c < 4; ++c) {
                a[4 * col + c] /= p;
                inv.m[4 * col + c] /= p;
            }
            for (int r = 0; r < 4; ++r) {
                if (r == col) continue;
                const double f = a[4 * r + col];
                if (f == 0.0) continue;
                for (int c = 0; c < 4; ++c) {
                    a[4 * r + c] -= f * a[4 * col + c];
                    inv.m[4 * r + c] -= f * inv.m[4 * col + c];
                }
            }
        }
        return inv;
    }

    // Applies the homogeneous transform to (x, y, z, 1) and returns the
    // first three components together with the final w.
    std::array<double, 4> apply_h(const Vec3& p) const {
        std::array<double, 4> out{};
        const std::array<double, 4> in = {p.x, p.y, p.z, 1.0};
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) out[r] += m[4 * r + c] * in[c];
        return out;
    }
};

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// The stream is a pure function of the seed: the engine is std::mt19937_64
// (bit-exact by the standard) and every variate transform below is written
// out explicitly instead of going through the implementation-defined
// std::*_distribution adaptors.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the spare is cached so draw order is
    // fixed.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Child seed for splitting work across instances; splitmix64 finalizer
    // keeps children decorrelated from the parent and each other.
    std::uint64_t child_seed(std::uint64_t index) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Domain types

struct RadarPoint {
    double x = 0.0, y = 0.0, z = 0.0;  // meters, radar Cartesian frame
    std::vector<double> attrs;         // aligned with the frame's attr schema
};

struct CalibratedFrame {
    int image_width = 0;
    int image_height = 0;
    Mat3 intrinsic;                        // D_I
    Mat4 extrinsic = Mat4::identity();     // D_E
    std::vector<std::string> attr_schema;  // names of RadarPoint::attrs
    std::vector<RadarPoint> points;

    void validate() const {
        if (image_width <= 0) throw ValidationError("image_width must be > 0");
        if (image_height <= 0) throw ValidationError("image_height must be > 0");
        if (std::abs(intrinsic.det()) <= 1e-12)
            throw ValidationError("intrinsic must be invertible");
        if (extrinsic(3, 0) != 0.0 || extrinsic(3, 1) != 0.0 ||
            extrinsic(3, 2) != 0.0 || extrinsic(3, 3) != 1.0)
            throw ValidationError("extrinsic bottom row must be (0,0,0,1)");
        for (const auto& p : points) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
                throw ValidationError("points: coordinates must be finite");
            if (p.attrs.size() != attr_schema.size())
                throw ValidationError("points: attribute row does not match attr_schema");
        }
    }
};

struct ProjectedPoint {
    double u = 0.0, v = 0.0;  // pixels
    double d = 0.0;           // meters along the camera axis
    std::size_t source_index = 0;
};

struct InstanceMask {
    int instance_id = 0;
    int width = 0, height = 0;
    std::vector<std::uint8_t> mask;  // row-major, nonzero = inside

    bool at(int x, int y) const {
        if (x < 0 || y < 0 || x >= width || y >= height) return false;
        return mask[static_cast<std::size_t>(y) * width + x] != 0;
    }

    void validate() const {
        if (instance_id <= 0) throw ValidationError("instance_id must be positive");
        if (width <= 0 || height <= 0) throw ValidationError("mask dimensions must be > 0");
        if (mask.size() != static_cast<std::size_t>(width) * height)
            throw ValidationError("mask raster size does not match dimensions");
        bool any = false;
        for (auto p : mask)
            if (p) { any = true; break; }
        if (!any) throw ValidationError("mask must contain at least one true pixel");
    }
};

enum class Kernel { Gauss, Epanechnikov, Uniform, Triangle, Cosine };

enum class BandwidthRule { Scott, Silverman, UserDefined };

// Distance form fed into kernel evaluation; see density.hpp.
enum class DistanceForm { PerDimension, Manhattan };

struct SimDenConfig {
    Kernel kernel = Kernel::Gauss;
    BandwidthRule bandwidth_rule = BandwidthRule::Silverman;
    double user_bandwidth = 1.0;      // only read for UserDefined
    double gamma = 1.0;               // Gauss scaling factor
    int max_key_points = 4;           // cap T on key points
    int edge_point_count = 20;        // hull resample count
    int referring_point_count = 10;   // R points between edge pairs
    int points_per_instance = 200;
    double outline_fraction = 0.30;   // share of the budget spent on outline points
    DistanceForm distance_form = DistanceForm::PerDimension;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (bandwidth_rule == BandwidthRule::UserDefined && !(user_bandwidth > 0.0))
            throw ValidationError("user_bandwidth must be > 0");
        if (!(gamma > 0.0)) throw ValidationError("gamma must be > 0");
        if (max_key_points < 1) throw ValidationError("max_key_points must be >= 1");
        if (edge_point_count < 3) throw ValidationError("edge_point_count must be >= 3");
        if (referring_point_count < 1)
            throw ValidationError("referring_point_count must be >= 1");
        if (points_per_instance < 1)
            throw ValidationError("points_per_instance must be >= 1");
        if (outline_fraction < 0.0 || outline_fraction > 1.0)
            throw ValidationError("outline_fraction must be in [0, 1]");
    }
};

struct PillarConfig {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
    double z_min = 0.0, z_max = 0.0;
    double dx = 0.0, dy = 0.0, dz = 0.0;
    int max_pillars = 0;
    int max_points_per_pillar = 0;

    void validate() const {
        if (!(x_max > x_min)) throw ValidationError("x_range extent must be positive");
        if (!(y_max > y_min)) throw ValidationError("y_range extent must be positive");
        if (!(z_max > z_min)) throw ValidationError("z_range extent must be positive");
        if (!(dx > 0.0) || !(dy > 0.0) || !(dz > 0.0))
            throw ValidationError("pillar_size components must be positive");
        if (max_pillars <= 0) throw ValidationError("max_pillars must be positive");
        if (max_points_per_pillar <= 0)
            throw ValidationError("max_points_per_pillar must be positive");
    }

    // Dataset presets (training-time pillar caps).
    static PillarConfig vod() {
        return {0.0, 51.20, -25.60, 25.60, -3.0, 2.0, 0.16, 0.16, 0.16, 16000, 5};
    }
    static PillarConfig tj4d() {
        return {0.0, 69.12, -39.68, 39.68, -4.0, 2.0, 0.32, 0.32, 0.32, 16000, 5};
    }
    static PillarConfig astyx() {
        return {0.0, 76.80, -40.96, 40.96, -3.0, 1.0, 0.16, 0.16, 4.0, 16000, 5};
    }
    // 1 m x 1 m BEV statistics grid over the VoD range.
    static PillarConfig bev1m() {
        return {0.0, 51.20, -25.60, 25.60, -3.0, 2.0, 1.0, 1.0, 5.0, 16000, 1000000};
    }
};

struct LossConfig {
    double alpha = 0.25;  // focal class weight
    double sigma = 2.0;   // focal exponent
    double beta = 0.1;    // smooth-L1 threshold
    double lambda1 = 1.0, lambda2 = 1.0, lambda3 = 2.0, lambda4 = 0.2;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
        if (!(sigma >= 0.0)) throw ValidationError("sigma must be >= 0");
        if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
        if (lambda1 < 0.0) throw ValidationError("lambda1 must be >= 0");
        if (lambda2 < 0.0) throw ValidationError("lambda2 must be >= 0");
        if (lambda3 < 0.0) throw ValidationError("lambda3 must be >= 0");
        if (lambda4 < 0.0) throw ValidationError("lambda4 must be >= 0");
    }
};

}  // namespace sdcm

#endif  // SDCM_CORE_HPP
