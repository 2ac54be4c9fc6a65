#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sdcm/geometry.hpp"

using namespace sdcm;

namespace {

constexpr double kPi = 3.14159265358979323846;

CalibratedFrame identity_frame(int w = 640, int h = 480) {
    CalibratedFrame f;
    f.image_width = w;
    f.image_height = h;
    f.intrinsic = Mat3::identity();
    return f;
}

CalibratedFrame pinhole_frame(double focal, double cx, double cy, int w = 640,
                              int h = 480) {
    CalibratedFrame f = identity_frame(w, h);
    f.intrinsic(0, 0) = focal;
    f.intrinsic(1, 1) = focal;
    f.intrinsic(0, 2) = cx;
    f.intrinsic(1, 2) = cy;
    return f;
}

}  // namespace

TEST_CASE("project_points: identity transforms") {
    auto f = identity_frame();
    f.points.push_back({0.0, 0.0, 5.0, {}});
    const auto out = project_points(f);
    REQUIRE(out.size() == 1);
    CHECK(out[0].u == 0.0);
    CHECK(out[0].v == 0.0);
    CHECK(out[0].d == 5.0);
    CHECK(out[0].source_index == 0);
}

TEST_CASE("project_points: behind-camera point dropped") {
    auto f = identity_frame();
    f.points.push_back({0.0, 0.0, -1.0, {}});
    REQUIRE(project_points(f).empty());
}

TEST_CASE("project_points: pinhole perspective division") {
    auto f = identity_frame();
    f.intrinsic(0, 0) = 100.0;
    f.intrinsic(1, 1) = 100.0;
    f.points.push_back({1.0, 0.0, 10.0, {}});
    const auto out = project_points(f);
    REQUIRE(out.size() == 1);
    CHECK(out[0].u == Catch::Approx(10.0).margin(1e-12));
    CHECK(out[0].v == Catch::Approx(0.0).margin(1e-12));
    CHECK(out[0].d == Catch::Approx(10.0).margin(1e-12));
}

TEST_CASE("project_points: singular intrinsic") {
    auto f = identity_frame();
    f.intrinsic = Mat3{};
    f.points.push_back({0.0, 0.0, 5.0, {}});
    REQUIRE_THROWS_AS(project_points(f), SingularIntrinsic);
}

TEST_CASE("back_project: identity and pinhole inverses") {
    auto f = identity_frame();
    const auto w = back_project({{0.0, 0.0, 5.0, 0}}, f);
    REQUIRE(w.size() == 1);
    CHECK(w[0].x == Catch::Approx(0.0).margin(1e-12));
    CHECK(w[0].z == Catch::Approx(5.0).margin(1e-12));

    auto g = identity_frame();
    g.intrinsic(0, 0) = 100.0;
    g.intrinsic(1, 1) = 100.0;
    const auto w2 = back_project({{10.0, 0.0, 10.0, 0}}, g);
    REQUIRE(w2.size() == 1);
    CHECK(w2[0].x == Catch::Approx(1.0).margin(1e-9));
    CHECK(w2[0].y == Catch::Approx(0.0).margin(1e-9));
    CHECK(w2[0].z == Catch::Approx(10.0).margin(1e-9));
}

TEST_CASE("projection round-trip identity on retained points") {
    Rng rng(11);
    auto f = pinhole_frame(300.0, 320.0, 240.0);
    // A mild rotation about y plus translation; bottom row stays (0,0,0,1).
    const double a = 0.1;
    f.extrinsic(0, 0) = std::cos(a);
    f.extrinsic(0, 2) = std::sin(a);
    f.extrinsic(2, 0) = -std::sin(a);
    f.extrinsic(2, 2) = std::cos(a);
    f.extrinsic(0, 3) = 0.5;
    f.extrinsic(1, 3) = -0.2;
    f.extrinsic(2, 3) = 1.0;
    for (int i = 0; i < 200; ++i)
        f.points.push_back({rng.uniform(-3.0, 3.0), rng.uniform(-2.0, 2.0),
                            rng.uniform(2.0, 30.0), {}});
    const auto projected = project_points(f);
    REQUIRE(projected.size() > 50);
    const auto world = back_project(projected, f);
    for (std::size_t i = 0; i < projected.size(); ++i) {
        const auto& orig = f.points[projected[i].source_index];
        CHECK(world[i].x == Catch::Approx(orig.x).margin(1e-9));
        CHECK(world[i].y == Catch::Approx(orig.y).margin(1e-9));
        CHECK(world[i].z == Catch::Approx(orig.z).margin(1e-9));
    }
}

TEST_CASE("associate_masks: basic cases") {
    const std::vector<ProjectedPoint> pts = {{1, 1, 2, 0}, {2, 2, 2, 1}, {3, 3, 2, 2},
                                             {4, 4, 2, 3}, {5, 5, 2, 4}, {6, 6, 2, 5},
                                             {7, 7, 2, 6}};
    CHECK(associate_masks(pts, {}, 10, 10).empty());

    InstanceMask full;
    full.instance_id = 1;
    full.width = 10;
    full.height = 10;
    full.mask.assign(100, 1);
    const auto sets = associate_masks(pts, {full}, 10, 10);
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].size() == 7);

    REQUIRE_THROWS_AS(associate_masks(pts, {full}, 20, 20), DimensionMismatch);
}

TEST_CASE("associate_masks: brute-force membership oracle") {
    InstanceMask a, b;
    a.instance_id = 1;
    b.instance_id = 2;
    a.width = b.width = 40;
    a.height = b.height = 40;
    a.mask.assign(1600, 0);
    b.mask.assign(1600, 0);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
            a.mask[y * 40 + x] = 1;            // top-left 10x10
            b.mask[(y + 20) * 40 + x + 20] = 1;  // center 10x10
        }
    Rng rng(5);
    std::vector<ProjectedPoint> pts;
    for (int i = 0; i < 300; ++i)
        pts.push_back({rng.uniform(0.0, 40.0), rng.uniform(0.0, 40.0), 1.0,
                       static_cast<std::size_t>(i)});
    const auto sets = associate_masks(pts, {a, b}, 40, 40);
    std::size_t count_a = 0, count_b = 0;
    for (const auto& p : pts) {
        const int px = static_cast<int>(std::lround(p.u));
        const int py = static_cast<int>(std::lround(p.v));
        if (px >= 0 && px < 10 && py >= 0 && py < 10) ++count_a;
        if (px >= 20 && px < 30 && py >= 20 && py < 30) ++count_b;
    }
    CHECK(sets[0].size() == count_a);
    CHECK(sets[1].size() == count_b);
}

TEST_CASE("associate_masks is monotone under mask growth") {
    Rng rng(9);
    std::vector<ProjectedPoint> pts;
    for (int i = 0; i < 100; ++i)
        pts.push_back({rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0), 1.0,
                       static_cast<std::size_t>(i)});
    InstanceMask small, large;
    small.instance_id = large.instance_id = 1;
    small.width = large.width = 20;
    small.height = large.height = 20;
    small.mask.assign(400, 0);
    for (int y = 5; y < 10; ++y)
        for (int x = 5; x < 10; ++x) small.mask[y * 20 + x] = 1;
    large.mask = small.mask;
    for (int y = 3; y < 14; ++y)
        for (int x = 3; x < 14; ++x) large.mask[y * 20 + x] = 1;
    const auto s = associate_masks(pts, {small}, 20, 20)[0];
    const auto l = associate_masks(pts, {large}, 20, 20)[0];
    for (const auto& p : s) {
        bool found = false;
        for (const auto& q : l)
            if (q.source_index == p.source_index) found = true;
        CHECK(found);
    }
}

TEST_CASE("manhattan_matrix") {
    const auto h = manhattan_matrix({{0, 0, 0}, {1, 2, 3}});
    CHECK(h[0][1] == 6.0);
    CHECK(h[1][0] == 6.0);
    CHECK(h[0][0] == 0.0);

    const auto single = manhattan_matrix({{4.0, 5.0}});
    REQUIRE(single.size() == 1);
    CHECK(single[0][0] == 0.0);
}

TEST_CASE("manhattan_matrix: brute-force oracle and triangle inequality") {
    Rng rng(3);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 8; ++i)
        pts.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)});
    const auto h = manhattan_matrix(pts);
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j) s += std::abs(pts[a][j] - pts[b][j]);
            CHECK(h[a][b] == Catch::Approx(s).margin(1e-15));
        }
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t c = 0; c < 8; ++c)
                CHECK(h[a][c] <= h[a][b] + h[b][c] + 1e-12);
}

TEST_CASE("extract_edge_points: square corners") {
    const std::vector<Vec2> square = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const auto edge = extract_edge_points(square, 4);
    REQUIRE(edge.vertices.size() == 4);
    REQUIRE(edge.closed);
    // All four corners present, consecutive along the boundary.
    for (const auto& c : square) {
        bool found = false;
        for (const auto& v : edge.vertices)
            if (std::abs(v.u - c.u) < 1e-12 && std::abs(v.v - c.v) < 1e-12) found = true;
        CHECK(found);
    }
}

TEST_CASE("extract_edge_points: circle resampling oracle") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 100; ++i) {
        const double a = 2.0 * kPi * i / 100.0;
        pts.push_back({100.0 + 50.0 * std::cos(a), 100.0 + 50.0 * std::sin(a)});
    }
    const auto edge = extract_edge_points(pts, 20);
    REQUIRE(edge.vertices.size() == 20);
    for (const auto& v : edge.vertices) {
        const double r = std::hypot(v.u - 100.0, v.v - 100.0);
        CHECK(std::abs(r - 50.0) < 1.0);
    }
}

TEST_CASE("extract_edge_points: collinear input") {
    REQUIRE_THROWS_AS(extract_edge_points({{0, 0}, {1, 1}, {2, 2}}, 4), DegenerateInput);
}

TEST_CASE("extract_edge_points output is convex") {
    Rng rng(17);
    std::vector<Vec2> pts;
    for (int i = 0; i < 60; ++i)
        pts.push_back({rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)});
    const auto edge = extract_edge_points(pts, 12);
    const auto& v = edge.vertices;
    int sign = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % v.size()];
        const auto& c = v[(i + 2) % v.size()];
        const double cr = (b.u - a.u) * (c.v - b.v) - (b.v - a.v) * (c.u - b.u);
        if (std::abs(cr) < 1e-9) continue;  // resampled point inside a hull edge
        const int s = cr > 0.0 ? 1 : -1;
        if (sign == 0) sign = s;
        CHECK(s == sign);
    }
}

TEST_CASE("arc_referring_points: straight-chord degradation") {
    const auto pts = arc_referring_points({0, 0}, {10, 0}, {5, 0}, 4);
    REQUIRE(pts.size() == 4);
    CHECK(pts[0].u == Catch::Approx(2.0).margin(1e-12));
    CHECK(pts[1].u == Catch::Approx(4.0).margin(1e-12));
    CHECK(pts[2].u == Catch::Approx(6.0).margin(1e-12));
    CHECK(pts[3].u == Catch::Approx(8.0).margin(1e-12));
    for (const auto& p : pts) CHECK(p.v == 0.0);
}

TEST_CASE("arc_referring_points: R = 1 gives the path midpoint") {
    const auto pts = arc_referring_points({0, 0}, {10, 0}, {5, 0}, 1);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].u == Catch::Approx(5.0).margin(1e-12));
}

TEST_CASE("arc_referring_points: analytic arc oracle") {
    // Circle radius 10 about the origin; endpoints 90 degrees apart, control
    // on the circle at 45 degrees: referring points land at 9, 18, ..., 81.
    const Vec2 p0{10.0, 0.0};
    const Vec2 p1{0.0, 10.0};
    const Vec2 control{10.0 * std::cos(kPi / 4), 10.0 * std::sin(kPi / 4)};
    const auto pts = arc_referring_points(p0, p1, control, 9);
    REQUIRE(pts.size() == 9);
    for (int k = 1; k <= 9; ++k) {
        const double a = (kPi / 2.0) * k / 10.0;
        CHECK(pts[k - 1].u == Catch::Approx(10.0 * std::cos(a)).margin(1e-9));
        CHECK(pts[k - 1].v == Catch::Approx(10.0 * std::sin(a)).margin(1e-9));
    }
}

TEST_CASE("insert_referring_points: per-segment counts, endpoints excluded") {
    const auto edge = extract_edge_points({{0, 0}, {10, 0}, {10, 10}, {0, 10}}, 4);
    const auto refs = insert_referring_points(edge, 5);
    REQUIRE(refs.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(refs[i].size() == 5);
        for (const auto& p : refs[i]) {
            for (const auto& v : edge.vertices) {
                const double gap = std::hypot(p.u - v.u, p.v - v.v);
                CHECK(gap > 1e-9);
            }
        }
    }
}
