#include <catch2/catch_amalgamated.hpp>

#include "sdcm/core.hpp"

using namespace sdcm;

TEST_CASE("rng: same seed gives identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 64; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c(42), d(42);
    for (int i = 0; i < 64; ++i) REQUIRE(c.normal() == d.normal());
}

TEST_CASE("rng: different seeds diverge") {
    Rng a(1), b(2);
    bool any_diff = false;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() != b.next_u64()) any_diff = true;
    REQUIRE(any_diff);
}

TEST_CASE("rng: standard normal sample mean, N = 1e5") {
    Rng rng(42);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += rng.normal();
    REQUIRE(std::abs(sum / n) < 0.02);
}

TEST_CASE("rng: child seeds are distinct") {
    Rng rng(7);
    REQUIRE(rng.child_seed(0) != rng.child_seed(1));
    REQUIRE(rng.child_seed(1) != rng.child_seed(2));
}

TEST_CASE("SimDenConfig validation names the offending field") {
    SimDenConfig c;
    REQUIRE_NOTHROW(c.validate());

    c.gamma = 0.0;
    REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("gamma"));
    c = SimDenConfig{};

    c.max_key_points = 0;
    REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("max_key_points"));
    c = SimDenConfig{};

    c.edge_point_count = 2;
    REQUIRE_THROWS_WITH(c.validate(),
                        Catch::Matchers::ContainsSubstring("edge_point_count"));
    c = SimDenConfig{};

    c.referring_point_count = 0;
    REQUIRE_THROWS_WITH(c.validate(),
                        Catch::Matchers::ContainsSubstring("referring_point_count"));
    c = SimDenConfig{};

    c.points_per_instance = 0;
    REQUIRE_THROWS_WITH(c.validate(),
                        Catch::Matchers::ContainsSubstring("points_per_instance"));
}

TEST_CASE("PillarConfig presets and validation") {
    REQUIRE_NOTHROW(PillarConfig::vod().validate());
    REQUIRE_NOTHROW(PillarConfig::tj4d().validate());
    REQUIRE_NOTHROW(PillarConfig::astyx().validate());
    REQUIRE_NOTHROW(PillarConfig::bev1m().validate());

    auto c = PillarConfig::vod();
    REQUIRE(c.x_max == 51.20);
    REQUIRE(c.dx == 0.16);
    REQUIRE(c.max_points_per_pillar == 5);

    c.dx = 0.0;
    REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("pillar_size"));
    c = PillarConfig::vod();
    c.x_max = c.x_min;
    REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("x_range"));
}

TEST_CASE("LossConfig defaults carry the training constants") {
    LossConfig c;
    REQUIRE(c.alpha == 0.25);
    REQUIRE(c.sigma == 2.0);
    REQUIRE(c.beta == 0.1);
    REQUIRE(c.lambda1 == 1.0);
    REQUIRE(c.lambda2 == 1.0);
    REQUIRE(c.lambda3 == 2.0);
    REQUIRE(c.lambda4 == 0.2);
    REQUIRE_NOTHROW(c.validate());

    c.alpha = 1.5;
    REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("alpha"));
    c = LossConfig{};
    c.beta = 0.0;
    REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("beta"));
}

TEST_CASE("frame validation") {
    CalibratedFrame f;
    f.image_width = 64;
    f.image_height = 48;
    f.intrinsic = Mat3::identity();
    REQUIRE_NOTHROW(f.validate());

    f.extrinsic(3, 3) = 2.0;
    REQUIRE_THROWS_AS(f.validate(), ValidationError);
    f.extrinsic(3, 3) = 1.0;

    f.intrinsic = Mat3{};  // zero matrix
    REQUIRE_THROWS_AS(f.validate(), ValidationError);
}

TEST_CASE("types are value semantic") {
    CalibratedFrame a;
    a.image_width = 10;
    a.image_height = 10;
    a.intrinsic = Mat3::identity();
    a.points.push_back({1.0, 2.0, 3.0, {}});
    CalibratedFrame b = a;
    b.points[0].x = 99.0;
    REQUIRE(a.points[0].x == 1.0);
}
