#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "sdcm/io.hpp"

using namespace sdcm;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(SDCM_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

struct Workspace {
    fs::path dir;

    Workspace() {
        dir = fs::temp_directory_path() /
              ("sdcm_cli_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(dir);

        CalibratedFrame f;
        f.image_width = 640;
        f.image_height = 480;
        f.intrinsic = Mat3::identity();
        f.intrinsic(0, 0) = 300.0;
        f.intrinsic(1, 1) = 300.0;
        f.intrinsic(0, 2) = 320.0;
        f.intrinsic(1, 2) = 240.0;
        io::save_calib(f, path("calib.json"));

        // Three clusters of 10 points at depths 5, 6, 7 behind square masks.
        io::CloudData cloud;
        cloud.fields = {"x", "y", "z", "rcs"};
        Rng rng(55);
        std::vector<InstanceMask> masks;
        for (int i = 0; i < 3; ++i) {
            const double cx = 120.0 + 150.0 * i;
            const double cy = 240.0;
            const double depth = 5.0 + i;
            for (int k = 0; k < 10; ++k) {
                const double u = cx + rng.uniform(-8.0, 8.0);
                const double v = cy + rng.uniform(-8.0, 8.0);
                const double d = depth + rng.uniform(0.0, 0.9);
                cloud.points.push_back({(u - 320.0) * d / 300.0, (v - 240.0) * d / 300.0,
                                        d, {static_cast<double>(i)}});
            }
            InstanceMask m;
            m.instance_id = i + 1;
            m.width = 640;
            m.height = 480;
            m.mask.assign(640 * 480, 0);
            for (int y = 215; y <= 265; ++y)
                for (int x = static_cast<int>(cx) - 25; x <= static_cast<int>(cx) + 25; ++x)
                    m.mask[static_cast<std::size_t>(y) * 640 + x] = 1;
            masks.push_back(std::move(m));
        }
        io::save_cloud(cloud, path("cloud.csv"));
        io::save_masks(masks, path("masks.json"));
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli: bad invocations exit with the validation code") {
    CHECK(run("") == 2);
    CHECK(run("transmogrify") == 2);
    Workspace ws;
    CHECK(run("densify --calib " + ws.path("calib.json") + " --cloud " +
              ws.path("cloud.csv") + " --out " + ws.path("out.csv")) == 2);
}

TEST_CASE("cli: missing input file exits with the I/O code") {
    Workspace ws;
    CHECK(run("densify --calib " + ws.path("nope.json") + " --cloud " +
              ws.path("cloud.csv") + " --masks " + ws.path("masks.json") + " --out " +
              ws.path("out.csv")) == 3);
}

TEST_CASE("cli: densify adds 200 points per instance and reports them") {
    Workspace ws;
    const std::string cmd = "densify --calib " + ws.path("calib.json") + " --cloud " +
                            ws.path("cloud.csv") + " --masks " + ws.path("masks.json") +
                            " --out " + ws.path("out.csv") + " --report " +
                            ws.path("report.json") + " --seed 42";
    REQUIRE(run(cmd) == 0);
    const auto text = slurp(ws.path("out.csv"));
    CHECK(line_count(text) == 1 + 30 + 3 * 200);  // header + priors + generated

    const auto report = io::detail::parse_file(ws.path("report.json"));
    REQUIRE(report["instances"].size() == 3);
    for (const auto& inst : report["instances"])
        CHECK(inst["generated_count"] == 200);
}

TEST_CASE("cli: densify is reproducible for a fixed seed") {
    Workspace ws;
    const std::string base = "densify --calib " + ws.path("calib.json") + " --cloud " +
                             ws.path("cloud.csv") + " --masks " + ws.path("masks.json") +
                             " --seed 42 --out ";
    REQUIRE(run(base + ws.path("a.csv")) == 0);
    REQUIRE(run(base + ws.path("b.csv")) == 0);
    CHECK(slurp(ws.path("a.csv")) == slurp(ws.path("b.csv")));

    REQUIRE(run("densify --calib " + ws.path("calib.json") + " --cloud " +
                ws.path("cloud.csv") + " --masks " + ws.path("masks.json") +
                " --seed 7 --out " + ws.path("c.csv")) == 0);
    CHECK(slurp(ws.path("a.csv")) != slurp(ws.path("c.csv")));
}

TEST_CASE("cli: analyze pillars with the vod preset") {
    Workspace ws;
    REQUIRE(run("analyze --mode pillars --cloud " + ws.path("cloud.csv") +
                " --pillar-preset vod --out " + ws.path("pillars.csv")) == 0);
    const auto text = slurp(ws.path("pillars.csv"));
    CHECK(text.find("nx=320 ny=320") != std::string::npos);
    CHECK(line_count(text) == 1 + 320);
}

TEST_CASE("cli: analyze grid2d on an off-image cloud is all zeros") {
    Workspace ws;
    {
        std::ofstream out(ws.path("far.csv"));
        out << "x,y,z\n0,0,-5\n";  // behind the camera
    }
    REQUIRE(run("analyze --mode grid2d --calib " + ws.path("calib.json") + " --cloud " +
                ws.path("far.csv") + " --grid-cell 32 --out " + ws.path("grid.csv")) == 0);
    const auto text = slurp(ws.path("grid.csv"));
    CHECK(text.find("nx=20 ny=15") != std::string::npos);
    for (char c : text.substr(text.find('\n') + 1))
        CHECK((c == '0' || c == ',' || c == '\n'));
}

TEST_CASE("cli: analyze kde3d over instance scope") {
    Workspace ws;
    REQUIRE(run("analyze --mode kde3d --calib " + ws.path("calib.json") + " --cloud " +
                ws.path("cloud.csv") + " --masks " + ws.path("masks.json") +
                " --scope instances --nx 16 --ny 16 --out " + ws.path("kde.csv")) == 0);
    const auto text = slurp(ws.path("kde.csv"));
    CHECK(text.find("nx=16 ny=16") != std::string::npos);
    CHECK(line_count(text) == 1 + 16);
}

TEST_CASE("cli: analyze rejects unknown modes and presets") {
    Workspace ws;
    CHECK(run("analyze --mode sideways --cloud " + ws.path("cloud.csv")) == 2);
    CHECK(run("analyze --mode pillars --cloud " + ws.path("cloud.csv") +
              " --pillar-preset kitti") == 2);
}

TEST_CASE("cli: fusion-check passes across seeds") {
    for (const char* seed : {"1", "42", "9001"})
        CHECK(run(std::string("fusion-check --seed ") + seed + " >/dev/null") == 0);
}
