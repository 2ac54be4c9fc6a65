#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdcm/density.hpp"
#include "sdcm/densify.hpp"
#include "sdcm/fusioncheck.hpp"
#include "sdcm/geometry.hpp"
#include "sdcm/io.hpp"

// sdcm: radar point-cloud densification and density analysis tool.
//
// Exit codes: 0 success, 1 fusion-check property failure, 2 validation
// failure (including bad flags), 3 I/O failure.

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

int run_densify(const std::string& calib_path, const std::string& cloud_path,
                const std::string& masks_path, const std::string& out_path,
                const std::string& config_path, std::uint64_t seed,
                const std::string& report_path) {
    sdcm::io::ToolConfig cfg;
    if (!config_path.empty()) cfg = sdcm::io::load_config(config_path);

    const auto frame = sdcm::io::load_frame(calib_path, cloud_path);
    const auto masks =
        sdcm::io::load_masks(masks_path, frame.image_width, frame.image_height);

    const auto result = sdcm::densify_frame(frame, masks, cfg.simden, seed);

    sdcm::io::CloudData out;
    out.fields = {"x", "y", "z"};
    out.fields.insert(out.fields.end(), frame.attr_schema.begin(),
                      frame.attr_schema.end());
    out.points = result.frame.points;
    sdcm::io::save_cloud(out, out_path);
    if (!report_path.empty()) sdcm::io::save_report(result.report, report_path);

    std::cerr << "densified " << result.report.instances.size() << " instance(s), +"
              << (result.frame.points.size() - frame.points.size()) << " points\n";
    return kExitOk;
}

sdcm::PillarConfig preset_by_name(const std::string& name) {
    if (name == "vod") return sdcm::PillarConfig::vod();
    if (name == "tj4d") return sdcm::PillarConfig::tj4d();
    if (name == "astyx") return sdcm::PillarConfig::astyx();
    if (name == "bev1m") return sdcm::PillarConfig::bev1m();
    throw sdcm::ValidationError("unknown pillar preset '" + name + "'");
}

int run_analyze(const std::string& mode, const std::string& calib_path,
                const std::string& cloud_path, const std::string& masks_path,
                const std::string& out_path, const std::string& config_path,
                const std::string& pillar_preset, int grid_cell, std::size_t nx,
                std::size_t ny, const std::string& scope) {
    sdcm::io::ToolConfig cfg;
    if (!config_path.empty()) cfg = sdcm::io::load_config(config_path);
    if (!pillar_preset.empty()) cfg.pillars = preset_by_name(pillar_preset);

    std::string csv;
    if (mode == "pillars") {
        const auto cloud = sdcm::io::load_cloud(cloud_path);
        const auto hist = sdcm::pillarize(cloud.points, cfg.pillars);
        csv = sdcm::io::pillars_to_csv(hist);
    } else if (mode == "grid2d") {
        const auto frame = sdcm::io::load_frame(calib_path, cloud_path);
        const auto projected = sdcm::project_points(frame);
        std::vector<sdcm::Vec2> pts;
        pts.reserve(projected.size());
        for (const auto& p : projected) pts.push_back({p.u, p.v});
        csv = sdcm::io::grid_to_csv(sdcm::grid_density_surface(
            pts, frame.image_width, frame.image_height, grid_cell));
    } else if (mode == "kde3d") {
        const auto frame = sdcm::io::load_frame(calib_path, cloud_path);
        std::vector<sdcm::Vec3> pts;
        if (scope == "instances") {
            if (masks_path.empty())
                throw sdcm::ValidationError("--scope instances requires --masks");
            const auto masks = sdcm::io::load_masks(masks_path, frame.image_width,
                                                    frame.image_height);
            const auto projected = sdcm::project_points(frame);
            const auto assoc = sdcm::associate_masks(projected, masks,
                                                     frame.image_width,
                                                     frame.image_height);
            for (std::size_t k = 0; k < assoc.size(); ++k) {
                if (assoc[k].empty()) continue;
                std::vector<std::vector<double>> attrs;
                const auto inst = sdcm::depth_mode_filter(
                    assoc[k], attrs, masks[k].instance_id);
                for (const auto& w : sdcm::back_project(inst.points2d, frame))
                    pts.push_back(w);
            }
        } else {
            for (const auto& p : frame.points) pts.push_back({p.x, p.y, p.z});
        }
        if (pts.empty()) throw sdcm::ValidationError("kde3d: no points in scope");
        const auto bw = sdcm::bandwidth(cfg.simden.bandwidth_rule, pts.size(), 3,
                                        cfg.simden.user_bandwidth);
        csv = sdcm::io::grid_to_csv(sdcm::kde_surface_3d(
            pts, bw, cfg.simden.kernel, cfg.simden.gamma, cfg.pillars.x_min,
            cfg.pillars.x_max, cfg.pillars.y_min, cfg.pillars.y_max, nx, ny));
    } else {
        throw sdcm::ValidationError("unknown analyze mode '" + mode + "'");
    }

    if (out_path.empty() || out_path == "-")
        std::cout << csv;
    else
        sdcm::io::detail::write_text_atomic(out_path, csv);
    return kExitOk;
}

int run_fusion_check(std::uint64_t seed, std::size_t spatial, std::size_t channels) {
    const auto results = sdcm::fusion::run_fusion_checks(seed, spatial, channels);
    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.name
                  << " error=" << sdcm::io::format_double(r.error)
                  << " tolerance=" << sdcm::io::format_double(r.tolerance) << "\n";
        all_pass = all_pass && r.pass;
    }
    return all_pass ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radar point-cloud densification toolkit"};
    app.require_subcommand(1);

    // densify
    auto* densify = app.add_subcommand("densify", "densify a radar frame");
    std::string calib, cloud, masks, out, config, report;
    std::uint64_t seed = 0;
    densify->add_option("--calib", calib, "calibration JSON")->required();
    densify->add_option("--cloud", cloud, "point cloud (.csv or binary)")->required();
    densify->add_option("--masks", masks, "instance mask JSON")->required();
    densify->add_option("--out", out, "output cloud path")->required();
    densify->add_option("--config", config, "configuration JSON");
    densify->add_option("--seed", seed, "RNG seed");
    densify->add_option("--report", report, "per-frame report path");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "density diagnostics");
    std::string mode, a_calib, a_cloud, a_masks, a_out, a_config, preset;
    std::string scope = "frame";
    int grid_cell = 32;
    std::size_t nx = 64, ny = 64;
    analyze->add_option("--mode", mode, "kde3d | grid2d | pillars")->required();
    analyze->add_option("--calib", a_calib, "calibration JSON");
    analyze->add_option("--cloud", a_cloud, "point cloud")->required();
    analyze->add_option("--masks", a_masks, "instance mask JSON");
    analyze->add_option("--out", a_out, "output CSV ('-' for stdout)");
    analyze->add_option("--config", a_config, "configuration JSON");
    analyze->add_option("--pillar-preset", preset, "vod | tj4d | astyx | bev1m");
    analyze->add_option("--grid-cell", grid_cell, "grid2d cell size in pixels");
    analyze->add_option("--nx", nx, "kde3d lattice columns");
    analyze->add_option("--ny", ny, "kde3d lattice rows");
    analyze->add_option("--scope", scope, "kde3d point scope: frame | instances");

    // fusion-check
    auto* fusion = app.add_subcommand("fusion-check", "run the fusion property suite");
    std::uint64_t f_seed = 42;
    std::size_t f_spatial = 4, f_channels = 2;
    fusion->add_option("--seed", f_seed, "RNG seed for the property suite");
    fusion->add_option("--spatial", f_spatial, "toy spatial size");
    fusion->add_option("--channels", f_channels, "toy channel count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return kExitValidation;
    }

    try {
        if (densify->parsed())
            return run_densify(calib, cloud, masks, out, config, seed, report);
        if (analyze->parsed())
            return run_analyze(mode, a_calib, a_cloud, a_masks, a_out, a_config, preset,
                               grid_cell, nx, ny, scope);
        if (fusion->parsed()) return run_fusion_check(f_seed, f_spatial, f_channels);
    } catch (const sdcm::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const sdcm::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const sdcm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitValidation;
}
