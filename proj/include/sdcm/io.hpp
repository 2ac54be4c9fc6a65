#ifndef SDCM_IO_HPP
#define SDCM_IO_HPP

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdcm/core.hpp"
#include "sdcm/density.hpp"
#include "sdcm/densify.hpp"

// File formats: JSON calibration, binary/CSV point clouds, JSON run-length
// masks, JSON configuration, CSV grid exports and the per-frame report.

namespace sdcm::io {

using nlohmann::json;

// Shortest round-trip float printing (std::to_chars).
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(tmp + ": cannot open for writing");
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Calibration file: {"intrinsic": [9], "extrinsic": [16], "image_width",
// "image_height"} (row-major)

inline CalibratedFrame load_calib(const std::string& path) {
    const json j = detail::parse_file(path);
    CalibratedFrame f;
    try {
        f.image_width = j.at("image_width").get<int>();
        f.image_height = j.at("image_height").get<int>();
        const auto ki = j.at("intrinsic").get<std::vector<double>>();
        const auto ke = j.at("extrinsic").get<std::vector<double>>();
        if (ki.size() != 9) throw ParseError(path + ": /intrinsic must hold 9 reals");
        if (ke.size() != 16) throw ParseError(path + ": /extrinsic must hold 16 reals");
        std::copy(ki.begin(), ki.end(), f.intrinsic.m.begin());
        std::copy(ke.begin(), ke.end(), f.extrinsic.m.begin());
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return f;
}

inline void save_calib(const CalibratedFrame& f, const std::string& path) {
    json j;
    j["image_width"] = f.image_width;
    j["image_height"] = f.image_height;
    j["intrinsic"] = std::vector<double>(f.intrinsic.m.begin(), f.intrinsic.m.end());
    j["extrinsic"] = std::vector<double>(f.extrinsic.m.begin(), f.extrinsic.m.end());
    detail::write_text_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Point cloud files. Two carriers:
//   *.csv           — header row naming the fields, one record per line
//   anything else   — little-endian float32 records; sidecar <path>.json
//                     with {"fields": [...]} fixes the stride
// The schema must include x, y, z; remaining fields become attributes.

struct CloudData {
    std::vector<std::string> fields;
    std::vector<RadarPoint> points;
};

namespace detail {

inline void split_schema(const std::vector<std::string>& fields, int& ix, int& iy,
                         int& iz, std::vector<std::string>& attr_names,
                         std::vector<int>& attr_cols) {
    ix = iy = iz = -1;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "x") ix = static_cast<int>(i);
        else if (fields[i] == "y") iy = static_cast<int>(i);
        else if (fields[i] == "z") iz = static_cast<int>(i);
        else {
            attr_names.push_back(fields[i]);
            attr_cols.push_back(static_cast<int>(i));
        }
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw ParseError("cloud schema must include x, y and z");
}

}  // namespace detail

inline CloudData load_cloud(const std::string& path) {
    CloudData out;
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
        std::ifstream in(path);
        if (!in) throw ParseError(path + ": cannot open");
        std::string line;
        if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) out.fields.push_back(cell);
        int ix, iy, iz;
        std::vector<std::string> attr_names;
        std::vector<int> attr_cols;
        detail::split_schema(out.fields, ix, iy, iz, attr_names, attr_cols);
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::stringstream ls(line);
            std::vector<double> row;
            while (std::getline(ls, cell, ',')) {
                try {
                    row.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw ParseError(path + ": line " + std::to_string(lineno) +
                                     ": bad number '" + cell + "'");
                }
            }
            if (row.size() != out.fields.size())
                throw ParseError(path + ": line " + std::to_string(lineno) +
                                 ": expected " + std::to_string(out.fields.size()) +
                                 " values");
            RadarPoint p;
            p.x = row[ix];
            p.y = row[iy];
            p.z = row[iz];
            for (int c : attr_cols) p.attrs.push_back(row[c]);
            out.points.push_back(std::move(p));
        }
        out.fields.clear();
        out.fields = {"x", "y", "z"};
        out.fields.insert(out.fields.end(), attr_names.begin(), attr_names.end());
        return out;
    }

    const json sidecar = detail::parse_file(path + ".json");
    std::vector<std::string> fields;
    try {
        fields = sidecar.at("fields").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(path + ".json: " + e.what());
    }
    int ix, iy, iz;
    std::vector<std::string> attr_names;
    std::vector<int> attr_cols;
    detail::split_schema(fields, ix, iy, iz, attr_names, attr_cols);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    const std::size_t stride = fields.size() * 4;
    if (bytes.size() % stride != 0)
        throw ParseError(path + ": byte length " + std::to_string(bytes.size()) +
                         " not divisible by stride " + std::to_string(stride) +
                         " (offset " + std::to_string(bytes.size() - bytes.size() % stride) +
                         ")");
    const std::size_t n = bytes.size() / stride;
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            float v;
            std::memcpy(&v, bytes.data() + r * stride + c * 4, 4);
            row[c] = static_cast<double>(v);
        }
        RadarPoint p;
        p.x = row[ix];
        p.y = row[iy];
        p.z = row[iz];
        for (int c : attr_cols) p.attrs.push_back(row[c]);
        out.points.push_back(std::move(p));
    }
    out.fields = {"x", "y", "z"};
    out.fields.insert(out.fields.end(), attr_names.begin(), attr_names.end());
    return out;
}

inline void save_cloud(const CloudData& cloud, const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
        std::ostringstream out;
        for (std::size_t i = 0; i < cloud.fields.size(); ++i)
            out << (i ? "," : "") << cloud.fields[i];
        out << "\n";
        for (const auto& p : cloud.points) {
            out << format_double(p.x) << "," << format_double(p.y) << ","
                << format_double(p.z);
            for (double a : p.attrs) out << "," << format_double(a);
            out << "\n";
        }
        detail::write_text_atomic(path, out.str());
        return;
    }
    std::string bytes;
    bytes.reserve(cloud.points.size() * cloud.fields.size() * 4);
    auto put = [&](double x) {
        const float v = static_cast<float>(x);
        char buf[4];
        std::memcpy(buf, &v, 4);
        bytes.append(buf, 4);
    };
    for (const auto& p : cloud.points) {
        put(p.x);
        put(p.y);
        put(p.z);
        for (double a : p.attrs) put(a);
    }
    detail::write_text_atomic(path, bytes);
    json sidecar;
    sidecar["fields"] = cloud.fields;
    detail::write_text_atomic(path + ".json", sidecar.dump(2) + "\n");
}

// Calibration plus cloud, fully validated.
inline CalibratedFrame load_frame(const std::string& calib_path,
                                  const std::string& cloud_path) {
    CalibratedFrame f = load_calib(calib_path);
    CloudData cloud = load_cloud(cloud_path);
    f.attr_schema.assign(cloud.fields.begin() + 3, cloud.fields.end());
    f.points = std::move(cloud.points);
    f.validate();
    return f;
}

// ---------------------------------------------------------------------------
// Mask file: JSON run-length encoding over the row-major raster.
// {"image_width", "image_height", "instances": [{"instance_id",
//  "runs": [[start, length], ...]}]}

inline std::vector<InstanceMask> load_masks(const std::string& path, int image_width,
                                            int image_height) {
    const json j = detail::parse_file(path);
    std::vector<InstanceMask> out;
    try {
        const int w = j.at("image_width").get<int>();
        const int h = j.at("image_height").get<int>();
        if (w != image_width || h != image_height)
            throw ValidationError(path + ": mask dimensions do not match the calibration");
        for (const auto& inst : j.at("instances")) {
            InstanceMask m;
            m.instance_id = inst.at("instance_id").get<int>();
            m.width = w;
            m.height = h;
            m.mask.assign(static_cast<std::size_t>(w) * h, 0);
            for (const auto& run : inst.at("runs")) {
                const std::size_t start = run.at(0).get<std::size_t>();
                const std::size_t len = run.at(1).get<std::size_t>();
                if (start + len > m.mask.size())
                    throw ValidationError(path + ": run exceeds the raster");
                std::fill(m.mask.begin() + start, m.mask.begin() + start + len, 1);
            }
            m.validate();
            for (const auto& prev : out)
                if (prev.instance_id == m.instance_id)
                    throw ValidationError(path + ": duplicate instance_id " +
                                          std::to_string(m.instance_id));
            out.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return out;
}

inline void save_masks(const std::vector<InstanceMask>& masks, const std::string& path) {
    if (masks.empty()) throw ValidationError("save_masks: empty mask list");
    json j;
    j["image_width"] = masks.front().width;
    j["image_height"] = masks.front().height;
    j["instances"] = json::array();
    for (const auto& m : masks) {
        json inst;
        inst["instance_id"] = m.instance_id;
        json runs = json::array();
        std::size_t i = 0;
        while (i < m.mask.size()) {
            if (!m.mask[i]) {
                ++i;
                continue;
            }
            std::size_t start = i;
            while (i < m.mask.size() && m.mask[i]) ++i;
            runs.push_back({start, i - start});
        }
        inst["runs"] = runs;
        j["instances"].push_back(inst);
    }
    detail::write_text_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Configuration file (JSON; every field optional, defaults apply)

inline const char* kernel_name(Kernel k) {
    switch (k) {
        case Kernel::Gauss: return "gauss";
        case Kernel::Epanechnikov: return "epanechnikov";
        case Kernel::Uniform: return "uniform";
        case Kernel::Triangle: return "triangle";
        case Kernel::Cosine: return "cosine";
    }
    return "gauss";
}

inline Kernel kernel_from_name(const std::string& s) {
    if (s == "gauss") return Kernel::Gauss;
    if (s == "epanechnikov") return Kernel::Epanechnikov;
    if (s == "uniform") return Kernel::Uniform;
    if (s == "triangle") return Kernel::Triangle;
    if (s == "cosine") return Kernel::Cosine;
    throw ParseError("unknown kernel '" + s + "'");
}

inline const char* rule_name(BandwidthRule r) {
    switch (r) {
        case BandwidthRule::Scott: return "scott";
        case BandwidthRule::Silverman: return "silverman";
        case BandwidthRule::UserDefined: return "user";
    }
    return "silverman";
}

inline BandwidthRule rule_from_name(const std::string& s) {
    if (s == "scott") return BandwidthRule::Scott;
    if (s == "silverman") return BandwidthRule::Silverman;
    if (s == "user") return BandwidthRule::UserDefined;
    throw ParseError("unknown bandwidth rule '" + s + "'");
}

inline json simden_to_json(const SimDenConfig& c) {
    json j;
    j["kernel"] = kernel_name(c.kernel);
    j["bandwidth_rule"] = rule_name(c.bandwidth_rule);
    j["user_bandwidth"] = c.user_bandwidth;
    j["gamma"] = c.gamma;
    j["max_key_points"] = c.max_key_points;
    j["edge_point_count"] = c.edge_point_count;
    j["referring_point_count"] = c.referring_point_count;
    j["points_per_instance"] = c.points_per_instance;
    j["outline_fraction"] = c.outline_fraction;
    j["distance_form"] =
        c.distance_form == DistanceForm::Manhattan ? "manhattan" : "per_dimension";
    j["rng_seed"] = c.rng_seed;
    return j;
}

inline SimDenConfig simden_from_json(const json& j) {
    SimDenConfig c;
    if (j.contains("kernel")) c.kernel = kernel_from_name(j["kernel"].get<std::string>());
    if (j.contains("bandwidth_rule"))
        c.bandwidth_rule = rule_from_name(j["bandwidth_rule"].get<std::string>());
    if (j.contains("user_bandwidth")) c.user_bandwidth = j["user_bandwidth"].get<double>();
    if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    if (j.contains("max_key_points")) c.max_key_points = j["max_key_points"].get<int>();
    if (j.contains("edge_point_count"))
        c.edge_point_count = j["edge_point_count"].get<int>();
    if (j.contains("referring_point_count"))
        c.referring_point_count = j["referring_point_count"].get<int>();
    if (j.contains("points_per_instance"))
        c.points_per_instance = j["points_per_instance"].get<int>();
    if (j.contains("outline_fraction"))
        c.outline_fraction = j["outline_fraction"].get<double>();
    if (j.contains("distance_form")) {
        const auto s = j["distance_form"].get<std::string>();
        if (s == "manhattan") c.distance_form = DistanceForm::Manhattan;
        else if (s == "per_dimension") c.distance_form = DistanceForm::PerDimension;
        else throw ParseError("unknown distance_form '" + s + "'");
    }
    if (j.contains("rng_seed")) c.rng_seed = j["rng_seed"].get<std::uint64_t>();
    c.validate();
    return c;
}

inline json pillar_to_json(const PillarConfig& c) {
    json j;
    j["x_range"] = {c.x_min, c.x_max};
    j["y_range"] = {c.y_min, c.y_max};
    j["z_range"] = {c.z_min, c.z_max};
    j["pillar_size"] = {c.dx, c.dy, c.dz};
    j["max_pillars"] = c.max_pillars;
    j["max_points_per_pillar"] = c.max_points_per_pillar;
    return j;
}

inline PillarConfig pillar_from_json(const json& j) {
    PillarConfig c = PillarConfig::vod();
    auto range = [&](const char* key, double& lo, double& hi) {
        if (!j.contains(key)) return;
        const auto v = j[key].get<std::vector<double>>();
        if (v.size() != 2) throw ParseError(std::string(key) + " must hold [min, max]");
        lo = v[0];
        hi = v[1];
    };
    range("x_range", c.x_min, c.x_max);
    range("y_range", c.y_min, c.y_max);
    range("z_range", c.z_min, c.z_max);
    if (j.contains("pillar_size")) {
        const auto v = j["pillar_size"].get<std::vector<double>>();
        if (v.size() != 3) throw ParseError("pillar_size must hold [dx, dy, dz]");
        c.dx = v[0];
        c.dy = v[1];
        c.dz = v[2];
    }
    if (j.contains("max_pillars")) c.max_pillars = j["max_pillars"].get<int>();
    if (j.contains("max_points_per_pillar"))
        c.max_points_per_pillar = j["max_points_per_pillar"].get<int>();
    c.validate();
    return c;
}

inline json loss_to_json(const LossConfig& c) {
    json j;
    j["alpha"] = c.alpha;
    j["sigma"] = c.sigma;
    j["beta"] = c.beta;
    j["lambdas"] = {c.lambda1, c.lambda2, c.lambda3, c.lambda4};
    return j;
}

inline LossConfig loss_from_json(const json& j) {
    LossConfig c;
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("sigma")) c.sigma = j["sigma"].get<double>();
    if (j.contains("beta")) c.beta = j["beta"].get<double>();
    if (j.contains("lambdas")) {
        const auto v = j["lambdas"].get<std::vector<double>>();
        if (v.size() != 4) throw ParseError("lambdas must hold 4 weights");
        c.lambda1 = v[0];
        c.lambda2 = v[1];
        c.lambda3 = v[2];
        c.lambda4 = v[3];
    }
    c.validate();
    return c;
}

struct ToolConfig {
    SimDenConfig simden;
    PillarConfig pillars = PillarConfig::vod();
    LossConfig loss;
};

inline ToolConfig load_config(const std::string& path) {
    const json j = detail::parse_file(path);
    ToolConfig c;
    try {
        if (j.contains("simden")) c.simden = simden_from_json(j["simden"]);
        if (j.contains("pillars")) c.pillars = pillar_from_json(j["pillars"]);
        if (j.contains("loss")) c.loss = loss_from_json(j["loss"]);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return c;
}

inline void save_config(const ToolConfig& c, const std::string& path) {
    json j;
    j["simden"] = simden_to_json(c.simden);
    j["pillars"] = pillar_to_json(c.pillars);
    j["loss"] = loss_to_json(c.loss);
    detail::write_text_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV exports (row-major; header line carries origin and cell size)

inline std::string grid_to_csv(const DensityGrid& g) {
    std::ostringstream out;
    out << "# origin_x=" << format_double(g.origin_x)
        << " origin_y=" << format_double(g.origin_y)
        << " cell_x=" << format_double(g.cell_x)
        << " cell_y=" << format_double(g.cell_y) << " nx=" << g.nx << " ny=" << g.ny
        << "\n";
    for (std::size_t iy = 0; iy < g.ny; ++iy) {
        for (std::size_t ix = 0; ix < g.nx; ++ix)
            out << (ix ? "," : "") << format_double(g.at(ix, iy));
        out << "\n";
    }
    return out.str();
}

inline std::string pillars_to_csv(const PillarHistogram& h, bool capped = false) {
    std::ostringstream out;
    out << "# origin_x=" << format_double(h.config.x_min)
        << " origin_y=" << format_double(h.config.y_min)
        << " cell_x=" << format_double(h.config.dx)
        << " cell_y=" << format_double(h.config.dy) << " nx=" << h.nx << " ny=" << h.ny
        << "\n";
    const auto& counts = capped ? h.counts : h.counts_uncapped;
    for (std::size_t iy = 0; iy < h.ny; ++iy) {
        for (std::size_t ix = 0; ix < h.nx; ++ix)
            out << (ix ? "," : "") << counts[iy * h.nx + ix];
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Per-frame densification report

inline json report_to_json(const FrameReport& r) {
    json j;
    j["instances"] = json::array();
    for (const auto& inst : r.instances) {
        json e;
        e["instance_id"] = inst.instance_id;
        e["prior_count"] = inst.prior_count;
        e["key_count"] = inst.key_count;
        e["surface_count"] = inst.surface2d.size();
        e["outline_count"] = inst.outline2d.size();
        e["generated_count"] = inst.merged3d.size();
        e["seed"] = inst.seed;
        e["degenerate_outline"] = inst.degenerate_outline;
        if (!inst.segment_curvatures.empty()) {
            double lo = inst.segment_curvatures.front(), hi = lo, sum = 0.0;
            for (double w : inst.segment_curvatures) {
                lo = std::min(lo, w);
                hi = std::max(hi, w);
                sum += w;
            }
            e["curvature_min"] = lo;
            e["curvature_max"] = hi;
            e["curvature_mean"] = sum / static_cast<double>(inst.segment_curvatures.size());
        }
        j["instances"].push_back(e);
    }
    j["skipped_instance_ids"] = r.skipped_instance_ids;
    j["failed_instances"] = json::object();
    for (const auto& [id, msg] : r.failed_instances)
        j["failed_instances"][std::to_string(id)] = msg;
    return j;
}

inline void save_report(const FrameReport& r, const std::string& path) {
    detail::write_text_atomic(path, report_to_json(r).dump(2) + "\n");
}

}  // namespace sdcm::io

#endif  // SDCM_IO_HPP
