#include "stdown/geo/stc_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace stdown::geo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json grid_to_json(const GeoGrid& g) {
    return {{"lat0", g.lat0}, {"lon0", g.lon0}, {"dlat", g.dlat},
            {"dlon", g.dlon}, {"nlat", g.nlat}, {"nlon", g.nlon}};
}

GeoGrid grid_from_json(const json& j) {
    GeoGrid g;
    g.lat0 = j.at("lat0").get<double>();
    g.lon0 = j.at("lon0").get<double>();
    g.dlat = j.at("dlat").get<double>();
    g.dlon = j.at("dlon").get<double>();
    g.nlat = j.at("nlat").get<std::int64_t>();
    g.nlon = j.at("nlon").get<std::int64_t>();
    g.validate();
    return g;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_f32(const fs::path& path, const std::vector<double>& values) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    std::vector<float> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<float>(values[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::vector<double> read_f32(const fs::path& path, std::size_t expect) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::vector<float> buf(expect);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expect * sizeof(float)));
    if (static_cast<std::size_t>(f.gcount()) != expect * sizeof(float))
        throw std::runtime_error(path.string() + " is shorter than the manifest promises");
    std::vector<double> out(expect);
    for (std::size_t i = 0; i < expect; ++i) out[i] = static_cast<double>(buf[i]);
    return out;
}

void write_mask(const fs::path& path, const std::vector<std::uint8_t>& mask) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
}

std::vector<std::uint8_t> read_mask(const fs::path& path, std::size_t expect) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::uint8_t> out(expect);
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expect));
    if (static_cast<std::size_t>(f.gcount()) != expect)
        throw std::runtime_error(path.string() + " is shorter than the manifest promises");
    for (auto& b : out) b = b ? 1 : 0;
    return out;
}

}  // namespace

void save_cube(const DataCube& cube, const std::string& dir) {
    cube.validate();
    fs::create_directories(dir);
    json schema = json::array();
    for (const auto& v : cube.schema.vars)
        schema.push_back({{"name", v.name}, {"kind", to_string(v.kind)}, {"units", v.units}});
    json manifest = {{"grid", grid_to_json(cube.grid)},
                     {"schema", schema},
                     {"times", cube.times},
                     {"dtype", "f32le"},
                     {"order", "T,H,W,C row-major"}};
    write_text(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
    write_f32(fs::path(dir) / "data.bin", cube.values);
    write_mask(fs::path(dir) / "mask.bin", cube.mask);
}

DataCube load_cube(const std::string& dir) {
    const json manifest = json::parse(read_text(fs::path(dir) / "manifest.json"));
    if (manifest.at("dtype").get<std::string>() != "f32le")
        throw std::runtime_error("unsupported dtype in " + dir);
    if (manifest.at("order").get<std::string>() != "T,H,W,C row-major")
        throw std::runtime_error("unsupported element order in " + dir);
    DataCube cube;
    cube.grid = grid_from_json(manifest.at("grid"));
    for (const auto& v : manifest.at("schema"))
        cube.schema.vars.push_back({v.at("name").get<std::string>(),
                                    var_kind_from_string(v.at("kind").get<std::string>()),
                                    v.at("units").get<std::string>()});
    cube.times = manifest.at("times").get<std::vector<std::int64_t>>();
    const auto n = static_cast<std::size_t>(cube.T() * cube.H() * cube.W() * cube.C());
    cube.values = read_f32(fs::path(dir) / "data.bin", n);
    cube.mask = read_mask(fs::path(dir) / "mask.bin", n);
    cube.validate();
    return cube;
}

void save_target(const TargetField& target, const std::string& dir) {
    DataCube cube;
    cube.grid = target.grid;
    cube.schema.vars = {{"sm", VarKind::dynamic, "m3/m3"}};
    cube.times = target.times;
    cube.values = target.values;
    cube.mask = target.mask;
    // target time axes may be sparse (native observation times), so skip
    // the uniform-step check done by save_cube
    fs::create_directories(dir);
    json schema = json::array();
    schema.push_back({{"name", "sm"}, {"kind", "dynamic"}, {"units", "m3/m3"}});
    json manifest = {{"grid", grid_to_json(cube.grid)},
                     {"schema", schema},
                     {"times", cube.times},
                     {"dtype", "f32le"},
                     {"order", "T,H,W,C row-major"}};
    write_text(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
    write_f32(fs::path(dir) / "data.bin", cube.values);
    write_mask(fs::path(dir) / "mask.bin", cube.mask);
}

TargetField load_target(const std::string& dir) {
    const json manifest = json::parse(read_text(fs::path(dir) / "manifest.json"));
    TargetField t;
    t.grid = grid_from_json(manifest.at("grid"));
    t.times = manifest.at("times").get<std::vector<std::int64_t>>();
    if (manifest.at("schema").size() != 1)
        throw std::runtime_error(dir + " is not a single-channel cube");
    const auto n = static_cast<std::size_t>(t.T() * t.H() * t.W());
    t.values = read_f32(fs::path(dir) / "data.bin", n);
    t.mask = read_mask(fs::path(dir) / "mask.bin", n);
    return t;
}

void save_stations(const std::vector<StationRecord>& stations, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "id,lat,lon,depth_cm,time_epoch,sm,quality\n";
    char buf[256];
    for (const auto& st : stations)
        for (const auto& s : st.series) {
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%lld,%.17g,%s\n", st.id.c_str(),
                          st.lat, st.lon, st.depth_cm, static_cast<long long>(s.time), s.sm,
                          s.quality.c_str());
            f << buf;
        }
}

std::vector<StationRecord> load_stations(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + " is empty");
    std::vector<StationRecord> out;
    auto find = [&](const std::string& id) -> StationRecord& {
        for (auto& st : out)
            if (st.id == id) return st;
        out.push_back({});
        out.back().id = id;
        return out.back();
    };
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, lat, lon, depth, time, sm, quality;
        std::getline(ss, id, ',');
        std::getline(ss, lat, ',');
        std::getline(ss, lon, ',');
        std::getline(ss, depth, ',');
        std::getline(ss, time, ',');
        std::getline(ss, sm, ',');
        std::getline(ss, quality);
        StationRecord& st = find(id);
        st.lat = std::stod(lat);
        st.lon = std::stod(lon);
        st.depth_cm = std::stod(depth);
        st.series.push_back({std::stoll(time), std::stod(sm), quality});
    }
    for (auto& st : out)
        std::stable_sort(st.series.begin(), st.series.end(),
                         [](const StationSample& a, const StationSample& b) { return a.time < b.time; });
    return out;
}

void save_norm_stats(const NormStats& stats, const ChannelStats& target_stats,
                     const std::string& path) {
    json channels = json::array();
    for (std::size_t c = 0; c < stats.names.size(); ++c)
        channels.push_back({{"name", stats.names[c]},
                            {"mean", stats.channels[c].mean},
                            {"std", stats.channels[c].stddev}});
    json j = {{"channels", channels},
              {"target", {{"mean", target_stats.mean}, {"std", target_stats.stddev}}}};
    write_text(path, j.dump(2) + "\n");
}

void load_norm_stats(const std::string& path, NormStats& stats, ChannelStats& target_stats) {
    const json j = json::parse(read_text(path));
    stats = NormStats{};
    for (const auto& c : j.at("channels")) {
        stats.names.push_back(c.at("name").get<std::string>());
        stats.channels.push_back({c.at("mean").get<double>(), c.at("std").get<double>()});
    }
    target_stats.mean = j.at("target").at("mean").get<double>();
    target_stats.stddev = j.at("target").at("std").get<double>();
}

}  // namespace stdown::geo
