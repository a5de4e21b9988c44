#include "dse/case_io.hpp"

#include <fstream>

#include "dse/errors.hpp"

namespace dse {

using nlohmann::json;

namespace {

CMat complex_matrix_from_json(const json& j, int m, const char* name) {
    std::vector<json> entries;
    if (!j.is_array()) throw ConfigError(std::string(name) + ": expected an array");
    if (!j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array()) {
        for (const auto& row : j)
            for (const auto& e : row) entries.push_back(e);
    } else {
        entries.assign(j.begin(), j.end());
    }
    if (static_cast<int>(entries.size()) != m * m)
        throw ConfigError(std::string(name) + ": expected " + std::to_string(m * m) + " entries");
    CMat y(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
            const auto& e = entries[r * m + c];
            if (!e.is_array() || e.size() != 2) throw ConfigError(std::string(name) + ": entries must be [re, im]");
            y(r, c) = {e[0].get<double>(), e[1].get<double>()};
        }
    return y;
}

json complex_matrix_to_json(const CMat& y) {
    json out = json::array();
    for (Eigen::Index r = 0; r < y.rows(); ++r)
        for (Eigen::Index c = 0; c < y.cols(); ++c) out.push_back({y(r, c).real(), y(r, c).imag()});
    return out;
}

Vec vec_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

SystemCase case_from_json(const json& j) {
    SystemCase sys;
    try {
        for (const auto& mj : j.at("machines")) {
            MachineParams mc;
            mc.h = mj.at("h").get<double>();
            mc.d = mj.at("d").get<double>();
            mc.xd = mj.at("xd").get<double>();
            mc.xq = mj.at("xq").get<double>();
            mc.xdp = mj.at("xdp").get<double>();
            mc.xqp = mj.at("xqp").get<double>();
            mc.td0p = mj.at("td0p").get<double>();
            mc.tq0p = mj.at("tq0p").get<double>();
            sys.machines.push_back(mc);
        }
        const int m = sys.m();
        sys.y_pre = complex_matrix_from_json(j.at("y_pre"), m, "y_pre");
        sys.y_post = complex_matrix_from_json(j.at("y_post"), m, "y_post");
        if (j.contains("omega_s")) sys.omega_s = j.at("omega_s").get<double>();
        sys.u0 = vec_from_json(j.at("u0"));
        sys.x0 = vec_from_json(j.at("x0"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("case file: ") + e.what());
    }
    sys.validate();
    return sys;
}

json case_to_json(const SystemCase& sys) {
    json j;
    j["machines"] = json::array();
    for (const auto& mc : sys.machines)
        j["machines"].push_back({{"h", mc.h},
                                 {"d", mc.d},
                                 {"xd", mc.xd},
                                 {"xq", mc.xq},
                                 {"xdp", mc.xdp},
                                 {"xqp", mc.xqp},
                                 {"td0p", mc.td0p},
                                 {"tq0p", mc.tq0p}});
    j["omega_s"] = sys.omega_s;
    j["y_pre"] = complex_matrix_to_json(sys.y_pre);
    j["y_post"] = complex_matrix_to_json(sys.y_post);
    j["u0"] = std::vector<double>(sys.u0.data(), sys.u0.data() + sys.u0.size());
    j["x0"] = std::vector<double>(sys.x0.data(), sys.x0.data() + sys.x0.size());
    return j;
}

SystemCase load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open case file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("case file " + path.string() + ": " + e.what());
    }
    return case_from_json(j);
}

void save_case(const SystemCase& sys, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << case_to_json(sys).dump(2) << '\n';
}

}  // namespace dse
