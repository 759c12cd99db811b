#pragma once

#include "nsp/energy_monitor.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsp::harness {

/// One monitored instant. NDJSON key order: t, h, c, I, u, phi, V, E,
/// min_density, mass, positivity, guarded, alpha_sq (shell -> value, only
/// shells above kShellFloor).
struct NormRecord {
    double t = 0.0;
    double h = 0.0;
    double c = 0.0;
    double I = 0.0;
    double u = 0.0;
    double phi = 0.0;
    double V = 0.0;
    double E = 0.0;
    double min_density = 0.0;
    double mass = 0.0;
    bool positivity = true;
    bool guarded = false;
    std::map<int, double> alpha_sq;

    bool operator==(const NormRecord&) const = default;
};

inline constexpr double kShellFloor = 1e-14;

inline constexpr const char* kCsvHeader = "t,h,c,I,u,phi,V,E,min_density,mass,positivity,guarded,alpha_sq_sum";

inline NormRecord make_record(const energy::EnergyReport& r)
{
    NormRecord out;
    out.t = r.t;
    out.h = r.h_norm;
    out.c = r.c_norm;
    out.I = r.I_norm;
    out.u = r.u_norm;
    out.phi = r.phi_norm;
    out.V = r.V;
    out.E = r.E;
    out.min_density = r.min_density;
    out.mass = r.mass;
    out.positivity = r.positivity_ok;
    out.guarded = r.guard_active;
    for (const auto& e : r.shells)
        if (e.alpha_sq > kShellFloor)
            out.alpha_sq.emplace(e.k, e.alpha_sq);
    return out;
}

/// %.17g, or null for values JSON cannot hold.
inline std::string format_number(double v)
{
    if (!std::isfinite(v))
        return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_json_line(const NormRecord& r)
{
    std::string s = "{\"t\":" + format_number(r.t);
    s += ",\"h\":" + format_number(r.h);
    s += ",\"c\":" + format_number(r.c);
    s += ",\"I\":" + format_number(r.I);
    s += ",\"u\":" + format_number(r.u);
    s += ",\"phi\":" + format_number(r.phi);
    s += ",\"V\":" + format_number(r.V);
    s += ",\"E\":" + format_number(r.E);
    s += ",\"min_density\":" + format_number(r.min_density);
    s += ",\"mass\":" + format_number(r.mass);
    s += std::string(",\"positivity\":") + (r.positivity ? "true" : "false");
    s += std::string(",\"guarded\":") + (r.guarded ? "true" : "false");
    s += ",\"alpha_sq\":{";
    bool first = true;
    for (const auto& [k, v] : r.alpha_sq) {
        s += (first ? "\"" : ",\"") + std::to_string(k) + "\":" + format_number(v);
        first = false;
    }
    return s + "}}";
}

inline std::string to_csv_line(const NormRecord& r)
{
    double sum = 0.0;
    for (const auto& [k, v] : r.alpha_sq)
        sum += v;
    std::string s;
    for (double v : {r.t, r.h, r.c, r.I, r.u, r.phi, r.V, r.E, r.min_density, r.mass})
        s += format_number(v) + ",";
    s += r.positivity ? "1," : "0,";
    s += r.guarded ? "1," : "0,";
    return s + format_number(sum);
}

/// Writes path (NDJSON) and the companion CSV next to it (.csv replacing the extension).
inline void write_records(const std::vector<NormRecord>& records, const std::string& path)
{
    for (std::size_t i = 1; i < records.size(); ++i)
        if (!(records[i].t > records[i - 1].t))
            throw std::invalid_argument("write_records: times must be strictly increasing");
    std::ofstream js(path);
    if (!js)
        throw std::runtime_error("write_records: cannot open " + path);
    for (const auto& r : records)
        js << to_json_line(r) << '\n';
    if (!js)
        throw std::runtime_error("write_records: write failed on " + path);

    std::string csv_path = path;
    if (const auto dot = csv_path.rfind('.'); dot != std::string::npos && csv_path.find('/', dot) == std::string::npos)
        csv_path.resize(dot);
    csv_path += ".csv";
    std::ofstream cs(csv_path);
    if (!cs)
        throw std::runtime_error("write_records: cannot open " + csv_path);
    cs << kCsvHeader << '\n';
    for (const auto& r : records)
        cs << to_csv_line(r) << '\n';
    if (!cs)
        throw std::runtime_error("write_records: write failed on " + csv_path);
}

inline std::vector<NormRecord> read_records(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("read_records: cannot open " + path);
    auto num = [](const nlohmann::json& j) {
        return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
    };
    std::vector<NormRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto j = nlohmann::json::parse(line);
        NormRecord r;
        r.t = num(j.at("t"));
        r.h = num(j.at("h"));
        r.c = num(j.at("c"));
        r.I = num(j.at("I"));
        r.u = num(j.at("u"));
        r.phi = num(j.at("phi"));
        r.V = num(j.at("V"));
        r.E = num(j.at("E"));
        r.min_density = num(j.at("min_density"));
        r.mass = num(j.at("mass"));
        r.positivity = j.at("positivity").get<bool>();
        r.guarded = j.at("guarded").get<bool>();
        for (const auto& [k, v] : j.at("alpha_sq").items())
            r.alpha_sq.emplace(std::stoi(k), num(v));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace nsp::harness
