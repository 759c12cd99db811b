#pragma once

#include "nsp/friedrichs_stepper.hpp"
#include "nsp/nsp_model.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nsp::harness {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0, std::string key = {})
        : std::runtime_error(format(what, line, key)), line_(line), key_(std::move(key))
    {
    }

    int line() const { return line_; }
    const std::string& key() const { return key_; }

private:
    static std::string format(const std::string& what, int line, const std::string& key)
    {
        std::string out = "config";
        if (line > 0)
            out += ": line " + std::to_string(line);
        if (!key.empty())
            out += ": " + key;
        return out + ": " + what;
    }

    int line_;
    std::string key_;
};

enum class InitKind { single_mode, random_band, file };

/// Which parts of the initial data are populated.
enum class InitFields { all, hc, c, incompressible };

struct InitSpec {
    InitKind kind = InitKind::random_band;
    InitFields fields = InitFields::all;
    double amplitude = 1e-3;
    std::uint64_t seed = 1;
    double band_lo = 1.0;  // lattice |m| range of the random band
    double band_hi = 4.0;
    double decay = 0.0;    // > 0: coefficients carry exp(-|m|^2 / (2 decay^2))
    std::string file;
};

struct RunConfig {
    int dim = 3;
    int points = 32;
    double length = 2.0 * std::numbers::pi;
    FluidParams params;
    StepperConfig stepper;
    InitSpec init;
    int monitor_stride = 10;
    std::string out_dir = ".";
    std::string records = "records";

    int refine_levels = 4;         // n, 2n, ... (levels - 1 doublings)
    std::vector<double> deltas{1e-6, 1e-7};
    std::uint64_t perturb_seed = 99;

    double bound_ratio = 3.0;      // E(t) / E(0) ceiling checked by `run`
    double mass_tol = 1e-12;
    double margin_tol = 1e-8;
    double refine_factor = 2.0;
    double perturb_factor = 2.0;
    int lemma_samples = 20;
    int threads = 1;  // workers for ensemble members, set from NSP_THREADS by the CLI

    Grid grid() const { return Grid(dim, points, length); }
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string_view::npos)
        return {};
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

inline double parse_double(std::string_view v)
{
    // "pi", "2pi", "2*pi" are accepted for lengths
    double factor = 1.0;
    if (v.size() >= 2 && v.substr(v.size() - 2) == "pi") {
        factor = std::numbers::pi;
        v = v.substr(0, v.size() - 2);
        if (!v.empty() && v.back() == '*')
            v.remove_suffix(1);
        if (v.empty())
            return factor;
    }
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw std::invalid_argument("not a number: '" + std::string(v) + "'");
    return out * factor;
}

inline long long parse_int(std::string_view v)
{
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw std::invalid_argument("not an integer: '" + std::string(v) + "'");
    return out;
}

inline bool parse_bool(std::string_view v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw std::invalid_argument("not a boolean: '" + std::string(v) + "'");
}

struct KeySpec {
    std::string help;
    std::function<std::string(const RunConfig&)> show;
    std::function<void(RunConfig&, std::string_view)> set;
};

// shortest text that reads back to the same double
inline std::string show_double(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline const std::map<std::string, KeySpec>& keys()
{
    static const std::map<std::string, KeySpec> table = [] {
        std::map<std::string, KeySpec> k;
        auto num = [&](const char* name, const char* help, double RunConfig::*field) {
            k[name] = {help, [field](const RunConfig& c) { return show_double(c.*field); },
                       [field](RunConfig& c, std::string_view v) { c.*field = parse_double(v); }};
        };
        auto integer = [&](const char* name, const char* help, int RunConfig::*field) {
            k[name] = {help, [field](const RunConfig& c) { return std::to_string(c.*field); },
                       [field](RunConfig& c, std::string_view v) {
                           c.*field = static_cast<int>(parse_int(v));
                       }};
        };
        integer("grid.N", "space dimension (2 or 3)", &RunConfig::dim);
        integer("grid.M", "points per axis, a power of two >= 8", &RunConfig::points);
        num("grid.L", "box side (accepts pi multiples, e.g. 2pi)", &RunConfig::length);

        k["params.mu"] = {"shear viscosity, > 0", [](const RunConfig& c) { return show_double(c.params.mu); },
                          [](RunConfig& c, std::string_view v) { c.params.mu = parse_double(v); }};
        k["params.lambda"] = {"bulk viscosity, 2 mu + N lambda >= 0",
                              [](const RunConfig& c) { return show_double(c.params.lambda); },
                              [](RunConfig& c, std::string_view v) { c.params.lambda = parse_double(v); }};
        k["params.rho_bar"] = {"background density, > 0",
                               [](const RunConfig& c) { return show_double(c.params.rho_bar); },
                               [](RunConfig& c, std::string_view v) { c.params.rho_bar = parse_double(v); }};

        k["stepper.dt"] = {"time step", [](const RunConfig& c) { return show_double(c.stepper.dt); },
                           [](RunConfig& c, std::string_view v) { c.stepper.dt = parse_double(v); }};
        k["stepper.t_end"] = {"final time", [](const RunConfig& c) { return show_double(c.stepper.t_end); },
                              [](RunConfig& c, std::string_view v) { c.stepper.t_end = parse_double(v); }};
        k["stepper.n"] = {"Friedrichs cutoff: keep 1/n <= |xi| <= n",
                          [](const RunConfig& c) { return show_double(c.stepper.n); },
                          [](RunConfig& c, std::string_view v) { c.stepper.n = parse_double(v); }};
        k["stepper.scheme"] = {"etdrk2 | imex-bdf2",
                               [](const RunConfig& c) {
                                   return std::string(c.stepper.scheme == Scheme::etdrk2 ? "etdrk2" : "imex-bdf2");
                               },
                               [](RunConfig& c, std::string_view v) {
                                   if (v == "etdrk2")
                                       c.stepper.scheme = Scheme::etdrk2;
                                   else if (v == "imex-bdf2")
                                       c.stepper.scheme = Scheme::imex_bdf2;
                                   else
                                       throw std::invalid_argument("unknown scheme '" + std::string(v) + "'");
                               }};
        k["stepper.dealias"] = {"2/3-rule dealiasing of products",
                                [](const RunConfig& c) { return std::string(c.stepper.dealias ? "true" : "false"); },
                                [](RunConfig& c, std::string_view v) { c.stepper.dealias = parse_bool(v); }};

        k["init.kind"] = {"single-mode | random-band | file",
                          [](const RunConfig& c) {
                              switch (c.init.kind) {
                              case InitKind::single_mode: return std::string("single-mode");
                              case InitKind::random_band: return std::string("random-band");
                              default: return std::string("file");
                              }
                          },
                          [](RunConfig& c, std::string_view v) {
                              if (v == "single-mode")
                                  c.init.kind = InitKind::single_mode;
                              else if (v == "random-band")
                                  c.init.kind = InitKind::random_band;
                              else if (v == "file")
                                  c.init.kind = InitKind::file;
                              else
                                  throw std::invalid_argument("unknown kind '" + std::string(v) + "'");
                          }};
        k["init.fields"] = {"all | hc | c | i (parts of the random data that are nonzero)",
                            [](const RunConfig& c) {
                                switch (c.init.fields) {
                                case InitFields::all: return std::string("all");
                                case InitFields::hc: return std::string("hc");
                                case InitFields::c: return std::string("c");
                                default: return std::string("i");
                                }
                            },
                            [](RunConfig& c, std::string_view v) {
                                if (v == "all")
                                    c.init.fields = InitFields::all;
                                else if (v == "hc")
                                    c.init.fields = InitFields::hc;
                                else if (v == "c")
                                    c.init.fields = InitFields::c;
                                else if (v == "i")
                                    c.init.fields = InitFields::incompressible;
                                else
                                    throw std::invalid_argument("unknown field set '" + std::string(v) + "'");
                            }};
        k["init.amplitude"] = {"hybrid-norm size of (rho0 - rho_bar, u0)",
                               [](const RunConfig& c) { return show_double(c.init.amplitude); },
                               [](RunConfig& c, std::string_view v) { c.init.amplitude = parse_double(v); }};
        k["init.seed"] = {"random seed", [](const RunConfig& c) { return std::to_string(c.init.seed); },
                          [](RunConfig& c, std::string_view v) {
                              const auto s = parse_int(v);
                              if (s < 0)
                                  throw std::invalid_argument("seed must be non-negative");
                              c.init.seed = static_cast<std::uint64_t>(s);
                          }};
        k["init.band_lo"] = {"lowest lattice |m| of the random band",
                             [](const RunConfig& c) { return show_double(c.init.band_lo); },
                             [](RunConfig& c, std::string_view v) { c.init.band_lo = parse_double(v); }};
        k["init.band_hi"] = {"highest lattice |m| of the random band",
                             [](const RunConfig& c) { return show_double(c.init.band_hi); },
                             [](RunConfig& c, std::string_view v) { c.init.band_hi = parse_double(v); }};
        k["init.decay"] = {"Gaussian envelope width in |m| (0 = flat)",
                           [](const RunConfig& c) { return show_double(c.init.decay); },
                           [](RunConfig& c, std::string_view v) { c.init.decay = parse_double(v); }};
        k["init.file"] = {"checkpoint path for kind = file", [](const RunConfig& c) { return c.init.file; },
                          [](RunConfig& c, std::string_view v) { c.init.file = std::string(v); }};

        integer("monitor.stride", "steps between energy reports", &RunConfig::monitor_stride);
        k["output.dir"] = {"output directory", [](const RunConfig& c) { return c.out_dir; },
                           [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); }};
        k["output.records"] = {"basename of the .ndjson/.csv record files",
                               [](const RunConfig& c) { return c.records; },
                               [](RunConfig& c, std::string_view v) { c.records = std::string(v); }};

        integer("refine.levels", "number of cutoffs n, 2n, 4n, ... in a refinement run", &RunConfig::refine_levels);
        k["perturb.deltas"] = {"comma-separated perturbation sizes",
                               [](const RunConfig& c) {
                                   std::string out;
                                   for (std::size_t i = 0; i < c.deltas.size(); ++i)
                                       out += (i ? "," : "") + show_double(c.deltas[i]);
                                   return out;
                               },
                               [](RunConfig& c, std::string_view v) {
                                   c.deltas.clear();
                                   while (!v.empty()) {
                                       const auto comma = v.find(',');
                                       c.deltas.push_back(parse_double(trim(v.substr(0, comma))));
                                       if (comma == std::string_view::npos)
                                           break;
                                       v = v.substr(comma + 1);
                                   }
                               }};
        k["perturb.seed"] = {"seed of the perturbation direction",
                             [](const RunConfig& c) { return std::to_string(c.perturb_seed); },
                             [](RunConfig& c, std::string_view v) {
                                 const auto s = parse_int(v);
                                 if (s < 0)
                                     throw std::invalid_argument("seed must be non-negative");
                                 c.perturb_seed = static_cast<std::uint64_t>(s);
                             }};

        num("assert.bound_ratio", "run: ceiling on E(t) / E(0)", &RunConfig::bound_ratio);
        num("assert.mass_tol", "run: tolerance on the mean of rho - rho_bar", &RunConfig::mass_tol);
        num("assert.margin_tol", "linear: ceiling on damping margins", &RunConfig::margin_tol);
        num("assert.refine_factor", "refine: minimum distance reduction per doubling", &RunConfig::refine_factor);
        num("assert.perturb_factor", "perturb: allowed spread of the normalized difference",
            &RunConfig::perturb_factor);
        integer("lemmas.samples", "check-lemmas: random fields per check", &RunConfig::lemma_samples);
        return k;
    }();
    return table;
}

}  // namespace detail

/// Checks the invariants the parser cannot see line by line.
inline void validate(const RunConfig& c)
{
    auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(what, 0, key); };
    if (c.dim != 2 && c.dim != 3)
        fail("grid.N", "must be 2 or 3");
    if (c.points < 8 || (c.points & (c.points - 1)) != 0)
        fail("grid.M", "must be a power of two >= 8");
    if (!(c.length > 0.0) || !std::isfinite(c.length))
        fail("grid.L", "must be positive");
    if (!(c.params.mu > 0.0))
        fail("params.mu", "requires mu > 0 and 2 mu + N lambda >= 0");
    if (!(2.0 * c.params.mu + c.dim * c.params.lambda >= 0.0))
        fail("params.lambda", "requires mu > 0 and 2 mu + N lambda >= 0");
    if (!(c.params.rho_bar > 0.0) || !std::isfinite(c.params.rho_bar))
        fail("params.rho_bar", "must be positive");
    if (!(c.stepper.dt > 0.0) || !std::isfinite(c.stepper.dt))
        fail("stepper.dt", "must be positive");
    if (!(c.stepper.t_end >= 0.0) || !std::isfinite(c.stepper.t_end))
        fail("stepper.t_end", "must be non-negative");
    if (!(c.stepper.n > 1.0))
        fail("stepper.n", "must be > 1");
    if (!(c.init.amplitude >= 0.0) || !std::isfinite(c.init.amplitude))
        fail("init.amplitude", "must be >= 0");
    if (!(c.init.band_lo >= 0.0) || !(c.init.band_hi >= c.init.band_lo))
        fail("init.band_hi", "band must satisfy 0 <= band_lo <= band_hi");
    if (!(c.init.decay >= 0.0))
        fail("init.decay", "must be >= 0");
    if (c.init.kind == InitKind::file && c.init.file.empty())
        fail("init.file", "required for kind = file");
    if (c.monitor_stride < 1)
        fail("monitor.stride", "must be >= 1");
    if (c.records.empty() || c.records.find('/') != std::string::npos)
        fail("output.records", "must be a plain file name");
    if (c.refine_levels < 2)
        fail("refine.levels", "must be >= 2");
    if (c.deltas.empty())
        fail("perturb.deltas", "needs at least one value");
    for (double d : c.deltas)
        if (!(d >= 0.0) || !std::isfinite(d))
            fail("perturb.deltas", "values must be >= 0");
    if (c.lemma_samples < 1)
        fail("lemmas.samples", "must be >= 1");
}

inline RunConfig parse_config(std::string_view text)
{
    RunConfig cfg;
    cfg.params.dim = cfg.dim;
    const auto& table = detail::keys();
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("expected 'section.key = value'", line_no);
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        auto it = table.find(key);
        if (it == table.end())
            throw ConfigError("unknown key", line_no, key);
        if (value.empty())
            throw ConfigError("missing value", line_no, key);
        try {
            it->second.set(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what(), line_no, key);
        }
    }
    cfg.params.dim = cfg.dim;
    validate(cfg);
    return cfg;
}

/// Key table with defaults, one line per key.
inline std::string config_help()
{
    const RunConfig def;
    std::ostringstream os;
    for (const auto& [key, spec] : detail::keys()) {
        os << "  " << key;
        for (std::size_t i = key.size(); i < 22; ++i)
            os << ' ';
        os << spec.help << " [default: " << spec.show(def) << "]\n";
    }
    return os.str();
}

/// Round-trippable text form of a config.
inline std::string dump_config(const RunConfig& cfg)
{
    std::ostringstream os;
    for (const auto& [key, spec] : detail::keys()) {
        const std::string v = spec.show(cfg);
        if (!v.empty())
            os << key << " = " << v << "\n";
    }
    return os.str();
}

}  // namespace nsp::harness
