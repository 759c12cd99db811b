#pragma once

#include "nsp/energy_monitor.hpp"
#include "nsp/friedrichs_stepper.hpp"
#include "nsp/harness/config.hpp"
#include "nsp/harness/initial_data.hpp"
#include "nsp/harness/records.hpp"
#include "nsp/littlewood_paley.hpp"
#include "nsp/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace nsp::harness {

struct Assertion {
    std::string name;
    std::string description;
    bool pass = true;
    std::string detail;
};

struct ExperimentResult {
    std::string experiment;
    std::vector<Assertion> assertions;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();

    bool all_pass() const
    {
        return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
    }

    Assertion& find(const std::string& name)
    {
        for (auto& a : assertions)
            if (a.name == name)
                return a;
        throw std::out_of_range("no assertion named " + name);
    }
};

namespace detail {

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline void announce(std::ostream& log, const ExperimentResult& r)
{
    log << "experiment " << r.experiment << ", assertions:\n";
    for (const auto& a : r.assertions)
        log << "  [" << a.name << "] " << a.description << "\n";
}

inline std::filesystem::path prepare_out(const RunConfig& cfg)
{
    std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw ConfigError("cannot create directory " + dir.string(), 0, "output.dir");
    return dir;
}

inline void write_summary(const std::filesystem::path& dir, const ExperimentResult& r)
{
    nlohmann::ordered_json j = r.summary;
    j["experiment"] = r.experiment;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& a : r.assertions)
        list.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    j["assertions"] = list;
    const auto path = dir / "summary.json";
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << "\n";
}

inline void finish(std::ostream& log, const RunConfig& cfg, const ExperimentResult& r)
{
    write_summary(prepare_out(cfg), r);
    for (const auto& a : r.assertions)
        log << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
}

}  // namespace detail

/// Several trajectories advanced in lockstep with a shared step count and
/// monitor stride, each with its own stepper configuration.
class Ensemble {
public:
    using Monitor = std::function<void(const std::vector<NspState>&, const std::vector<StepReport>&)>;

    Ensemble(std::vector<NspState> initial, std::vector<StepperConfig> configs, const FluidParams& params)
        : params_(params), configs_(std::move(configs))
    {
        if (initial.size() != configs_.size() || initial.empty())
            throw std::invalid_argument("Ensemble: one configuration per member required");
        for (std::size_t i = 0; i < initial.size(); ++i) {
            steppers_.emplace_back(initial[i].grid(), params, configs_[i]);
            NspState s = steppers_.back().projector().apply(initial[i]);
            s.t = initial[i].t;
            states_.push_back(std::move(s));
        }
        for (std::size_t i = 1; i < configs_.size(); ++i)
            if (step_count(configs_[i]) != step_count(configs_[0]) || configs_[i].dt != configs_[0].dt)
                throw std::invalid_argument("Ensemble: members must share dt and t_end");
    }

    const std::vector<NspState>& states() const { return states_; }

    void run(int stride, const Monitor& monitor, int threads = 1)
    {
        std::vector<StepReport> reps;
        for (std::size_t m = 0; m < states_.size(); ++m) {
            check_stability(states_[m], configs_[m], true);
            reps.push_back(initial_report(states_[m], configs_[m], params_));
        }
        monitor(states_, reps);
        const std::size_t total = step_count(configs_[0]);
        const double t0 = states_[0].t;
        stride = std::max(1, stride);
        for (std::size_t i = 1; i <= total; ++i) {
            parallel_for(states_.size(), threads, [&](std::size_t m) {
                states_[m] = steppers_[m].step(states_[m]);
                states_[m].t = static_cast<double>(i) * configs_[m].dt + t0;
                reps[m] = steppers_[m].last_report();
                if (i % kStabilityRecheckStride == 0)
                    check_stability(states_[m], configs_[m], false);
            });
            if (i % static_cast<std::size_t>(stride) == 0 || i == total)
                monitor(states_, reps);
        }
    }

private:
    FluidParams params_;
    std::vector<StepperConfig> configs_;
    std::vector<Stepper> steppers_;
    std::vector<NspState> states_;
};

/// ||dh||_{B~^{s-3/2, s+1}} + ||du||_{B~^{s-3/2, s-1}} for d = a - b.
inline double state_distance(const NspState& a, const NspState& b)
{
    NspState d = a;
    d -= b;
    return energy::initial_energy(d);
}

inline bool bitwise_equal(const NspState& a, const NspState& b)
{
    auto same = [](const SpectralField& x, const SpectralField& y) {
        const auto cx = x.coefficients();
        const auto cy = y.coefficients();
        return cx.size() == cy.size()
               && std::equal(cx.begin(), cx.end(), cy.begin(), [](const complex& p, const complex& q) {
                      return std::memcmp(&p, &q, sizeof(complex)) == 0;
                  });
    };
    return same(a.h, b.h) && same(a.c, b.c) && same(a.incompressible, b.incompressible);
}

// ---------------------------------------------------------------------------

/// `run`: the full nonlinear system with energy monitoring.
inline ExperimentResult experiment_nonlinear(const RunConfig& cfg, std::ostream& log = std::cout)
{
    ExperimentResult r{"run"};
    r.assertions = {
        {"positivity", "density stays positive at every step"},
        {"mass", "|mean(rho - rho_bar)| <= " + detail::num(cfg.mass_tol) + " * rho_bar at every report"},
        {"energy-bound", "E(h, u, t) / E(0) <= " + detail::num(cfg.bound_ratio) + " at every report"},
    };
    detail::announce(log, r);
    const auto dir = detail::prepare_out(cfg);

    const NspState s0 = make_initial_data(cfg);
    const auto kc = energy::compute_constants(cfg.params);
    energy::EnergyMonitor mon(cfg.params, kc);
    const double E0 = energy::initial_energy(s0);
    std::vector<NormRecord> records;
    double sup_phi = 0.0, max_mass = 0.0;
    RunOptions opts;
    opts.monitor_stride = cfg.monitor_stride;
    opts.on_monitor = [&](const NspState& s, const StepReport& rep) {
        const auto& e = mon.observe(s, rep);
        records.push_back(make_record(e));
        sup_phi = std::max(sup_phi, e.phi_norm);
        max_mass = std::max(max_mass, std::abs(e.mass));
    };
    const Trajectory traj = run(s0, cfg.stepper, cfg.params, opts);
    write_records(records, (dir / (cfg.records + ".ndjson")).string());
    write_checkpoint((dir / "final.chk").string(), *traj.final_state, cfg.params, cfg.stepper.n);

    energy::EstimateConstants kb = kc;
    kb.A = cfg.bound_ratio;
    kb.C_tilde = 1.0;
    const auto verdict = energy::global_bound_check(mon.reports(), E0, kb);
    auto& pos = r.find("positivity");
    pos.pass = !traj.positivity_lost;
    pos.detail = "min density " + detail::num(traj.min_density);
    auto& mass = r.find("mass");
    mass.pass = max_mass <= cfg.mass_tol * cfg.params.rho_bar;
    mass.detail = "max |mean| " + detail::num(max_mass);
    auto& bound = r.find("energy-bound");
    bound.pass = verdict.pass;
    bound.detail = "max E/E(0) " + detail::num(verdict.max_ratio);

    const auto& last = mon.reports().back();
    r.summary["E0"] = E0;
    r.summary["max_E_ratio"] = verdict.max_ratio;
    r.summary["M_emp"] = E0 > 0.0 ? (last.E + sup_phi) / E0 : 0.0;
    r.summary["V"] = last.V;
    r.summary["smoothing_integral"] = last.smoothing_integral;
    r.summary["min_density"] = traj.min_density;
    r.summary["guard_used"] = traj.guard_used;
    r.summary["steps"] = traj.steps;
    detail::finish(log, cfg, r);
    return r;
}

/// `linear`: the linear reference system and the per-shell damping margins.
inline ExperimentResult experiment_linear(const RunConfig& cfg, std::ostream& log = std::cout)
{
    ExperimentResult r{"linear"};
    r.assertions = {
        {"c-fit-positive", "fitted damping constant c_fit > 0"},
        {"c-fit-above-bound", "c_fit is at least the data-independent discrete rate bound"},
        {"damping-margin", "max damping margin with c_fit <= " + detail::num(cfg.margin_tol)},
        {"envelopes", "every shell's alpha_k envelope is non-increasing"},
    };
    detail::announce(log, r);
    const auto dir = detail::prepare_out(cfg);

    const NspState s0 = make_initial_data(cfg);
    const auto kc = energy::compute_constants(cfg.params);
    energy::EnergyMonitor mon(cfg.params, kc);
    std::vector<NormRecord> records;
    RunOptions opts;
    opts.monitor_stride = cfg.monitor_stride;
    opts.on_monitor = [&](const NspState& s, const StepReport& rep) { records.push_back(make_record(mon.observe(s, rep))); };
    const Trajectory traj = linear_reference_run(s0, cfg.stepper, cfg.params, opts);
    write_records(records, (dir / (cfg.records + ".ndjson")).string());

    const auto& reports = mon.reports();
    const double interval = cfg.stepper.dt * cfg.monitor_stride;
    double c_fit = std::numeric_limits<double>::quiet_NaN();
    double margin = std::numeric_limits<double>::quiet_NaN();
    const double bound = energy::damping_rate_bound(s0.grid(), cfg.params, kc, interval);
    // only full-stride windows: a short final interval would use a different propagator
    std::vector<energy::EnergyReport> window;
    for (std::size_t i = 0; i < reports.size(); ++i)
        if (i == 0 || std::abs((reports[i].t - reports[i - 1].t) - interval) <= 1e-9 * interval)
            window.push_back(reports[i]);
        else
            break;
    if (window.size() >= 3) {
        double peak = 0.0;
        for (const auto& e : window.front().shells)
            peak = std::max(peak, e.alpha_sq);
        c_fit = energy::fit_damping_constant(window, 1e-12 * std::sqrt(peak));
        if (std::isfinite(c_fit)) {
            margin = -std::numeric_limits<double>::infinity();
            for (const auto& [k, m] : energy::damping_margin(window, c_fit))
                margin = std::max(margin, m);
        }
    }
    auto& pos = r.find("c-fit-positive");
    pos.pass = c_fit > 0.0;
    pos.detail = "c_fit " + detail::num(c_fit);
    auto& above = r.find("c-fit-above-bound");
    above.pass = c_fit >= bound * (1.0 - 1e-9) - 1e-12;
    above.detail = "bound " + detail::num(bound);
    auto& dm = r.find("damping-margin");
    dm.pass = margin <= cfg.margin_tol;
    dm.detail = "max margin " + detail::num(margin);
    auto& env = r.find("envelopes");
    env.pass = energy::envelopes_non_increasing(reports);
    env.detail = std::to_string(reports.size()) + " reports";

    r.summary["c_fit"] = c_fit;
    r.summary["c_bound"] = bound;
    r.summary["max_margin"] = margin;
    r.summary["smoothing_integral"] = reports.back().smoothing_integral;
    r.summary["V"] = reports.back().V;
    r.summary["steps"] = traj.steps;
    detail::finish(log, cfg, r);
    return r;
}

/// Distances between the runs at cutoffs n 2^j and n 2^{j+1}, j = 0 .. levels - 2.
struct RefinementSeries {
    std::vector<double> cutoffs;
    std::vector<double> times;
    std::vector<std::vector<double>> distance;  // [instant][j]
    std::vector<double> max_distance;           // [j]
};

inline RefinementSeries refinement_series(const RunConfig& cfg)
{
    RefinementSeries out;
    // data fixed at the finest cutoff; each member applies its own J_n
    RunConfig fine = cfg;
    fine.stepper.n = cfg.stepper.n * std::exp2(cfg.refine_levels - 1);
    const NspState s0 = make_initial_data(fine);
    std::vector<NspState> init;
    std::vector<StepperConfig> cfgs;
    for (int j = 0; j < cfg.refine_levels; ++j) {
        StepperConfig sc = cfg.stepper;
        sc.n = cfg.stepper.n * std::exp2(j);
        out.cutoffs.push_back(sc.n);
        cfgs.push_back(sc);
        init.push_back(s0);
    }
    out.max_distance.assign(static_cast<std::size_t>(cfg.refine_levels - 1), 0.0);
    Ensemble ens(std::move(init), std::move(cfgs), cfg.params);
    ens.run(cfg.monitor_stride, [&](const std::vector<NspState>& states, const std::vector<StepReport>&) {
        out.times.push_back(states[0].t);
        std::vector<double> d;
        for (std::size_t j = 0; j + 1 < states.size(); ++j) {
            d.push_back(state_distance(states[j], states[j + 1]));
            out.max_distance[j] = std::max(out.max_distance[j], d.back());
        }
        out.distance.push_back(std::move(d));
    }, cfg.threads);
    return out;
}

/// `refine`: cutoff doubling n, 2n, 4n, ... on fixed data.
inline ExperimentResult experiment_refine(const RunConfig& cfg, std::ostream& log = std::cout)
{
    ExperimentResult r{"refine"};
    r.assertions = {{"refinement", "max-in-time distance drops by >= " + detail::num(cfg.refine_factor)
                                        + "x per doubling of n"}};
    detail::announce(log, r);
    const auto dir = detail::prepare_out(cfg);
    const RefinementSeries series = refinement_series(cfg);

    std::ofstream os(dir / "distance.ndjson");
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        os << "{\"t\":" << format_number(series.times[i]) << ",\"d\":[";
        for (std::size_t j = 0; j < series.distance[i].size(); ++j)
            os << (j ? "," : "") << format_number(series.distance[i][j]);
        os << "]}\n";
    }
    bool pass = true;
    std::string detail;
    for (std::size_t j = 0; j + 1 < series.max_distance.size(); ++j) {
        const double a = series.max_distance[j];
        const double b = series.max_distance[j + 1];
        const bool ok = b == 0.0 || a >= cfg.refine_factor * b;
        pass = pass && ok;
        detail += (j ? ", " : "") + std::string("d") + std::to_string(j) + "/d" + std::to_string(j + 1) + " = "
                  + (b == 0.0 ? std::string("inf") : detail::num(a / b));
    }
    auto& a = r.find("refinement");
    a.pass = pass;
    a.detail = detail.empty() ? "single pair" : detail;
    r.summary["cutoffs"] = series.cutoffs;
    r.summary["max_distance"] = series.max_distance;
    detail::finish(log, cfg, r);
    return r;
}

/// Unit perturbation direction: random data from the perturbation seed with E(0) = 1.
inline NspState perturbation_direction(const RunConfig& cfg)
{
    RunConfig pc = cfg;
    pc.init.kind = InitKind::random_band;
    pc.init.seed = cfg.perturb_seed;
    pc.init.amplitude = 1.0;
    NspState d = make_initial_data(pc);
    const double e = energy::initial_energy(d);
    if (!(e > 0.0))
        throw ConfigError("perturbation direction vanishes", 0, "perturb.seed");
    d *= 1.0 / e;
    return d;
}

struct PerturbationSeries {
    std::vector<double> deltas;
    std::vector<double> times;
    std::vector<std::vector<double>> normalized;  // [instant][delta]: ||diff||_E / delta (0 for delta = 0)
    std::vector<bool> identical;                  // [delta]: trajectory bitwise equal to the base run
};

inline PerturbationSeries perturbation_series(const RunConfig& cfg)
{
    PerturbationSeries out;
    out.deltas = cfg.deltas;
    const NspState base = make_initial_data(cfg);
    const NspState dir = perturbation_direction(cfg);
    std::vector<NspState> init{base};
    std::vector<StepperConfig> cfgs{cfg.stepper};
    for (double delta : cfg.deltas) {
        NspState s = dir;
        s *= delta;
        s += base;
        // delta = 0 must reproduce the base data exactly
        init.push_back(delta == 0.0 ? base : s);
        cfgs.push_back(cfg.stepper);
    }
    std::vector<energy::DifferenceNorm> norms(cfg.deltas.size(), energy::DifferenceNorm(cfg.dim));
    out.identical.assign(cfg.deltas.size(), true);
    Ensemble ens(std::move(init), std::move(cfgs), cfg.params);
    ens.run(cfg.monitor_stride, [&](const std::vector<NspState>& states, const std::vector<StepReport>&) {
        out.times.push_back(states[0].t);
        std::vector<double> row;
        for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
            const double d = norms[i].observe(states[0].t, states[i + 1], states[0]);
            if (!bitwise_equal(states[i + 1], states[0]))
                out.identical[i] = false;
            row.push_back(cfg.deltas[i] > 0.0 ? d / cfg.deltas[i] : d);
        }
        out.normalized.push_back(std::move(row));
    }, cfg.threads);
    return out;
}

/// `perturb`: runs from data and data + delta * direction.
inline ExperimentResult experiment_perturb(const RunConfig& cfg, std::ostream& log = std::cout)
{
    ExperimentResult r{"perturb"};
    r.assertions = {
        {"zero-delta", "delta = 0 reproduces the base trajectory bitwise"},
        {"linear-response", "normalized differences of the nonzero deltas agree within a factor "
                                + detail::num(cfg.perturb_factor)},
    };
    detail::announce(log, r);
    const auto dir = detail::prepare_out(cfg);
    const PerturbationSeries series = perturbation_series(cfg);

    std::ofstream os(dir / "difference.ndjson");
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        os << "{\"t\":" << format_number(series.times[i]) << ",\"normalized\":[";
        for (std::size_t j = 0; j < series.normalized[i].size(); ++j)
            os << (j ? "," : "") << format_number(series.normalized[i][j]);
        os << "]}\n";
    }

    bool zero_ok = true;
    std::size_t zero_count = 0;
    for (std::size_t i = 0; i < series.deltas.size(); ++i)
        if (series.deltas[i] == 0.0) {
            ++zero_count;
            zero_ok = zero_ok && series.identical[i];
        }
    auto& z = r.find("zero-delta");
    z.pass = zero_ok;
    z.detail = zero_count ? std::to_string(zero_count) + " zero-delta run(s)" : "no zero delta configured";

    double spread = 1.0;
    for (const auto& row : series.normalized)
        for (std::size_t i = 0; i < row.size(); ++i)
            for (std::size_t j = i + 1; j < row.size(); ++j) {
                if (series.deltas[i] == 0.0 || series.deltas[j] == 0.0)
                    continue;
                const double a = row[i], b = row[j];
                if (a == 0.0 && b == 0.0)
                    continue;
                spread = std::max(spread, (a == 0.0 || b == 0.0) ? std::numeric_limits<double>::infinity()
                                                                   : std::max(a / b, b / a));
            }
    auto& lr = r.find("linear-response");
    lr.pass = spread <= cfg.perturb_factor;
    lr.detail = "max ratio " + detail::num(spread);
    r.summary["deltas"] = series.deltas;
    r.summary["max_ratio"] = spread;
    std::vector<double> final_row = series.normalized.back();
    r.summary["final_normalized"] = final_row;
    detail::finish(log, cfg, r);
    return r;
}

/// Ensemble statistics of the Littlewood-Paley lemma checks on random fields.
struct LemmaStats {
    double bernstein_min = std::numeric_limits<double>::infinity();  // ratio / 2^k
    double bernstein_max = 0.0;
    double reconstruction_max = 0.0;
    double product_max = 0.0;
    double product_shifted_max = 0.0;
    double composition_max = 0.0;
    double orthogonality_lo = 0.0;
    double orthogonality_hi = 0.0;
};

inline LemmaStats lemma_stats(const RunConfig& cfg)
{
    const Grid g = cfg.grid();
    LemmaStats st;
    std::tie(st.orthogonality_lo, st.orthogonality_hi) = lp::orthogonality_bounds(g);
    std::mt19937_64 rng(cfg.init.seed);
    InitSpec band = cfg.init;
    band.band_lo = 1.0;
    band.band_hi = std::floor(cfg.points / 4.0) - 1.0;  // products stay alias-free
    const double half = 0.5 * cfg.dim;
    for (int i = 0; i < cfg.lemma_samples; ++i) {
        const SpectralField f = detail::random_band_field(g, 1, band, rng);
        const SpectralField h = detail::random_band_field(g, 1, band, rng);
        const auto spec = lp::dyadic_spectrum(f);
        SpectralField sum(g, 1);
        for (int k = spec.k_min; k <= spec.k_max; ++k) {
            sum += lp::dyadic_block(f, k);
            if (spec.at(k) > 0.0) {
                const double b = lp::bernstein_ratio(f, k) / std::exp2(k);
                st.bernstein_min = std::min(st.bernstein_min, b);
                st.bernstein_max = std::max(st.bernstein_max, b);
            }
        }
        SpectralField diff = sum;
        diff -= f;
        st.reconstruction_max = std::max(st.reconstruction_max, diff.l2_norm() / f.l2_norm());
        st.product_max = std::max(st.product_max, lp::product_estimate_ratio(f, h, {half, half}));
        st.product_shifted_max = std::max(
            st.product_shifted_max, lp::product_estimate_ratio_shifted(f, {half - 1.0, half}, h, {half, half + 1.0}));
        SpectralField small = f;
        small *= 0.5 * cfg.params.rho_bar / lp::linf_norm(f);
        st.composition_max = std::max(st.composition_max, lp::composition_check(small, half, cfg.params.rho_bar));
    }
    return st;
}

/// `check-lemmas`: Bernstein, reconstruction and product/composition ratios.
inline ExperimentResult experiment_check_lemmas(const RunConfig& cfg, std::ostream& log = std::cout)
{
    ExperimentResult r{"check-lemmas"};
    r.assertions = {
        {"bernstein", "||Lambda Delta_k f|| / ||Delta_k f|| within [(3/4) 2^k, (8/3) 2^k]"},
        {"reconstruction", "sum_k Delta_k f = f - mean(f) to 1e-10 relative"},
        {"orthogonality", "1/2 <= sum_k phi_k^2 <= 1 on every nonzero lattice radius"},
    };
    detail::announce(log, r);
    detail::prepare_out(cfg);
    const LemmaStats st = lemma_stats(cfg);
    auto& b = r.find("bernstein");
    b.pass = st.bernstein_min >= 0.75 && st.bernstein_max <= 8.0 / 3.0;
    b.detail = "ratio/2^k in [" + detail::num(st.bernstein_min) + ", " + detail::num(st.bernstein_max) + "]";
    auto& rec = r.find("reconstruction");
    rec.pass = st.reconstruction_max < 1e-10;
    rec.detail = "max relative error " + detail::num(st.reconstruction_max);
    auto& o = r.find("orthogonality");
    o.pass = st.orthogonality_lo >= 0.5 - 1e-12 && st.orthogonality_hi <= 1.0 + 1e-12;
    o.detail = "[" + detail::num(st.orthogonality_lo) + ", " + detail::num(st.orthogonality_hi) + "]";
    r.summary["samples"] = cfg.lemma_samples;
    r.summary["product_max"] = st.product_max;
    r.summary["product_shifted_max"] = st.product_shifted_max;
    r.summary["composition_max"] = st.composition_max;
    log << "product ratio max " << detail::num(st.product_max) << ", shifted " << detail::num(st.product_shifted_max)
        << ", composition " << detail::num(st.composition_max) << "\n";
    detail::finish(log, cfg, r);
    return r;
}

}  // namespace nsp::harness
