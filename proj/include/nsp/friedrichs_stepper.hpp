#pragma once

#include "nsp/linear_block.hpp"
#include "nsp/nsp_model.hpp"
#include "nsp/operators.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsp {

/// A coefficient became NaN/Inf, or the explicit stability bound was violated mid-run.
class NumericalAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// dt violates the convective stability bound before the first step.
class StabilityViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Friedrichs projector onto the frequency annulus 1/n <= |xi| <= n.
class FriedrichsProjector {
public:
    FriedrichsProjector(const Grid& grid, double n, bool dealias = false) : n_(n), mask_(grid.size(), 0)
    {
        if (!(n > 1.0))
            throw std::invalid_argument("FriedrichsProjector: n must exceed 1");
        for (std::size_t p = 1; p < grid.size(); ++p) {
            const double r = grid.xi_norm(p);
            bool keep = !grid.is_nyquist(p) && r >= 1.0 / n && r <= n;
            if (dealias)
                keep = keep && grid.in_dealias_band(p);
            mask_[p] = keep ? 1 : 0;
        }
    }

    double n() const { return n_; }
    bool keeps(std::size_t p) const { return mask_[p] != 0; }

    void apply_in_place(SpectralField& f) const
    {
        for (int c = 0; c < f.components(); ++c) {
            auto v = f.component(c);
            for (std::size_t p = 0; p < v.size(); ++p)
                if (!mask_[p])
                    v[p] = 0.0;
        }
    }

    SpectralField apply(SpectralField f) const
    {
        apply_in_place(f);
        return f;
    }

    NspState apply(NspState s) const
    {
        apply_in_place(s.h);
        apply_in_place(s.c);
        apply_in_place(s.incompressible);
        return s;
    }

private:
    double n_;
    std::vector<std::uint8_t> mask_;
};

/// J_n f.
inline SpectralField project(const SpectralField& f, const FriedrichsProjector& proj) { return proj.apply(f); }

enum class Scheme { etdrk2, imex_bdf2 };

struct StepperConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::etdrk2;
    bool dealias = true;
    double n = 1024.0;
    double t_end = 1.0;
    /// Off for the linear comparison system (no convection, F = G = H = 0).
    bool nonlinear = true;
};

inline constexpr double kStabilityMargin = 0.9;
inline constexpr int kStabilityRecheckStride = 16;

/// Per-step diagnostics from the most recent right-hand-side evaluation.
struct StepReport {
    double t = 0.0;
    double min_density = 0.0;
    double max_density = 0.0;
    bool guard_active = false;
    bool positivity_lost = false;
};

/// One trajectory's time integrator for the Friedrichs-truncated system:
/// exact per-mode exponential for the (h, c) coupling and the heat flow of I,
/// explicit ETDRK2 (or IMEX-BDF2) for convection and F, G, H. Every
/// explicit contribution is projected with J_n.
class Stepper {
public:
    Stepper(const Grid& grid, const FluidParams& params, const StepperConfig& cfg)
        : grid_(grid), params_(params), cfg_(cfg), projector_(grid, cfg.n, cfg.dealias),
          block_(grid, params, cfg.dt)
    {
        params_.validate();
        if (params_.dim != grid.dim())
            throw std::invalid_argument("Stepper: params dimension does not match grid");
    }

    const FriedrichsProjector& projector() const { return projector_; }
    const LinearBlock& linear_block() const { return block_; }
    const StepperConfig& config() const { return cfg_; }
    const StepReport& last_report() const { return report_; }

    /// Drop the multistep history (IMEX-BDF2 restarts with an ETDRK2 step).
    void reset() { history_.reset(); }

    NspState step(const NspState& s)
    {
        NspState next = (cfg_.scheme == Scheme::imex_bdf2 && history_) ? bdf2_step(s) : etdrk2_step(s);
        next.t = s.t + cfg_.dt;
        check_finite(next);
        return next;
    }

    /// Projected explicit part of the right-hand side at s.
    NspState explicit_rhs(const NspState& s)
    {
        NspState out(grid_);
        report_.t = s.t;
        if (!cfg_.nonlinear) {
            report_.min_density = report_.max_density = params_.rho_bar;
            report_.guard_active = false;
            report_.positivity_lost = false;
            return out;
        }
        NonlinearTerms nl = evaluate_nonlinear(s, params_, {Quotient::guarded, cfg_.dealias});
        out.h = nl.F - nl.convection_h;
        out.c = nl.G - nl.convection_c;
        out.incompressible = std::move(nl.H);
        projector_.apply_in_place(out.h);
        projector_.apply_in_place(out.c);
        projector_.apply_in_place(out.incompressible);
        report_.min_density = nl.min_density;
        report_.max_density = nl.max_density;
        report_.guard_active = nl.guard_active;
        report_.positivity_lost = nl.min_density <= 0.0;
        return out;
    }

    /// exp(dt L) s.
    NspState propagate_linear(const NspState& s) const
    {
        NspState out(grid_);
        apply_modes(s, nullptr, out, [](const ModePropagator& m) -> const Mat2& { return m.exp_a; },
                    [](const ModePropagator& m) { return m.heat_exp; });
        return out;
    }

private:
    template <class MatSel, class ScalSel>
    void apply_modes(const NspState& in, const NspState* add, NspState& out, MatSel mat, ScalSel scal) const
    {
        const std::size_t size = grid_.size();
        const int ni = in.incompressible.components();
        for (std::size_t p = 0; p < size; ++p) {
            const ModePropagator& m = block_.at(p);
            const Mat2& a = mat(m);
            const complex h = in.h(0, p);
            const complex c = in.c(0, p);
            complex nh = a(0, 0) * h + a(0, 1) * c;
            complex nc = a(1, 0) * h + a(1, 1) * c;
            if (add) {
                nh += add->h(0, p);
                nc += add->c(0, p);
            }
            out.h(0, p) = nh;
            out.c(0, p) = nc;
            const double e = scal(m);
            for (int k = 0; k < ni; ++k)
                out.incompressible(k, p) = e * in.incompressible(k, p) + (add ? add->incompressible(k, p) : complex{});
        }
    }

    // out = base + W(m) * v, componentwise per mode
    template <class MatSel, class ScalSel>
    static void add_weighted(NspState& out, const NspState& v, const LinearBlock& block, MatSel mat, ScalSel scal)
    {
        const std::size_t size = out.grid().size();
        const int ni = out.incompressible.components();
        for (std::size_t p = 0; p < size; ++p) {
            const ModePropagator& m = block.at(p);
            const Mat2& a = mat(m);
            const complex h = v.h(0, p);
            const complex c = v.c(0, p);
            out.h(0, p) += a(0, 0) * h + a(0, 1) * c;
            out.c(0, p) += a(1, 0) * h + a(1, 1) * c;
            const double e = scal(m);
            for (int k = 0; k < ni; ++k)
                out.incompressible(k, p) += e * v.incompressible(k, p);
        }
    }

    NspState etdrk2_step(const NspState& s)
    {
        const NspState n0 = explicit_rhs(s);
        const StepReport first = report_;
        NspState a = propagate_linear(s);
        add_weighted(a, n0, block_, [](const ModePropagator& m) -> const Mat2& { return m.phi1; },
                     [](const ModePropagator& m) { return m.heat_phi1; });
        a.t = s.t + cfg_.dt;
        NspState diff = explicit_rhs(a);
        diff -= n0;
        add_weighted(a, diff, block_, [](const ModePropagator& m) -> const Mat2& { return m.phi2; },
                     [](const ModePropagator& m) { return m.heat_phi2; });
        merge_reports(first);
        if (cfg_.scheme == Scheme::imex_bdf2)
            history_.emplace(History{s, n0});
        return a;
    }

    NspState bdf2_step(const NspState& s)
    {
        const NspState n_now = explicit_rhs(s);
        const History& prev = *history_;
        // rhs = 4 s_n - s_{n-1} + 2 dt (2 N_n - N_{n-1})
        NspState rhs = s;
        rhs *= 4.0;
        rhs -= prev.state;
        NspState extrap = n_now;
        extrap *= 2.0;
        extrap -= prev.rhs;
        extrap *= 2.0 * cfg_.dt;
        rhs += extrap;
        NspState out(grid_);
        apply_modes(rhs, nullptr, out, [](const ModePropagator& m) -> const Mat2& { return m.bdf2_inv; },
                    [](const ModePropagator& m) { return m.heat_bdf2_inv; });
        projector_.apply_in_place(out.h);
        projector_.apply_in_place(out.c);
        projector_.apply_in_place(out.incompressible);
        history_.emplace(History{s, n_now});
        return out;
    }

    void merge_reports(const StepReport& first)
    {
        report_.min_density = std::min(report_.min_density, first.min_density);
        report_.max_density = std::max(report_.max_density, first.max_density);
        report_.guard_active = report_.guard_active || first.guard_active;
        report_.positivity_lost = report_.positivity_lost || first.positivity_lost;
        report_.t = first.t;
    }

    void check_finite(const NspState& s) const
    {
        auto check = [&](const SpectralField& f, const char* name) {
            if (!f.all_finite())
                throw NumericalAbort(std::string("non-finite coefficient in ") + name + " after step to t = "
                                     + std::to_string(s.t));
        };
        check(s.h, "h");
        check(s.c, "c");
        check(s.incompressible, "I");
    }

    struct History {
        NspState state;
        NspState rhs;
    };

    Grid grid_;
    FluidParams params_;
    StepperConfig cfg_;
    FriedrichsProjector projector_;
    LinearBlock block_;
    StepReport report_;
    std::optional<History> history_;
};

/// Single step from s (multistep schemes bootstrap, so this is always ETDRK2-accurate).
inline NspState step(const NspState& s, const StepperConfig& cfg, const FluidParams& params)
{
    Stepper stepper(s.grid(), params, cfg);
    return stepper.step(s);
}

/// Convective stability rate ||u||_inf / dx.
inline double convective_rate(const NspState& s)
{
    return to_physical(velocity(s)).linf_norm() / s.grid().dx();
}

struct RunOptions {
    int monitor_stride = 1;
    /// Called at t = 0 and every monitor_stride steps (and at the final step).
    std::function<void(const NspState&, const StepReport&)> on_monitor;
    bool keep_snapshots = false;
};

struct Trajectory {
    std::vector<double> times;        // monitored instants
    std::vector<NspState> snapshots;  // only with keep_snapshots
    std::size_t steps = 0;
    bool positivity_lost = false;
    bool guard_used = false;
    double min_density = std::numeric_limits<double>::infinity();
    std::optional<NspState> final_state;
};

inline std::size_t step_count(const StepperConfig& cfg)
{
    if (cfg.t_end <= 0.0)
        return 0;
    return static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));
}

/// Throws StabilityViolation (at_start) or NumericalAbort when dt ||u||_inf / dx exceeds the margin.
inline void check_stability(const NspState& s, const StepperConfig& cfg, bool at_start)
{
    if (!cfg.nonlinear)
        return;
    const double rate = convective_rate(s);
    if (cfg.dt * rate > kStabilityMargin) {
        const std::string msg = "dt * ||u||_inf / dx = " + std::to_string(cfg.dt * rate) + " exceeds "
                                + std::to_string(kStabilityMargin) + " at t = " + std::to_string(s.t);
        if (at_start)
            throw StabilityViolation(msg);
        throw NumericalAbort(msg);
    }
}

/// Density extremes of a state, reported before the first step.
inline StepReport initial_report(const NspState& s, const StepperConfig& cfg, const FluidParams& params)
{
    StepReport rep{s.t, params.rho_bar, params.rho_bar, false, false};
    if (!cfg.nonlinear)
        return rep;
    const auto rho = to_physical(density_perturbation(s));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : rho.component(0)) {
        lo = std::min(lo, v + params.rho_bar);
        hi = std::max(hi, v + params.rho_bar);
    }
    rep.min_density = lo;
    rep.max_density = hi;
    rep.positivity_lost = lo <= 0.0;
    return rep;
}

/// Integrate from s0 to cfg.t_end with constant dt.
inline Trajectory run(const NspState& s0, const StepperConfig& cfg, const FluidParams& params,
                      const RunOptions& opts = {})
{
    Stepper stepper(s0.grid(), params, cfg);
    Trajectory traj;
    NspState s = stepper.projector().apply(s0);
    s.t = s0.t;

    auto monitor = [&](const StepReport& rep) {
        traj.times.push_back(s.t);
        if (opts.keep_snapshots)
            traj.snapshots.push_back(s);
        if (opts.on_monitor)
            opts.on_monitor(s, rep);
    };

    check_stability(s, cfg, true);
    const StepReport initial = initial_report(s, cfg, params);
    traj.min_density = initial.min_density;
    traj.positivity_lost = initial.positivity_lost;
    monitor(initial);

    const std::size_t total = step_count(cfg);
    const int stride = std::max(1, opts.monitor_stride);
    for (std::size_t i = 1; i <= total; ++i) {
        s = stepper.step(s);
        s.t = static_cast<double>(i) * cfg.dt + s0.t;
        const StepReport& rep = stepper.last_report();
        traj.positivity_lost = traj.positivity_lost || rep.positivity_lost;
        traj.guard_used = traj.guard_used || rep.guard_active;
        traj.min_density = std::min(traj.min_density, rep.min_density);
        ++traj.steps;
        if (i % kStabilityRecheckStride == 0)
            check_stability(s, cfg, false);
        if (i % static_cast<std::size_t>(stride) == 0 || i == total)
            monitor(rep);
    }
    traj.final_state = s;
    return traj;
}

/// The linear comparison system: same propagators with convection and F, G, H removed.
inline Trajectory linear_reference_run(const NspState& s0, StepperConfig cfg, const FluidParams& params,
                                       const RunOptions& opts = {})
{
    cfg.nonlinear = false;
    return run(s0, cfg, params, opts);
}

// ---------------------------------------------------------------------------
// Checkpoints: 8-byte magic "NSPCHK1\0", then little-endian int64 N, M and
// float64 L, n, t, mu, lambda, rho_bar, followed by interleaved (re, im)
// float64 coefficients of h, c and the I components in lexicographic lattice
// order.

inline constexpr char kCheckpointMagic[8] = {'N', 'S', 'P', 'C', 'H', 'K', '1', '\0'};

struct Checkpoint {
    NspState state;
    FluidParams params;
    double n = 0.0;
};

namespace detail {

template <class T>
void write_le(std::ostream& os, T v)
{
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap64(bits);
    os.write(reinterpret_cast<const char*>(&bits), 8);
}

template <class T>
T read_le(std::istream& is)
{
    static_assert(sizeof(T) == 8);
    std::uint64_t bits = 0;
    is.read(reinterpret_cast<char*>(&bits), 8);
    if (!is)
        throw std::runtime_error("checkpoint: truncated file");
    if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap64(bits);
    T v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const NspState& s, const FluidParams& params, double n)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    const Grid& g = s.grid();
    os.write(kCheckpointMagic, 8);
    detail::write_le<std::int64_t>(os, g.dim());
    detail::write_le<std::int64_t>(os, g.points());
    detail::write_le<double>(os, g.length());
    detail::write_le<double>(os, n);
    detail::write_le<double>(os, s.t);
    detail::write_le<double>(os, params.mu);
    detail::write_le<double>(os, params.lambda);
    detail::write_le<double>(os, params.rho_bar);
    auto dump = [&](const SpectralField& f) {
        for (const complex& z : f.coefficients()) {
            detail::write_le<double>(os, z.real());
            detail::write_le<double>(os, z.imag());
        }
    };
    dump(s.h);
    dump(s.c);
    dump(s.incompressible);
    if (!os)
        throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint read_checkpoint(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto dim = detail::read_le<std::int64_t>(is);
    const auto points = detail::read_le<std::int64_t>(is);
    const double length = detail::read_le<double>(is);
    const double n = detail::read_le<double>(is);
    const double t = detail::read_le<double>(is);
    FluidParams params;
    params.mu = detail::read_le<double>(is);
    params.lambda = detail::read_le<double>(is);
    params.rho_bar = detail::read_le<double>(is);
    params.dim = static_cast<int>(dim);
    Grid grid(static_cast<int>(dim), static_cast<int>(points), length);
    Checkpoint ck{NspState(grid), params, n};
    ck.state.t = t;
    auto load = [&](SpectralField& f) {
        for (complex& z : f.coefficients()) {
            const double re = detail::read_le<double>(is);
            const double im = detail::read_le<double>(is);
            z = complex(re, im);
        }
    };
    load(ck.state.h);
    load(ck.state.c);
    load(ck.state.incompressible);
    return ck;
}

}  // namespace nsp
