#pragma once

#include "nsp/friedrichs_stepper.hpp"
#include "nsp/linear_block.hpp"
#include "nsp/littlewood_paley.hpp"
#include "nsp/nsp_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsp::energy {

/// Constants of the frequency-localized energy functionals.
struct EstimateConstants {
    double K1 = 0.0;
    double M1 = 0.0;
    double M2 = 0.0;
    double K2 = 0.0;
    double M3 = 0.0;
    double K = 0.0;        // weight gain in f~ = exp(-K V(t)) f; 0 disables the reweighting
    double A = 3.0;        // bound multiplier of the global functional
    double C_tilde = 1.0;  // linear-estimate constant entering A * C~ * E(0)
};

/// The three admissibility inequalities for (K1, M1, M2), evaluated as printed:
///   73/64 - (32/9) nu_c M2 > 0,   K1 < M1 < sqrt(3) / (8 sqrt(rho_bar)),
///   2 mu + lambda - rho_bar^2 K1 - (2 mu + lambda) K1 / (2 M2) > 0,
/// and the high-frequency pair 0 < K2 < M3 < (2 mu + lambda) / rho_bar^2.
struct Feasibility {
    double first = 0.0;
    double k1_below_m1 = 0.0;  // M1 - K1
    double m1_below_cap = 0.0; // sqrt(3)/(8 sqrt(rho_bar)) - M1
    double third = 0.0;
    double high = 0.0;         // min(K2, M3 - K2, nu_c / rho_bar - M3)

    bool first_holds() const { return first > 0.0; }
    bool second_holds() const { return k1_below_m1 > 0.0 && m1_below_cap > 0.0; }
    bool third_holds() const { return third > 0.0; }
    bool high_holds() const { return high > 0.0; }
    bool all_hold() const { return first_holds() && second_holds() && third_holds() && high_holds(); }
};

inline EstimateConstants compute_constants(const FluidParams& params)
{
    params.validate();
    const double rb = params.rho_bar;
    const double b = params.bulk();
    EstimateConstants k;
    k.M1 = 1.0 / (4.0 * std::sqrt(rb));
    k.M2 = 5.0 * rb / (16.0 * b);
    k.K1 = std::min(rb * b / (rb * rb * rb + 2.0 * b * b), 1.0 / (8.0 * std::sqrt(rb)));
    k.M3 = b / (2.0 * rb * rb);
    k.K2 = b / (4.0 * rb * rb);
    // What the quadratic forms actually need: K1 < M1 (cross term absorbed) and K2 < M3.
    if (!(k.K1 < k.M1) || !(k.K2 < k.M3))
        throw std::logic_error("compute_constants: constants do not make the energy functionals coercive");
    return k;
}

inline Feasibility check_feasibility(const FluidParams& params, const EstimateConstants& k)
{
    const double rb = params.rho_bar;
    const double b = params.bulk();
    Feasibility f;
    f.first = 73.0 / 64.0 - (32.0 / 9.0) * (b / rb) * k.M2;
    f.k1_below_m1 = k.M1 - k.K1;
    f.m1_below_cap = std::sqrt(3.0) / (8.0 * std::sqrt(rb)) - k.M1;
    f.third = b - rb * rb * k.K1 - b * k.K1 / (2.0 * k.M2);
    f.high = std::min({k.K2, k.M3 - k.K2, b / (rb * rb) - k.M3});
    return f;
}

// ---------------------------------------------------------------------------
// Per-mode quadratic forms. For a mode at |xi| = r with coefficients (h, c)
// the shell functional density is x^T Q(r) x, x = (Re, Im) parts taken
// separately. Low shells (k <= 0):
//   Q = [[(1 + r^2)/rho, -K1 r^2], [-K1 r^2, 1]]
// high shells (k > 0):
//   Q = [[(r + r^3)/rho + nu_c/rho K2 r^5, -K2 r^3], [-K2 r^3, r]]

using Mat2 = Eigen::Matrix2d;

inline Mat2 shell_form(int k, double r, const FluidParams& params, const EstimateConstants& kc)
{
    const double rb = params.rho_bar;
    Mat2 q;
    if (k <= 0) {
        q << (1.0 + r * r) / rb, -kc.K1 * r * r, -kc.K1 * r * r, 1.0;
    } else {
        const double r3 = r * r * r;
        q << (r + r3) / rb + params.bulk() / (rb * rb) * kc.K2 * r3 * r * r, -kc.K2 * r3, -kc.K2 * r3, r;
    }
    return q;
}

/// Reference sum of squared block norms the functional is equivalent to:
/// low: ||h||^2 + ||Lambda h||^2 + ||c||^2, high: ||L^1/2 h||^2 + ||L^3/2 h||^2 + ||L^5/2 h||^2 + ||L^1/2 c||^2.
inline Mat2 reference_form(int k, double r)
{
    Mat2 d = Mat2::Zero();
    if (k <= 0) {
        d(0, 0) = 1.0 + r * r;
        d(1, 1) = 1.0;
    } else {
        d(0, 0) = r + r * r * r + r * r * r * r * r;
        d(1, 1) = r;
    }
    return d;
}

/// Weights max(1, 2^{5k/2}) on ||h_k||^2 and max(1, 2^{k/2}) on ||c_k||^2.
inline Mat2 dyadic_weight_form(int k)
{
    Mat2 d = Mat2::Zero();
    d(0, 0) = std::max(1.0, std::exp2(2.5 * k));
    d(1, 1) = std::max(1.0, std::exp2(0.5 * k));
    return d;
}

/// Extreme generalized eigenvalues of (ref, q): ref-form / q-form ranges in [lo, hi].
inline std::pair<double, double> generalized_range(const Mat2& ref, const Mat2& q)
{
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat2> es(ref, q);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

/// Smallest eigenvalue of the scale-free form D^{-1/2} Q D^{-1/2} at radius r.
inline double normalized_min_eigenvalue(int k, double r, const FluidParams& params, const EstimateConstants& kc)
{
    const Mat2 q = shell_form(k, r, params, kc);
    const Mat2 d = reference_form(k, r);
    Mat2 s = Mat2::Zero();
    s(0, 0) = 1.0 / std::sqrt(d(0, 0));
    s(1, 1) = 1.0 / std::sqrt(d(1, 1));
    const Mat2 n = s * q * s;
    Eigen::SelfAdjointEigenSolver<Mat2> es(n);
    return es.eigenvalues().minCoeff();
}

struct ShellEnergy {
    int k = 0;
    double alpha_sq = 0.0;
    double h_sq = 0.0;          // ||Delta_k h||^2
    double lambda_h_sq = 0.0;   // ||Lambda Delta_k h||^2
    double c_sq = 0.0;          // ||Delta_k c||^2
    double h_half_sq = 0.0;     // ||Lambda^{1/2} Delta_k h||^2
    double h_three_half_sq = 0.0;
    double h_five_half_sq = 0.0;
    double c_half_sq = 0.0;
    double reference_sq = 0.0;  // the equivalent sum of squared block norms
    double weighted_sq = 0.0;   // max(1,2^{5k/2})||h_k||^2 + max(1,2^{k/2})||c_k||^2
};

namespace detail {

inline void accumulate_mode(ShellEnergy& e, double w2vol, double r, const complex& h, const complex& c,
                            const FluidParams& params, const EstimateConstants& kc)
{
    const double hh = std::norm(h);
    const double cc = std::norm(c);
    const double hc = (h * std::conj(c)).real();
    const Mat2 q = shell_form(e.k, r, params, kc);
    e.alpha_sq += w2vol * (q(0, 0) * hh + q(1, 1) * cc + 2.0 * q(0, 1) * hc);
    e.h_sq += w2vol * hh;
    e.lambda_h_sq += w2vol * r * r * hh;
    e.c_sq += w2vol * cc;
    e.h_half_sq += w2vol * r * hh;
    e.h_three_half_sq += w2vol * r * r * r * hh;
    e.h_five_half_sq += w2vol * r * r * r * r * r * hh;
    e.c_half_sq += w2vol * r * cc;
    const Mat2 d = reference_form(e.k, r);
    e.reference_sq += w2vol * (d(0, 0) * hh + d(1, 1) * cc);
    const Mat2 wd = dyadic_weight_form(e.k);
    e.weighted_sq += w2vol * (wd(0, 0) * hh + wd(1, 1) * cc);
}

}  // namespace detail

/// Shell functional alpha_k^2 of (h, c) for every shell of the grid.
inline std::vector<ShellEnergy> shell_energies(const NspState& s, const FluidParams& params,
                                               const EstimateConstants& kc)
{
    const Grid& g = s.grid();
    const auto table = lp::ShellTable::for_grid(g);
    std::vector<ShellEnergy> out(static_cast<std::size_t>(table->shell_count()));
    for (int i = 0; i < table->shell_count(); ++i)
        out[static_cast<std::size_t>(i)].k = table->k_min() + i;
    const double vol = g.volume();
    for (std::size_t p = 1; p < g.size(); ++p) {
        const complex h = s.h(0, p);
        const complex c = s.c(0, p);
        if (h == complex{} && c == complex{})
            continue;
        const double r = g.xi_norm(p);
        const int k0 = table->first_shell(p);
        const double w0 = table->first_weight(p);
        const double w1 = table->second_weight(p);
        if (w0 > 0.0)
            detail::accumulate_mode(out[static_cast<std::size_t>(k0 - table->k_min())], w0 * w0 * vol, r, h, c,
                                    params, kc);
        if (w1 > 0.0)
            detail::accumulate_mode(out[static_cast<std::size_t>(k0 + 1 - table->k_min())], w1 * w1 * vol, r, h,
                                    c, params, kc);
    }
    return out;
}

inline ShellEnergy shell_energy(const NspState& s, int k, const FluidParams& params, const EstimateConstants& kc)
{
    const auto table = lp::ShellTable::for_grid(s.grid());
    if (k < table->k_min() || k > table->k_max())
        return ShellEnergy{k};
    return shell_energies(s, params, kc)[static_cast<std::size_t>(k - table->k_min())];
}

enum class Reference { block_sum, dyadic_weights };

/// Constants (c1, c2) with c1 alpha_k^2 <= reference <= c2 alpha_k^2 for every
/// grid function, from the extreme generalized eigenvalues over the lattice
/// radii that shell k touches.
inline std::pair<double, double> equivalence_bounds(const Grid& grid, int k, const FluidParams& params,
                                                    const EstimateConstants& kc,
                                                    Reference ref = Reference::block_sum)
{
    const auto table = lp::ShellTable::for_grid(grid);
    std::map<std::int64_t, double> radii;
    for (std::size_t p = 1; p < grid.size(); ++p)
        if (table->weight(p, k) > 0.0)
            radii.emplace(grid.lattice_norm_sq(p), grid.xi_norm(p));
    if (radii.empty())
        throw std::invalid_argument("equivalence_bounds: shell " + std::to_string(k) + " is empty on this grid");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& [key, r] : radii) {
        const Mat2 d = ref == Reference::block_sum ? reference_form(k, r) : dyadic_weight_form(k);
        const auto [a, b] = generalized_range(d, shell_form(k, r, params, kc));
        lo = std::min(lo, a);
        hi = std::max(hi, b);
    }
    return {lo, hi};
}

/// min(2^{2k}, 1): the shell's dissipation scaling.
inline double dissipation_scale(int k) { return std::min(std::exp2(2.0 * k), 1.0); }

/// Data-independent lower bound for the fitted damping constant on the
/// homogeneous linear flow sampled every dt: per radius the one-step
/// contraction of alpha is at most sqrt(lambda_max(E^T Q E, Q)), E = exp(dt A).
inline double damping_rate_bound(const Grid& grid, const FluidParams& params, const EstimateConstants& kc,
                                 double dt)
{
    const auto table = lp::ShellTable::for_grid(grid);
    std::map<std::pair<int, std::int64_t>, double> seen;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 1; p < grid.size(); ++p) {
        if (grid.is_nyquist(p))
            continue;
        for (int k : {table->first_shell(p), table->first_shell(p) + 1}) {
            if (table->weight(p, k) <= 0.0)
                continue;
            const auto key = std::make_pair(k, grid.lattice_norm_sq(p));
            if (seen.count(key))
                continue;
            const double r = grid.xi_norm(p);
            const Mat2 q = shell_form(k, r, params, kc);
            const Mat2 e = (dt * coupling_matrix(r, params)).exp();
            const auto [lo, hi] = generalized_range(e.transpose() * q * e, q);
            const double contraction = std::sqrt(std::max(hi, 0.0));
            const double rate = (1.0 - contraction) / (dt * dissipation_scale(k));
            seen.emplace(key, rate);
            best = std::min(best, rate);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

/// Regularity exponents used by the monitor, all relative to s = N/2.
struct NormIndices {
    lp::HybridIndex h_sup;       // (s - 3/2, s + 1)
    lp::HybridIndex u_sup;       // (s - 3/2, s - 1)
    lp::HybridIndex h_int;       // (s + 1/2, s + 1)
    lp::HybridIndex u_int;       // (s + 1/2, s + 1)
    lp::HybridIndex phi;         // (s - 1/2, s + 2)
    lp::HybridIndex rho_data;    // (s - 5/2, s)
    double v_besov = 0.0;        // s + 1
    double smoothing_s = 0.0;    // s

    static NormIndices for_dim(int dim)
    {
        const double s = 0.5 * dim;
        return {{s - 1.5, s + 1.0}, {s - 1.5, s - 1.0}, {s + 0.5, s + 1.0}, {s + 0.5, s + 1.0},
                {s - 0.5, s + 2.0}, {s - 2.5, s},       s + 1.0,            s};
    }
};

/// Monitor output at one instant.
struct EnergyReport {
    double t = 0.0;
    std::vector<ShellEnergy> shells;
    double h_norm = 0.0;    // ||h||_{B~^{s-3/2, s+1}}
    double c_norm = 0.0;    // ||c||_{B~^{s-3/2, s-1}}
    double I_norm = 0.0;    // ||I||_{B~^{s-3/2, s-1}}
    double u_norm = 0.0;    // ||u||_{B~^{s-3/2, s-1}}
    double phi_norm = 0.0;  // ||phi||_{B~^{s-1/2, s+2}}
    double u_besov = 0.0;   // ||u||_{B^{s+1}}, integrand of V
    double V = 0.0;
    double E = 0.0;         // E(h, u, t)
    double smoothing_integrand = 0.0;  // sum_{k>0} 2^{k(s+3/2)} ||c_k||
    double smoothing_integral = 0.0;
    double mass = 0.0;      // grid mean of theta = Lambda h
    double min_density = 0.0;
    bool positivity_ok = true;
    bool guard_active = false;

    double alpha_sq(int k) const
    {
        for (const auto& e : shells)
            if (e.k == k)
                return e.alpha_sq;
        return 0.0;
    }
};

/// E(0) = ||Lambda^{-1}(rho0 - rho_bar)||_{B~^{s-3/2,s+1}} + ||u0||_{B~^{s-3/2,s-1}}.
inline double initial_energy(const NspState& s)
{
    const auto idx = NormIndices::for_dim(s.grid().dim());
    return lp::hybrid_norm(s.h, idx.h_sup) + lp::hybrid_norm(velocity(s), idx.u_sup);
}

/// Accumulates reports along a trajectory: V(t) and the time integrals in
/// E(h, u, t) and the smoothing integral by the trapezoid rule.
class EnergyMonitor {
public:
    EnergyMonitor(const FluidParams& params, const EstimateConstants& kc)
        : params_(params), consts_(kc), idx_(NormIndices::for_dim(params.dim))
    {
    }

    const EnergyReport& observe(const NspState& s, const StepReport& rep = {})
    {
        EnergyReport r;
        r.t = s.t;
        r.shells = shell_energies(s, params_, consts_);
        const SpectralField u = velocity(s);
        const auto hspec = lp::dyadic_spectrum(s.h);
        const auto uspec = lp::dyadic_spectrum(u);
        const auto cspec = lp::dyadic_spectrum(s.c);
        r.h_norm = lp::hybrid_norm(hspec, idx_.h_sup);
        r.u_norm = lp::hybrid_norm(uspec, idx_.u_sup);
        r.c_norm = lp::hybrid_norm(cspec, idx_.u_sup);
        r.I_norm = lp::hybrid_norm(s.incompressible, idx_.u_sup);
        const SpectralField theta = density_perturbation(s);
        r.phi_norm = lp::hybrid_norm(poisson_solve(theta), idx_.phi);
        r.u_besov = lp::besov_norm(uspec, idx_.v_besov);
        const double h_int = lp::hybrid_norm(hspec, idx_.h_int);
        const double u_int = lp::hybrid_norm(uspec, idx_.u_int);
        double smooth = 0.0;
        for (int k = std::max(1, cspec.k_min); k <= cspec.k_max; ++k)
            smooth += std::exp2(k * (idx_.smoothing_s + 1.5)) * cspec.at(k);
        r.smoothing_integrand = smooth;
        r.mass = to_physical(theta).mean();
        r.min_density = rep.min_density;
        r.positivity_ok = !rep.positivity_lost;
        r.guard_active = rep.guard_active;

        if (reports_.empty()) {
            sup_h_ = r.h_norm;
            sup_u_ = r.u_norm;
        } else {
            const EnergyReport& prev = reports_.back();
            const double dt = r.t - prev.t;
            V_ += 0.5 * dt * (prev.u_besov + r.u_besov);
            int_h_ += 0.5 * dt * (last_h_int_ + h_int);
            int_u_ += 0.5 * dt * (last_u_int_ + u_int);
            smoothing_ += 0.5 * dt * (prev.smoothing_integrand + r.smoothing_integrand);
            sup_h_ = std::max(sup_h_, r.h_norm);
            sup_u_ = std::max(sup_u_, r.u_norm);
        }
        last_h_int_ = h_int;
        last_u_int_ = u_int;
        r.V = V_;
        r.smoothing_integral = smoothing_;
        r.E = sup_h_ + sup_u_ + int_h_ + int_u_;
        reports_.push_back(std::move(r));
        return reports_.back();
    }

    const std::vector<EnergyReport>& reports() const { return reports_; }
    const EstimateConstants& constants() const { return consts_; }
    const NormIndices& indices() const { return idx_; }

private:
    FluidParams params_;
    EstimateConstants consts_;
    NormIndices idx_;
    std::vector<EnergyReport> reports_;
    double V_ = 0.0;
    double sup_h_ = 0.0;
    double sup_u_ = 0.0;
    double int_h_ = 0.0;
    double int_u_ = 0.0;
    double smoothing_ = 0.0;
    double last_h_int_ = 0.0;
    double last_u_int_ = 0.0;
};

/// Running E-space norm of a difference trajectory (used by perturbation runs).
class DifferenceNorm {
public:
    explicit DifferenceNorm(int dim) : idx_(NormIndices::for_dim(dim)) {}

    double observe(double t, const NspState& a, const NspState& b)
    {
        NspState d = a;
        d -= b;
        const SpectralField u = velocity(d);
        const auto hs = lp::dyadic_spectrum(d.h);
        const auto us = lp::dyadic_spectrum(u);
        const double hi = lp::hybrid_norm(hs, idx_.h_int);
        const double ui = lp::hybrid_norm(us, idx_.u_int);
        if (first_) {
            sup_h_ = lp::hybrid_norm(hs, idx_.h_sup);
            sup_u_ = lp::hybrid_norm(us, idx_.u_sup);
            first_ = false;
        } else {
            const double dt = t - t_;
            int_ += 0.5 * dt * (last_int_ + hi + ui);
            sup_h_ = std::max(sup_h_, lp::hybrid_norm(hs, idx_.h_sup));
            sup_u_ = std::max(sup_u_, lp::hybrid_norm(us, idx_.u_sup));
        }
        t_ = t;
        last_int_ = hi + ui;
        return sup_h_ + sup_u_ + int_;
    }

private:
    NormIndices idx_;
    bool first_ = true;
    double t_ = 0.0;
    double sup_h_ = 0.0;
    double sup_u_ = 0.0;
    double int_ = 0.0;
    double last_int_ = 0.0;
};

/// V series (non-decreasing by construction).
inline std::vector<double> accumulate_V(const std::vector<EnergyReport>& reports)
{
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports)
        v.push_back(r.V);
    return v;
}

/// Accumulated  int_0^t sum_{k>0} 2^{k(s+3/2)} ||c_k|| dtau  at the last report.
inline double smoothing_integral(const std::vector<EnergyReport>& reports)
{
    return reports.empty() ? 0.0 : reports.back().smoothing_integral;
}

/// (C + C V) (||h0||_{B~^{s-1,s+3/2}} + ||c0||_{B~^{s-1,s-1/2}} + forcing_integral).
inline double smoothing_majorant(const NspState& s0, double V, double forcing_integral, double C)
{
    const double s = 0.5 * s0.grid().dim();
    const double data = lp::hybrid_norm(s0.h, {s - 1.0, s + 1.5}) + lp::hybrid_norm(s0.c, {s - 1.0, s - 0.5});
    return (C + C * V) * (data + forcing_integral);
}

/// Data-independent C for smoothing_majorant on the homogeneous linear flow
/// sampled at `times` (trapezoid rule, as the monitor integrates). Per shell
/// k > 0, ||Delta_k c(t)|| <= sup|E_21| ||Delta_k h0|| + sup|E_22| ||Delta_k c0||
/// with E = exp(t A) and the sup over the radii the shell touches.
inline double smoothing_constant_bound(const Grid& grid, const FluidParams& params, const std::vector<double>& times)
{
    if (times.size() < 2)
        throw std::invalid_argument("smoothing_constant_bound: need at least two instants");
    const auto table = lp::ShellTable::for_grid(grid);
    std::map<int, std::map<std::int64_t, double>> radii;
    for (std::size_t p = 1; p < grid.size(); ++p) {
        if (grid.is_nyquist(p))
            continue;
        for (int k : {table->first_shell(p), table->first_shell(p) + 1})
            if (k > 0 && table->weight(p, k) > 0.0)
                radii[k].emplace(grid.lattice_norm_sq(p), grid.xi_norm(p));
    }
    double best = 0.0;
    for (const auto& [k, rs] : radii) {
        std::vector<double> gh(times.size(), 0.0), gc(times.size(), 0.0);
        for (const auto& [key, r] : rs) {
            const Mat2 a = coupling_matrix(r, params);
            for (std::size_t i = 0; i < times.size(); ++i) {
                const Mat2 e = (times[i] * a).exp();
                gh[i] = std::max(gh[i], std::abs(e(1, 0)));
                gc[i] = std::max(gc[i], std::abs(e(1, 1)));
            }
        }
        double ih = 0.0, ic = 0.0;
        for (std::size_t i = 0; i + 1 < times.size(); ++i) {
            const double dt = times[i + 1] - times[i];
            ih += 0.5 * dt * (gh[i] + gh[i + 1]);
            ic += 0.5 * dt * (gc[i] + gc[i + 1]);
        }
        // integrand weight 2^{k(s+3/2)}; data weights 2^{k(s+3/2)} on h, 2^{k(s-1/2)} on c
        best = std::max({best, ih, std::exp2(2.0 * k) * ic});
    }
    return best;
}

/// Per-shell damping margins over a window of consecutive reports:
/// max over adjacent pairs of (alpha(t+D) - alpha(t))/D + c_fit min(2^{2k},1) alpha(t) - forcing_k.
/// A margin <= 0 means the damping inequality held on the window.
inline std::map<int, double> damping_margin(const std::vector<EnergyReport>& window, double c_fit,
                                            const std::map<int, double>& forcing = {})
{
    if (window.size() < 3)
        throw std::invalid_argument("damping_margin: window needs at least 3 instants");
    std::map<int, double> margin;
    for (std::size_t i = 0; i + 1 < window.size(); ++i) {
        const double dt = window[i + 1].t - window[i].t;
        for (const auto& e : window[i].shells) {
            const double a0 = std::sqrt(std::max(e.alpha_sq, 0.0));
            const double a1 = std::sqrt(std::max(window[i + 1].alpha_sq(e.k), 0.0));
            double m = (a1 - a0) / dt + c_fit * dissipation_scale(e.k) * a0;
            if (auto it = forcing.find(e.k); it != forcing.end())
                m -= it->second;
            auto [slot, inserted] = margin.emplace(e.k, m);
            if (!inserted)
                slot->second = std::max(slot->second, m);
        }
    }
    return margin;
}

/// Largest c such that every nonzero shell satisfies the homogeneous damping inequality on the window.
inline double fit_damping_constant(const std::vector<EnergyReport>& window, double floor_alpha = 0.0)
{
    if (window.size() < 3)
        throw std::invalid_argument("fit_damping_constant: window needs at least 3 instants");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < window.size(); ++i) {
        const double dt = window[i + 1].t - window[i].t;
        for (const auto& e : window[i].shells) {
            const double a0 = std::sqrt(std::max(e.alpha_sq, 0.0));
            if (!(a0 > floor_alpha))
                continue;
            const double a1 = std::sqrt(std::max(window[i + 1].alpha_sq(e.k), 0.0));
            best = std::min(best, -(a1 - a0) / (dt * dissipation_scale(e.k) * a0));
        }
    }
    return best;
}

/// True when the local maxima of alpha_k(t) never increase, for every shell.
inline bool envelopes_non_increasing(const std::vector<EnergyReport>& reports, double rel_tol = 1e-12)
{
    if (reports.empty())
        return true;
    for (const auto& e : reports.front().shells) {
        std::vector<double> series;
        for (const auto& r : reports)
            series.push_back(std::sqrt(std::max(r.alpha_sq(e.k), 0.0)));
        std::optional<double> last_peak;
        for (std::size_t i = 0; i < series.size(); ++i) {
            const bool left = i == 0 || series[i] >= series[i - 1];
            const bool right = i + 1 == series.size() || series[i] >= series[i + 1];
            if (!(left && right))
                continue;
            if (last_peak && series[i] > *last_peak * (1.0 + rel_tol) + 1e-300)
                return false;
            last_peak = series[i];
        }
    }
    return true;
}

struct BoundVerdict {
    bool pass = true;
    double max_ratio = 0.0;
};

/// E(h, u, t) <= A C~ E(0) at every monitored instant.
inline BoundVerdict global_bound_check(const std::vector<EnergyReport>& reports, double E0,
                                       const EstimateConstants& kc)
{
    BoundVerdict v;
    if (E0 <= 0.0) {
        for (const auto& r : reports)
            v.pass = v.pass && r.E == 0.0;
        return v;
    }
    for (const auto& r : reports) {
        v.max_ratio = std::max(v.max_ratio, r.E / E0);
        v.pass = v.pass && r.E <= kc.A * kc.C_tilde * E0;
    }
    return v;
}

/// Apply the exp(-K V(t)) weight to recorded series (alpha^2 picks up exp(-2 K V)).
inline std::vector<EnergyReport> reweight(std::vector<EnergyReport> reports, double K)
{
    for (auto& r : reports) {
        const double w = std::exp(-K * r.V);
        for (auto& e : r.shells) {
            e.alpha_sq *= w * w;
            e.h_sq *= w * w;
            e.lambda_h_sq *= w * w;
            e.c_sq *= w * w;
            e.h_half_sq *= w * w;
            e.h_three_half_sq *= w * w;
            e.h_five_half_sq *= w * w;
            e.c_half_sq *= w * w;
            e.reference_sq *= w * w;
            e.weighted_sq *= w * w;
        }
        r.h_norm *= w;
        r.c_norm *= w;
        r.I_norm *= w;
        r.u_norm *= w;
        r.smoothing_integrand *= w;
    }
    return reports;
}

}  // namespace nsp::energy
