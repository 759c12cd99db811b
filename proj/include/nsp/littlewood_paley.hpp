#pragma once

#include "nsp/operators.hpp"
#include "nsp/spectral_field.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string_view>
#include <tuple>
#include <vector>

namespace nsp::lp {

/// Radial cutoff pair (psi, phi) generating the homogeneous dyadic partition.
///
/// psi is 1 on [0, 3/4], 0 on [4/3, inf), and on the transition band it
/// follows 1 - S((r - 3/4) / (4/3 - 3/4)) where S is the normalized running
/// integral of the C^inf bump exp(-1 / (x (1 - x))). phi(r) = psi(r/2) - psi(r)
/// is supported in [3/4, 8/3] and the dilates phi(2^-k r) sum to one.
class CutoffProfile {
public:
    static constexpr double inner = 3.0 / 4.0;
    static constexpr double outer = 4.0 / 3.0;
    static constexpr std::string_view recipe = "cinf-bump-integral/gauss-kronrod-61";

    static double psi(double r)
    {
        if (r <= inner)
            return 1.0;
        if (r >= outer)
            return 0.0;
        return 1.0 - smooth_step((r - inner) / (outer - inner));
    }

    static double phi(double r) { return psi(0.5 * r) - psi(r); }

    /// Normalized integral of the bump over [0, x], x in [0, 1].
    static double smooth_step(double x)
    {
        if (x <= 0.0)
            return 0.0;
        if (x >= 1.0)
            return 1.0;
        // integrate from the nearer end; the bump is symmetric about 1/2
        if (x > 0.5)
            return 1.0 - bump_integral(1.0 - x) / bump_total();
        return bump_integral(x) / bump_total();
    }

private:
    static double bump(double x)
    {
        if (x <= 0.0 || x >= 1.0)
            return 0.0;
        return std::exp(-1.0 / (x * (1.0 - x)));
    }

    static double bump_integral(double x)
    {
        using boost::math::quadrature::gauss_kronrod;
        return gauss_kronrod<double, 61>::integrate(bump, 0.0, x, 6, 1e-12);
    }

    static double bump_total()
    {
        static const double total = 2.0 * bump_integral(0.5);
        return total;
    }
};

/// (s, t): regularity index on low shells (k <= 0) and on high shells (k > 0).
struct HybridIndex {
    double s = 0.0;
    double t = 0.0;
};

/// Block norms ||Delta_k f||_{L^2} for k in [k_min, k_max].
struct DyadicSpectrum {
    int k_min = 0;
    int k_max = -1;
    std::vector<double> block_norms;

    double at(int k) const
    {
        if (k < k_min || k > k_max)
            return 0.0;
        return block_norms[static_cast<std::size_t>(k - k_min)];
    }
};

/// Per-grid table of the (at most two) shells touching every lattice point.
class ShellTable {
public:
    explicit ShellTable(const Grid& grid)
        : grid_(grid), first_(grid.size(), 0), weight_(2 * grid.size(), 0.0)
    {
        std::map<std::int64_t, std::tuple<int, double, double>> by_radius;
        int kmin = std::numeric_limits<int>::max();
        int kmax = std::numeric_limits<int>::min();
        for (std::size_t p = 1; p < grid.size(); ++p) {
            if (grid.is_nyquist(p))
                continue;
            const std::int64_t key = grid.lattice_norm_sq(p);
            auto it = by_radius.find(key);
            if (it == by_radius.end())
                it = by_radius.emplace(key, shells_of(grid.xi_norm(p))).first;
            const auto& [k0, w0, w1] = it->second;
            first_[p] = k0;
            weight_[2 * p] = w0;
            weight_[2 * p + 1] = w1;
            if (w0 > 0.0) {
                kmin = std::min(kmin, k0);
                kmax = std::max(kmax, k0);
            }
            if (w1 > 0.0) {
                kmin = std::min(kmin, k0 + 1);
                kmax = std::max(kmax, k0 + 1);
            }
        }
        k_min_ = kmin;
        k_max_ = kmax;
    }

    const Grid& grid() const { return grid_; }
    int k_min() const { return k_min_; }
    int k_max() const { return k_max_; }
    int shell_count() const { return k_max_ - k_min_ + 1; }

    /// phi(2^-k |xi_p|).
    double weight(std::size_t p, int k) const
    {
        if (p == 0 || grid_.is_nyquist(p))
            return 0.0;
        const int d = k - first_[p];
        if (d == 0)
            return weight_[2 * p];
        if (d == 1)
            return weight_[2 * p + 1];
        return 0.0;
    }

    int first_shell(std::size_t p) const { return first_[p]; }
    double first_weight(std::size_t p) const { return weight_[2 * p]; }
    double second_weight(std::size_t p) const { return weight_[2 * p + 1]; }

    static std::shared_ptr<const ShellTable> for_grid(const Grid& grid)
    {
        static std::mutex mutex;
        static std::map<std::tuple<int, int, double>, std::shared_ptr<const ShellTable>> cache;
        std::lock_guard lock(mutex);
        auto key = std::make_tuple(grid.dim(), grid.points(), grid.length());
        if (auto it = cache.find(key); it != cache.end())
            return it->second;
        auto table = std::make_shared<const ShellTable>(grid);
        cache.emplace(key, table);
        return table;
    }

private:
    // lowest shell k0 with phi(2^-k0 r) possibly > 0, and weights for k0, k0 + 1
    static std::tuple<int, double, double> shells_of(double r)
    {
        // phi(2^-k r) > 0 requires 3/4 < 2^-k r < 8/3
        const int k0 = static_cast<int>(std::floor(std::log2(r * 3.0 / 8.0))) + 1;
        double w0 = CutoffProfile::phi(std::ldexp(r, -k0));
        double w1 = CutoffProfile::phi(std::ldexp(r, -(k0 + 1)));
        if (w0 <= 0.0 && w1 > 0.0)
            return {k0 + 1, w1, std::max(0.0, CutoffProfile::phi(std::ldexp(r, -(k0 + 2))))};
        return {k0, std::max(0.0, w0), std::max(0.0, w1)};
    }

    Grid grid_;
    std::vector<int> first_;
    std::vector<double> weight_;
    int k_min_ = 0;
    int k_max_ = -1;
};

/// Delta_k f = F^{-1} phi(2^-k xi) F f.
inline SpectralField dyadic_block(const SpectralField& f, int k)
{
    const auto table = ShellTable::for_grid(f.grid());
    SpectralField out(f.grid(), f.components());
    for (int c = 0; c < f.components(); ++c) {
        auto src = f.component(c);
        auto dst = out.component(c);
        for (std::size_t p = 0; p < f.grid().size(); ++p)
            dst[p] = table->weight(p, k) * src[p];
    }
    return out;
}

/// All block norms of f. Vector fields combine components in l^2 within each block.
inline DyadicSpectrum dyadic_spectrum(const SpectralField& f)
{
    const auto table = ShellTable::for_grid(f.grid());
    DyadicSpectrum spec;
    spec.k_min = table->k_min();
    spec.k_max = table->k_max();
    std::vector<double> sq(static_cast<std::size_t>(table->shell_count()), 0.0);
    const Grid& g = f.grid();
    for (std::size_t p = 1; p < g.size(); ++p) {
        const double w0 = table->first_weight(p);
        const double w1 = table->second_weight(p);
        if (w0 == 0.0 && w1 == 0.0)
            continue;
        double e = 0.0;
        for (int c = 0; c < f.components(); ++c)
            e += std::norm(f(c, p));
        const auto i = static_cast<std::size_t>(table->first_shell(p) - spec.k_min);
        if (w0 > 0.0)
            sq[i] += w0 * w0 * e;
        if (w1 > 0.0)
            sq[i + 1] += w1 * w1 * e;
    }
    spec.block_norms.resize(sq.size());
    const double vol = g.volume();
    for (std::size_t i = 0; i < sq.size(); ++i)
        spec.block_norms[i] = std::sqrt(vol * sq[i]);
    return spec;
}

inline double besov_norm(const DyadicSpectrum& spec, double s)
{
    double sum = 0.0;
    for (int k = spec.k_min; k <= spec.k_max; ++k)
        sum += std::exp2(k * s) * spec.at(k);
    return sum;
}

/// Homogeneous B^s_{2,1} norm: sum_k 2^{ks} ||Delta_k f||_{L^2}.
inline double besov_norm(const SpectralField& f, double s) { return besov_norm(dyadic_spectrum(f), s); }

inline double hybrid_norm(const DyadicSpectrum& spec, HybridIndex idx)
{
    double sum = 0.0;
    for (int k = spec.k_min; k <= spec.k_max; ++k)
        sum += std::exp2(k * (k <= 0 ? idx.s : idx.t)) * spec.at(k);
    return sum;
}

/// Hybrid norm: exponent s on shells k <= 0, t on shells k > 0.
inline double hybrid_norm(const SpectralField& f, HybridIndex idx) { return hybrid_norm(dyadic_spectrum(f), idx); }

/// ||Lambda Delta_k f|| / ||Delta_k f||, which the support of phi confines to [(3/4) 2^k, (8/3) 2^k].
inline double bernstein_ratio(const SpectralField& f, int k)
{
    const auto table = ShellTable::for_grid(f.grid());
    const Grid& g = f.grid();
    double plain = 0.0;
    double lifted = 0.0;
    for (std::size_t p = 1; p < g.size(); ++p) {
        const double w = table->weight(p, k);
        if (w == 0.0)
            continue;
        double e = 0.0;
        for (int c = 0; c < f.components(); ++c)
            e += std::norm(f(c, p));
        plain += w * w * e;
        lifted += w * w * e * g.xi_norm_sq(p);
    }
    if (plain == 0.0)
        throw std::invalid_argument("bernstein_ratio: dyadic block is zero");
    return std::sqrt(lifted / plain);
}

/// sup |f| over the grid points.
inline double linf_norm(const SpectralField& f) { return to_physical(f).linf_norm(); }

/// Grid product f g of two scalar fields; exact (alias-free) when both are
/// supported in |m_i| < M/4.
inline SpectralField grid_product(const SpectralField& f, const SpectralField& g)
{
    require_same_grid(f.grid(), g.grid(), "grid_product");
    auto pf = to_physical(f);
    const auto pg = to_physical(g);
    auto a = pf.component(0);
    auto b = pg.component(0);
    for (std::size_t p = 0; p < a.size(); ++p)
        a[p] *= b[p];
    return to_spectral(pf);
}

/// ||fg|| / (||f||_inf ||g|| + ||f|| ||g||_inf) in the hybrid norm idx.
inline double product_estimate_ratio(const SpectralField& f, const SpectralField& g, HybridIndex idx)
{
    if (f.components() != 1 || g.components() != 1)
        throw std::invalid_argument("product_estimate_ratio: scalar fields required");
    if (f.is_zero() || g.is_zero())
        throw std::invalid_argument("product_estimate_ratio: zero factor");
    const double denom = linf_norm(f) * hybrid_norm(g, idx) + hybrid_norm(f, idx) * linf_norm(g);
    if (!(denom > 0.0))
        throw std::invalid_argument("product_estimate_ratio: zero denominator");
    return hybrid_norm(grid_product(f, g), idx) / denom;
}

/// ||fg||_{B~^{s1+s2-N/2, t1+t2-N/2}} / (||f||_{B~^{s1,t1}} ||g||_{B~^{s2,t2}}).
inline double product_estimate_ratio_shifted(const SpectralField& f, HybridIndex fi,
                                             const SpectralField& g, HybridIndex gi)
{
    if (f.is_zero() || g.is_zero())
        throw std::invalid_argument("product_estimate_ratio_shifted: zero factor");
    const double half_n = 0.5 * f.grid().dim();
    const HybridIndex out{fi.s + gi.s - half_n, fi.t + gi.t - half_n};
    const double denom = hybrid_norm(f, fi) * hybrid_norm(g, gi);
    if (!(denom > 0.0))
        throw std::invalid_argument("product_estimate_ratio_shifted: zero denominator");
    return hybrid_norm(grid_product(f, g), out) / denom;
}

/// ||F(f)||_{B^s} / ||f||_{B^s} for F(u) = u / (u + rho_bar).
inline double composition_check(const SpectralField& f, double s, double rho_bar)
{
    if (f.components() != 1)
        throw std::invalid_argument("composition_check: scalar field required");
    auto pf = to_physical(f);
    if (pf.linf_norm() >= rho_bar)
        throw std::invalid_argument("composition_check: |f| reaches the pole of u / (u + rho_bar)");
    const double base = besov_norm(f, s);
    if (!(base > 0.0))
        throw std::invalid_argument("composition_check: zero denominator");
    for (double& v : pf.component(0))
        v = v / (v + rho_bar);
    return besov_norm(to_spectral(pf), s) / base;
}

/// Extremes of sum_k phi(2^-k r)^2 over the grid's nonzero radii: the
/// almost-orthogonality constants c, C with c ||f||^2 <= sum_k ||Delta_k f||^2 <= C ||f||^2
/// on mean-free grid functions.
inline std::pair<double, double> orthogonality_bounds(const Grid& grid)
{
    const auto table = ShellTable::for_grid(grid);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t p = 1; p < grid.size(); ++p) {
        if (grid.is_nyquist(p))
            continue;
        const double w0 = table->first_weight(p);
        const double w1 = table->second_weight(p);
        const double s = w0 * w0 + w1 * w1;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    return {lo, hi};
}

}  // namespace nsp::lp
