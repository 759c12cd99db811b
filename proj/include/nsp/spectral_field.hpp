#pragma once

#include "nsp/fft.hpp"
#include "nsp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsp {

using complex = std::complex<double>;

inline void require_same_grid(const Grid& a, const Grid& b, const char* what)
{
    if (!(a == b))
        throw std::invalid_argument(std::string("grid mismatch in ") + what);
}

/// Real field sampled on the physical grid, one block of M^N values per component.
class PhysicalField {
public:
    PhysicalField(Grid grid, int components = 1)
        : grid_(std::move(grid)), components_(components),
          values_(grid_.size() * static_cast<std::size_t>(components), 0.0)
    {
        if (components < 1)
            throw std::invalid_argument("a field needs at least one component");
    }

    const Grid& grid() const { return grid_; }
    int components() const { return components_; }

    std::span<double> component(int c) { return {values_.data() + offset(c), grid_.size()}; }
    std::span<const double> component(int c) const { return {values_.data() + offset(c), grid_.size()}; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    double& operator()(int c, std::size_t p) { return values_[offset(c) + p]; }
    double operator()(int c, std::size_t p) const { return values_[offset(c) + p]; }

    /// L^2 norm over the box with Lebesgue measure (components combined in l^2).
    double l2_norm() const
    {
        double sum = 0.0;
        for (double v : values_)
            sum += v * v;
        return std::sqrt(sum * grid_.volume() / static_cast<double>(grid_.size()));
    }

    /// Max over points of the Euclidean norm across components.
    double linf_norm() const
    {
        double best = 0.0;
        for (std::size_t p = 0; p < grid_.size(); ++p) {
            double s = 0.0;
            for (int c = 0; c < components_; ++c)
                s += (*this)(c, p) * (*this)(c, p);
            best = std::max(best, s);
        }
        return std::sqrt(best);
    }

    double mean(int c = 0) const
    {
        double s = 0.0;
        for (double v : component(c))
            s += v;
        return s / static_cast<double>(grid_.size());
    }

private:
    std::size_t offset(int c) const { return static_cast<std::size_t>(c) * grid_.size(); }

    Grid grid_;
    int components_;
    std::vector<double> values_;
};

/// Fourier coefficients of a real scalar or vector field on a periodic grid.
///
/// Convention: f(x) = sum_xi fhat(xi) exp(i xi.x), so fhat is the mean of
/// f exp(-i xi.x) over the box and ||f||_{L^2}^2 = L^N sum |fhat|^2.
class SpectralField {
public:
    SpectralField(Grid grid, int components = 1)
        : grid_(std::move(grid)), components_(components),
          coeffs_(grid_.size() * static_cast<std::size_t>(components))
    {
        if (components < 1)
            throw std::invalid_argument("a field needs at least one component");
    }

    const Grid& grid() const { return grid_; }
    int components() const { return components_; }

    std::span<complex> component(int c) { return {coeffs_.data() + offset(c), grid_.size()}; }
    std::span<const complex> component(int c) const { return {coeffs_.data() + offset(c), grid_.size()}; }
    std::span<complex> coefficients() { return coeffs_; }
    std::span<const complex> coefficients() const { return coeffs_; }

    complex& operator()(int c, std::size_t p) { return coeffs_[offset(c) + p]; }
    const complex& operator()(int c, std::size_t p) const { return coeffs_[offset(c) + p]; }

    /// Zero-mode coefficient, i.e. the spatial mean of component c.
    complex mean(int c = 0) const { return coeffs_[offset(c)]; }

    SpectralField& operator+=(const SpectralField& o)
    {
        check_compatible(o, "operator+=");
        for (std::size_t i = 0; i < coeffs_.size(); ++i)
            coeffs_[i] += o.coeffs_[i];
        return *this;
    }
    SpectralField& operator-=(const SpectralField& o)
    {
        check_compatible(o, "operator-=");
        for (std::size_t i = 0; i < coeffs_.size(); ++i)
            coeffs_[i] -= o.coeffs_[i];
        return *this;
    }
    SpectralField& operator*=(double a)
    {
        for (auto& z : coeffs_)
            z *= a;
        return *this;
    }
    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
    friend SpectralField operator*(SpectralField a, double s) { return a *= s; }

    /// a += s * b
    void add_scaled(double s, const SpectralField& b)
    {
        check_compatible(b, "add_scaled");
        for (std::size_t i = 0; i < coeffs_.size(); ++i)
            coeffs_[i] += s * b.coeffs_[i];
    }

    /// Sum of squared coefficient magnitudes, all components.
    double coefficient_energy() const
    {
        double s = 0.0;
        for (const auto& z : coeffs_)
            s += std::norm(z);
        return s;
    }

    /// L^2 norm over the box, evaluated on the spectral side (Plancherel).
    double l2_norm() const { return std::sqrt(grid_.volume() * coefficient_energy()); }

    double max_abs() const
    {
        double m = 0.0;
        for (const auto& z : coeffs_)
            m = std::max(m, std::abs(z));
        return m;
    }

    bool is_zero() const
    {
        return std::all_of(coeffs_.begin(), coeffs_.end(), [](const complex& z) { return z == complex{}; });
    }

    bool all_finite() const
    {
        return std::all_of(coeffs_.begin(), coeffs_.end(),
                           [](const complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
    }

    /// max |fhat(-xi) - conj fhat(xi)| relative to the largest coefficient (0 for the zero field).
    double hermitian_defect() const
    {
        const double scale = max_abs();
        if (scale == 0.0)
            return 0.0;
        double worst = 0.0;
        for (int c = 0; c < components_; ++c) {
            auto f = component(c);
            for (std::size_t p = 0; p < grid_.size(); ++p)
                worst = std::max(worst, std::abs(f[grid_.mirror(p)] - std::conj(f[p])));
        }
        return worst / scale;
    }

    /// Replace coefficients by their Hermitian part, (f(xi) + conj f(-xi)) / 2.
    void make_hermitian()
    {
        for (int c = 0; c < components_; ++c) {
            auto f = component(c);
            for (std::size_t p = 0; p < grid_.size(); ++p) {
                const std::size_t q = grid_.mirror(p);
                if (q < p)
                    continue;
                const complex avg = 0.5 * (f[p] + std::conj(f[q]));
                f[p] = avg;
                f[q] = std::conj(avg);
            }
        }
    }

    void zero_nyquist()
    {
        for (int c = 0; c < components_; ++c) {
            auto f = component(c);
            for (std::size_t p = 0; p < grid_.size(); ++p)
                if (grid_.is_nyquist(p))
                    f[p] = 0.0;
        }
    }

    bool nyquist_is_zero() const
    {
        for (int c = 0; c < components_; ++c) {
            auto f = component(c);
            for (std::size_t p = 0; p < grid_.size(); ++p)
                if (grid_.is_nyquist(p) && f[p] != complex{})
                    return false;
        }
        return true;
    }

    /// Zero every mode outside the 2/3-rule band.
    void dealias()
    {
        for (int c = 0; c < components_; ++c) {
            auto f = component(c);
            for (std::size_t p = 0; p < grid_.size(); ++p)
                if (!grid_.in_dealias_band(p))
                    f[p] = 0.0;
        }
    }

    /// Extract components [first, first + count) as a new field.
    SpectralField slice(int first, int count) const
    {
        SpectralField out(grid_, count);
        for (int c = 0; c < count; ++c)
            std::copy_n(component(first + c).begin(), grid_.size(), out.component(c).begin());
        return out;
    }

    void assign_component(int c, const SpectralField& scalar, int from = 0)
    {
        require_same_grid(grid_, scalar.grid(), "assign_component");
        std::copy_n(scalar.component(from).begin(), grid_.size(), component(c).begin());
    }

private:
    std::size_t offset(int c) const { return static_cast<std::size_t>(c) * grid_.size(); }

    void check_compatible(const SpectralField& o, const char* what) const
    {
        require_same_grid(grid_, o.grid_, what);
        if (o.components_ != components_)
            throw std::invalid_argument(std::string("component count mismatch in ") + what);
    }

    Grid grid_;
    int components_;
    std::vector<complex> coeffs_;
};

/// Inverse transform: coefficients to grid values. Imaginary round-off is discarded.
inline PhysicalField to_physical(const SpectralField& f)
{
    const Grid& g = f.grid();
    PhysicalField out(g, f.components());
    std::vector<complex> buf(g.size());
    // components are real in physical space, so two share one transform as f + i g
    for (int c = 0; c < f.components(); c += 2) {
        const bool pair = c + 1 < f.components();
        auto a = f.component(c);
        if (pair) {
            auto b = f.component(c + 1);
            for (std::size_t p = 0; p < g.size(); ++p)
                buf[p] = a[p] + complex(-b[p].imag(), b[p].real());
        } else {
            std::copy_n(a.begin(), g.size(), buf.begin());
        }
        fft::transform(buf, g.dim(), g.points(), fft::Direction::backward);
        auto dst = out.component(c);
        for (std::size_t p = 0; p < g.size(); ++p)
            dst[p] = buf[p].real();
        if (pair) {
            auto dst2 = out.component(c + 1);
            for (std::size_t p = 0; p < g.size(); ++p)
                dst2[p] = buf[p].imag();
        }
    }
    return out;
}

/// Forward transform: grid values to coefficients, Nyquist row zeroed.
inline SpectralField to_spectral(const PhysicalField& f)
{
    const Grid& g = f.grid();
    SpectralField out(g, f.components());
    std::vector<complex> buf(g.size());
    const double scale = 1.0 / static_cast<double>(g.size());
    for (int c = 0; c < f.components(); c += 2) {
        const bool pair = c + 1 < f.components();
        auto src = f.component(c);
        if (pair) {
            auto src2 = f.component(c + 1);
            for (std::size_t p = 0; p < g.size(); ++p)
                buf[p] = complex(src[p], src2[p]);
        } else {
            for (std::size_t p = 0; p < g.size(); ++p)
                buf[p] = complex(src[p], 0.0);
        }
        fft::transform(buf, g.dim(), g.points(), fft::Direction::forward);
        auto dst = out.component(c);
        if (!pair) {
            for (std::size_t p = 0; p < g.size(); ++p)
                dst[p] = g.is_nyquist(p) ? complex{} : buf[p] * scale;
            continue;
        }
        auto dst2 = out.component(c + 1);
        for (std::size_t p = 0; p < g.size(); ++p) {
            if (g.is_nyquist(p))
                continue;
            const complex z = buf[p];
            const complex zm = std::conj(buf[g.mirror(p)]);
            dst[p] = 0.5 * scale * (z + zm);
            dst2[p] = 0.5 * scale * complex((z - zm).imag(), -(z - zm).real());
        }
    }
    return out;
}

}  // namespace nsp
