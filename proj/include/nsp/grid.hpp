#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsp {

/// Periodic grid on the torus [0, L)^N with M points per axis.
///
/// The wavenumber lattice is xi = (2 pi / L) * m with integer m in
/// [-M/2, M/2). The row m = -M/2 on any axis is the Nyquist row; fields keep
/// it at exactly zero so that the lattice is symmetric under xi -> -xi.
///
/// Grid is a cheap value type: the per-point tables are built once and
/// shared between copies.
class Grid {
public:
    Grid(int dim, int points, double length = 2.0 * std::numbers::pi)
    {
        if (dim != 2 && dim != 3)
            throw std::invalid_argument("grid dimension must be 2 or 3, got " + std::to_string(dim));
        if (points < 8 || (points & (points - 1)) != 0)
            throw std::invalid_argument("points per axis must be a power of two >= 8, got "
                                        + std::to_string(points));
        if (!(length > 0.0) || !std::isfinite(length))
            throw std::invalid_argument("box length must be positive and finite");
        tables_ = std::make_shared<Tables>(build(dim, points, length));
    }

    int dim() const { return tables_->dim; }
    int points() const { return tables_->points; }
    double length() const { return tables_->length; }
    /// Total number of lattice points, M^N.
    std::size_t size() const { return tables_->size; }
    /// Lattice spacing in Fourier space, 2 pi / L.
    double dk() const { return 2.0 * std::numbers::pi / tables_->length; }
    /// Physical grid spacing L / M.
    double dx() const { return tables_->length / tables_->points; }
    /// Volume of the box, L^N. Weight between coefficient sums and L^2 norms.
    double volume() const { return std::pow(tables_->length, tables_->dim); }

    /// Signed integer wavenumber for axis index j in [0, M).
    int wavenumber(int j) const { return j < points() / 2 ? j : j - points(); }

    /// Integer lattice coordinates m of flat index p (unused axes are 0).
    std::array<int, 3> lattice(std::size_t p) const
    {
        const auto& t = *tables_;
        return {t.m[3 * p], t.m[3 * p + 1], t.m[3 * p + 2]};
    }

    double xi(std::size_t p, int axis) const { return dk() * tables_->m[3 * p + axis]; }
    double xi_norm(std::size_t p) const { return tables_->xi_norm[p]; }
    double xi_norm_sq(std::size_t p) const { return tables_->xi_norm[p] * tables_->xi_norm[p]; }
    /// Integer |m|^2, exact key for radial multipliers.
    std::int64_t lattice_norm_sq(std::size_t p) const { return tables_->m_sq[p]; }
    bool is_nyquist(std::size_t p) const { return tables_->nyquist[p] != 0; }
    /// Flat index of the lattice point -xi (Nyquist points map to themselves).
    std::size_t mirror(std::size_t p) const { return tables_->mirror[p]; }
    /// Flat index of the lattice point with integer coordinates m (axes beyond dim ignored).
    std::size_t index_of(std::array<int, 3> m) const
    {
        const int M = points();
        std::size_t p = 0;
        for (int a = 0; a < dim(); ++a) {
            int j = ((m[a] % M) + M) % M;
            p = p * M + static_cast<std::size_t>(j);
        }
        return p;
    }
    /// Largest |m| per axis kept by the 2/3 truncation rule.
    int dealias_cutoff() const { return points() / 3; }
    bool in_dealias_band(std::size_t p) const { return tables_->in_band[p] != 0; }

    /// Physical coordinate of grid point p along axis.
    double coordinate(std::size_t p, int axis) const
    {
        const int M = points();
        std::size_t q = p;
        std::array<int, 3> j{0, 0, 0};
        for (int a = dim() - 1; a >= 0; --a) {
            j[a] = static_cast<int>(q % M);
            q /= M;
        }
        return dx() * j[axis];
    }

    friend bool operator==(const Grid& a, const Grid& b)
    {
        return a.tables_ == b.tables_
               || (a.dim() == b.dim() && a.points() == b.points() && a.length() == b.length());
    }

private:
    struct Tables {
        int dim = 0;
        int points = 0;
        double length = 0.0;
        std::size_t size = 0;
        std::vector<int> m;  // 3 per point
        std::vector<std::int64_t> m_sq;
        std::vector<double> xi_norm;
        std::vector<std::uint8_t> nyquist;
        std::vector<std::uint8_t> in_band;
        std::vector<std::size_t> mirror;
    };

    static Tables build(int dim, int M, double L)
    {
        Tables t;
        t.dim = dim;
        t.points = M;
        t.length = L;
        t.size = 1;
        for (int a = 0; a < dim; ++a)
            t.size *= static_cast<std::size_t>(M);
        t.m.assign(3 * t.size, 0);
        t.m_sq.resize(t.size);
        t.xi_norm.resize(t.size);
        t.nyquist.resize(t.size);
        t.in_band.resize(t.size);
        t.mirror.resize(t.size);
        const double dk = 2.0 * std::numbers::pi / L;
        const int cut = M / 3;
        for (std::size_t p = 0; p < t.size; ++p) {
            std::size_t q = p;
            std::array<int, 3> j{0, 0, 0};
            for (int a = dim - 1; a >= 0; --a) {
                j[a] = static_cast<int>(q % M);
                q /= M;
            }
            std::int64_t sq = 0;
            bool nyq = false;
            bool band = true;
            std::size_t mir = 0;
            for (int a = 0; a < dim; ++a) {
                const int w = j[a] < M / 2 ? j[a] : j[a] - M;
                t.m[3 * p + a] = w;
                sq += static_cast<std::int64_t>(w) * w;
                nyq = nyq || (j[a] == M / 2);
                band = band && std::abs(w) <= cut;
                mir = mir * M + static_cast<std::size_t>((M - j[a]) % M);
            }
            t.m_sq[p] = sq;
            t.xi_norm[p] = dk * std::sqrt(static_cast<double>(sq));
            t.nyquist[p] = nyq ? 1 : 0;
            t.in_band[p] = (band && !nyq) ? 1 : 0;
            t.mirror[p] = mir;
        }
        return t;
    }

    std::shared_ptr<const Tables> tables_;
};

}  // namespace nsp
