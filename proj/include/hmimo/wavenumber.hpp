// SPDX-License-Identifier: Apache-2.0
//
// hmimo-jgc: joint graph-cut channel estimation for holographic MIMO
// Copyright (C) 2026 The hmimo-jgc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hmimo
{
    using cdouble = std::complex<double>;
    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;
    using RVector = Eigen::VectorXd;

    /// Raised for array geometries that cannot host a wavenumber lattice.
    class geometry_error : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Uniform planar array at the base station.
    ///
    /// Only the wavelength enters the model, so the carrier frequency is not stored.
    struct ArrayGeometry
    {
        int n_x = 2;
        int n_y = 2;
        double delta = 0.25;  // element spacing [m]
        double lambda = 1.0;  // wavelength [m]

        double aperture_x() const { return (n_x - 1) * delta; }
        double aperture_y() const { return (n_y - 1) * delta; }
        std::size_t num_antennas() const { return static_cast<std::size_t>(n_x) * static_cast<std::size_t>(n_y); }

        // Returns an empty string when valid, otherwise the reason.
        std::string is_valid() const
        {
            if (n_x < 2 || n_y < 2)
                return "Antenna counts per axis must be at least 2.";
            if (!(delta > 0.0))
                return "Element spacing must be positive.";
            if (!(lambda > 0.0))
                return "Wavelength must be positive.";
            if (!(delta < 0.5 * lambda))
                return "Element spacing must be below half a wavelength (sub-wavelength array).";
            return {};
        }

        void validate() const
        {
            auto msg = is_valid();
            if (!msg.empty())
                throw geometry_error(msg);
        }

        /// Square array with `n` elements per axis and spacing `lambda / spacing_divisor`.
        static ArrayGeometry square(int n, double spacing_divisor, double lambda = 1.0)
        {
            return ArrayGeometry{n, n, lambda / spacing_divisor, lambda};
        }
    };

    /// Integer harmonic pair (l_x, l_y).
    struct LatticePoint
    {
        int lx = 0;
        int ly = 0;

        friend bool operator==(const LatticePoint &, const LatticePoint &) = default;
        friend auto operator<=>(const LatticePoint &a, const LatticePoint &b)
        {
            // l_y outer, l_x inner
            if (auto c = a.ly <=> b.ly; c != 0)
                return c;
            return a.lx <=> b.lx;
        }
    };

    /// Elliptical set of propagating harmonics with its 4-neighborhood graph.
    class WavenumberLattice
    {
    public:
        WavenumberLattice() = default;

        const std::vector<LatticePoint> &points() const { return points_; }
        const std::vector<std::vector<std::size_t>> &neighbors() const { return neighbors_; }
        const std::vector<std::size_t> &neighbors(std::size_t pos) const { return neighbors_.at(pos); }
        std::size_t size() const { return points_.size(); }
        const LatticePoint &operator[](std::size_t pos) const { return points_[pos]; }

        /// Position of (lx, ly), or size() if the pair is outside the lattice.
        std::size_t index_of(int lx, int ly) const
        {
            auto it = index_of_.find(LatticePoint{lx, ly});
            return it == index_of_.end() ? points_.size() : it->second;
        }

        bool contains(int lx, int ly) const { return index_of_.count(LatticePoint{lx, ly}) != 0; }

        /// Undirected edges (a, b) with a < b, ascending.
        std::vector<std::pair<std::size_t, std::size_t>> edges() const
        {
            std::vector<std::pair<std::size_t, std::size_t>> out;
            for (std::size_t a = 0; a < neighbors_.size(); ++a)
                for (auto b : neighbors_[a])
                    if (a < b)
                        out.emplace_back(a, b);
            return out;
        }

        /// Builds a lattice from an explicit point list (sorted and de-duplicated here).
        /// Used for small test graphs; `build_lattice` is the normal entry point.
        static WavenumberLattice from_points(std::vector<LatticePoint> pts)
        {
            std::sort(pts.begin(), pts.end());
            pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

            WavenumberLattice lat;
            lat.points_ = std::move(pts);
            for (std::size_t i = 0; i < lat.points_.size(); ++i)
                lat.index_of_.emplace(lat.points_[i], i);

            lat.neighbors_.resize(lat.points_.size());
            static constexpr int offsets[4][2] = {{0, -1}, {-1, 0}, {1, 0}, {0, 1}};
            for (std::size_t i = 0; i < lat.points_.size(); ++i)
            {
                const auto &p = lat.points_[i];
                for (const auto &o : offsets)
                {
                    auto it = lat.index_of_.find(LatticePoint{p.lx + o[0], p.ly + o[1]});
                    if (it != lat.index_of_.end())
                        lat.neighbors_[i].push_back(it->second);
                }
                std::sort(lat.neighbors_[i].begin(), lat.neighbors_[i].end());
            }
            return lat;
        }

    private:
        std::vector<LatticePoint> points_;
        std::map<LatticePoint, std::size_t> index_of_;
        std::vector<std::vector<std::size_t>> neighbors_;
    };

    /// Membership predicate of the propagating-harmonic ellipse.
    inline bool in_ellipse(int lx, int ly, double lambda, double aperture_x, double aperture_y)
    {
        const double u = lambda * lx / aperture_x;
        const double v = lambda * ly / aperture_y;
        return u * u + v * v <= 1.0;
    }

    /// Enumerates all integer pairs inside the ellipse, ordered by (l_y, l_x).
    inline WavenumberLattice build_lattice(const ArrayGeometry &geometry)
    {
        const double ax = geometry.aperture_x();
        const double ay = geometry.aperture_y();
        if (!(ax > 0.0) || !(ay > 0.0))
            throw geometry_error("Degenerate aperture: side lengths must be positive.");
        geometry.validate();

        const int max_x = static_cast<int>(std::floor(ax / geometry.lambda)) + 1;
        const int max_y = static_cast<int>(std::floor(ay / geometry.lambda)) + 1;

        std::vector<LatticePoint> pts;
        for (int ly = -max_y; ly <= max_y; ++ly)
            for (int lx = -max_x; lx <= max_x; ++lx)
                if (in_ellipse(lx, ly, geometry.lambda, ax, ay))
                    pts.push_back({lx, ly});
        return WavenumberLattice::from_points(std::move(pts));
    }

    /// Fourier-harmonic dictionary, N x L, columns scaled by 1/sqrt(N).
    struct SparseBasis
    {
        CMatrix psi;

        std::size_t num_antennas() const { return static_cast<std::size_t>(psi.rows()); }
        std::size_t num_harmonics() const { return static_cast<std::size_t>(psi.cols()); }
    };

    /// Row index of antenna (nx, ny): n = ny * N_x + nx.
    inline std::size_t antenna_row(const ArrayGeometry &g, int nx, int ny)
    {
        return static_cast<std::size_t>(ny) * static_cast<std::size_t>(g.n_x) + static_cast<std::size_t>(nx);
    }

    /// Single basis entry, phase referenced to element (0, 0).
    inline cdouble harmonic_entry(const ArrayGeometry &g, const LatticePoint &p, int nx, int ny)
    {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        const double phase = two_pi * p.lx * g.delta * nx / g.aperture_x() +
                             two_pi * p.ly * g.delta * ny / g.aperture_y();
        return std::polar(1.0 / std::sqrt(static_cast<double>(g.num_antennas())), phase);
    }

    inline SparseBasis build_basis(const ArrayGeometry &geometry, const WavenumberLattice &lattice)
    {
        geometry.validate();
        const auto n = static_cast<Eigen::Index>(geometry.num_antennas());
        const auto l = static_cast<Eigen::Index>(lattice.size());

        SparseBasis basis;
        basis.psi.resize(n, l);
        for (Eigen::Index col = 0; col < l; ++col)
        {
            const auto &p = lattice[static_cast<std::size_t>(col)];
            for (int ny = 0; ny < geometry.n_y; ++ny)
                for (int nx = 0; nx < geometry.n_x; ++nx)
                    basis.psi(static_cast<Eigen::Index>(antenna_row(geometry, nx, ny)), col) =
                        harmonic_entry(geometry, p, nx, ny);
        }
        return basis;
    }

    /// Antenna-domain channel h = Psi * h_f.
    inline CVector spatial_channel(const SparseBasis &basis, const CVector &h_f)
    {
        if (h_f.size() != basis.psi.cols())
            throw std::invalid_argument("spatial_channel: wavenumber vector length " + std::to_string(h_f.size()) +
                                        " does not match basis width " + std::to_string(basis.psi.cols()) + ".");
        return basis.psi * h_f;
    }
}
