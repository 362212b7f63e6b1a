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

#include "hmimo/wavenumber.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmimo
{
    using Rng = std::mt19937_64;

    /// Angular scattering cluster with a von Mises-Fisher power profile.
    struct ClusterSpec
    {
        double center_theta = 0.0; // polar angle from broadside, [0, pi/2]
        double center_phi = 0.0;   // azimuth, [0, 2 pi)
        double concentration = 140.0;
        bool shared = false;

        std::string is_valid() const
        {
            if (!(concentration > 0.0))
                return "Cluster concentration must be positive.";
            if (!(center_theta >= 0.0 && center_theta <= 0.5 * std::numbers::pi))
                return "Cluster polar angle must lie in [0, pi/2].";
            if (!(center_phi >= 0.0 && center_phi < 2.0 * std::numbers::pi))
                return "Cluster azimuth must lie in [0, 2 pi).";
            return {};
        }

        std::array<double, 3> direction() const
        {
            const double st = std::sin(center_theta);
            return {st * std::cos(center_phi), st * std::sin(center_phi), std::cos(center_theta)};
        }
    };

    /// Clusters plus the per-user cluster weights (K x N_c, rows sum to one).
    struct ScatteringScenario
    {
        std::vector<ClusterSpec> clusters;
        Eigen::MatrixXd weights;

        std::size_t num_users() const { return static_cast<std::size_t>(weights.rows()); }
        std::size_t num_clusters() const { return clusters.size(); }

        std::string is_valid() const
        {
            if (clusters.empty())
                return "Scenario has no clusters.";
            if (static_cast<std::size_t>(weights.cols()) != clusters.size())
                return "Weight matrix width does not match the cluster count.";
            if (weights.rows() < 1)
                return "Scenario has no users.";
            for (const auto &c : clusters)
                if (auto m = c.is_valid(); !m.empty())
                    return m;
            for (Eigen::Index k = 0; k < weights.rows(); ++k)
            {
                if ((weights.row(k).array() < 0.0).any())
                    return "Cluster weights must be non-negative.";
                if (std::abs(weights.row(k).sum() - 1.0) > 1e-9)
                    return "Cluster weights of user " + std::to_string(k) + " do not sum to one.";
                for (std::size_t c = 0; c < clusters.size(); ++c)
                    if (clusters[c].shared && !(weights(k, static_cast<Eigen::Index>(c)) > 0.0))
                        return "User " + std::to_string(k) + " has zero weight on a shared cluster.";
            }
            return {};
        }

        void validate() const
        {
            if (auto m = is_valid(); !m.empty())
                throw std::invalid_argument(m);
        }
    };

    /// Per-cell wavenumber-domain variances of one user, unit sum.
    struct VarianceMap
    {
        RVector sigma_sq;
    };

    struct UserChannel
    {
        CVector h_f;
        std::vector<std::size_t> support; // ascending lattice positions with h_f != 0
        std::optional<CVector> h_spatial;
    };

    // ---------- VMF density ----------

    /// von Mises-Fisher density on the unit sphere, normalized over the full sphere.
    inline double vmf_density(double theta, double phi, const ClusterSpec &cluster)
    {
        const auto mu = cluster.direction();
        const double st = std::sin(theta);
        const double dot = mu[0] * st * std::cos(phi) + mu[1] * st * std::sin(phi) + mu[2] * std::cos(theta);
        const double a = cluster.concentration;
        // a / (4 pi sinh a) * exp(a dot), rewritten to avoid overflow and the a -> 0 cancellation
        const double norm = a / (-2.0 * std::numbers::pi * std::expm1(-2.0 * a));
        return norm * std::exp(a * (dot - 1.0));
    }

    // ---------- Quadrature ----------

    struct QuadratureSettings
    {
        int n_theta = 512; // nodes over [0, pi]
        int n_phi = 1024;  // nodes over [0, 2 pi)
        double min_capture = 0.99;
    };

    /// Raised when the angular grid is too coarse to resolve a cluster.
    class quadrature_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Midpoint tensor grid over the sphere with each upper-hemisphere node
    /// pre-assigned to the lattice cell its plane-wave direction falls into.
    class AngularGrid
    {
    public:
        static constexpr std::size_t no_cell = static_cast<std::size_t>(-1);

        AngularGrid(const ArrayGeometry &geometry, const WavenumberLattice &lattice, QuadratureSettings settings = {})
            : settings_(settings), num_cells_(lattice.size())
        {
            if (settings.n_theta < 2 || settings.n_phi < 4)
                throw std::invalid_argument("Quadrature resolution too small.");
            const double d_theta = std::numbers::pi / settings.n_theta;
            const double d_phi = 2.0 * std::numbers::pi / settings.n_phi;
            const double kx_scale = geometry.aperture_x() / geometry.lambda;
            const double ky_scale = geometry.aperture_y() / geometry.lambda;

            const auto n = static_cast<std::size_t>(settings.n_theta) * static_cast<std::size_t>(settings.n_phi);
            x_.reserve(n);
            y_.reserve(n);
            z_.reserve(n);
            weight_.reserve(n);
            cell_.reserve(n);

            std::vector<double> cos_phi(settings.n_phi), sin_phi(settings.n_phi);
            for (int p = 0; p < settings.n_phi; ++p)
            {
                const double phi = (p + 0.5) * d_phi;
                cos_phi[p] = std::cos(phi);
                sin_phi[p] = std::sin(phi);
            }

            for (int t = 0; t < settings.n_theta; ++t)
            {
                const double theta = (t + 0.5) * d_theta;
                const double st = std::sin(theta), ct = std::cos(theta);
                const double w = st * d_theta * d_phi;
                const bool visible = theta < 0.5 * std::numbers::pi;
                for (int p = 0; p < settings.n_phi; ++p)
                {
                    const double ux = st * cos_phi[p], uy = st * sin_phi[p];
                    x_.push_back(ux);
                    y_.push_back(uy);
                    z_.push_back(ct);
                    weight_.push_back(w);

                    std::size_t cell = no_cell;
                    if (visible)
                    {
                        // cell l covers kappa in [2 pi l / L, 2 pi (l + 1) / L)
                        const int lx = static_cast<int>(std::floor(ux * kx_scale));
                        const int ly = static_cast<int>(std::floor(uy * ky_scale));
                        const auto pos = lattice.index_of(lx, ly);
                        if (pos < lattice.size())
                            cell = pos;
                    }
                    cell_.push_back(cell);
                }
            }
        }

        const QuadratureSettings &settings() const { return settings_; }
        std::size_t num_cells() const { return num_cells_; }
        std::size_t num_nodes() const { return weight_.size(); }

        /// Unnormalized mass of one cluster in every lattice cell.
        /// `captured` is the grid integral over the whole sphere (ideally 1).
        struct ClusterMass
        {
            RVector cell_mass;
            double captured = 0.0;
        };

        ClusterMass integrate(const ClusterSpec &cluster) const
        {
            const auto mu = cluster.direction();
            const double a = cluster.concentration;
            const double norm = a / (-2.0 * std::numbers::pi * std::expm1(-2.0 * a));

            ClusterMass out;
            out.cell_mass = RVector::Zero(static_cast<Eigen::Index>(num_cells_));
            double total = 0.0;
            for (std::size_t i = 0; i < weight_.size(); ++i)
            {
                const double dot = mu[0] * x_[i] + mu[1] * y_[i] + mu[2] * z_[i];
                const double arg = a * (dot - 1.0);
                if (arg < -745.0)
                    continue;
                const double m = norm * std::exp(arg) * weight_[i];
                total += m;
                if (cell_[i] != no_cell)
                    out.cell_mass(static_cast<Eigen::Index>(cell_[i])) += m;
            }
            out.captured = total;
            return out;
        }

    private:
        QuadratureSettings settings_;
        std::size_t num_cells_;
        std::vector<double> x_, y_, z_, weight_;
        std::vector<std::size_t> cell_;
    };

    /// Per-cluster cell masses for a whole scenario; throws quadrature_error when
    /// a cluster's grid integral deviates from one by more than 1 - min_capture.
    inline std::vector<RVector> cluster_masses(const ScatteringScenario &scenario, const AngularGrid &grid)
    {
        std::vector<RVector> out;
        out.reserve(scenario.clusters.size());
        for (std::size_t c = 0; c < scenario.clusters.size(); ++c)
        {
            auto m = grid.integrate(scenario.clusters[c]);
            const double slack = 1.0 - grid.settings().min_capture;
            if (!(std::abs(m.captured - 1.0) <= slack))
                throw quadrature_error("Quadrature too coarse: cluster " + std::to_string(c) + " integrates to " +
                                       std::to_string(m.captured) + ", outside 1 +/- " + std::to_string(slack) + ".");
            out.push_back(std::move(m.cell_mass));
        }
        return out;
    }

    /// Weighted combination of cluster masses, scaled to unit sum.
    inline VarianceMap combine_cluster_masses(const std::vector<RVector> &masses, const Eigen::VectorXd &weights)
    {
        if (masses.empty() || static_cast<std::size_t>(weights.size()) != masses.size())
            throw std::invalid_argument("combine_cluster_masses: weight count does not match cluster count.");
        RVector acc = RVector::Zero(masses.front().size());
        for (std::size_t c = 0; c < masses.size(); ++c)
            acc += weights(static_cast<Eigen::Index>(c)) * masses[c];
        const double total = acc.sum();
        if (!(total > 0.0))
            throw std::runtime_error("Variance map has no mass inside the visible lattice.");
        return VarianceMap{acc / total};
    }

    inline VarianceMap variance_map(const ScatteringScenario &scenario, std::size_t user, const AngularGrid &grid)
    {
        scenario.validate();
        if (user >= scenario.num_users())
            throw std::out_of_range("variance_map: user index out of range.");
        return combine_cluster_masses(cluster_masses(scenario, grid),
                                      scenario.weights.row(static_cast<Eigen::Index>(user)).transpose());
    }

    inline VarianceMap variance_map(const ScatteringScenario &scenario, std::size_t user,
                                    const WavenumberLattice &lattice, const ArrayGeometry &geometry,
                                    QuadratureSettings quadrature = {})
    {
        return variance_map(scenario, user, AngularGrid(geometry, lattice, quadrature));
    }

    inline std::vector<VarianceMap> variance_maps(const ScatteringScenario &scenario, const AngularGrid &grid)
    {
        scenario.validate();
        const auto masses = cluster_masses(scenario, grid);
        std::vector<VarianceMap> out;
        for (Eigen::Index k = 0; k < scenario.weights.rows(); ++k)
            out.push_back(combine_cluster_masses(masses, scenario.weights.row(k).transpose()));
        return out;
    }

    // ---------- Sampling ----------

    /// Draws a circularly-symmetric complex Gaussian with the given variance.
    inline cdouble complex_normal(Rng &rng, double variance)
    {
        std::normal_distribution<double> n(0.0, std::sqrt(0.5 * variance));
        const double re = n(rng);
        const double im = n(rng);
        return {re, im};
    }

    constexpr double default_activity_floor = 1e-6;

    /// Cells below `activity_floor * max(map)` are exactly zero.
    inline std::vector<UserChannel> sample_channels(const std::vector<VarianceMap> &maps, Rng &rng,
                                                    double activity_floor = default_activity_floor)
    {
        std::vector<UserChannel> out;
        out.reserve(maps.size());
        for (const auto &map : maps)
        {
            const auto l = map.sigma_sq.size();
            const double cutoff = activity_floor * map.sigma_sq.maxCoeff();
            UserChannel ch;
            ch.h_f = CVector::Zero(l);
            for (Eigen::Index i = 0; i < l; ++i)
            {
                const double v = map.sigma_sq(i);
                if (v <= 0.0 || v < cutoff)
                    continue;
                ch.h_f(i) = complex_normal(rng, v);
                if (ch.h_f(i) != cdouble(0.0, 0.0))
                    ch.support.push_back(static_cast<std::size_t>(i));
            }
            out.push_back(std::move(ch));
        }
        return out;
    }

    inline std::vector<UserChannel> sample_channels(const ScatteringScenario &scenario,
                                                    const std::vector<VarianceMap> &maps, Rng &rng,
                                                    double activity_floor = default_activity_floor)
    {
        if (maps.size() != scenario.num_users())
            throw std::invalid_argument("sample_channels: need one variance map per user.");
        return sample_channels(maps, rng, activity_floor);
    }

    /// Positions above the activity floor of a variance map.
    inline std::vector<std::size_t> active_cells(const VarianceMap &map, double activity_floor = default_activity_floor)
    {
        std::vector<std::size_t> out;
        const double cutoff = activity_floor * map.sigma_sq.maxCoeff();
        for (Eigen::Index i = 0; i < map.sigma_sq.size(); ++i)
            if (map.sigma_sq(i) > 0.0 && map.sigma_sq(i) >= cutoff)
                out.push_back(static_cast<std::size_t>(i));
        return out;
    }

    /// Intersection of all users' supports.
    inline std::vector<std::size_t> common_support(const std::vector<UserChannel> &channels)
    {
        if (channels.size() < 2)
            throw std::invalid_argument("common_support needs at least two users.");
        std::vector<std::size_t> acc = channels.front().support;
        for (std::size_t k = 1; k < channels.size(); ++k)
        {
            std::vector<std::size_t> next;
            std::set_intersection(acc.begin(), acc.end(), channels[k].support.begin(), channels[k].support.end(),
                                  std::back_inserter(next));
            acc = std::move(next);
        }
        return acc;
    }

    // ---------- Scenario generation ----------

    /// Random scenario recipe: `shared_clusters` seen by every user plus
    /// `clusters_per_user - shared_clusters` private clusters per user.
    struct ScenarioParams
    {
        int clusters_per_user = 4;
        int shared_clusters = 2;
        double concentration = 140.0;
        double shared_weight_min = 0.15;
        double shared_weight_max = 0.45;
        double private_weight_min = 0.15;
        double private_weight_max = 0.45;
        double theta_min = 0.0;
        double theta_max = 0.5 * std::numbers::pi;
        double phi_min = 0.0;
        double phi_max = 2.0 * std::numbers::pi;

        std::string is_valid() const
        {
            if (clusters_per_user < 1)
                return "scenario.clusters_per_user must be at least 1";
            if (shared_clusters < 0 || shared_clusters > clusters_per_user)
                return "scenario.shared_clusters must lie in [0, clusters_per_user]";
            if (!(concentration > 0.0))
                return "scenario.concentration must be positive";
            if (!(shared_weight_min > 0.0 && shared_weight_min <= shared_weight_max))
                return "scenario.shared_weight range must be positive and ordered";
            if (!(private_weight_min >= 0.0 && private_weight_min <= private_weight_max))
                return "scenario.private_weight range must be non-negative and ordered";
            if (clusters_per_user > shared_clusters && !(private_weight_max > 0.0))
                return "scenario.private_weight_max must be positive";
            if (!(theta_min >= 0.0 && theta_min < theta_max && theta_max <= 0.5 * std::numbers::pi))
                return "scenario.theta range must lie in [0, pi/2]";
            if (!(phi_min >= 0.0 && phi_min < phi_max && phi_max <= 2.0 * std::numbers::pi))
                return "scenario.phi range must lie in [0, 2 pi]";
            return {};
        }
    };

    /// Cluster columns are ordered: shared clusters first, then each user's private
    /// clusters in user order.
    inline ScatteringScenario draw_scenario(const ScenarioParams &p, std::size_t num_users, Rng &rng)
    {
        if (auto m = p.is_valid(); !m.empty())
            throw std::invalid_argument(m);
        if (num_users < 1)
            throw std::invalid_argument("draw_scenario: need at least one user");

        const auto n_shared = static_cast<std::size_t>(p.shared_clusters);
        const auto n_private = static_cast<std::size_t>(p.clusters_per_user - p.shared_clusters);
        const std::size_t n_total = n_shared + n_private * num_users;

        std::uniform_real_distribution<double> theta(p.theta_min, p.theta_max);
        std::uniform_real_distribution<double> phi(p.phi_min, p.phi_max);
        auto draw_cluster = [&](bool shared) {
            ClusterSpec c;
            c.center_theta = theta(rng);
            c.center_phi = phi(rng);
            if (c.center_phi >= 2.0 * std::numbers::pi)
                c.center_phi = 0.0;
            c.concentration = p.concentration;
            c.shared = shared;
            return c;
        };

        ScatteringScenario s;
        for (std::size_t c = 0; c < n_shared; ++c)
            s.clusters.push_back(draw_cluster(true));
        for (std::size_t c = 0; c < n_private * num_users; ++c)
            s.clusters.push_back(draw_cluster(false));

        std::uniform_real_distribution<double> ws(p.shared_weight_min, p.shared_weight_max);
        std::uniform_real_distribution<double> wp(p.private_weight_min, p.private_weight_max);
        s.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_users), static_cast<Eigen::Index>(n_total));
        for (std::size_t k = 0; k < num_users; ++k)
        {
            const auto row = static_cast<Eigen::Index>(k);
            for (std::size_t c = 0; c < n_shared; ++c)
                s.weights(row, static_cast<Eigen::Index>(c)) = ws(rng);
            for (std::size_t c = 0; c < n_private; ++c)
                s.weights(row, static_cast<Eigen::Index>(n_shared + k * n_private + c)) = wp(rng);
            const double total = s.weights.row(row).sum();
            if (!(total > 0.0))
                throw std::invalid_argument("draw_scenario: all cluster weights are zero");
            s.weights.row(row) /= total;
        }
        return s;
    }

    /// Order-sensitive FNV-1a digest of the channel coefficients, for pairing audits.
    inline std::uint64_t channel_checksum(const std::vector<UserChannel> &channels)
    {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const void *data, std::size_t n) {
            const auto *b = static_cast<const unsigned char *>(data);
            for (std::size_t i = 0; i < n; ++i)
            {
                h ^= b[i];
                h *= 1099511628211ull;
            }
        };
        for (const auto &ch : channels)
            for (Eigen::Index i = 0; i < ch.h_f.size(); ++i)
            {
                const double re = ch.h_f(i).real(), im = ch.h_f(i).imag();
                mix(&re, sizeof re);
                mix(&im, sizeof im);
            }
        return h;
    }
}
