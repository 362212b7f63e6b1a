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

#include <catch_amalgamated.hpp>
#include "hmimo/mincut.hpp"

#include <random>

using namespace hmimo;

namespace
{
    // Energy re-implemented from the definition, edges taken from coordinates.
    double reference_energy(const WavenumberLattice &lat, const Eigen::MatrixX2d &u, double beta, const Labels &v)
    {
        double e = 0.0;
        for (std::size_t a = 0; a < lat.size(); ++a)
        {
            e += u(static_cast<Eigen::Index>(a), v[a] > 0 ? 1 : 0);
            for (std::size_t b = a + 1; b < lat.size(); ++b)
            {
                const int d = std::abs(lat[a].lx - lat[b].lx) + std::abs(lat[a].ly - lat[b].ly);
                if (d == 1 && v[a] != v[b])
                    e += beta;
            }
        }
        return e;
    }

    struct Brute
    {
        double energy;
        std::vector<Labels> minimizers;
    };

    Brute brute_force(const SupportGraph &g)
    {
        Brute out{std::numeric_limits<double>::infinity(), {}};
        const auto n = g.size();
        Labels v(n);
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
        {
            for (std::size_t i = 0; i < n; ++i)
                v[i] = (mask >> i) & 1u ? 1 : -1;
            bool ok = true;
            for (auto f : g.forced_positive)
                ok = ok && v[f] > 0;
            if (!ok)
                continue;
            const double e = reference_energy(*g.lattice, g.unary, g.pairwise_beta, v);
            if (e < out.energy - 1e-12)
                out = {e, {v}};
            else if (std::abs(e - out.energy) <= 1e-12)
                out.minimizers.push_back(v);
        }
        return out;
    }

    WavenumberLattice grid3()
    {
        std::vector<LatticePoint> pts;
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x)
                pts.push_back({x, y});
        return WavenumberLattice::from_points(pts);
    }

    int disagreements(const WavenumberLattice &lat, const Labels &v)
    {
        int d = 0;
        for (auto [a, b] : lat.edges())
            d += v[a] != v[b];
        return d;
    }
}

TEST_CASE("energy - Definition")
{
    const auto lat = grid3();
    SupportGraph g(lat, Eigen::MatrixX2d::Zero(9, 2), 1.0);
    CHECK(energy(g, Labels(9, 1)) == 0.0);
    CHECK(energy(g, Labels(9, -1)) == 0.0);
    Labels one(9, -1);
    one[4] = 1; // centre, 4 neighbours
    CHECK(energy(g, one) == 4.0);
    one[4] = -1;
    one[0] = 1; // corner, 2 neighbours
    CHECK(energy(g, one) == 2.0);

    CHECK_THROWS_AS(energy(g, Labels(8, 1)), std::invalid_argument);
    Labels bad(9, 1);
    bad[3] = 0;
    CHECK_THROWS_AS(energy(g, bad), std::invalid_argument);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int rep = 0; rep < 50; ++rep)
    {
        Eigen::MatrixX2d un(9, 2);
        for (Eigen::Index i = 0; i < 9; ++i)
            un(i, 0) = u(rng), un(i, 1) = u(rng);
        SupportGraph r(lat, un, std::abs(u(rng)));
        Labels v(9);
        for (auto &x : v)
            x = u(rng) > 0 ? 1 : -1;
        CHECK_THAT(energy(r, v), Catch::Matchers::WithinAbs(reference_energy(lat, un, r.pairwise_beta, v), 1e-12));
    }
}

TEST_CASE("SupportGraph - Validation")
{
    const auto lat = grid3();
    CHECK_THROWS_AS(SupportGraph(lat, Eigen::MatrixX2d::Zero(8, 2), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(SupportGraph(lat, Eigen::MatrixX2d::Zero(9, 2), -0.1), std::invalid_argument);
    CHECK_THROWS_AS(SupportGraph(lat, Eigen::MatrixX2d::Zero(9, 2), 1.0, {9}), std::invalid_argument);
    Eigen::MatrixX2d nan_u = Eigen::MatrixX2d::Zero(9, 2);
    nan_u(2, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(SupportGraph(lat, nan_u, 1.0), std::invalid_argument);
    SupportGraph empty;
    CHECK_THROWS_AS(minimize(empty), std::invalid_argument);
}

TEST_CASE("minimize - Decoupled labels")
{
    const auto lat = grid3();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixX2d un(9, 2);
    for (Eigen::Index i = 0; i < 9; ++i)
        un(i, 0) = u(rng), un(i, 1) = u(rng);
    const auto out = minimize(SupportGraph(lat, un, 0.0));
    for (Eigen::Index i = 0; i < 9; ++i)
        CHECK(out.labels[static_cast<std::size_t>(i)] == (un(i, 1) < un(i, 0) ? 1 : -1));
}

TEST_CASE("minimize - Clamped node pulls neighbours")
{
    const auto lat = grid3();
    Eigen::MatrixX2d un(9, 2);
    un.col(0).setZero();
    un.col(1).setConstant(0.3); // every node mildly prefers -1
    for (double beta : {0.1, 0.5, 2.0})
    {
        SupportGraph g(lat, un, beta, {4});
        const auto out = minimize(g);
        CHECK(out.labels[4] == 1);
        const auto ref = brute_force(g);
        CHECK_THAT(out.energy, Catch::Matchers::WithinAbs(ref.energy, 1e-12));
    }
    // strong coupling labels everything +1: 9 * 0.3 < cost of any cut
    const auto strong = minimize(SupportGraph(lat, un, 2.0, {4}));
    CHECK(strong.positives().size() == 9);
    const auto weak = minimize(SupportGraph(lat, un, 0.1, {4}));
    CHECK(weak.positives() == std::vector<std::size_t>{4});
}

TEST_CASE("minimize - Enumeration on 12-vertex instances")
{
    std::vector<LatticePoint> pts;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x)
            pts.push_back({x, y});
    const auto lat = WavenumberLattice::from_points(pts);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (double beta : {0.1, 1.0, 10.0})
        for (int rep = 0; rep < 20; ++rep)
        {
            Eigen::MatrixX2d un(12, 2);
            for (Eigen::Index i = 0; i < 12; ++i)
                un(i, 0) = u(rng), un(i, 1) = u(rng);
            SupportGraph g(lat, un, beta);
            const auto out = minimize(g);
            const auto ref = brute_force(g);
            CHECK_THAT(out.energy, Catch::Matchers::WithinAbs(ref.energy, 1e-9));
            CHECK(std::find(ref.minimizers.begin(), ref.minimizers.end(), out.labels) != ref.minimizers.end());
        }
}

TEST_CASE("minimize - Random lattices up to 14 vertices")
{
    std::mt19937_64 rng(14);
    std::uniform_int_distribution<int> coord(-2, 2), count(1, 14);
    std::uniform_real_distribution<double> u(-3.0, 3.0), b(0.0, 2.0);
    for (int rep = 0; rep < 200; ++rep)
    {
        std::vector<LatticePoint> pts;
        const int n = count(rng);
        while (static_cast<int>(pts.size()) < n)
        {
            LatticePoint p{coord(rng), coord(rng)};
            if (std::find(pts.begin(), pts.end(), p) == pts.end())
                pts.push_back(p);
        }
        const auto lat = WavenumberLattice::from_points(pts);
        Eigen::MatrixX2d un(static_cast<Eigen::Index>(lat.size()), 2);
        for (Eigen::Index i = 0; i < un.rows(); ++i)
            un(i, 0) = u(rng), un(i, 1) = u(rng);
        std::vector<std::size_t> forced;
        if (rep % 3 == 0)
            forced = {static_cast<std::size_t>(rep) % lat.size()};
        SupportGraph g(lat, un, b(rng), forced);
        const auto out = minimize(g);
        const auto ref = brute_force(g);
        CHECK_THAT(out.energy, Catch::Matchers::WithinAbs(ref.energy, 1e-9));
        for (auto f : forced)
            CHECK(out.labels[f] == 1);
    }
}

TEST_CASE("minimize - Smallest positive set among ties")
{
    const auto lat = grid3();
    // every labeling without disagreement costs 0; both all -1 and all +1 are optimal
    const auto out = minimize(SupportGraph(lat, Eigen::MatrixX2d::Zero(9, 2), 1.0));
    CHECK(out.positives().empty());
    CHECK(out.energy == 0.0);
}

TEST_CASE("minimize - Coupling monotonicity and determinism")
{
    std::vector<LatticePoint> pts;
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            pts.push_back({x, y});
    const auto lat = WavenumberLattice::from_points(pts);
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep)
    {
        Eigen::MatrixX2d un(36, 2);
        for (Eigen::Index i = 0; i < 36; ++i)
            un(i, 0) = u(rng), un(i, 1) = u(rng);
        int prev = std::numeric_limits<int>::max();
        for (double beta : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6})
        {
            SupportGraph g(lat, un, beta);
            const auto a = minimize(g), b = minimize(g);
            CHECK(a.labels == b.labels);
            const int d = disagreements(lat, a.labels);
            CHECK(d <= prev);
            prev = d;
        }
    }
}
