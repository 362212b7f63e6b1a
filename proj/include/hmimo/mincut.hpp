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
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace hmimo
{
    /// Binary support field over a lattice.
    ///
    /// unary(l, 0) is the cost of label -1, unary(l, 1) the cost of label +1.
    /// Pairwise term is Ising: beta for every lattice edge whose endpoints disagree.
    struct SupportGraph
    {
        const WavenumberLattice *lattice = nullptr;
        Eigen::MatrixX2d unary;
        double pairwise_beta = 0.0;
        std::vector<std::size_t> forced_positive;

        SupportGraph() = default;
        SupportGraph(const WavenumberLattice &lat, Eigen::MatrixX2d unary_costs, double beta,
                     std::vector<std::size_t> forced = {})
            : lattice(&lat), unary(std::move(unary_costs)), pairwise_beta(beta), forced_positive(std::move(forced))
        {
            validate();
        }

        std::size_t size() const { return static_cast<std::size_t>(unary.rows()); }

        void validate() const
        {
            if (lattice == nullptr)
                throw std::invalid_argument("SupportGraph: missing lattice.");
            if (static_cast<std::size_t>(unary.rows()) != lattice->size())
                throw std::invalid_argument("SupportGraph: unary table does not match lattice size.");
            if (!(pairwise_beta >= 0.0))
                throw std::invalid_argument("SupportGraph: pairwise coupling must be non-negative.");
            if (!unary.allFinite())
                throw std::invalid_argument("SupportGraph: unary costs must be finite.");
            for (auto p : forced_positive)
                if (p >= lattice->size())
                    throw std::invalid_argument("SupportGraph: forced position outside lattice.");
        }
    };

    using Labels = std::vector<std::int8_t>; // entries are -1 or +1

    struct Labeling
    {
        Labels labels;
        double energy = 0.0;

        std::vector<std::size_t> positives() const
        {
            std::vector<std::size_t> out;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] > 0)
                    out.push_back(i);
            return out;
        }
    };

    inline double energy(const SupportGraph &graph, const Labels &labels)
    {
        if (labels.size() != graph.size())
            throw std::invalid_argument("energy: label vector length does not match the graph.");
        for (auto v : labels)
            if (v != -1 && v != 1)
                throw std::invalid_argument("energy: labels must be -1 or +1.");

        double e = 0.0;
        const auto &nb = graph.lattice->neighbors();
        for (std::size_t a = 0; a < nb.size(); ++a)
            for (auto b : nb[a])
                if (a < b && labels[a] != labels[b])
                    e += graph.pairwise_beta;
        for (std::size_t l = 0; l < labels.size(); ++l)
            e += graph.unary(static_cast<Eigen::Index>(l), labels[l] > 0 ? 1 : 0);
        return e;
    }

    namespace detail
    {
        /// Dinic max-flow on a small residual graph.
        class MaxFlow
        {
        public:
            explicit MaxFlow(std::size_t num_nodes) : head_(num_nodes, -1), level_(num_nodes), iter_(num_nodes) {}

            // Adds arc u->v with capacity `cap` and v->u with `rev_cap`.
            void add_edge(std::size_t u, std::size_t v, double cap, double rev_cap)
            {
                arcs_.push_back({v, head_[u], cap});
                head_[u] = static_cast<int>(arcs_.size() - 1);
                arcs_.push_back({u, head_[v], rev_cap});
                head_[v] = static_cast<int>(arcs_.size() - 1);
                if (std::isfinite(cap))
                    scale_ = std::max(scale_, cap);
                if (std::isfinite(rev_cap))
                    scale_ = std::max(scale_, rev_cap);
            }

            double solve(std::size_t s, std::size_t t)
            {
                eps_ = 1e-13 * std::max(scale_, 1.0);
                double flow = 0.0;
                while (bfs(s, t))
                {
                    for (std::size_t i = 0; i < head_.size(); ++i)
                        iter_[i] = head_[i];
                    double f;
                    while ((f = dfs(s, t, std::numeric_limits<double>::infinity())) > eps_)
                        flow += f;
                }
                return flow;
            }

            /// Nodes reachable from s in the residual graph after solve().
            std::vector<bool> source_side(std::size_t s) const
            {
                std::vector<bool> seen(head_.size(), false);
                std::vector<std::size_t> stack{s};
                seen[s] = true;
                while (!stack.empty())
                {
                    auto u = stack.back();
                    stack.pop_back();
                    for (int e = head_[u]; e != -1; e = arcs_[static_cast<std::size_t>(e)].next)
                    {
                        const auto &a = arcs_[static_cast<std::size_t>(e)];
                        if (a.cap > eps_ && !seen[a.to])
                        {
                            seen[a.to] = true;
                            stack.push_back(a.to);
                        }
                    }
                }
                return seen;
            }

        private:
            struct Arc
            {
                std::size_t to;
                int next;
                double cap;
            };

            bool bfs(std::size_t s, std::size_t t)
            {
                std::fill(level_.begin(), level_.end(), -1);
                std::queue<std::size_t> q;
                level_[s] = 0;
                q.push(s);
                while (!q.empty())
                {
                    auto u = q.front();
                    q.pop();
                    for (int e = head_[u]; e != -1; e = arcs_[static_cast<std::size_t>(e)].next)
                    {
                        const auto &a = arcs_[static_cast<std::size_t>(e)];
                        if (a.cap > eps_ && level_[a.to] < 0)
                        {
                            level_[a.to] = level_[u] + 1;
                            q.push(a.to);
                        }
                    }
                }
                return level_[t] >= 0;
            }

            double dfs(std::size_t u, std::size_t t, double pushed)
            {
                if (u == t)
                    return pushed;
                for (int &e = iter_[u]; e != -1; e = arcs_[static_cast<std::size_t>(e)].next)
                {
                    auto &a = arcs_[static_cast<std::size_t>(e)];
                    if (a.cap > eps_ && level_[a.to] == level_[u] + 1)
                    {
                        const double got = dfs(a.to, t, std::min(pushed, a.cap));
                        if (got > eps_)
                        {
                            a.cap -= got;
                            arcs_[static_cast<std::size_t>(e) ^ 1u].cap += got;
                            return got;
                        }
                    }
                }
                return 0.0;
            }

            std::vector<Arc> arcs_;
            std::vector<int> head_;
            std::vector<int> level_;
            std::vector<int> iter_;
            double scale_ = 0.0;
            double eps_ = 0.0;
        };
    }

    /// Exact MAP labeling by a single s-t minimum cut.
    ///
    /// Source side is label +1. Forced positions get an infinite source arc.
    /// Among several optimal cuts the one with the smallest +1 set is returned.
    inline Labeling minimize(const SupportGraph &graph)
    {
        graph.validate();
        const std::size_t n = graph.size();
        const std::size_t s = n, t = n + 1;

        std::vector<bool> forced(n, false);
        for (auto p : graph.forced_positive)
            forced[p] = true;

        detail::MaxFlow flow(n + 2);
        for (std::size_t l = 0; l < n; ++l)
        {
            const auto row = static_cast<Eigen::Index>(l);
            double cost_minus = graph.unary(row, 0);
            double cost_plus = graph.unary(row, 1);
            if (forced[l])
            {
                flow.add_edge(s, l, std::numeric_limits<double>::infinity(), 0.0);
                continue;
            }
            const double base = std::min(cost_minus, cost_plus);
            cost_minus -= base;
            cost_plus -= base;
            if (cost_minus > 0.0)
                flow.add_edge(s, l, cost_minus, 0.0);
            if (cost_plus > 0.0)
                flow.add_edge(l, t, cost_plus, 0.0);
        }
        if (graph.pairwise_beta > 0.0)
            for (auto [a, b] : graph.lattice->edges())
                flow.add_edge(a, b, graph.pairwise_beta, graph.pairwise_beta);

        flow.solve(s, t);
        const auto side = flow.source_side(s);

        Labeling out;
        out.labels.resize(n);
        for (std::size_t l = 0; l < n; ++l)
            out.labels[l] = (side[l] || forced[l]) ? std::int8_t{1} : std::int8_t{-1};
        out.energy = energy(graph, out.labels);
        return out;
    }
}
