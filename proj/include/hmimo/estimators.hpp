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

#include "hmimo/channel_model.hpp"
#include "hmimo/mincut.hpp"
#include "hmimo/wavenumber.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmimo
{
    using Support = std::vector<std::size_t>; // ascending, unique

    inline Support support_union(const Support &a, const Support &b)
    {
        Support out;
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        return out;
    }

    inline Support sorted_support(std::vector<std::size_t> v)
    {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }

    inline Support support_of(const CVector &h)
    {
        Support out;
        for (Eigen::Index i = 0; i < h.size(); ++i)
            if (h(i) != cdouble(0.0, 0.0))
                out.push_back(static_cast<std::size_t>(i));
        return out;
    }

    // ---------- Measurements ----------

    /// Pilots, effective sensing matrix and per-user observations.
    struct MeasurementSet
    {
        CMatrix pilots;    // T x N
        CMatrix effective; // T x L, pilots * psi
        std::vector<CVector> received;
        double noise_variance = 0.0;
        double snr_db = std::numeric_limits<double>::infinity();

        std::size_t pilot_length() const { return static_cast<std::size_t>(pilots.rows()); }
        std::size_t num_users() const { return received.size(); }

        /// Single-user view sharing the same pilots.
        MeasurementSet user(std::size_t i) const
        {
            MeasurementSet m;
            m.pilots = pilots;
            m.effective = effective;
            m.received = {received.at(i)};
            m.noise_variance = noise_variance;
            m.snr_db = snr_db;
            return m;
        }
    };

    /// Entries of the pilot matrix are i.i.d. CN(0, 1); every user observes the same
    /// broadcast pilots. Noise variance is `signal_power / 10^(snr_db / 10)` where
    /// `signal_power` is the expected per-sample power E|x^T Psi h_f|^2 (1 for
    /// unit-sum variance maps). An infinite `snr_db` gives noiseless observations.
    inline MeasurementSet generate_measurements(const std::vector<UserChannel> &channels, const SparseBasis &basis,
                                                std::size_t pilot_length, double snr_db, Rng &rng,
                                                double signal_power = 1.0)
    {
        if (pilot_length < 1)
            throw std::invalid_argument("generate_measurements: pilot length must be at least 1.");
        const auto t = static_cast<Eigen::Index>(pilot_length);
        const auto n = basis.psi.rows();

        MeasurementSet m;
        m.snr_db = snr_db;
        m.pilots.resize(t, n);
        for (Eigen::Index r = 0; r < t; ++r)
            for (Eigen::Index c = 0; c < n; ++c)
                m.pilots(r, c) = complex_normal(rng, 1.0);
        m.effective = m.pilots * basis.psi;

        const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
        m.noise_variance = noiseless ? 0.0 : signal_power / std::pow(10.0, snr_db / 10.0);

        for (const auto &ch : channels)
        {
            if (ch.h_f.size() != m.effective.cols())
                throw std::invalid_argument("generate_measurements: channel length does not match the basis.");
            CVector y = m.effective * ch.h_f;
            if (!noiseless)
                for (Eigen::Index r = 0; r < t; ++r)
                    y(r) += complex_normal(rng, m.noise_variance);
            m.received.push_back(std::move(y));
        }
        return m;
    }

    // ---------- Configuration ----------

    /// Unary D(+1) = gamma (tau - e), D(-1) = gamma (e - tau) on the evidence e, with
    /// tau = max(tau_ratio * max_l e_l, tau_min). Pairwise is Ising with `beta`.
    struct MrfParams
    {
        double beta = 0.05;
        double gamma = 1.0;
        double tau_ratio = 0.0;
        double tau_min = 0.387;
    };

    struct EstimatorConfig
    {
        std::size_t k_tilde = 8;      // candidates per user per iteration
        std::size_t trim_budget = 18; // entries kept by Trim
        double eta = 0.15;            // squared-correlation threshold for votes
        std::size_t k0 = 4;           // votes needed to join the common support
        bool strict_vote = false;     // count > k0 instead of count >= k0
        double noise_margin = 1.5;    // candidates stop once ||r||^2 <= margin * sigma^2 * T
        double evidence_cap = 2.0;
        int max_iters = 20;
        double residual_tol = 1e-4;
        MrfParams mrf;

        /// k0 > K is accepted; no position can then collect enough votes.
        std::string is_valid(std::size_t lattice_size) const
        {
            if (k_tilde < 1 || k_tilde > lattice_size)
                return "estimator.k_tilde must lie in [1, L]";
            if (trim_budget < 1 || trim_budget > lattice_size)
                return "estimator.trim_budget must lie in [1, L]";
            if (!(eta >= 0.0))
                return "estimator.eta must be non-negative";
            if (k0 < 1)
                return "estimator.k0 must be positive";
            if (!(noise_margin >= 0.0))
                return "estimator.noise_margin must be non-negative";
            if (!(evidence_cap > 0.0))
                return "estimator.evidence_cap must be positive";
            if (max_iters < 1)
                return "estimator.max_iters must be positive";
            if (!(residual_tol >= 0.0))
                return "estimator.residual_tol must be non-negative";
            if (!(mrf.beta >= 0.0))
                return "estimator.mrf.beta must be non-negative";
            if (!(mrf.gamma > 0.0))
                return "estimator.mrf.gamma must be positive";
            if (!(mrf.tau_ratio >= 0.0 && mrf.tau_ratio <= 1.0))
                return "estimator.mrf.tau_ratio must lie in [0, 1]";
            if (!(mrf.tau_min >= 0.0))
                return "estimator.mrf.tau_min must be non-negative";
            return {};
        }
    };

    // ---------- Building blocks ----------

    struct ResidualScores
    {
        CVector residual;
        RVector scores; // normalized correlations in [0, 1]
    };

    /// Column norms of the effective sensing matrix.
    inline RVector column_norms(const CMatrix &effective) { return effective.colwise().norm().transpose(); }

    /// residual = y - A h;  score_l = |a_l^H r| / (||a_l|| ||r||).
    inline ResidualScores residual_scores(const CMatrix &effective, const RVector &col_norms, const CVector &y,
                                          const CVector &h_hat)
    {
        if (effective.rows() != y.size() || effective.cols() != h_hat.size() || col_norms.size() != h_hat.size())
            throw std::invalid_argument("residual_scores: dimension mismatch.");
        ResidualScores out;
        out.residual = y - effective * h_hat;
        out.scores = RVector::Zero(h_hat.size());
        const double rn = out.residual.norm();
        if (rn == 0.0)
            return out;
        const CVector corr = effective.adjoint() * out.residual;
        for (Eigen::Index l = 0; l < corr.size(); ++l)
            out.scores(l) = col_norms(l) > 0.0 ? std::min(1.0, std::abs(corr(l)) / (col_norms(l) * rn)) : 0.0;
        return out;
    }

    inline ResidualScores residual_scores(const CMatrix &effective, const CVector &y, const CVector &h_hat)
    {
        return residual_scores(effective, column_norms(effective), y, h_hat);
    }

    /// Top-k_tilde scores in descending order (ties: lower position first), keeping
    /// only those with score^2 > eta.
    inline std::vector<std::size_t> select_candidates(const RVector &scores, std::size_t k_tilde, double eta)
    {
        std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto keep = std::min(k_tilde, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              const double sa = scores(static_cast<Eigen::Index>(a));
                              const double sb = scores(static_cast<Eigen::Index>(b));
                              return sa != sb ? sa > sb : a < b;
                          });
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < keep; ++i)
        {
            const double s = scores(static_cast<Eigen::Index>(order[i]));
            if (s * s > eta)
                out.push_back(order[i]);
        }
        return out;
    }

    inline std::vector<std::size_t> select_candidates(const RVector &scores, const EstimatorConfig &config)
    {
        return select_candidates(scores, config.k_tilde, config.eta);
    }

    /// Adds every position nominated by at least k0 users (more than k0 when strict).
    inline Support vote_common(const std::vector<std::vector<std::size_t>> &candidates, std::size_t k0,
                               const Support &common, bool strict = false)
    {
        std::vector<std::size_t> counts;
        for (const auto &set : candidates)
            for (auto idx : sorted_support(set))
            {
                if (idx >= counts.size())
                    counts.resize(idx + 1, 0);
                ++counts[idx];
            }
        Support added;
        for (std::size_t idx = 0; idx < counts.size(); ++idx)
            if (strict ? counts[idx] > k0 : counts[idx] >= k0)
                added.push_back(idx);
        return support_union(common, added);
    }

    /// Unary table from normalized scores.
    inline Eigen::MatrixX2d score_unaries(const RVector &scores, const MrfParams &mrf)
    {
        const double max_score = scores.size() > 0 ? scores.maxCoeff() : 0.0;
        const double tau = std::max(mrf.tau_ratio * max_score, mrf.tau_min);
        Eigen::MatrixX2d u(scores.size(), 2);
        for (Eigen::Index l = 0; l < scores.size(); ++l)
        {
            u(l, 0) = mrf.gamma * (scores(l) - tau);
            u(l, 1) = mrf.gamma * (tau - scores(l));
        }
        return u;
    }

    /// Per-position evidence for the labeling step.
    ///
    /// e_l = |h_l + a_l^H r / ||a_l||^2| * ||a_l|| / ||r||, capped at `cap`: the
    /// normalized correlation of the residual with position l restored. Equals the
    /// plain score where h_l = 0. With a zero residual, fitted positions get `cap`.
    inline RVector evidence_scores(const CMatrix &effective, const RVector &col_norms, const CVector &y,
                                   const CVector &h_hat, double cap)
    {
        const CVector r = y - effective * h_hat;
        const double rn = r.norm();
        const CVector corr = effective.adjoint() * r;
        RVector e(h_hat.size());
        for (Eigen::Index q = 0; q < h_hat.size(); ++q)
        {
            const double nq = col_norms(q);
            double v;
            if (rn > 0.0)
                v = nq > 0.0 ? std::abs(h_hat(q) + corr(q) / (nq * nq)) * nq / rn : 0.0;
            else
                v = h_hat(q) != cdouble(0.0, 0.0) ? cap : 0.0;
            e(q) = std::min(v, cap);
        }
        return e;
    }

    /// Merges support, common support and candidates, then labels the lattice with
    /// the merged set clamped to +1. `support` is updated in place.
    inline Labeling merge_and_label(const WavenumberLattice &lattice, Support &support, const Support &common,
                                    const std::vector<std::size_t> &candidates, const RVector &scores,
                                    const MrfParams &mrf)
    {
        support = support_union(support_union(support, common), sorted_support(candidates));
        SupportGraph graph(lattice, score_unaries(scores, mrf), mrf.beta, support);
        return minimize(graph);
    }

    struct TrimResult
    {
        CVector h_hat;
        bool underdetermined = false;
    };

    /// Keeps the `budget` largest-magnitude entries (ties: lower position first).
    inline CVector trim(const CVector &h, std::size_t budget)
    {
        Support nz = support_of(h);
        if (nz.size() <= budget)
            return h;
        std::stable_sort(nz.begin(), nz.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(h(static_cast<Eigen::Index>(a))) > std::abs(h(static_cast<Eigen::Index>(b)));
        });
        CVector out = CVector::Zero(h.size());
        for (std::size_t i = 0; i < budget; ++i)
        {
            const auto idx = static_cast<Eigen::Index>(nz[i]);
            out(idx) = h(idx);
        }
        return out;
    }

    /// Least squares on the active columns (minimum-norm when underdetermined),
    /// embedded into length L, then trimmed to `trim_budget` entries.
    inline TrimResult trim_ls(const CMatrix &effective, const CVector &y, const Support &active,
                              std::size_t trim_budget)
    {
        TrimResult out;
        out.h_hat = CVector::Zero(effective.cols());
        if (active.empty())
            return out;
        CMatrix sub(effective.rows(), static_cast<Eigen::Index>(active.size()));
        for (std::size_t i = 0; i < active.size(); ++i)
        {
            if (active[i] >= static_cast<std::size_t>(effective.cols()))
                throw std::invalid_argument("trim_ls: active position outside the dictionary.");
            sub.col(static_cast<Eigen::Index>(i)) = effective.col(static_cast<Eigen::Index>(active[i]));
        }
        out.underdetermined = active.size() > static_cast<std::size_t>(effective.rows());
        const CVector coef = sub.completeOrthogonalDecomposition().solve(y);
        for (std::size_t i = 0; i < active.size(); ++i)
            out.h_hat(static_cast<Eigen::Index>(active[i])) = coef(static_cast<Eigen::Index>(i));
        out.h_hat = trim(out.h_hat, trim_budget);
        return out;
    }

    inline TrimResult trim_ls(const CMatrix &effective, const CVector &y, const Labels &labels,
                              std::size_t trim_budget)
    {
        Support active;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] > 0)
                active.push_back(i);
        return trim_ls(effective, y, active, trim_budget);
    }

    // ---------- Metrics ----------

    class metric_error : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    /// ||H - H_est||_F^2 / ||H||_F^2 over the stacked user channels.
    inline double nmse(const std::vector<CVector> &truth, const std::vector<CVector> &estimate)
    {
        if (truth.size() != estimate.size())
            throw std::invalid_argument("nmse: user count mismatch.");
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i)
        {
            if (truth[i].size() != estimate[i].size())
                throw std::invalid_argument("nmse: channel length mismatch.");
            num += (truth[i] - estimate[i]).squaredNorm();
            den += truth[i].squaredNorm();
        }
        if (!(den > 0.0))
            throw metric_error("nmse: undefined for an all-zero reference channel.");
        return num / den;
    }

    inline double nmse(const CVector &truth, const CVector &estimate)
    {
        return nmse(std::vector<CVector>{truth}, std::vector<CVector>{estimate});
    }

    // ---------- Graph-cut estimators ----------

    struct IterationTrace
    {
        int iteration = 0;
        std::vector<double> residual_norms;
        std::vector<double> user_nmse; // empty without ground truth
        double mean_nmse = std::numeric_limits<double>::quiet_NaN();
        std::size_t common_support_size = 0;
    };

    struct EstimationResult
    {
        std::vector<CVector> h_hat;
        std::vector<IterationTrace> trace;
        Support common_support;
        std::vector<Support> supports;
        int iterations = 0;
        bool converged = false;
        bool underdetermined = false; // some LS solve had more columns than pilots
    };

    namespace detail
    {
        inline void record_accuracy(IterationTrace &row, const std::vector<CVector> &h_hat,
                                    const std::vector<CVector> *truth)
        {
            if (truth == nullptr)
                return;
            for (std::size_t i = 0; i < h_hat.size(); ++i)
            {
                const double den = (*truth)[i].squaredNorm();
                row.user_nmse.push_back(den > 0.0 ? ((*truth)[i] - h_hat[i]).squaredNorm() / den
                                                  : std::numeric_limits<double>::quiet_NaN());
            }
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < h_hat.size(); ++i)
            {
                num += ((*truth)[i] - h_hat[i]).squaredNorm();
                den += (*truth)[i].squaredNorm();
            }
            row.mean_nmse = den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
        }

        /// Shared iteration for jgc_ce (joint = true) and gcse (joint = false).
        ///
        /// Phase A scores every user's residual. Votes come from the top-k_tilde positions
        /// with score^2 > eta, accumulated over iterations. Clamped candidates use the
        /// same rule on scores relative to the best one, and only while the residual
        /// still carries more than noise_margin * sigma^2 * T energy.
        /// Phase B is the vote (joint only). Phase C labels and refits each user.
        ///
        /// A user stops updating once its residual norm changes by less than
        /// residual_tol relatively; it resumes if the common support later gains a
        /// position outside its support. The run ends when every user is settled.
        inline EstimationResult graph_cut_iterate(const MeasurementSet &m, const WavenumberLattice &lattice,
                                                  const EstimatorConfig &cfg, bool joint,
                                                  const std::vector<CVector> *truth)
        {
            const std::size_t k = m.num_users();
            const auto l = m.effective.cols();
            if (k < 1)
                throw std::invalid_argument("graph-cut estimator: no users.");
            if (static_cast<std::size_t>(l) != lattice.size())
                throw std::invalid_argument("graph-cut estimator: lattice does not match the sensing matrix.");
            if (auto msg = cfg.is_valid(lattice.size()); !msg.empty())
                throw std::invalid_argument(msg);
            if (truth != nullptr && truth->size() != k)
                throw std::invalid_argument("graph-cut estimator: ground truth user count mismatch.");

            const RVector norms = column_norms(m.effective);
            const double noise_floor =
                cfg.noise_margin * m.noise_variance * static_cast<double>(m.effective.rows());

            EstimationResult res;
            res.h_hat.assign(k, CVector::Zero(l));
            res.supports.assign(k, Support{});
            std::vector<double> res_norm(k);
            std::vector<bool> settled(k, false);
            for (std::size_t i = 0; i < k; ++i)
                res_norm[i] = m.received[i].norm();

            std::vector<std::vector<std::size_t>> candidates(k), voters(k);

            for (int j = 1; j <= cfg.max_iters; ++j)
            {
                // Phase A: individual candidates
                for (std::size_t i = 0; i < k; ++i)
                {
                    if (settled[i] && !joint)
                        continue;
                    auto rs = residual_scores(m.effective, norms, m.received[i], res.h_hat[i]);
                    voters[i] = support_union(voters[i], sorted_support(select_candidates(rs.scores, cfg)));

                    const double best = rs.scores.size() > 0 ? rs.scores.maxCoeff() : 0.0;
                    const bool signal_left = rs.residual.squaredNorm() > noise_floor;
                    candidates[i] = (best > 0.0 && signal_left) ? select_candidates(rs.scores / best, cfg)
                                                                : std::vector<std::size_t>{};
                }

                // Phase B: common support vote (barrier across users)
                const Support previous_common = res.common_support;
                if (joint)
                    res.common_support = vote_common(voters, cfg.k0, res.common_support, cfg.strict_vote);

                // Phase C: individual labeling and estimation
                for (std::size_t i = 0; i < k; ++i)
                {
                    if (settled[i])
                    {
                        Support fresh;
                        std::set_difference(res.common_support.begin(), res.common_support.end(),
                                            res.supports[i].begin(), res.supports[i].end(), std::back_inserter(fresh));
                        if (fresh.empty() || res.common_support == previous_common)
                            continue;
                        settled[i] = false;
                    }
                    const RVector evidence =
                        evidence_scores(m.effective, norms, m.received[i], res.h_hat[i], cfg.evidence_cap);
                    Support clamped;
                    auto labeling =
                        merge_and_label(lattice, clamped, res.common_support, candidates[i], evidence, cfg.mrf);
                    auto est = trim_ls(m.effective, m.received[i], labeling.positives(), cfg.trim_budget);
                    res.underdetermined = res.underdetermined || est.underdetermined;
                    res.h_hat[i] = std::move(est.h_hat);
                    res.supports[i] = support_of(res.h_hat[i]);

                    const double new_norm = (m.received[i] - m.effective * res.h_hat[i]).norm();
                    const double change =
                        res_norm[i] > 0.0 ? std::abs(new_norm - res_norm[i]) / res_norm[i] : 0.0;
                    res_norm[i] = new_norm;
                    settled[i] = change < cfg.residual_tol;
                }

                IterationTrace row;
                row.iteration = j;
                row.residual_norms = res_norm;
                row.common_support_size = res.common_support.size();
                record_accuracy(row, res.h_hat, truth);
                res.trace.push_back(std::move(row));
                res.iterations = j;

                if (std::all_of(settled.begin(), settled.end(), [](bool b) { return b; }))
                {
                    res.converged = true;
                    break;
                }
            }
            return res;
        }
    }

    /// Joint graph-cut estimation over all users of `m`.
    inline EstimationResult jgc_ce(const MeasurementSet &m, const WavenumberLattice &lattice,
                                   const EstimatorConfig &config, const std::vector<CVector> *truth = nullptr)
    {
        return detail::graph_cut_iterate(m, lattice, config, true, truth);
    }

    /// Single-user graph-cut estimation, run independently for every user in `m`.
    inline EstimationResult gcse(const MeasurementSet &m, const WavenumberLattice &lattice,
                                 const EstimatorConfig &config, const std::vector<CVector> *truth = nullptr)
    {
        return detail::graph_cut_iterate(m, lattice, config, false, truth);
    }

    // ---------- WD-OMP ----------

    struct OmpResult
    {
        CVector h_hat;
        Support support;
        std::vector<double> residual_norms; // after each iteration
        std::vector<CVector> path;          // estimate after each iteration (when requested)
        int iterations = 0;
    };

    /// Orthogonal matching pursuit over the effective dictionary.
    /// Stops after `sparsity_budget` atoms or when ||r|| <= residual_tol * ||y||.
    inline OmpResult wd_omp(const CMatrix &effective, const CVector &y, std::size_t sparsity_budget,
                            double residual_tol = 1e-9, bool keep_path = false)
    {
        if (sparsity_budget > static_cast<std::size_t>(effective.rows()))
            throw std::invalid_argument("wd_omp: sparsity budget exceeds the pilot length.");
        if (y.size() != effective.rows())
            throw std::invalid_argument("wd_omp: observation length mismatch.");

        const RVector norms = column_norms(effective);
        const double y_norm = y.norm();
        OmpResult out;
        out.h_hat = CVector::Zero(effective.cols());
        CVector residual = y;
        std::vector<bool> used(static_cast<std::size_t>(effective.cols()), false);

        while (out.support.size() < sparsity_budget && residual.norm() > residual_tol * y_norm)
        {
            const CVector corr = effective.adjoint() * residual;
            Eigen::Index best = -1;
            double best_score = -1.0;
            for (Eigen::Index c = 0; c < corr.size(); ++c)
            {
                if (used[static_cast<std::size_t>(c)] || norms(c) == 0.0)
                    continue;
                const double s = std::abs(corr(c)) / norms(c);
                if (s > best_score)
                {
                    best_score = s;
                    best = c;
                }
            }
            if (best < 0)
                break;
            used[static_cast<std::size_t>(best)] = true;
            out.support = support_union(out.support, Support{static_cast<std::size_t>(best)});

            auto fit = trim_ls(effective, y, out.support, out.support.size());
            out.h_hat = std::move(fit.h_hat);
            residual = y - effective * out.h_hat;
            out.residual_norms.push_back(residual.norm());
            if (keep_path)
                out.path.push_back(out.h_hat);
            ++out.iterations;
        }
        return out;
    }
}
