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
#include "hmimo/estimators.hpp"
#include "hmimo/wavenumber.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <climits>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace hmimo
{
    /// Invalid or unreadable campaign configuration.
    class config_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Output file could not be written.
    class io_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline const std::vector<std::string> &known_algorithms()
    {
        static const std::vector<std::string> names{"jgc_ce", "gcse", "wd_omp"};
        return names;
    }

    struct CampaignConfig
    {
        ArrayGeometry geometry{17, 17, 0.25, 1.0};
        ScenarioParams scenario;
        QuadratureSettings quadrature;
        std::size_t users = 5;
        std::vector<std::size_t> pilot_lengths{32};
        std::vector<double> snr_db{0, 5, 10, 15, 20, 25, 30};
        std::size_t trials = 100;
        std::uint64_t base_seed = 1;
        EstimatorConfig estimator;
        std::size_t omp_budget = 0; // 0: min(trim_budget, T)
        std::vector<std::string> algorithms{"jgc_ce", "gcse", "wd_omp"};
        std::string output_path = "results.csv";
        bool record_iterations = true;
        bool record_timing = false; // wall_time_ms stays 0 otherwise, keeping output reproducible
        unsigned threads = 1;

        /// Empty string when valid, otherwise the offending field and reason.
        std::string is_valid() const
        {
            if (auto m = geometry.is_valid(); !m.empty())
                return "geometry: " + m;
            if (auto m = scenario.is_valid(); !m.empty())
                return m;
            if (quadrature.n_theta < 2 || quadrature.n_phi < 4)
                return "quadrature: n_theta must be >= 2 and n_phi >= 4";
            if (!(quadrature.min_capture > 0.0 && quadrature.min_capture <= 1.0))
                return "quadrature.min_capture must lie in (0, 1]";
            if (users < 1)
                return "users must be at least 1";
            if (pilot_lengths.empty())
                return "pilot_lengths must not be empty";
            for (auto t : pilot_lengths)
                if (t < 1)
                    return "pilot_lengths entries must be at least 1";
            if (snr_db.empty())
                return "snr_db must not be empty";
            for (auto s : snr_db)
                if (std::isnan(s) || s == -std::numeric_limits<double>::infinity())
                    return "snr_db entries must be finite or +inf";
            if (trials < 1)
                return "trials must be at least 1";
            if (algorithms.empty())
                return "algorithms must not be empty";
            for (const auto &a : algorithms)
                if (std::find(known_algorithms().begin(), known_algorithms().end(), a) == known_algorithms().end())
                    return "algorithms: unknown name '" + a + "' (expected jgc_ce, gcse or wd_omp)";
            if (std::set<std::string>(algorithms.begin(), algorithms.end()).size() != algorithms.size())
                return "algorithms must not repeat";
            if (threads < 1)
                return "threads must be at least 1";
            if (output_path.empty())
                return "output_path must not be empty";
            try
            {
                const auto lat = build_lattice(geometry);
                if (auto m = estimator.is_valid(lat.size()); !m.empty())
                    return m;
            }
            catch (const std::exception &e)
            {
                return std::string("geometry: ") + e.what();
            }
            return {};
        }

        void validate() const
        {
            if (auto m = is_valid(); !m.empty())
                throw config_error(m);
        }
    };

    // ---------- JSON mapping ----------

    namespace detail
    {
        using json = nlohmann::json;

        // Reads `key` from `j` into `out` if present; type errors name the full path.
        template <typename T>
        void read_field(const json &j, const std::string &path, const char *key, T &out)
        {
            auto it = j.find(key);
            if (it == j.end())
                return;
            try
            {
                out = it->template get<T>();
            }
            catch (const json::exception &)
            {
                throw config_error(path + key + ": wrong type (" + std::string(it->type_name()) + ")");
            }
        }

        inline void check_keys(const json &j, const std::string &path, std::initializer_list<const char *> allowed)
        {
            if (!j.is_object())
                throw config_error((path.empty() ? std::string("config") : path.substr(0, path.size() - 1)) +
                                   ": expected an object");
            for (auto it = j.begin(); it != j.end(); ++it)
                if (std::none_of(allowed.begin(), allowed.end(), [&](const char *k) { return it.key() == k; }))
                    throw config_error(path + it.key() + ": unknown field");
        }

        // JSON has no infinity literal; "inf" strings are accepted for SNR values.
        inline double snr_from_json(const json &v, const std::string &path)
        {
            if (v.is_number())
                return v.get<double>();
            if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "+inf"))
                return std::numeric_limits<double>::infinity();
            throw config_error(path + ": expected a number or \"inf\"");
        }
    }

    inline nlohmann::json to_json(const CampaignConfig &c)
    {
        using nlohmann::json;
        const auto &e = c.estimator;
        const auto &s = c.scenario;
        json snr = json::array();
        for (auto v : c.snr_db)
            snr.push_back(std::isinf(v) ? json("inf") : json(v));
        return json{
            {"geometry", {{"n_x", c.geometry.n_x}, {"n_y", c.geometry.n_y}, {"delta", c.geometry.delta}, {"lambda", c.geometry.lambda}}},
            {"scenario",
             {{"clusters_per_user", s.clusters_per_user},
              {"shared_clusters", s.shared_clusters},
              {"concentration", s.concentration},
              {"shared_weight_min", s.shared_weight_min},
              {"shared_weight_max", s.shared_weight_max},
              {"private_weight_min", s.private_weight_min},
              {"private_weight_max", s.private_weight_max},
              {"theta_min", s.theta_min},
              {"theta_max", s.theta_max},
              {"phi_min", s.phi_min},
              {"phi_max", s.phi_max}}},
            {"quadrature", {{"n_theta", c.quadrature.n_theta}, {"n_phi", c.quadrature.n_phi}, {"min_capture", c.quadrature.min_capture}}},
            {"users", c.users},
            {"pilot_lengths", c.pilot_lengths},
            {"snr_db", snr},
            {"trials", c.trials},
            {"base_seed", c.base_seed},
            {"estimator",
             {{"k_tilde", e.k_tilde},
              {"trim_budget", e.trim_budget},
              {"eta", e.eta},
              {"k0", e.k0},
              {"strict_vote", e.strict_vote},
              {"noise_margin", e.noise_margin},
              {"evidence_cap", e.evidence_cap},
              {"max_iters", e.max_iters},
              {"residual_tol", e.residual_tol},
              {"mrf", {{"beta", e.mrf.beta}, {"gamma", e.mrf.gamma}, {"tau_ratio", e.mrf.tau_ratio}, {"tau_min", e.mrf.tau_min}}}}},
            {"omp_budget", c.omp_budget},
            {"algorithms", c.algorithms},
            {"output_path", c.output_path},
            {"record_iterations", c.record_iterations},
            {"record_timing", c.record_timing},
            {"threads", c.threads}};
    }

    /// Overlays the fields present in `j` onto `c` (missing fields keep their value).
    inline void apply_json(CampaignConfig &c, const nlohmann::json &j)
    {
        using detail::check_keys;
        using detail::read_field;
        check_keys(j, "", {"geometry", "scenario", "quadrature", "users", "pilot_lengths", "snr_db", "trials", "base_seed",
                           "estimator", "omp_budget", "algorithms", "output_path", "record_iterations", "record_timing",
                           "threads"});
        if (auto it = j.find("geometry"); it != j.end())
        {
            check_keys(*it, "geometry.", {"n_x", "n_y", "delta", "lambda"});
            read_field(*it, "geometry.", "n_x", c.geometry.n_x);
            read_field(*it, "geometry.", "n_y", c.geometry.n_y);
            read_field(*it, "geometry.", "delta", c.geometry.delta);
            read_field(*it, "geometry.", "lambda", c.geometry.lambda);
        }
        if (auto it = j.find("scenario"); it != j.end())
        {
            auto &s = c.scenario;
            check_keys(*it, "scenario.", {"clusters_per_user", "shared_clusters", "concentration", "shared_weight_min",
                                          "shared_weight_max", "private_weight_min", "private_weight_max", "theta_min",
                                          "theta_max", "phi_min", "phi_max"});
            read_field(*it, "scenario.", "clusters_per_user", s.clusters_per_user);
            read_field(*it, "scenario.", "shared_clusters", s.shared_clusters);
            read_field(*it, "scenario.", "concentration", s.concentration);
            read_field(*it, "scenario.", "shared_weight_min", s.shared_weight_min);
            read_field(*it, "scenario.", "shared_weight_max", s.shared_weight_max);
            read_field(*it, "scenario.", "private_weight_min", s.private_weight_min);
            read_field(*it, "scenario.", "private_weight_max", s.private_weight_max);
            read_field(*it, "scenario.", "theta_min", s.theta_min);
            read_field(*it, "scenario.", "theta_max", s.theta_max);
            read_field(*it, "scenario.", "phi_min", s.phi_min);
            read_field(*it, "scenario.", "phi_max", s.phi_max);
        }
        if (auto it = j.find("quadrature"); it != j.end())
        {
            check_keys(*it, "quadrature.", {"n_theta", "n_phi", "min_capture"});
            read_field(*it, "quadrature.", "n_theta", c.quadrature.n_theta);
            read_field(*it, "quadrature.", "n_phi", c.quadrature.n_phi);
            read_field(*it, "quadrature.", "min_capture", c.quadrature.min_capture);
        }
        read_field(j, "", "users", c.users);
        read_field(j, "", "pilot_lengths", c.pilot_lengths);
        if (auto it = j.find("snr_db"); it != j.end())
        {
            if (!it->is_array())
                throw config_error("snr_db: expected an array");
            c.snr_db.clear();
            for (std::size_t i = 0; i < it->size(); ++i)
                c.snr_db.push_back(detail::snr_from_json((*it)[i], "snr_db[" + std::to_string(i) + "]"));
        }
        read_field(j, "", "trials", c.trials);
        read_field(j, "", "base_seed", c.base_seed);
        if (auto it = j.find("estimator"); it != j.end())
        {
            auto &e = c.estimator;
            check_keys(*it, "estimator.", {"k_tilde", "trim_budget", "eta", "k0", "strict_vote", "noise_margin",
                                           "evidence_cap", "max_iters", "residual_tol", "mrf"});
            read_field(*it, "estimator.", "k_tilde", e.k_tilde);
            read_field(*it, "estimator.", "trim_budget", e.trim_budget);
            read_field(*it, "estimator.", "eta", e.eta);
            read_field(*it, "estimator.", "k0", e.k0);
            read_field(*it, "estimator.", "strict_vote", e.strict_vote);
            read_field(*it, "estimator.", "noise_margin", e.noise_margin);
            read_field(*it, "estimator.", "evidence_cap", e.evidence_cap);
            read_field(*it, "estimator.", "max_iters", e.max_iters);
            read_field(*it, "estimator.", "residual_tol", e.residual_tol);
            if (auto m = it->find("mrf"); m != it->end())
            {
                check_keys(*m, "estimator.mrf.", {"beta", "gamma", "tau_ratio", "tau_min"});
                read_field(*m, "estimator.mrf.", "beta", e.mrf.beta);
                read_field(*m, "estimator.mrf.", "gamma", e.mrf.gamma);
                read_field(*m, "estimator.mrf.", "tau_ratio", e.mrf.tau_ratio);
                read_field(*m, "estimator.mrf.", "tau_min", e.mrf.tau_min);
            }
        }
        read_field(j, "", "omp_budget", c.omp_budget);
        read_field(j, "", "algorithms", c.algorithms);
        read_field(j, "", "output_path", c.output_path);
        read_field(j, "", "record_iterations", c.record_iterations);
        read_field(j, "", "record_timing", c.record_timing);
        read_field(j, "", "threads", c.threads);
    }

    inline CampaignConfig parse_config(const std::string &text)
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw config_error(std::string("config is not valid JSON: ") + e.what());
        }
        CampaignConfig c;
        apply_json(c, j);
        c.validate();
        return c;
    }

    inline CampaignConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw config_error("cannot read config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str());
    }

    // ---------- Seeds ----------

    /// splitmix64 finalizer.
    inline std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

    /// Channels of a trial depend only on (base_seed, trial), so every SNR, pilot
    /// length and algorithm of that trial sees the same users.
    inline std::uint64_t scenario_seed(std::uint64_t base_seed, std::size_t trial)
    {
        return mix_seed(base_seed, static_cast<std::uint64_t>(trial));
    }

    /// Pilots and noise of one (trial, snr, T) cell; shared by all algorithms.
    inline std::uint64_t measurement_seed(std::uint64_t scenario, double snr_db, std::size_t pilot_len)
    {
        return mix_seed(mix_seed(scenario, std::bit_cast<std::uint64_t>(snr_db)), static_cast<std::uint64_t>(pilot_len));
    }

    // ---------- Rows and CSV ----------

    struct ResultRow
    {
        std::string algorithm;
        std::size_t trial = 0;
        std::uint64_t seed = 0;
        double snr_db = 0.0;
        std::size_t pilot_len = 0;
        int iteration = -1; // -1 marks the final row
        std::size_t user = 0;
        double nmse = 0.0;
        double mean_nmse = 0.0;
        double residual_norm = 0.0;
        std::size_t common_support_size = 0;
        std::uint64_t channel_checksum = 0;
        double wall_time_ms = 0.0;
    };

    inline constexpr const char *csv_header = "algorithm,trial,seed,snr_db,pilot_len,iteration,user,nmse,mean_nmse,"
                                              "residual_norm,common_support_size,channel_checksum,wall_time_ms";

    inline std::string format_real(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return buf;
    }

    inline std::string csv_line(const ResultRow &r)
    {
        std::string s = r.algorithm;
        s += ',' + std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + format_real(r.snr_db) + ',' +
             std::to_string(r.pilot_len) + ',' + std::to_string(r.iteration) + ',' + std::to_string(r.user) + ',' +
             format_real(r.nmse) + ',' + format_real(r.mean_nmse) + ',' + format_real(r.residual_norm) + ',' +
             std::to_string(r.common_support_size) + ',' + std::to_string(r.channel_checksum) + ',' +
             format_real(r.wall_time_ms);
        return s;
    }

    inline std::string to_csv(const std::vector<ResultRow> &rows)
    {
        std::string out = std::string(csv_header) + '\n';
        for (const auto &r : rows)
            out += csv_line(r) + '\n';
        return out;
    }

    inline void write_csv(const std::string &path, const std::vector<ResultRow> &rows)
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw io_error("cannot open '" + path + "' for writing");
        out << to_csv(rows);
        out.flush();
        if (!out)
            throw io_error("write to '" + path + "' failed");
    }

    /// Parses a CSV produced by write_csv; throws on any schema deviation.
    inline std::vector<ResultRow> parse_csv(const std::string &text)
    {
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line) || line != csv_header)
            throw std::invalid_argument("parse_csv: header does not match the schema");
        auto real = [](const std::string &f) {
            if (f == "inf")
                return std::numeric_limits<double>::infinity();
            if (f == "-inf")
                return -std::numeric_limits<double>::infinity();
            if (f == "nan")
                return std::numeric_limits<double>::quiet_NaN();
            std::size_t used = 0;
            const double v = std::stod(f, &used);
            if (used != f.size())
                throw std::invalid_argument("parse_csv: bad number '" + f + "'");
            return v;
        };
        auto uint = [](const std::string &f) {
            std::size_t used = 0;
            const auto v = std::stoull(f, &used);
            if (used != f.size() || f.empty() || f[0] == '-')
                throw std::invalid_argument("parse_csv: bad integer '" + f + "'");
            return static_cast<std::uint64_t>(v);
        };
        std::vector<ResultRow> rows;
        while (std::getline(in, line))
        {
            std::vector<std::string> f;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ','))
                f.push_back(cell);
            if (f.size() != 13)
                throw std::invalid_argument("parse_csv: expected 13 fields, got " + std::to_string(f.size()));
            ResultRow r;
            r.algorithm = f[0];
            r.trial = uint(f[1]);
            r.seed = uint(f[2]);
            r.snr_db = real(f[3]);
            r.pilot_len = uint(f[4]);
            r.iteration = std::stoi(f[5]);
            r.user = uint(f[6]);
            r.nmse = real(f[7]);
            r.mean_nmse = real(f[8]);
            r.residual_norm = real(f[9]);
            r.common_support_size = uint(f[10]);
            r.channel_checksum = uint(f[11]);
            r.wall_time_ms = real(f[12]);
            rows.push_back(std::move(r));
        }
        return rows;
    }

    // ---------- Campaign ----------

    namespace detail
    {
        inline void emit_estimation(std::vector<ResultRow> &rows, const ResultRow &base, const EstimationResult &res,
                                    const std::vector<CVector> &truth, const MeasurementSet &m, bool traces)
        {
            if (traces)
                for (const auto &t : res.trace)
                    for (std::size_t u = 0; u < truth.size(); ++u)
                    {
                        ResultRow r = base;
                        r.iteration = t.iteration;
                        r.user = u;
                        r.nmse = t.user_nmse[u];
                        r.mean_nmse = t.mean_nmse;
                        r.residual_norm = t.residual_norms[u];
                        r.common_support_size = t.common_support_size;
                        rows.push_back(std::move(r));
                    }
            const double total = nmse(truth, res.h_hat);
            for (std::size_t u = 0; u < truth.size(); ++u)
            {
                ResultRow r = base;
                r.iteration = -1;
                r.user = u;
                r.nmse = nmse(truth[u], res.h_hat[u]);
                r.mean_nmse = total;
                r.residual_norm = (m.received[u] - m.effective * res.h_hat[u]).norm();
                r.common_support_size = res.common_support.size();
                rows.push_back(std::move(r));
            }
        }

        inline void emit_omp(std::vector<ResultRow> &rows, const ResultRow &base, const std::vector<OmpResult> &res,
                             const std::vector<CVector> &truth, const MeasurementSet &m, bool traces)
        {
            const std::size_t k = truth.size();
            if (traces)
            {
                int longest = 0;
                for (const auto &r : res)
                    longest = std::max(longest, r.iterations);
                double den = 0.0;
                for (const auto &t : truth)
                    den += t.squaredNorm();
                for (int j = 1; j <= longest; ++j)
                {
                    // users that stopped early keep their last estimate
                    std::vector<double> err(k), resid(k);
                    double num = 0.0;
                    for (std::size_t u = 0; u < k; ++u)
                    {
                        const auto &path = res[u].path;
                        const CVector h = path.empty() ? CVector::Zero(truth[u].size())
                                                       : path[static_cast<std::size_t>(std::min<int>(j, res[u].iterations) - 1)];
                        const double e = (truth[u] - h).squaredNorm();
                        num += e;
                        err[u] = e / truth[u].squaredNorm();
                        resid[u] = (m.received[u] - m.effective * h).norm();
                    }
                    for (std::size_t u = 0; u < k; ++u)
                    {
                        ResultRow r = base;
                        r.iteration = j;
                        r.user = u;
                        r.nmse = err[u];
                        r.mean_nmse = num / den;
                        r.residual_norm = resid[u];
                        rows.push_back(std::move(r));
                    }
                }
            }
            std::vector<CVector> est;
            for (const auto &r : res)
                est.push_back(r.h_hat);
            const double total = nmse(truth, est);
            for (std::size_t u = 0; u < k; ++u)
            {
                ResultRow r = base;
                r.iteration = -1;
                r.user = u;
                r.nmse = nmse(truth[u], est[u]);
                r.mean_nmse = total;
                r.residual_norm = (m.received[u] - m.effective * est[u]).norm();
                rows.push_back(std::move(r));
            }
        }

        struct CampaignContext
        {
            WavenumberLattice lattice;
            SparseBasis basis;
            AngularGrid grid;
        };

        inline std::vector<ResultRow> run_trial(const CampaignConfig &cfg, const CampaignContext &ctx, std::size_t trial)
        {
            std::vector<ResultRow> rows;
            const auto s_seed = scenario_seed(cfg.base_seed, trial);
            Rng scenario_rng(s_seed);
            const auto scenario = draw_scenario(cfg.scenario, cfg.users, scenario_rng);
            const auto maps = variance_maps(scenario, ctx.grid);
            const auto channels = sample_channels(maps, scenario_rng);
            const auto checksum = channel_checksum(channels);
            std::vector<CVector> truth;
            for (const auto &ch : channels)
                truth.push_back(ch.h_f);

            for (double snr : cfg.snr_db)
                for (std::size_t t : cfg.pilot_lengths)
                {
                    const auto m_seed = measurement_seed(s_seed, snr, t);
                    Rng m_rng(m_seed);
                    const auto m = generate_measurements(channels, ctx.basis, t, snr, m_rng);

                    for (const auto &alg : cfg.algorithms)
                    {
                        ResultRow base;
                        base.algorithm = alg;
                        base.trial = trial;
                        base.seed = m_seed;
                        base.snr_db = snr;
                        base.pilot_len = t;
                        base.channel_checksum = checksum;

                        const auto start = std::chrono::steady_clock::now();
                        std::vector<ResultRow> cell;
                        if (alg == "wd_omp")
                        {
                            const std::size_t budget =
                                std::min(cfg.omp_budget > 0 ? cfg.omp_budget : cfg.estimator.trim_budget, t);
                            std::vector<OmpResult> res;
                            for (std::size_t u = 0; u < m.num_users(); ++u)
                                res.push_back(wd_omp(m.effective, m.received[u], budget, 1e-9, cfg.record_iterations));
                            emit_omp(cell, base, res, truth, m, cfg.record_iterations);
                        }
                        else
                        {
                            const auto res = alg == "jgc_ce" ? jgc_ce(m, ctx.lattice, cfg.estimator, &truth)
                                                             : gcse(m, ctx.lattice, cfg.estimator, &truth);
                            emit_estimation(cell, base, res, truth, m, cfg.record_iterations);
                        }
                        if (cfg.record_timing)
                        {
                            const double ms =
                                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                            for (auto &r : cell)
                                r.wall_time_ms = ms;
                        }
                        rows.insert(rows.end(), std::make_move_iterator(cell.begin()), std::make_move_iterator(cell.end()));
                    }
                }
            return rows;
        }
    }

    /// Runs every (algorithm, snr, T, trial) cell. Trials are spread over
    /// `cfg.threads` workers; rows are sorted by (algorithm, snr, T, trial,
    /// iteration with final rows last, user) so the output does not depend on scheduling.
    inline std::vector<ResultRow> run_campaign(const CampaignConfig &cfg)
    {
        cfg.validate();
        auto lattice = build_lattice(cfg.geometry);
        auto basis = build_basis(cfg.geometry, lattice);
        AngularGrid grid(cfg.geometry, lattice, cfg.quadrature);
        const detail::CampaignContext ctx{std::move(lattice), std::move(basis), std::move(grid)};

        std::vector<std::vector<ResultRow>> per_trial(cfg.trials);
        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        std::exception_ptr error;
        auto worker = [&]() {
            for (std::size_t t = next++; t < cfg.trials; t = next++)
            {
                try
                {
                    per_trial[t] = detail::run_trial(cfg, ctx, t);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        };
        const unsigned n_workers = static_cast<unsigned>(std::min<std::size_t>(cfg.threads, cfg.trials));
        if (n_workers <= 1)
            worker();
        else
        {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < n_workers; ++w)
                pool.emplace_back(worker);
            for (auto &th : pool)
                th.join();
        }
        if (error)
            std::rethrow_exception(error);

        std::vector<ResultRow> rows;
        for (auto &v : per_trial)
            rows.insert(rows.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));

        auto position = [](const auto &list, const auto &value) {
            return static_cast<std::size_t>(std::find(list.begin(), list.end(), value) - list.begin());
        };
        auto key = [&](const ResultRow &r) {
            return std::make_tuple(position(cfg.algorithms, r.algorithm), position(cfg.snr_db, r.snr_db),
                                   position(cfg.pilot_lengths, r.pilot_len), r.trial,
                                   r.iteration < 0 ? INT_MAX : r.iteration, r.user);
        };
        std::stable_sort(rows.begin(), rows.end(), [&](const ResultRow &a, const ResultRow &b) { return key(a) < key(b); });
        return rows;
    }

    // ---------- Summary ----------

    struct CellSummary
    {
        std::string algorithm;
        double snr_db = 0.0;
        std::size_t pilot_len = 0;
        std::size_t trials = 0;
        double mean_nmse = 0.0;
        double std_nmse = 0.0; // sample standard deviation, 0 for a single trial
        double mean_iterations = std::numeric_limits<double>::quiet_NaN();
        double median_iterations = std::numeric_limits<double>::quiet_NaN();
    };

    /// Convergence iteration of one trace: the first j at which every user's residual
    /// norm changed by less than `residual_tol` relative to iteration j - 1, else the
    /// last recorded iteration. `norms[j]` holds the per-user norms of iteration j + 1.
    inline int convergence_iteration(const std::vector<std::vector<double>> &norms, double residual_tol)
    {
        if (norms.empty())
            return 0;
        for (std::size_t j = 1; j < norms.size(); ++j)
        {
            bool all = true;
            for (std::size_t u = 0; u < norms[j].size() && all; ++u)
            {
                const double prev = norms[j - 1][u];
                const double change = prev > 0.0 ? std::abs(norms[j][u] - prev) / prev : 0.0;
                all = change < residual_tol;
            }
            if (all)
                return static_cast<int>(j + 1);
        }
        return static_cast<int>(norms.size());
    }

    inline double median(std::vector<double> v)
    {
        if (v.empty())
            throw std::invalid_argument("median: empty input");
        std::sort(v.begin(), v.end());
        const auto n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

    /// Aggregates final rows per (algorithm, snr, T): mean and sample standard
    /// deviation of the per-trial mean NMSE, plus convergence iterations when
    /// iteration rows are present. Cells keep first-appearance order.
    inline std::vector<CellSummary> summarize(const std::vector<ResultRow> &rows, double residual_tol = 1e-4)
    {
        if (rows.empty())
            throw std::invalid_argument("summarize: no rows");

        using CellKey = std::tuple<std::string, double, std::size_t>;
        std::vector<CellKey> order;
        std::map<CellKey, std::map<std::size_t, double>> finals;
        std::map<CellKey, std::map<std::size_t, std::map<int, std::map<std::size_t, double>>>> traces;
        for (const auto &r : rows)
        {
            CellKey key{r.algorithm, r.snr_db, r.pilot_len};
            if (!finals.count(key) && !traces.count(key))
                order.push_back(key);
            if (r.iteration < 0)
                finals[key][r.trial] = r.mean_nmse;
            else
                traces[key][r.trial][r.iteration][r.user] = r.residual_norm;
        }

        std::vector<CellSummary> out;
        for (const auto &key : order)
        {
            CellSummary s;
            std::tie(s.algorithm, s.snr_db, s.pilot_len) = key;
            std::vector<double> values;
            for (const auto &[trial, v] : finals[key])
                values.push_back(v);
            s.trials = values.size();
            if (!values.empty())
            {
                double sum = 0.0;
                for (auto v : values)
                    sum += v;
                s.mean_nmse = sum / static_cast<double>(values.size());
                double ss = 0.0;
                for (auto v : values)
                    ss += (v - s.mean_nmse) * (v - s.mean_nmse);
                s.std_nmse = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
            }
            else
                s.mean_nmse = s.std_nmse = std::numeric_limits<double>::quiet_NaN();

            if (auto it = traces.find(key); it != traces.end())
            {
                std::vector<double> iters;
                for (const auto &[trial, by_iter] : it->second)
                {
                    std::vector<std::vector<double>> norms;
                    for (const auto &[j, by_user] : by_iter)
                    {
                        std::vector<double> row;
                        for (const auto &[u, v] : by_user)
                            row.push_back(v);
                        norms.push_back(std::move(row));
                    }
                    iters.push_back(convergence_iteration(norms, residual_tol));
                }
                double sum = 0.0;
                for (auto v : iters)
                    sum += v;
                s.mean_iterations = sum / static_cast<double>(iters.size());
                s.median_iterations = median(iters);
            }
            out.push_back(std::move(s));
        }
        return out;
    }

    inline std::string summary_csv(const std::vector<CellSummary> &cells)
    {
        std::string out = "algorithm,snr_db,pilot_len,trials,mean_nmse,std_nmse,mean_iterations,median_iterations\n";
        for (const auto &c : cells)
            out += c.algorithm + ',' + format_real(c.snr_db) + ',' + std::to_string(c.pilot_len) + ',' +
                   std::to_string(c.trials) + ',' + format_real(c.mean_nmse) + ',' + format_real(c.std_nmse) + ',' +
                   format_real(c.mean_iterations) + ',' + format_real(c.median_iterations) + '\n';
        return out;
    }
}

namespace hmimo
{
    struct CheckResult
    {
        std::string name;
        bool passed = false;
        std::string detail;
    };

    /// Small invariant suite on 5 x 5 and 9 x 9 arrays; fast enough for a smoke check.
    inline std::vector<CheckResult> validate_invariants(std::uint64_t seed = 7)
    {
        std::vector<CheckResult> out;
        auto add = [&](std::string name, bool ok, std::string detail = {}) {
            out.push_back({std::move(name), ok, std::move(detail)});
        };
        Rng rng(seed);

        const auto g_small = ArrayGeometry::square(5, 4);
        const auto g_mid = ArrayGeometry::square(9, 4);
        const auto lat_small = build_lattice(g_small);
        const auto lat_mid = build_lattice(g_mid);
        add("lattice size at 1 wavelength", lat_small.size() == 5, std::to_string(lat_small.size()));
        add("lattice size at 2 wavelengths", lat_mid.size() == 13, std::to_string(lat_mid.size()));

        const auto basis = build_basis(g_mid, lat_mid);
        const double norm_dev = (column_norms(basis.psi).array() - 1.0).abs().maxCoeff();
        add("basis column norms", norm_dev < 1e-12, format_real(norm_dev));

        // min-cut against enumeration
        std::uniform_real_distribution<double> u(-1.0, 1.0), b(0.0, 0.6);
        bool cut_ok = true;
        for (int rep = 0; rep < 20 && cut_ok; ++rep)
        {
            Eigen::MatrixX2d un(static_cast<Eigen::Index>(lat_mid.size()), 2);
            for (Eigen::Index i = 0; i < un.rows(); ++i)
                un(i, 0) = u(rng), un(i, 1) = u(rng);
            SupportGraph graph(lat_mid, un, b(rng));
            const double got = minimize(graph).energy;
            double best = std::numeric_limits<double>::infinity();
            Labels lab(lat_mid.size());
            for (std::uint32_t mask = 0; mask < (1u << lat_mid.size()); ++mask)
            {
                for (std::size_t i = 0; i < lab.size(); ++i)
                    lab[i] = (mask >> i) & 1u ? 1 : -1;
                best = std::min(best, energy(graph, lab));
            }
            cut_ok = std::abs(got - best) <= 1e-12 * std::max(1.0, std::abs(best));
        }
        add("min-cut matches enumeration", cut_ok);

        AngularGrid grid(g_mid, lat_mid);
        const auto scenario = draw_scenario(ScenarioParams{}, 3, rng);
        const auto maps = variance_maps(scenario, grid);
        double sum_dev = 0.0;
        for (const auto &m : maps)
            sum_dev = std::max(sum_dev, std::abs(m.sigma_sq.sum() - 1.0));
        add("variance maps sum to one", sum_dev < 1e-9, format_real(sum_dev));

        const auto channels = sample_channels(maps, rng);
        const auto meas = generate_measurements(channels, basis, 2 * lat_mid.size(), std::numeric_limits<double>::infinity(), rng);
        const auto est = trim_ls(meas.effective, meas.received[0], channels[0].support, lat_mid.size());
        const double rel = (est.h_hat - channels[0].h_f).norm() / channels[0].h_f.norm();
        add("noiseless oracle least squares", rel < 1e-10, format_real(rel));

        EstimatorConfig cfg;
        cfg.trim_budget = 8;
        cfg.k0 = channels.size() + 1;
        const auto noisy = generate_measurements(channels, basis, 10, 20.0, rng);
        const auto a = jgc_ce(noisy, lat_mid, cfg), c = gcse(noisy, lat_mid, cfg);
        bool same = true;
        for (std::size_t i = 0; i < channels.size(); ++i)
            same = same && a.h_hat[i] == c.h_hat[i];
        add("joint step inert when k0 exceeds K", same);
        return out;
    }
}
