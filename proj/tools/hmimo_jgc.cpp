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

#include "hmimo/hmimo.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace
{
    constexpr int exit_ok = 0;
    constexpr int exit_failed = 1;
    constexpr int exit_config = 2;
    constexpr int exit_io = 3;

    struct Overrides
    {
        std::string config_path;
        std::vector<std::string> snr;
        std::vector<std::size_t> pilots;
        std::optional<std::size_t> trials;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out;
        std::optional<unsigned> threads;
        bool timing = false;
        bool print_config = false;
        bool summary = true;
    };

    double parse_snr(const std::string &s)
    {
        if (s == "inf" || s == "+inf")
            return std::numeric_limits<double>::infinity();
        std::size_t used = 0;
        double v = 0.0;
        try
        {
            v = std::stod(s, &used);
        }
        catch (const std::exception &)
        {
            used = 0;
        }
        if (used == 0 || used != s.size())
            throw hmimo::config_error("--snr: cannot parse '" + s + "'");
        return v;
    }

    hmimo::CampaignConfig resolve(const Overrides &o)
    {
        hmimo::CampaignConfig cfg;
        if (!o.config_path.empty())
        {
            std::ifstream in(o.config_path);
            if (!in)
                throw hmimo::config_error("cannot read config file '" + o.config_path + "'");
            std::stringstream ss;
            ss << in.rdbuf();
            nlohmann::json j;
            try
            {
                j = nlohmann::json::parse(ss.str());
            }
            catch (const nlohmann::json::parse_error &e)
            {
                throw hmimo::config_error(std::string("config is not valid JSON: ") + e.what());
            }
            hmimo::apply_json(cfg, j);
        }
        if (!o.snr.empty())
        {
            cfg.snr_db.clear();
            for (const auto &s : o.snr)
                cfg.snr_db.push_back(parse_snr(s));
        }
        if (!o.pilots.empty())
            cfg.pilot_lengths = o.pilots;
        if (o.trials)
            cfg.trials = *o.trials;
        if (o.seed)
            cfg.base_seed = *o.seed;
        if (o.out)
            cfg.output_path = *o.out;
        if (o.threads)
            cfg.threads = *o.threads;
        if (o.timing)
            cfg.record_timing = true;
        return cfg;
    }

    int run(hmimo::CampaignConfig cfg, const Overrides &o)
    {
        cfg.validate();
        if (o.print_config)
        {
            std::cout << hmimo::to_json(cfg).dump(2) << '\n';
            return exit_ok;
        }
        const auto rows = hmimo::run_campaign(cfg);
        hmimo::write_csv(cfg.output_path, rows);
        if (o.summary)
            std::cout << hmimo::summary_csv(hmimo::summarize(rows, cfg.estimator.residual_tol));
        std::cerr << "wrote " << rows.size() << " rows to " << cfg.output_path << '\n';
        return exit_ok;
    }

    void add_campaign_options(CLI::App *cmd, Overrides &o)
    {
        cmd->add_option("--config", o.config_path, "JSON campaign configuration")->check(CLI::ExistingFile);
        cmd->add_option("--snr", o.snr, "SNR values in dB (\"inf\" for noiseless)");
        cmd->add_option("--pilots", o.pilots, "Pilot lengths T");
        cmd->add_option("--trials", o.trials, "Monte-Carlo trials");
        cmd->add_option("--seed", o.seed, "Base seed");
        cmd->add_option("--out", o.out, "Output CSV path");
        cmd->add_option("--threads", o.threads, "Worker threads over trials");
        cmd->add_flag("--timing", o.timing, "Record wall_time_ms (output is then not reproducible)");
        cmd->add_flag("--print-config", o.print_config, "Print the resolved configuration and exit");
        cmd->add_flag("!--no-summary", o.summary, "Do not print the summary table");
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Joint graph-cut channel estimation campaigns for holographic MIMO"};
    app.require_subcommand(1);

    Overrides o;
    auto *run_cmd = app.add_subcommand("run", "Run the campaign as configured");
    auto *snr_cmd = app.add_subcommand("sweep-snr", "SNR sweep at the first pilot length, final rows only");
    auto *pil_cmd = app.add_subcommand("sweep-pilots", "Pilot-length sweep at the first SNR, final rows only");
    auto *conv_cmd = app.add_subcommand("convergence", "Per-iteration traces at the first SNR and pilot length");
    auto *val_cmd = app.add_subcommand("validate", "Invariant checks on a tiny instance");
    std::uint64_t val_seed = 7;
    val_cmd->add_option("--seed", val_seed, "Seed for the random instances");
    for (auto *cmd : {run_cmd, snr_cmd, pil_cmd, conv_cmd})
        add_campaign_options(cmd, o);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return exit_config;
    }

    try
    {
        if (*val_cmd)
        {
            bool all = true;
            for (const auto &c : hmimo::validate_invariants(val_seed))
            {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
                if (!c.detail.empty())
                    std::cout << " (" << c.detail << ")";
                std::cout << '\n';
                all = all && c.passed;
            }
            return all ? exit_ok : exit_failed;
        }

        auto cfg = resolve(o);
        if (*snr_cmd)
        {
            cfg.pilot_lengths.resize(1);
            cfg.record_iterations = false;
        }
        else if (*pil_cmd)
        {
            cfg.snr_db.resize(1);
            cfg.record_iterations = false;
        }
        else if (*conv_cmd)
        {
            cfg.snr_db.resize(1);
            cfg.pilot_lengths.resize(1);
            cfg.record_iterations = true;
        }
        return run(std::move(cfg), o);
    }
    catch (const hmimo::config_error &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    }
    catch (const hmimo::io_error &e)
    {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_io;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failed;
    }
}
