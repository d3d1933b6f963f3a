// Command-line front end: closed-form analysis, single scenario runs, and
// the canned reproduction studies.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <pairsim/harness.hpp>

namespace {

using namespace pairsim;

void cmd_analyze(double p_ch, unsigned m, unsigned k) {
    if (p_ch < 0.0 || p_ch > 1.0) throw std::invalid_argument("--p-ch must be in [0,1]");
    if (m < 1) throw std::invalid_argument("--m must be >= 1");
    std::cout << "p_ch,m,k,pi_m,p_fp\n"
              << detail::fmt_g(p_ch) << ',' << m << ',' << k << ','
              << detail::fmt_g(stationary_alarm_prob(p_ch, m)) << ','
              << detail::fmt_g(false_positive_ratio(k, p_ch, m)) << '\n';
}

void cmd_bianchi(unsigned n) {
    if (n < 1) throw std::invalid_argument("--n must be >= 1");
    auto op = bianchi_fixed_point(n);
    std::cout << "n,tau,p_cond,p_ch\n"
              << op.n_stations << ',' << detail::fmt_g(op.tau) << ','
              << detail::fmt_g(op.p_cond) << ',' << detail::fmt_g(op.p_ch) << '\n';
}

void cmd_simulate(const std::string& config_path, std::uint64_t seed, bool seed_given,
                  const std::string& out_dir, bool wilson) {
    ScenarioConfig cfg = load_scenario_file(config_path);
    if (seed_given) cfg.base_seed = seed;

    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    // events.csv records the first replication; results.csv covers all of them
    std::vector<RunResult> rows;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        std::uint64_t run_seed = cfg.base_seed + r;
        RunOutput out = run_scenario(cfg, run_seed, r == 0);
        if (r == 0) {
            std::ofstream ev(dir / "events.csv", std::ios::binary);
            if (!ev) throw std::runtime_error("cannot open events.csv");
            out.log.write_csv(ev);
        }
        RunResult row = summarize_run(cfg, out, r, run_seed);
        if (row.alarm) ++hits;
        rows.push_back(row);
    }
    {
        std::ofstream os(dir / "results.csv", std::ios::binary);
        if (!os) throw std::runtime_error("cannot open results.csv");
        write_run_results(os, rows);
    }
    RateEstimate e = wilson ? wilson_interval(hits, rows.size())
                            : normal_interval(hits, rows.size());
    std::cout << "runs=" << e.n << " alarms=" << e.hits << " alarm_rate=" << detail::fmt_g(e.rate)
              << " ci95=[" << detail::fmt_g(e.ci_low) << ',' << detail::fmt_g(e.ci_high) << "]\n"
              << "wrote " << (dir / "events.csv").string() << " and "
              << (dir / "results.csv").string() << '\n';
}

void cmd_reproduce(const std::string& name, std::size_t runs, const std::string& out_dir) {
    reproduce(name, runs, out_dir, std::cout);
    std::cout << "wrote outputs to " << out_dir << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"802.11 pairing simulator and analysis toolkit"};
    app.require_subcommand(1);

    double p_ch = 0.0;
    unsigned m = 4, k = 1000, n = 5;
    std::string config_path, out_dir, target;
    std::uint64_t seed = 0;
    std::size_t runs = 0;
    bool wilson = false;

    auto* analyze = app.add_subcommand("analyze", "closed-form alarm and false-positive rates");
    analyze->add_option("--p-ch", p_ch, "per-transmission collision probability")->required();
    analyze->add_option("--m", m, "consecutive-collision threshold")->required();
    analyze->add_option("--k", k, "transmissions observed in the detection window")->required();

    auto* bianchi = app.add_subcommand("bianchi", "saturated DCF operating point");
    bianchi->add_option("--n", n, "number of contending stations")->required();

    auto* simulate = app.add_subcommand("simulate", "run a scenario from a JSON config");
    simulate->add_option("--config", config_path, "scenario config path")->required();
    auto* seed_opt = simulate->add_option("--seed", seed, "base seed (overrides config)");
    simulate->add_option("--out", out_dir, "output directory")->required();
    simulate->add_flag("--wilson", wilson, "use Wilson score intervals");

    auto* repro = app.add_subcommand("reproduce", "run a canned study");
    repro->add_option("name", target, "fig7|fig8|fig9|table2|table3|case_study")->required();
    repro->add_option("--runs", runs, "replications (0 = study default)");
    repro->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (analyze->parsed()) cmd_analyze(p_ch, m, k);
        else if (bianchi->parsed()) cmd_bianchi(n);
        else if (simulate->parsed()) cmd_simulate(config_path, seed, seed_opt->count() > 0, out_dir, wilson);
        else if (repro->parsed()) cmd_reproduce(target, runs, out_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
