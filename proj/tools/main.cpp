// Command-line front end: experiment configuration in, JSON/CSV artifacts
// out. Exit codes: 0 = success / property holds, 1 = property fails
// (expected in the necessity scenarios), 2 = usage or configuration error.

#include "gnsfde/config.hpp"
#include "gnsfde/psi.hpp"
#include "gnsfde/util.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace gnsfde;

struct CommonOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    long samples = 0;
    double dt = 0.0;
    int threads = 0;
    std::string out_dir;
    std::string format;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", opt.seed, "override master_seed")->each([&](const std::string&) {
        opt.seed_set = true;
    });
    cmd->add_option("--samples", opt.samples, "override n_samples");
    cmd->add_option("--dt", opt.dt, "override grid dt");
    cmd->add_option("--threads", opt.threads,
                    "worker threads (default: G_NSFDE_THREADS or hardware)");
    cmd->add_option("--out", opt.out_dir, "override output directory");
    cmd->add_option("--format", opt.format, "output formats: csv, json or both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
}

ExperimentConfig load_with_overrides(const CommonOptions& opt) {
    ExperimentConfig cfg = load_config(opt.config_path);
    if (opt.seed_set) cfg.master_seed = opt.seed;
    if (opt.samples > 0) cfg.n_samples = opt.samples;
    if (opt.dt > 0.0) cfg.dt = opt.dt;
    if (!opt.out_dir.empty()) cfg.outputs.dir = opt.out_dir;
    if (!opt.format.empty()) {
        cfg.outputs.json = opt.format == "json" || opt.format == "both";
        cfg.outputs.csv = opt.format == "csv" || opt.format == "both";
    }
    return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << content;
}

int cmd_check(const CommonOptions& opt) {
    const ExperimentConfig cfg = load_with_overrides(opt);
    const CoefficientSystem sys_a = build_system(cfg, cfg.system_a);
    const CoefficientSystem sys_b = build_system(cfg, cfg.system_b);

    std::vector<ConditionReport> reports;
    bool want_h = false;
    for (const std::string& c : cfg.check_conditions)
        want_h = want_h || c == "H1" || c == "H2" || c == "H3" || c == "H4";
    std::vector<ConditionReport> h_reports;
    if (want_h)
        h_reports = check_h1_h4(sys_a, sys_b, cfg.sampler, cfg.horizon, cfg.k_declared);
    for (const std::string& c : cfg.check_conditions) {
        if (c == "H1" || c == "H2" || c == "H3" || c == "H4") {
            for (ConditionReport& r : h_reports)
                if (r.id == c) reports.push_back(r);
        } else if (c == "A1") {
            reports.push_back(check_a1(sys_a, sys_b, cfg.sampler, cfg.horizon));
        } else if (c == "A2") {
            reports.push_back(check_a2(sys_a, sys_b, cfg.sampler));
        } else if (c == "C2") {
            reports.push_back(check_c2(sys_a, sys_b, cfg.sampler));
        } else {
            throw ConfigError("unknown condition \"" + c + "\" in check_conditions");
        }
    }

    bool all_pass = true;
    std::printf("%-4s %-13s %s\n", "id", "verdict", "margin");
    for (const ConditionReport& r : reports) {
        const char* verdict = r.verdict == ConditionReport::Verdict::pass ? "pass"
                              : r.verdict == ConditionReport::Verdict::fail ? "fail"
                                                                            : "inconclusive";
        std::printf("%-4s %-13s %s\n", r.id.c_str(), verdict, format_double(r.margin).c_str());
        all_pass = all_pass && r.verdict == ConditionReport::Verdict::pass;
    }
    if (cfg.outputs.json)
        write_file(std::filesystem::path(cfg.outputs.dir) / "check.json",
                   condition_reports_to_json(reports));
    return all_pass ? 0 : 1;
}

int cmd_compare(const CommonOptions& opt) {
    const ExperimentConfig cfg = load_with_overrides(opt);
    const CoefficientSystem sys_a = build_system(cfg, cfg.system_a);
    const CoefficientSystem sys_b = build_system(cfg, cfg.system_b);
    const Segment init_a = build_initial_segment(cfg, cfg.init_a);
    const Segment init_b = build_initial_segment(cfg, cfg.init_b);

    if (!leq_n(init_a, init_b, sys_a.neutral_functional())) {
        std::cerr << "error: initial segments violate xi <=_N eta\n";
        return 2;
    }

    const OrderReport report = run_order_experiment(
        sys_a, sys_b, init_a, init_b, build_family(cfg), cfg.n_samples, cfg.grid(), cfg.tol,
        cfg.master_seed, resolve_threads(opt.threads), cfg.scenario);

    std::printf("scenario %s: capacity %s (threshold %s), max excess n %s, solver failures %ld\n",
                report.scenario.c_str(), format_double(report.capacity).c_str(),
                format_double(cfg.capacity_threshold).c_str(),
                format_double(report.max_excess_n).c_str(), report.solver_failures);
    if (cfg.outputs.json)
        write_file(std::filesystem::path(cfg.outputs.dir) / "compare.json",
                   order_report_to_json(report));
    if (cfg.outputs.csv)
        write_order_report_csv(report,
                               (std::filesystem::path(cfg.outputs.dir) / "compare.csv").string());
    return report.capacity <= cfg.capacity_threshold ? 0 : 1;
}

PathFunctional make_functional(const ExperimentConfig& cfg, const FunctionalConfig& fc) {
    const int j = fc.component - 1;
    if (fc.id == "terminal") return [j](const DriverPath& p) { return p.b_terminal(j); };
    if (fc.id == "terminal_square")
        return [j](const DriverPath& p) {
            const double b = p.b_terminal(j);
            return b * b;
        };
    if (fc.id == "qv_terminal") return [j](const DriverPath& p) { return p.qv_terminal(j, j); };
    if (fc.id == "running_max") return [j](const DriverPath& p) { return p.b_running_max(j); };
    // y_terminal: terminal value of solution component j of system A.
    const auto sys = std::make_shared<CoefficientSystem>(build_system(cfg, cfg.system_a));
    const auto init = std::make_shared<Segment>(build_initial_segment(cfg, cfg.init_a));
    return [sys, init, j](const DriverPath& p) {
        const Trajectory traj = solve(*sys, *init, p);
        return traj.value(p.grid.steps, j);
    };
}

int cmd_gexp(const CommonOptions& opt) {
    const ExperimentConfig cfg = load_with_overrides(opt);
    if (!cfg.functional) throw ConfigError("gexp requires a \"functional\" block in the config");
    const GExpEstimate est = estimate_gexp(make_functional(cfg, *cfg.functional),
                                           build_family(cfg), cfg.n_samples, cfg.grid(),
                                           cfg.bounds(), cfg.master_seed,
                                           resolve_threads(opt.threads));
    std::printf("functional %s: value %s (argmax %s)\n", cfg.functional->id.c_str(),
                format_double(est.value).c_str(),
                est.per_control[static_cast<std::size_t>(est.argmax_control)].label.c_str());
    if (cfg.outputs.json)
        write_file(std::filesystem::path(cfg.outputs.dir) / "gexp.json",
                   gexp_estimate_to_json(est, cfg.functional->id));
    return 0;
}

int cmd_simulate(const CommonOptions& opt, long sample_index, bool dump_driver) {
    const ExperimentConfig cfg = load_with_overrides(opt);
    const CoefficientSystem sys_a = build_system(cfg, cfg.system_a);
    const CoefficientSystem sys_b = build_system(cfg, cfg.system_b);
    const Segment init_a = build_initial_segment(cfg, cfg.init_a);
    const Segment init_b = build_initial_segment(cfg, cfg.init_b);
    const ControlFamily family = build_family(cfg);
    const DriverPath driver =
        sample_driver(family.members.front(), cfg.grid(), cfg.master_seed,
                      static_cast<std::uint64_t>(sample_index), cfg.bounds());
    const PairTrajectory pair = solve_pair(sys_a, sys_b, init_a, init_b, driver);
    const std::filesystem::path dir(cfg.outputs.dir);
    std::filesystem::create_directories(dir);
    write_trajectory_csv(pair.a, (dir / "trajectory_a.csv").string());
    write_trajectory_csv(pair.b, (dir / "trajectory_b.csv").string());
    if (dump_driver) dump_driver_binary(driver, (dir / "driver.bin").string());
    std::printf("wrote trajectories for control %s, sample %ld to %s\n",
                family.members.front().label.c_str(), sample_index, dir.string().c_str());
    return 0;
}

int cmd_psi(const std::vector<int>& ns, double s_min, double s_max, long s_count,
            const std::string& out_path) {
    std::string csv = "n,s,psi,dpsi,ddpsi\n";
    for (int n : ns) {
        if (n < 1) throw ConfigError("psi: every n must be >= 1");
        for (long k = 0; k < s_count; ++k) {
            const double s =
                s_count == 1 ? s_min
                             : s_min + (s_max - s_min) * static_cast<double>(k) /
                                           static_cast<double>(s_count - 1);
            const PsiValue v = psi_eval(n, s);
            csv += std::to_string(n);
            csv += ',';
            csv += format_double(s);
            csv += ',';
            csv += format_double(v.psi);
            csv += ',';
            csv += format_double(v.dpsi);
            csv += ',';
            csv += format_double(v.ddpsi);
            csv += '\n';
        }
    }
    if (out_path.empty() || out_path == "-")
        std::cout << csv;
    else
        write_file(out_path, csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and verification toolkit for neutral stochastic delay systems "
                 "under volatility uncertainty"};
    app.require_subcommand(1);

    CommonOptions check_opt, compare_opt, gexp_opt, sim_opt;
    long sample_index = 0;
    bool dump_driver = false;
    std::vector<int> psi_ns{1, 2, 8, 64};
    double psi_s_min = -1.0, psi_s_max = 2.0;
    long psi_s_count = 301;
    std::string psi_out;

    CLI::App* check = app.add_subcommand("check", "run the hypothesis/condition checkers");
    add_common(check, check_opt);
    CLI::App* compare = app.add_subcommand("compare", "run the paired order experiment");
    add_common(compare, compare_opt);
    CLI::App* gexp = app.add_subcommand("gexp", "estimate a sublinear expectation");
    add_common(gexp, gexp_opt);
    CLI::App* simulate = app.add_subcommand("simulate", "dump one paired trajectory");
    add_common(simulate, sim_opt);
    simulate->add_option("--sample", sample_index, "driver sample index");
    simulate->add_flag("--dump-driver", dump_driver, "also write the binary driver dump");
    CLI::App* psi = app.add_subcommand("psi", "tabulate the smoothing family");
    psi->add_option("--n", psi_ns, "family indices");
    psi->add_option("--s-min", psi_s_min, "grid start");
    psi->add_option("--s-max", psi_s_max, "grid end");
    psi->add_option("--s-count", psi_s_count, "grid size (0 = header only)");
    psi->add_option("--out", psi_out, "output CSV path (default stdout)");

    try {
        app.parse(argc, argv);
        if (check->parsed()) return cmd_check(check_opt);
        if (compare->parsed()) return cmd_compare(compare_opt);
        if (gexp->parsed()) return cmd_gexp(gexp_opt);
        if (simulate->parsed()) return cmd_simulate(sim_opt, sample_index, dump_driver);
        if (psi->parsed()) return cmd_psi(psi_ns, psi_s_min, psi_s_max, psi_s_count, psi_out);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
