// Command-line front end: simulate panels, fit chains, evaluate likelihoods,
// run the empirical estimators, benchmark engines, and emit the projection
// demo.  Exit codes: 0 success, 1 numerical failure, 2 usage/config error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "msode/bias.hpp"
#include "msode/empirical.hpp"
#include "msode/io/config.hpp"
#include "msode/io/csv.hpp"
#include "msode/io/manifest.hpp"
#include "msode/likelihood.hpp"
#include "msode/mcmc.hpp"
#include "msode/model.hpp"
#include "msode/simulate.hpp"
#include "msode/transition.hpp"

namespace fs = std::filesystem;
using namespace msode;

namespace {

double parse_fraction(const std::string& s) {
    const std::size_t slash = s.find('/');
    try {
        if (slash == std::string::npos) {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        }
        std::size_t u1 = 0, u2 = 0;
        double num = std::stod(s.substr(0, slash), &u1);
        double den = std::stod(s.substr(slash + 1), &u2);
        if (u1 != slash || u2 != s.size() - slash - 1 || den == 0)
            throw std::invalid_argument(s);
        return num / den;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse '" + s + "' as a number or fraction");
    }
}

int default_workers() {
    if (const char* env = std::getenv("MSODE_WORKERS")) {
        try {
            int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (const std::exception&) {
        }
        throw ConfigError("MSODE_WORKERS must be a positive integer");
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

EngineConfig engine_from(const std::string& name, const std::string& d_str) {
    EngineConfig cfg;
    if (name == "ode") {
        cfg.kind = EngineKind::ode;
    } else if (name == "homogeneous") {
        cfg.kind = EngineKind::homogeneous;
    } else if (name == "piecewise") {
        if (d_str.empty()) throw ConfigError("engine piecewise needs --d <width>");
        cfg.kind = EngineKind::piecewise;
        cfg.d = parse_fraction(d_str);
        if (!(cfg.d > 0)) throw ConfigError("--d must be positive");
    } else {
        throw ConfigError("unknown engine '" + name + "' (ode, piecewise, homogeneous)");
    }
    return cfg;
}

std::string engine_label(const EngineConfig& e) {
    switch (e.kind) {
        case EngineKind::ode: return "ode";
        case EngineKind::homogeneous: return "homogeneous";
        default: return "piecewise(" + format_double(e.d) + ")";
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Vector require_theta(const ModelConfig& cfg, const std::string& what) {
    if (!cfg.theta)
        throw ConfigError(what + " needs a [theta] section in the model config");
    return *cfg.theta;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config, out;
    int subjects = -1, replicates = -1;
    long seed = -1;
};

int cmd_simulate(const SimulateArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg = load_model_config(a.config);
    Vector theta = require_theta(cfg, "simulate");
    SimSettings s = cfg.sim;
    if (a.subjects > 0) s.sim.n_subjects = a.subjects;
    if (a.replicates > 0) s.replicates = a.replicates;
    if (a.seed >= 0) s.sim.seed = static_cast<std::uint64_t>(a.seed);
    if (s.slope_scale != 1.0) scale_time_coefficients(cfg.spec, theta, s.slope_scale);

    fs::create_directories(a.out);
    RunManifest man;
    man.command = "simulate";
    man.config_path = a.config;
    man.seed = s.sim.seed;
    man.out_dir = a.out;
    man.extra["replicates"] = std::to_string(s.replicates);
    man.extra["subjects"] = std::to_string(s.sim.n_subjects);
    man.extra["slope_scale"] = format_double(s.slope_scale);

    // effective parameters (after slope scaling), one per row
    {
        std::vector<std::vector<std::string>> rows;
        for (int k = 0; k < cfg.spec.layout.dim; ++k)
            rows.push_back({cfg.spec.layout.names[static_cast<std::size_t>(k)],
                            format_double(theta[k])});
        const std::string truth = (fs::path(a.out) / "truth.csv").string();
        write_table(truth, {"name", "value"}, rows);
        man.outputs.push_back(truth);
    }

    for (int rep = 0; rep < s.replicates; ++rep) {
        SimConfig sim = s.sim;
        sim.rep = rep;
        StudyResult study = simulate_study(cfg.spec, theta, sim);
        char name[32];
        std::snprintf(name, sizeof name, "panel_%04d.csv", rep);
        const std::string path = (fs::path(a.out) / name).string();
        write_panel(path, study.data);
        man.outputs.push_back(path);
    }

    man.timings_seconds["total"] = seconds_since(t0);
    write_manifest(man);
    std::printf("simulate: %d replicate(s) of %d subjects -> %s\n", s.replicates,
                s.sim.n_subjects, a.out.c_str());
    return 0;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
    std::string config, data, engine, d_str, out;
    int iters = 30000, burnin = 10000, adapt_window = 200, workers = 0;
    long seed = 1;
    double init_scale = 1.0, level = 0.95;
};

int cmd_fit(const FitArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg = load_model_config(a.config);
    EngineConfig engine = engine_from(a.engine, a.d_str);
    PanelDataset data = read_panel(a.data);
    data.validate(cfg.spec.m());
    const int workers = a.workers > 0 ? a.workers : default_workers();

    ChainConfig chain_cfg;
    chain_cfg.n_iter = a.iters;
    chain_cfg.n_burnin = a.burnin;
    chain_cfg.adapt_window = a.adapt_window;
    chain_cfg.seed = static_cast<std::uint64_t>(a.seed);
    chain_cfg.init_scale = a.init_scale;
    chain_cfg.init = cfg.theta ? *cfg.theta : Vector::Zero(cfg.spec.layout.dim).eval();

    ModelPosterior target{cfg.spec, data, engine, workers};
    {
        // fail with a pointed diagnostic before burning CPU on a dead start
        LogLikResult ll = loglik(cfg.spec, chain_cfg.init, data, engine, workers);
        if (!std::isfinite(ll.total)) {
            for (Eigen::Index i = 0; i < ll.per_subject.size(); ++i)
                if (!std::isfinite(ll.per_subject[i]))
                    throw NumericalError(
                        "initial parameters give subject " +
                        std::to_string(data.subjects[static_cast<std::size_t>(i)].id) +
                        " an impossible observation sequence");
            throw NumericalError("initial parameters have a non-finite likelihood");
        }
    }

    const auto t_chain = std::chrono::steady_clock::now();
    PosteriorChain chain = run_chain(target, chain_cfg);
    const double chain_seconds = seconds_since(t_chain);

    fs::create_directories(a.out);
    const std::vector<std::string>& names = cfg.spec.layout.names;

    std::vector<std::string> header = {"iter", "log_post", "accepted"};
    header.insert(header.end(), names.begin(), names.end());
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(chain.samples.rows()));
    for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
        std::vector<std::string> row = {std::to_string(i), format_double(chain.log_post[i]),
                                        chain.accepted[static_cast<std::size_t>(i)] ? "1" : "0"};
        for (Eigen::Index j = 0; j < chain.samples.cols(); ++j)
            row.push_back(format_double(chain.samples(i, j)));
        rows.push_back(std::move(row));
    }
    const std::string chain_path = (fs::path(a.out) / "chain.csv").string();
    write_table(chain_path, header, rows);

    std::vector<ParamSummary> summaries = summarize(chain, a.level);
    std::vector<std::vector<std::string>> srows;
    for (std::size_t k = 0; k < summaries.size(); ++k)
        srows.push_back({names[k], format_double(summaries[k].mean),
                         format_double(summaries[k].sd), format_double(summaries[k].hpd_lo),
                         format_double(summaries[k].hpd_hi)});
    const std::string summary_path = (fs::path(a.out) / "summary.csv").string();
    write_table(summary_path, {"name", "mean", "sd", "hpd_lo", "hpd_hi"}, srows);

    double acc = 0;
    for (int i = chain.n_burnin; i < a.iters; ++i)
        acc += chain.accepted[static_cast<std::size_t>(i)];
    acc /= std::max(1, a.iters - chain.n_burnin);

    RunManifest man;
    man.command = "fit";
    man.config_path = a.config;
    man.data_paths = {a.data};
    man.seed = chain_cfg.seed;
    man.engine = engine_label(engine);
    man.out_dir = a.out;
    man.outputs = {chain_path, summary_path};
    man.timings_seconds["chain"] = chain_seconds;
    man.timings_seconds["total"] = seconds_since(t0);
    man.extra["iters"] = std::to_string(a.iters);
    man.extra["burnin"] = std::to_string(a.burnin);
    man.extra["workers"] = std::to_string(workers);
    man.extra["post_burnin_accept_rate"] = format_double(acc);
    write_manifest(man);

    std::printf("fit: engine %s, %d iterations (%d burn-in), accept %.3f -> %s\n",
                man.engine.c_str(), a.iters, a.burnin, acc, a.out.c_str());
    return 0;
}

// ------------------------------------------------------------------ loglik

struct LoglikArgs {
    std::string config, data, engine, d_str, out;
    int workers = 0;
};

int cmd_loglik(const LoglikArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg = load_model_config(a.config);
    Vector theta = require_theta(cfg, "loglik");
    EngineConfig engine = engine_from(a.engine, a.d_str);
    PanelDataset data = read_panel(a.data);
    data.validate(cfg.spec.m());
    const int workers = a.workers > 0 ? a.workers : default_workers();

    LogLikResult ll = loglik(cfg.spec, theta, data, engine, workers);

    fs::create_directories(a.out);
    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index i = 0; i < ll.per_subject.size(); ++i)
        rows.push_back({std::to_string(data.subjects[static_cast<std::size_t>(i)].id),
                        format_double(ll.per_subject[i])});
    const std::string path = (fs::path(a.out) / "loglik.csv").string();
    write_table(path, {"subject_id", "loglik"}, rows);

    RunManifest man;
    man.command = "loglik";
    man.config_path = a.config;
    man.data_paths = {a.data};
    man.engine = engine_label(engine);
    man.out_dir = a.out;
    man.outputs = {path};
    man.timings_seconds["likelihood"] = ll.eval_seconds;
    man.timings_seconds["total"] = seconds_since(t0);
    write_manifest(man);

    std::printf("loglik %s = %.12f\n", man.engine.c_str(), ll.total);
    return 0;
}

// --------------------------------------------------------------- empirical

struct EmpiricalArgs {
    std::string config, data, out;
    bool fit_rates = false;
    long seed = 1;
};

int cmd_empirical(const EmpiricalArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg = load_model_config(a.config);
    PanelDataset data = read_panel(a.data);
    data.validate(cfg.spec.m());

    StratifiedCounting sc = panel_to_counting(data, cfg.spec.rates);
    fs::create_directories(a.out);

    std::vector<std::string> cov_cols;
    for (const auto& c : data.cov_names) cov_cols.push_back("cov_" + c);

    auto cov_cells = [&](const Vector& covs) {
        std::vector<std::string> cells;
        for (Eigen::Index k = 0; k < covs.size(); ++k) cells.push_back(format_double(covs[k]));
        return cells;
    };

    std::vector<CumulativeHazard> hazards;
    std::vector<std::vector<std::string>> hz_rows, pr_rows;
    for (std::size_t s = 0; s < sc.strata.size(); ++s) {
        const StratumCounting& st = sc.strata[s];
        hazards.push_back(nelson_aalen(st.data));
        for (const auto& [pair, fn] : hazards.back().fn)
            for (std::size_t k = 0; k < fn.times.size(); ++k) {
                std::vector<std::string> row = {std::to_string(s)};
                auto cc = cov_cells(st.covs);
                row.insert(row.end(), cc.begin(), cc.end());
                row.push_back(std::to_string(pair.first + 1));
                row.push_back(std::to_string(pair.second + 1));
                row.push_back(format_double(fn.times[k]));
                row.push_back(format_double(fn.values[k]));
                hz_rows.push_back(std::move(row));
            }

        StepMatrix aj = aalen_johansen(st.data);
        for (std::size_t k = 0; k < aj.times.size(); ++k)
            for (int i = 0; i < aj.m; ++i)
                for (int j = 0; j < aj.m; ++j) {
                    std::vector<std::string> row = {std::to_string(s)};
                    auto cc = cov_cells(st.covs);
                    row.insert(row.end(), cc.begin(), cc.end());
                    row.push_back(format_double(aj.times[k]));
                    row.push_back(std::to_string(i + 1));
                    row.push_back(std::to_string(j + 1));
                    row.push_back(format_double(aj.values[k](i, j)));
                    pr_rows.push_back(std::move(row));
                }
    }

    std::vector<std::string> hz_header = {"stratum"};
    hz_header.insert(hz_header.end(), cov_cols.begin(), cov_cols.end());
    for (const char* c : {"from", "to", "time", "cumhaz"}) hz_header.push_back(c);
    const std::string hz_path = (fs::path(a.out) / "cumhaz.csv").string();
    write_table(hz_path, hz_header, hz_rows);

    std::vector<std::string> pr_header = {"stratum"};
    pr_header.insert(pr_header.end(), cov_cols.begin(), cov_cols.end());
    for (const char* c : {"time", "from", "to", "prob"}) pr_header.push_back(c);
    const std::string pr_path = (fs::path(a.out) / "probs.csv").string();
    write_table(pr_path, pr_header, pr_rows);

    RunManifest man;
    man.command = "empirical";
    man.config_path = a.config;
    man.data_paths = {a.data};
    man.out_dir = a.out;
    man.outputs = {hz_path, pr_path};
    man.extra["masked_incompatible"] = std::to_string(sc.masked_incompatible());

    if (a.fit_rates) {
        Rng rng = make_rng(static_cast<std::uint64_t>(a.seed));
        std::vector<std::vector<std::string>> rows;
        for (const auto& tr : cfg.spec.rates.transitions) {
            std::vector<std::pair<Vector, StepFunction>> strata;
            for (std::size_t s = 0; s < sc.strata.size(); ++s)
                if (const StepFunction* fn = hazards[s].find(tr.from, tr.to))
                    strata.push_back({sc.strata[s].covs, *fn});
            if (strata.empty()) continue;  // transition never observed
            RateRecovery fit = recover_rate_coefficients(strata, rng);
            std::vector<std::string> row = {std::to_string(tr.from + 1),
                                            std::to_string(tr.to + 1)};
            for (Eigen::Index k = 0; k < fit.beta.size(); ++k)
                row.push_back(format_double(fit.beta[k]));
            row.push_back(format_double(fit.objective));
            rows.push_back(std::move(row));
        }
        std::vector<std::string> header = {"from", "to", "b0", "b1"};
        for (const auto& c : data.cov_names) header.push_back("b_" + c);
        header.push_back("objective");
        const std::string path = (fs::path(a.out) / "recovered.csv").string();
        write_table(path, header, rows);
        man.outputs.push_back(path);
    }

    man.timings_seconds["total"] = seconds_since(t0);
    write_manifest(man);
    std::printf("empirical: %zu strata, %ld mask-incompatible jump(s) -> %s\n",
                sc.strata.size(), sc.masked_incompatible(), a.out.c_str());
    return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    std::string config, data, engines = "ode,piecewise:2,piecewise:1,piecewise:1/6", out;
    int reps = 5, workers = 0;
    // production tolerance for the timed ODE runs; fits keep the tighter
    // library default, but timing the exact engine at 100x the accuracy
    // anyone needs would not compare like with like
    double rtol = 1e-6;
};

int cmd_bench(const BenchArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg = load_model_config(a.config);
    Vector theta = require_theta(cfg, "bench");
    PanelDataset data = read_panel(a.data);
    data.validate(cfg.spec.m());
    const int workers = a.workers > 0 ? a.workers : default_workers();
    if (a.reps < 1) throw ConfigError("--reps must be >= 1");

    if (!(a.rtol > 0)) throw ConfigError("--rtol must be positive");
    std::vector<EngineConfig> engines;
    std::string tok;
    std::istringstream list(a.engines);
    while (std::getline(list, tok, ',')) {
        const std::size_t colon = tok.find(':');
        engines.push_back(colon == std::string::npos
                              ? engine_from(tok, "")
                              : engine_from(tok.substr(0, colon), tok.substr(colon + 1)));
        engines.back().ode.rtol = a.rtol;
        engines.back().ode.atol = a.rtol * 1e-2;
    }
    if (engines.empty()) throw ConfigError("--engines list is empty");

    fs::create_directories(a.out);
    std::vector<std::vector<std::string>> rows;
    RunManifest man;
    for (const EngineConfig& engine : engines) {
        const std::string label = engine_label(engine);
        double sum = 0, sum_sq = 0;
        for (int rep = 0; rep < a.reps; ++rep) {
            LogLikResult ll = loglik(cfg.spec, theta, data, engine, workers);
            rows.push_back({label, std::to_string(rep), format_double(ll.eval_seconds),
                            format_double(ll.total)});
            sum += ll.eval_seconds;
            sum_sq += ll.eval_seconds * ll.eval_seconds;
        }
        const double mean = sum / a.reps;
        const double sd =
            a.reps > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * mean) / (a.reps - 1))) : 0.0;
        std::printf("bench %-16s mean %.4fs sd %.4fs over %d rep(s)\n", label.c_str(), mean, sd,
                    a.reps);
        man.extra["mean_seconds " + label] = format_double(mean);
    }

    const std::string path = (fs::path(a.out) / "timings.csv").string();
    write_table(path, {"engine", "rep", "seconds", "loglik"}, rows);

    man.command = "bench";
    man.config_path = a.config;
    man.data_paths = {a.data};
    man.out_dir = a.out;
    man.outputs = {path};
    man.extra["reps"] = std::to_string(a.reps);
    man.extra["workers"] = std::to_string(workers);
    man.extra["rtol"] = format_double(a.rtol);
    man.timings_seconds["total"] = seconds_since(t0);
    write_manifest(man);
    return 0;
}

// --------------------------------------------------------------- bias-demo

int cmd_bias_demo(const std::string& out) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out);
    std::vector<ProjectionPanel> panels = projection_demo(out);

    RunManifest man;
    man.command = "bias-demo";
    man.out_dir = out;
    for (const ProjectionPanel& p : panels) {
        man.outputs.push_back(p.file);
        man.extra["b0 " + p.name] = format_double(p.fit.b0);
        man.extra["b1 " + p.name] = format_double(p.fit.b1);
        std::printf("bias-demo %-8s b0 %+.6f b1 %+.6f (n=%zu)\n", p.name.c_str(), p.fit.b0,
                    p.fit.b1, p.fit.n);
    }
    man.timings_seconds["total"] = seconds_since(t0);
    write_manifest(man);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-time multistate panel models: simulation, inference, estimation"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "draw panel datasets from a model config");
    c_sim->add_option("--config", sim.config, "model config file")->required();
    c_sim->add_option("--out", sim.out, "output directory")->required();
    c_sim->add_option("--subjects", sim.subjects, "override [simulate] subjects");
    c_sim->add_option("--replicates", sim.replicates, "override [simulate] replicates");
    c_sim->add_option("--seed", sim.seed, "override [simulate] seed");

    FitArgs fit;
    CLI::App* c_fit = app.add_subcommand("fit", "sample the posterior by adaptive random walk");
    c_fit->add_option("--config", fit.config, "model config file")->required();
    c_fit->add_option("--data", fit.data, "panel CSV")->required();
    c_fit->add_option("--engine", fit.engine, "ode | piecewise | homogeneous")->required();
    c_fit->add_option("--d", fit.d_str, "piecewise cell width (number or fraction, e.g. 1/6)");
    c_fit->add_option("--out", fit.out, "output directory")->required();
    c_fit->add_option("--iters", fit.iters, "total iterations");
    c_fit->add_option("--burnin", fit.burnin, "burn-in iterations");
    c_fit->add_option("--adapt-window", fit.adapt_window, "adaptation window");
    c_fit->add_option("--seed", fit.seed, "chain seed");
    c_fit->add_option("--init-scale", fit.init_scale, "initial proposal scale");
    c_fit->add_option("--level", fit.level, "credible level for summaries");
    c_fit->add_option("--workers", fit.workers, "likelihood worker threads");

    LoglikArgs ll;
    CLI::App* c_ll = app.add_subcommand("loglik", "evaluate the likelihood at [theta]");
    c_ll->add_option("--config", ll.config, "model config file")->required();
    c_ll->add_option("--data", ll.data, "panel CSV")->required();
    c_ll->add_option("--engine", ll.engine, "ode | piecewise | homogeneous")->required();
    c_ll->add_option("--d", ll.d_str, "piecewise cell width");
    c_ll->add_option("--out", ll.out, "output directory")->required();
    c_ll->add_option("--workers", ll.workers, "likelihood worker threads");

    EmpiricalArgs emp;
    CLI::App* c_emp = app.add_subcommand("empirical", "counting-process estimators on a panel");
    c_emp->add_option("--config", emp.config, "model config file")->required();
    c_emp->add_option("--data", emp.data, "panel CSV")->required();
    c_emp->add_option("--out", emp.out, "output directory")->required();
    c_emp->add_flag("--fit-rates", emp.fit_rates, "recover log-linear rate coefficients");
    c_emp->add_option("--seed", emp.seed, "restart seed for the recovery search");

    BenchArgs bench;
    CLI::App* c_bench = app.add_subcommand("bench", "time likelihood evaluations per engine");
    c_bench->add_option("--config", bench.config, "model config file")->required();
    c_bench->add_option("--data", bench.data, "panel CSV")->required();
    c_bench->add_option("--engines", bench.engines, "comma list, e.g. ode,piecewise:1/6");
    c_bench->add_option("--reps", bench.reps, "repetitions per engine");
    c_bench->add_option("--rtol", bench.rtol, "ODE relative tolerance for timed runs");
    c_bench->add_option("--out", bench.out, "output directory")->required();
    c_bench->add_option("--workers", bench.workers, "likelihood worker threads");

    std::string demo_out;
    CLI::App* c_demo = app.add_subcommand("bias-demo", "emit the three projection panels");
    c_demo->add_option("--out", demo_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_fit->parsed()) return cmd_fit(fit);
        if (c_ll->parsed()) return cmd_loglik(ll);
        if (c_emp->parsed()) return cmd_empirical(emp);
        if (c_bench->parsed()) return cmd_bench(bench);
        if (c_demo->parsed()) return cmd_bias_demo(demo_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected failure: %s\n", e.what());
        return 1;
    }
    return 2;
}
