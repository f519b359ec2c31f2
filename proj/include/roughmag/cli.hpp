#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "roughmag/config.hpp"
#include "roughmag/errors.hpp"
#include "roughmag/homogenize.hpp"
#include "roughmag/report.hpp"

namespace roughmag::cli {

struct RunConfig {
    std::string command;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> cmds = {"correction", "simulate", "momentum", "theorem",
                                                  "rate",       "driver",   "rde",      "signature"};
    return cmds;
}

namespace detail {

inline ModelParams model_from(const ConfigDoc& doc, Y0Mode default_mode) {
    ModelParams p;
    if (doc.has("model", "M")) {
        p.drift = doc.matrix("model", "M");
    } else if (doc.has("model", "A")) {
        const Matrix a = doc.matrix("model", "A");
        const Matrix b = doc.matrix("model", "B");
        p.drift = a + doc.number("model", "q") * b;
    } else {
        throw ValidationError("model.M", "missing drift matrix (give M, or A with q and B)");
    }
    if (p.drift.rows() != p.drift.cols())
        throw ValidationError("model.M", "drift matrix must be square");
    p.n = static_cast<int>(p.drift.rows());
    if (doc.has("model", "n") &&
        static_cast<int>(doc.number("model", "n")) != p.n)
        throw ValidationError("model.n", "n does not match the drift matrix size");
    if (!doc.has("model", "T")) throw ValidationError("model.T", "missing horizon T");
    p.horizon = doc.number("model", "T");
    const std::string mode = doc.word_or("model", "y0_mode",
                                         default_mode == Y0Mode::stationary ? "stationary" : "zero");
    if (mode == "zero")
        p.y0_mode = Y0Mode::zero;
    else if (mode == "stationary")
        p.y0_mode = Y0Mode::stationary;
    else
        throw ValidationError("model.y0_mode", "expected 'zero' or 'stationary'");
    p.mass = 1.0;  // experiments set mass per eps
    spectral_abscissa(p.drift);
    if (!(p.horizon > 0.0)) throw ValidationError("model.T", "horizon must be > 0");
    return p;
}

inline ExperimentConfig experiment_from(const ConfigDoc& doc, const RunConfig& run,
                                        Y0Mode default_mode) {
    ExperimentConfig cfg;
    cfg.params = model_from(doc, default_mode);
    cfg.eps_list = doc.number_list("experiment", "eps_list");
    cfg.n_paths = static_cast<std::size_t>(doc.number_or("experiment", "n_paths", 2000));
    cfg.grid_steps = static_cast<std::size_t>(doc.number_or("experiment", "grid_steps", 512));
    cfg.alpha = doc.number_or("experiment", "alpha", 0.4);
    cfg.seed = static_cast<std::uint64_t>(doc.number_or("experiment", "seed", 0));
    cfg.workers = static_cast<unsigned>(doc.number_or("experiment", "workers", 0));
    cfg.substep_safety = doc.number_or("experiment", "substep_safety", 10.0);
    cfg.slope_tol = doc.number_or("experiment", "slope_tol", 0.15);
    if (run.seed) cfg.seed = *run.seed;
    if (run.workers) cfg.workers = *run.workers;
    cfg.validate();
    return cfg;
}

inline void merge_into(Report& base, const Report& extra) {
    base.rows.insert(base.rows.end(), extra.rows.begin(), extra.rows.end());
    base.criteria.insert(base.criteria.end(), extra.criteria.begin(), extra.criteria.end());
    for (const auto& [k, v] : extra.meta) base.add_meta(extra.name + "." + k, v);
}

inline Report run_correction(const ConfigDoc& doc) {
    const ModelParams p = model_from(doc, Y0Mode::zero);
    const Matrix& m = p.drift;
    const int n = p.n;
    Report rep;
    rep.name = "correction";
    const double lambda = spectral_abscissa(m).lambda;
    const Matrix c = solve_C(m);
    const Matrix gw = area_correction_W(m);
    const Matrix gx = area_correction_X(m);
    const Matrix gc = gamma_coefficients(m);
    rep.rows.push_back({0.0, "lambda", lambda, 0.0, 1});
    auto emit = [&](const std::string& tag, const Matrix& mat) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rep.rows.push_back(
                    {0.0, tag + "_" + std::to_string(i) + std::to_string(j), mat(i, j), 0.0, 1});
    };
    emit("c", c);
    emit("gamma", gw);
    emit("xcorr", gx);
    emit("gamma_coef", gc);
    const double residual = (m * c + c * m.transpose() - Matrix::Identity(n, n)).norm();
    rep.criteria.push_back({"lyapunov_residual", residual <= 1e-10, residual, 1e-10,
                            "|M C + C M^T - I|_F"});
    const double anti_w = sym_part(gw).norm();
    rep.criteria.push_back({"gamma_antisymmetric", anti_w <= 1e-12, anti_w, 1e-12,
                            "|Sym(Gamma)|_F"});
    const double anti_x = sym_part(gx).norm();
    rep.criteria.push_back({"xcorr_antisymmetric", anti_x <= 1e-12, anti_x, 1e-12,
                            "|Sym(X correction)|_F"});
    return rep;
}

inline Report run_simulate(const ConfigDoc& doc, const RunConfig& run) {
    ModelParams p = model_from(doc, Y0Mode::zero);
    const double eps = doc.has("simulate", "eps") ? doc.number("simulate", "eps")
                                                  : std::sqrt(doc.number("simulate", "mass"));
    if (!(eps > 0.0)) throw ValidationError("simulate.eps", "must be > 0");
    p.mass = eps * eps;
    const auto steps = static_cast<std::size_t>(doc.number_or("simulate", "grid_steps", 512));
    const auto n_export = static_cast<std::size_t>(doc.number_or("simulate", "n_export", 1));
    std::uint64_t seed = static_cast<std::uint64_t>(doc.number_or("simulate", "seed", 0));
    if (run.seed) seed = *run.seed;

    Report rep;
    rep.name = "simulate";
    rep.add_meta("init_mode", p.y0_mode == Y0Mode::stationary ? "stationary" : "zero");
    const auto times = uniform_grid(p.horizon, steps);
    double worst_defect = 0.0;
    for (std::size_t path = 0; path < n_export; ++path) {
        const JointSample s = sample_joint(p, times, seed, path);
        const GridPath momentum = momentum_path(s, p);
        double defect = 0.0;
        try {
            const GridPath r = residual_path(s, p);
            for (std::size_t k = 0; k < r.nodes(); ++k)
                for (int i = 0; i < p.n; ++i) {
                    const double expected = eps * (s.y.value(k, i) - s.y.value(0, i));
                    defect = std::max(defect, std::abs(r.value(k, i) - expected));
                }
        } catch (const IdentityViolation&) {
            defect = 1.0;
        }
        worst_defect = std::max(worst_defect, defect);
        const std::string tag = "path" + std::to_string(path);
        const std::filesystem::path dir(run.out_dir);
        write_csv(s.w, (dir / (tag + "_w.csv")).string());
        write_csv(s.y, (dir / (tag + "_y.csv")).string());
        write_csv(s.x, (dir / (tag + "_x.csv")).string());
        write_csv(momentum, (dir / (tag + "_p.csv")).string());
        for (int i = 0; i < p.n; ++i)
            rep.rows.push_back({eps, tag + "_w_end_" + std::to_string(i),
                                s.w.value(steps, i), 0.0, 1});
    }
    rep.criteria.push_back({"coupling_identity", worst_defect <= 1e-9, worst_defect, 1e-9,
                            "sup |(W - MX) - eps (Y - Y0)| over exported paths"});
    return rep;
}

inline SmoothDriver driver_from(const ConfigDoc& doc) {
    const std::string kind = doc.word("driver", "kind");
    const double horizon = doc.number("driver", "T");
    if (kind == "sinusoid")
        return make_sinusoid_driver(horizon, doc.number_list("driver", "amplitude"),
                                    doc.number_list("driver", "freq"),
                                    doc.number_list("driver", "phase"));
    if (kind == "power")
        return make_power_driver(horizon, doc.number_list("driver", "amplitude"),
                                 doc.number_list("driver", "exponent"));
    if (kind == "fourier")
        return make_fourier_driver(horizon, static_cast<int>(doc.number("driver", "modes")),
                                   doc.number_or("driver", "scale", 1.0),
                                   doc.number_or("driver", "decay", 0.7));
    throw ValidationError("driver.kind", "expected sinusoid, power, or fourier");
}

inline Report run_driver(const ConfigDoc& doc) {
    DriverConfig cfg;
    cfg.drift = doc.matrix("model", "M");
    cfg.masses = doc.number_list("driver", "masses");
    cfg.obs_steps = static_cast<std::size_t>(doc.number_or("driver", "obs_steps", 1024));
    cfg.beta = doc.number_or("driver", "beta", 0.45);
    cfg.substep_safety = doc.number_or("driver", "substep_safety", 10.0);
    cfg.area_tol_rel = doc.number_or("driver", "area_tol_rel", 1e-3);
    cfg.rho_tol_rel = doc.number_or("driver", "rho_tol_rel", 0.01);
    const SmoothDriver d = driver_from(doc);
    if (doc.word("driver", "kind") == "fourier") return finite_energy_experiment(cfg, d);
    return smooth_driver_experiment(cfg, d);
}

inline Report run_rde(const ConfigDoc& doc, const RunConfig& run) {
    RdeConfig rc;
    rc.base = experiment_from(doc, run, Y0Mode::zero);
    const int n = rc.base.params.n;
    const auto y0v = doc.number_list("rde", "y0");
    const int e = static_cast<int>(y0v.size());
    rc.y0 = Vector(e);
    for (int i = 0; i < e; ++i) rc.y0(i) = y0v[static_cast<std::size_t>(i)];
    rc.fields.state_dim = e;
    if (doc.has("rde", "V0_A") || doc.has("rde", "V0_b")) {
        Matrix a = doc.has("rde", "V0_A") ? doc.matrix("rde", "V0_A") : Matrix::Zero(e, e).eval();
        Vector b = Vector::Zero(e);
        if (doc.has("rde", "V0_b")) {
            const auto bv = doc.number_list("rde", "V0_b");
            if (static_cast<int>(bv.size()) != e)
                throw ValidationError("rde.V0_b", "dimension mismatch");
            for (int i = 0; i < e; ++i) b(i) = bv[static_cast<std::size_t>(i)];
        }
        rc.fields.drift = PolyField::affine(std::move(a), std::move(b));
    } else {
        rc.fields.drift = PolyField::zero(e);
    }
    for (int i = 1; i <= n; ++i) {
        const std::string akey = "A" + std::to_string(i);
        Matrix a = doc.matrix("rde", akey);
        Vector b = Vector::Zero(e);
        const std::string bkey = "b" + std::to_string(i);
        if (doc.has("rde", bkey)) {
            const auto bv = doc.number_list("rde", bkey);
            if (static_cast<int>(bv.size()) != e)
                throw ValidationError("rde." + bkey, "dimension mismatch");
            for (int j = 0; j < e; ++j) b(j) = bv[static_cast<std::size_t>(j)];
        }
        rc.fields.driving.push_back(PolyField::affine(std::move(a), std::move(b)));
    }
    return rde_discrimination_experiment(rc);
}

inline Report dispatch(const RunConfig& run, const ConfigDoc& doc) {
    if (run.command == "correction") return run_correction(doc);
    if (run.command == "simulate") return run_simulate(doc, run);
    if (run.command == "momentum") return momentum_limit_experiment(experiment_from(doc, run, Y0Mode::zero));
    if (run.command == "theorem") {
        const ExperimentConfig cfg = experiment_from(doc, run, Y0Mode::zero);
        Report rep = theorem_limit_experiment(cfg);
        merge_into(rep, x_correction_estimate(cfg));
        return rep;
    }
    if (run.command == "rate") {
        const ExperimentConfig cfg = experiment_from(doc, run, Y0Mode::stationary);
        Report rep = rate_experiment(cfg);
        merge_into(rep, ergodic_experiment(cfg));
        return rep;
    }
    if (run.command == "driver") return run_driver(doc);
    if (run.command == "rde") return run_rde(doc, run);
    if (run.command == "signature") {
        const ExperimentConfig cfg = experiment_from(doc, run, Y0Mode::zero);
        const int cap = static_cast<int>(doc.number_or("signature", "level", 2));
        Report rep = empirical_expected_signature(cfg, cap);
        const TensorPoly limit =
            expected_signature_limit(cfg.params.drift, cfg.params.horizon, cap);
        const int n = cfg.params.n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rep.rows.push_back({0.0, "sig2_limit_" + std::to_string(i) + std::to_string(j),
                                    limit.levels[2][static_cast<std::size_t>(i * n + j)], 0.0, 1});
        return rep;
    }
    throw ConfigError("unknown command '" + run.command + "'");
}

}  // namespace detail

// Executes the run, writes report.csv and summary.json under out_dir.
// Exit codes: 0 all criteria pass, 1 criteria failure, 2 usage/config error,
// 3 numerical error.
inline int run(const RunConfig& rc) {
    const auto t0 = std::chrono::steady_clock::now();
    std::ifstream in(rc.config_path);
    if (!in) throw ConfigError("cannot read config file '" + rc.config_path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const ConfigDoc doc = ConfigDoc::parse(text);

    std::filesystem::create_directories(rc.out_dir);
    const Report rep = detail::dispatch(rc, doc);
    const std::filesystem::path dir(rc.out_dir);
    write_report_csv(rep, (dir / "report.csv").string());

    nlohmann::ordered_json summary;
    summary["version"] = std::string(kVersion);
    summary["command"] = rc.command;
    summary["seed"] = rc.seed ? nlohmann::ordered_json(*rc.seed) : nlohmann::ordered_json(nullptr);
    summary["workers"] = rc.workers ? nlohmann::ordered_json(*rc.workers) : nlohmann::ordered_json(nullptr);
    summary["report"] = report_to_json(rep);
    const auto t1 = std::chrono::steady_clock::now();
    summary["wall_time_s"] = std::chrono::duration<double>(t1 - t0).count();
    summary["config_echo"] = text;
    std::ofstream js((dir / "summary.json").string());
    if (!js) throw ConfigError("cannot write summary.json");
    js << summary.dump(2) << '\n';

    return rep.all_pass() ? 0 : 1;
}

inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"physical Brownian motion in a magnetic field, lifted to a rough path"};
    RunConfig rc;
    app.add_option("command", rc.command, "one of: correction simulate momentum theorem rate driver rde signature")
        ->required()
        ->check(CLI::IsMember(known_commands()));
    app.add_option("--config", rc.config_path, "path to the experiment config")->required();
    std::uint64_t seed_opt = 0;
    unsigned workers_opt = 0;
    auto* seed_flag = app.add_option("--seed", seed_opt, "master seed override");
    auto* workers_flag = app.add_option("--workers", workers_opt, "worker thread count");
    app.add_option("--out", rc.out_dir, "output directory (default: current)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (*seed_flag) rc.seed = seed_opt;
    if (*workers_flag) rc.workers = workers_opt;

    try {
        return run(rc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace roughmag::cli
