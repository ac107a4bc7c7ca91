// Command-line driver: wires the config file to the experiment stages and
// emits deterministic CSV/SVG artifacts plus a run manifest.  Exit codes:
// 0 success, 2 precondition violation (bad config/arguments), 3 numerical
// failure mid-run.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kinlab/bounds.hpp"
#include "kinlab/decay.hpp"
#include "kinlab/picard.hpp"

namespace fs = std::filesystem;
using namespace kinlab;

namespace {

constexpr const char* kVersion = "kinlab 0.1.0";

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.find_first_not_of(" \t") == std::string::npos) continue;
        size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0) throw PreconditionError(what + ": bad list entry '" + tok + "'");
        out.push_back(v);
    }
    if (out.empty()) throw PreconditionError(what + ": empty list");
    return out;
}

std::vector<std::string> parse_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        size_t a = tok.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        size_t b = tok.find_last_not_of(" \t");
        out.push_back(tok.substr(a, b - a + 1));
    }
    return out;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// Shared state for one invocation: config, output directory, lazily assembled
// operator (with on-disk kernel cache), and the growing manifest.
struct Driver {
    ExperimentConfig cfg;
    fs::path out;
    RunManifest manifest;
    VelocityGrid grid;
    CollisionConfig ccfg;
    std::optional<LinearOperator> L_;
    bool cache_hit = false;
    std::string cache_path;

    Driver(const std::string& config_path, const std::string& out_flag, int workers_flag,
           long long seed_flag) {
        cfg = load_config(config_path);
        if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);

        std::string out_dir = cfg.out_dir;
        if (const char* e = std::getenv("KINLAB_OUT"); e && *e) out_dir = e;
        if (!out_flag.empty()) out_dir = out_flag;
        out = out_dir;

        int workers = cfg.get_int("run", "workers", 0);
        if (const char* e = std::getenv("KINLAB_WORKERS"); e && *e) workers = std::atoi(e);
        if (workers_flag > 0) workers = workers_flag;
#ifdef _OPENMP
        if (workers > 0) omp_set_num_threads(workers);
#endif

        grid = build_grid(cfg.get_int("grid", "n_axis", 8), cfg.get_num("grid", "radius", 4.0));
        ccfg.gamma = cfg.get_num("collision", "gamma", -0.5);
        ccfg.kappa = cfg.get_num("collision", "kappa", 0.5);
        ccfg.omega_polar = cfg.get_int("collision", "omega_polar", 8);
        ccfg.omega_azimuth = cfg.get_int("collision", "omega_azimuth", 8);
        ccfg.radial_order = cfg.get_int("collision", "radial_order", 32);
        ccfg.lattice_correction = cfg.get_int("collision", "lattice_correction", 1) != 0;
        ccfg.validate();

        fs::create_directories(out);
        manifest.config_hash = file_checksum_hex(config_path);
        manifest.code_version = kVersion;
        manifest.started_utc = utc_now();
    }

    std::string path(const std::string& name) const { return (out / name).string(); }

    void emit(const std::string& name, const CsvTable& table) {
        write_csv(path(name), table);
        manifest.add_output(path(name));
    }

    const LinearOperator& L() {
        if (L_) return *L_;
        std::ostringstream name;
        name << "kernel-" << std::hex << (grid.hash() ^ ccfg.hash()) << ".bin";
        cache_path = path(name.str());
        if (std::optional<KernelMatrix> K = load_kernel_matrix(cache_path, grid, ccfg)) {
            cache_hit = true;
            L_.emplace();
            L_->nu = compute_nu(grid, ccfg);
            L_->K = std::move(*K);
        } else {
            L_ = assemble_L(grid, ccfg);
            save_kernel_matrix(cache_path, L_->K, grid, ccfg);
        }
        manifest.add_output(cache_path);
        return *L_;
    }

    WeightEvaluator make_weight(WeightEvaluator::Kind kind) const {
        if (kind == WeightEvaluator::w1) {
            W1Params p;
            p.delta = cfg.get_num("weights", "delta", p.delta);
            p.M = cfg.get_num("weights", "big_m", p.M);
            p.D = cfg.get_num("weights", "big_d", p.D);
            p.p = cfg.get_num("weights", "p", p.p);
            return WeightEvaluator::make_w1(p, ccfg.gamma);
        }
        if (kind == WeightEvaluator::w2) {
            W2Params p;
            p.eps = cfg.get_num("weights", "eps", p.eps);
            p.delta = cfg.get_num("weights", "delta", p.delta);
            p.M = cfg.get_num("weights", "big_m", p.M);
            p.p = cfg.get_num("weights", "p", p.p);
            return WeightEvaluator::make_w2(p, ccfg.gamma);
        }
        W3Params p;
        p.eps_hat = cfg.get_num("weights", "eps_hat", p.eps_hat);
        p.p1 = cfg.get_num("weights", "p1", p.p1);
        return WeightEvaluator::make_w3(p);
    }

    // Velocity profile with macroscopic and microscopic content, shared by the
    // evolution stages so their artifacts are comparable.
    Eigen::VectorXd data_profile() const {
        Eigen::VectorXd psi(grid.size());
        for (int i = 0; i < grid.size(); ++i) {
            const Vec3& xi = grid.nodes[i];
            psi[i] = sqrt_maxwellian(xi) *
                     (1.0 + 0.4 * xi[2] + 0.2 * (norm2(xi) - 3.0) + 0.3 * xi[0] * xi[1]);
        }
        return psi;
    }

    void run_stage(const std::string& name, const std::function<void()>& body) {
        Timer tm;
        body();
        manifest.stage_seconds.emplace_back(name, tm.seconds());
        std::cout << "stage " << name << " done in " << tm.seconds() << " s\n";
    }

    void stage_assemble() {
        const LinearOperator& op = L();
        CsvTable t;
        t.header = "i,xi1,xi2,xi3,nu";
        for (int i = 0; i < grid.size(); ++i) {
            const Vec3& xi = grid.nodes[i];
            t.rows.push_back(std::to_string(i) + "," + fmt17(xi[0]) + "," + fmt17(xi[1]) + "," +
                             fmt17(xi[2]) + "," + fmt17(op.nu.values[i]));
        }
        emit("collision-rate.csv", t);
        std::cout << (cache_hit ? "kernel cache hit: " : "kernel assembled: ") << cache_path
                  << "\n"
                  << "nodes=" << grid.size() << " nu0=" << op.nu.nu0_est
                  << " nu1=" << op.nu.nu1_est << " checksum=" << std::hex << op.K.checksum()
                  << std::dec << "\n";
    }

    void stage_decay(bool inhomogeneous) {
        SynthesisConfig sc;
        sc.n_rho = cfg.get_int("decay", "n_rho", sc.n_rho);
        sc.rho_min = cfg.get_num("decay", "rho_min", sc.rho_min);
        sc.rho_max = cfg.get_num("decay", "rho_max", sc.rho_max);
        sc.bump_width = cfg.get_num("decay", "bump_width", sc.bump_width);
        sc.dt = cfg.get_num("decay", "dt", sc.dt);
        sc.t_end = cfg.get_num("decay", "t_end", sc.t_end);
        sc.snapshot_stride = cfg.get_int("decay", "snapshot_stride", sc.snapshot_stride);
        sc.fit_lo = cfg.get_num("decay", "fit_lo", sc.fit_lo);
        sc.fit_hi = cfg.get_num("decay", "fit_hi", sc.fit_hi);
        sc.r2_clean = cfg.get_num("decay", "r2_clean", sc.r2_clean);
        sc.p2 = cfg.get_num("decay", "p2", sc.p2);
        sc.eps_hat = cfg.get_num("weights", "eps_hat", sc.eps_hat);
        sc.gamma = ccfg.gamma;
        if (inhomogeneous) {
            sc.source_kind = cfg.get_str("decay", "source_kind", "decaying");
            sc.source_rate = cfg.get_num("decay", "source_rate", sc.source_rate);
        }
        const std::string tag = inhomogeneous ? "forced" : "free";

        std::vector<DecayReport> reports = synthesize_norms(sc, grid, L(), data_profile());

        CsvTable fits;
        fits.header = "kind,exponent,intercept,r_squared,n_used,clean";
        std::vector<SvgSeries> series;
        for (const DecayReport& r : reports) {
            emit("decay-" + tag + "-" + r.kind + ".csv", r.to_csv());
            fits.rows.push_back(r.kind + "," + fmt17(r.fit.exponent) + "," +
                                fmt17(r.fit.intercept) + "," + fmt17(r.fit.r_squared) + "," +
                                std::to_string(r.fit.n_used) + "," + (r.clean ? "1" : "0"));
            series.push_back({r.t, r.value, r.kind});
            std::cout << "decay " << tag << " " << r.kind << ": exponent=" << r.fit.exponent
                      << " R2=" << r.fit.r_squared << (r.clean ? "" : " (not clean)") << "\n";
        }
        emit("decay-" + tag + "-fits.csv", fits);
        const std::string svg = path("decay-" + tag + ".svg");
        write_loglog_svg(svg, series, reports[0].fit.exponent, reports[0].fit.intercept,
                         "norms vs 1+t,");
        manifest.add_output(svg);
    }

    SlabProblem slab_problem() const {
        SlabProblem prob;
        prob.dom.n_x = cfg.get_int("picard", "n_x", 201);
        prob.dom.X = cfg.get_num("picard", "domain_x", 20.0);
        prob.dt = cfg.get_num("picard", "dt", 0.025);
        prob.t_end = cfg.get_num("picard", "t_end", 5.0);
        prob.quad_order = cfg.get_int("picard", "quad_order", 4);
        prob.validate();
        return prob;
    }

    SlabField slab_data(const SlabProblem& prob) const {
        Eigen::VectorXd psi = data_profile();
        SlabField f0(grid.size(), prob.dom.n_x);
        for (int j = 0; j < prob.dom.n_x; ++j) {
            double x = prob.dom.x_at(j);
            double bump = std::exp(-0.5 * x * x);
            for (int i = 0; i < grid.size(); ++i) f0(i, j) = bump * psi[i];
        }
        return f0;
    }

    void stage_picard() {
        SlabProblem prob = slab_problem();
        const int depth = cfg.get_int("picard", "depth", 4);
        const double eta = cfg.get_num("picard", "eta", 1e-3);
        const double p1 = cfg.get_num("weights", "p1", 2.0);
        const double p2 = cfg.get_num("decay", "p2", 2.0);
        const double eps_hat = cfg.get_num("weights", "eps_hat", 5e-3);
        const double j_gap = 0.5;
        SlabField f0 = slab_data(prob);
        const LinearOperator& op = L();

        // wave/remainder split against the direct coupled solve
        WaveSplit ws = wave_split(prob, grid, op, nullptr, f0, nullptr, depth);
        SlabSeries coupled = solve_coupled(prob, grid, op, nullptr, f0, nullptr);
        double recon = 0.0;
        for (size_t k = 0; k < coupled.fields.size(); ++k) {
            SlabField diff = ws.wave.fields[k] + ws.remainder.fields[k] - coupled.fields[k];
            recon = std::max(recon, diff.cwiseAbs().maxCoeff());
        }
        CsvTable lv;
        lv.header = "level,t_l2,t_sup,j_l2,j_sup";
        auto push_norm = [&](const std::string& name, const SlabSeries& s) {
            TripleNorm n = triple_norm(prob, grid, s, p1, p2, j_gap, eps_hat);
            lv.rows.push_back(name + "," + fmt17(n.t_l2) + "," + fmt17(n.t_sup) + "," +
                              fmt17(n.j_l2) + "," + fmt17(n.j_sup));
        };
        for (int i = 0; i < static_cast<int>(ws.levels.size()); ++i)
            push_norm(std::to_string(i), ws.levels[i]);
        push_norm("remainder", ws.remainder);
        push_norm("coupled", coupled);
        emit("picard-levels.csv", lv);
        std::cout << "wave+remainder reconstruction max error = " << recon << "\n";

        // source iteration with small data; successive sup distances measure
        // the contraction
        GammaTensor T = build_gamma_tensor(grid, ccfg);
        CsvTable it;
        it.header = "iter,t_l2,t_sup,j_l2,j_sup,delta_sup";
        std::optional<NonlinearStep> prev;
        for (int k = 0; k < depth; ++k) {
            NonlinearStep step = nonlinear_iterate(prob, grid, op, T,
                                                   prev ? &prev->series : nullptr, eta, f0, p1,
                                                   p2, j_gap, eps_hat);
            double delta = 0.0;
            if (prev)
                for (size_t s = 0; s < step.series.fields.size(); ++s)
                    delta = std::max(delta, (step.series.fields[s] - prev->series.fields[s])
                                                .cwiseAbs()
                                                .maxCoeff());
            it.rows.push_back(std::to_string(k) + "," + fmt17(step.norm.t_l2) + "," +
                              fmt17(step.norm.t_sup) + "," + fmt17(step.norm.j_l2) + "," +
                              fmt17(step.norm.j_sup) + "," + fmt17(delta));
            std::cout << "iterate " << k << ": norm=" << step.norm.max() << " delta=" << delta
                      << "\n";
            prev = std::move(step);
        }
        emit("picard-iterates.csv", it);
    }

    void stage_spatial_tail() {
        SlabProblem prob = slab_problem();
        std::vector<double> tail_times =
            parse_list(cfg.get_str("picard", "tail_times", "5,10,20"), "tail_times");
        const double x_lo = cfg.get_num("picard", "fit_lo", 20.0);
        const double x_hi = cfg.get_num("picard", "fit_hi", 0.8 * prob.dom.X);
        // envelope velocity power zero: the spatial profile of the certified
        // envelope is carried entirely by the inverted weight
        const double beta = 0.0;
        CsvTable t;
        t.header = "weight,time,exponent,intercept,r_squared,n_samples,affine_abscissa";
        for (auto kind : {WeightEvaluator::w1, WeightEvaluator::w2}) {
            WeightEvaluator w = make_weight(kind);
            const char* tag = kind == WeightEvaluator::w1 ? "w1" : "w2";
            SlabField f0 = slab_data(prob);
            for (int jx = 0; jx < prob.dom.n_x; ++jx)
                for (int i = 0; i < grid.size(); ++i)
                    f0(i, jx) *= w.value(0.0, prob.dom.x_at(jx), grid.nodes[i]);
            SlabSeries sol = solve_coupled(prob, grid, L(), &w, f0, nullptr);
            for (double tt : tail_times) {
                int k = static_cast<int>(std::llround(tt / prob.dt));
                if (k < 0 || k >= static_cast<int>(sol.fields.size()))
                    throw PreconditionError("spatial-tail: tail time " + fmt17(tt) +
                                            " outside the solved window");
                TailFit fit = spatial_tail_fit(prob, grid, w, sol.t_at(k), sol.fields[k], beta,
                                               x_lo, x_hi);
                t.rows.push_back(std::string(tag) + "," + fmt17(fit.time) + "," +
                                 fmt17(fit.fit.exponent) + "," + fmt17(fit.fit.intercept) + "," +
                                 fmt17(fit.fit.r_squared) + "," + std::to_string(fit.n_samples) +
                                 "," + (fit.affine_abscissa ? "1" : "0"));
                std::cout << "tail fit " << tag << " t=" << fit.time
                          << ": exponent=" << fit.fit.exponent << " R2=" << fit.fit.r_squared
                          << "\n";
            }
        }
        emit("spatial-tail.csv", t);
    }

    void stage_audit() {
        std::vector<std::string> lemmas = parse_names(cfg.get_str("audit", "lemmas", "all"));
        if (lemmas.size() == 1 && lemmas[0] == "all") lemmas = registered_bounds();
        std::vector<double> gammas =
            parse_list(cfg.get_str("audit", "gammas", "-0.5,-1.0,-1.5,-1.9"), "gammas");

        AuditSpec spec;
        spec.n_samples = cfg.get_int("audit", "samples", 64);
        spec.tau = cfg.get_num("audit", "tau", 1.0);
        spec.seed = cfg.seed ? cfg.seed : 1;
        const double q_cfg = cfg.get_num("audit", "q", 0.0);
        const double cap = cfg.get_num("audit", "dispersion_cap", 10.0);

        std::vector<AuditReport> reports;
        std::vector<std::string> summary;
        for (double g : gammas) {
            CollisionConfig cc = ccfg;
            cc.gamma = g;
            for (const std::string& id : lemmas) {
                const BoundInfo& info = bound_info(id);
                AuditSpec s = spec;
                WeightEvaluator w = make_weight(WeightEvaluator::w1);
                if (info.needs_weight) {
                    w = [&] {
                        W1Params p;
                        p.delta = cfg.get_num("weights", "delta", p.delta);
                        p.M = cfg.get_num("weights", "big_m", p.M);
                        p.D = cfg.get_num("weights", "big_d", p.D);
                        p.p = cfg.get_num("weights", "p", p.p);
                        return WeightEvaluator::make_w1(p, g);
                    }();
                    s.weight = &w;
                    s.t = 1.0;
                    s.x = 1.0;
                }
                // per-id exponent defaults when the config leaves q unset: a
                // valid power for the integrability bounds, a valid order for
                // the Lq bounds
                if (q_cfg > 0.0)
                    s.q = q_cfg;
                else if (id == "kq-moment" || id == "kw-bootstrap-lq" || id == "kw-bootstrap-l4")
                    s.q = std::min(1.2, 0.5 * (1.0 + 3.0 / -g));
                else
                    s.q = 4.0;
                try {
                    AuditReport r = audit(id, s, grid, cc);
                    summary.push_back(audit_summary(r));
                    reports.push_back(std::move(r));
                } catch (const PreconditionError& e) {
                    summary.push_back(id + " gamma=" + fmt17(g) + " skipped: " + e.what());
                }
            }
        }
        emit("audit.csv", audit_csv(reports));
        std::ofstream sum(path("audit-summary.txt"), std::ios::binary);
        if (!sum) throw PreconditionError("audit: cannot open summary file");
        int bad = 0;
        for (const std::string& line : summary) {
            sum << line << "\n";
            std::cout << line << "\n";
        }
        sum.close();
        manifest.add_output(path("audit-summary.txt"));
        for (const AuditReport& r : reports)
            if (!r.plausible || (bound_info(r.lemma).has_dispersion_budget && r.dispersion > cap))
                ++bad;
        std::cout << reports.size() << " audits run, " << bad << " outside budget\n";
    }

    void finish() {
        manifest.write(path("manifest.json"));
        std::cout << "manifest: " << path("manifest.json") << "\n";
    }
};

int run(const std::string& sub, const std::string& config_path, const std::string& out_flag,
        int workers, long long seed) {
    Driver d(config_path, out_flag, workers, seed);
    if (sub == "assemble") {
        d.run_stage("assemble", [&] { d.stage_assemble(); });
    } else if (sub == "decay-linear") {
        d.run_stage("decay-linear", [&] { d.stage_decay(false); });
    } else if (sub == "decay-inhomogeneous") {
        d.run_stage("decay-inhomogeneous", [&] { d.stage_decay(true); });
    } else if (sub == "picard") {
        d.run_stage("picard", [&] { d.stage_picard(); });
    } else if (sub == "spatial-tail") {
        d.run_stage("spatial-tail", [&] { d.stage_spatial_tail(); });
    } else if (sub == "audit") {
        d.run_stage("audit", [&] { d.stage_audit(); });
    } else if (sub == "all") {
        d.run_stage("assemble", [&] { d.stage_assemble(); });
        d.run_stage("decay-linear", [&] { d.stage_decay(false); });
        d.run_stage("decay-inhomogeneous", [&] { d.stage_decay(true); });
        d.run_stage("picard", [&] { d.stage_picard(); });
        d.run_stage("spatial-tail", [&] { d.stage_spatial_tail(); });
        d.run_stage("audit", [&] { d.stage_audit(); });
    } else {
        throw PreconditionError("unknown subcommand " + sub);
    }
    d.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinetic-equation numerical laboratory"};
    app.require_subcommand(1);
    std::string config_path, out_flag;
    int workers = 0;
    long long seed = -1;
    for (const char* name : {"assemble", "decay-linear", "decay-inhomogeneous", "picard",
                             "spatial-tail", "audit", "all"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config (INI)")->required();
        sub->add_option("--out", out_flag, "output directory override");
        sub->add_option("--workers", workers, "thread count override");
        sub->add_option("--seed", seed, "seed override");
    }
    CLI11_PARSE(app, argc, argv);
    try {
        return run(app.get_subcommands().front()->get_name(), config_path, out_flag, workers,
                   seed);
    } catch (const PreconditionError& e) {
        std::cerr << "precondition: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}
