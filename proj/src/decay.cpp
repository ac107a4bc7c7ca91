#include "kinlab/decay.hpp"

#include <Eigen/LU>
#include <cmath>

namespace kinlab {

namespace {

constexpr double kGeom = 0.050660591821168886;  // 4 pi (2 pi)^{-3} = 1/(2 pi^2)

struct CnStepper {
    Eigen::MatrixXcd forward;  // I + dt/2 A
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu;  // of I - dt/2 A

    CnStepper(const ModeProblem& prob, const VelocityGrid& grid, const LinearOperator& L) {
        const int n = grid.size();
        Eigen::MatrixXcd A = L.K.op.cast<std::complex<double>>();
        for (int i = 0; i < n; ++i)
            A(i, i) -= std::complex<double>(L.nu.values[i], prob.rho * grid.nodes[i][2]);
        Eigen::MatrixXcd back = Eigen::MatrixXcd::Identity(n, n) - 0.5 * prob.dt * A;
        forward = Eigen::MatrixXcd::Identity(n, n) + 0.5 * prob.dt * A;
        lu.compute(back);
        CVec e = CVec::Ones(n);
        CVec r = back * lu.solve(e) - e;
        if (!(r.norm() < 1e-8 * std::sqrt(static_cast<double>(n))))
            throw NumericalError("Crank-Nicolson system not solvable at rho=" +
                                 std::to_string(prob.rho) + " dt=" + std::to_string(prob.dt));
    }
};

ModeSeries run_mode(const ModeProblem& prob, const VelocityGrid& grid, const LinearOperator& L,
                    const CVec& g0, const std::function<CVec(double)>* source) {
    prob.validate();
    if (g0.size() != grid.size())
        throw PreconditionError("evolve_mode: initial data does not match the grid");
    if (static_cast<int>(L.nu.values.size()) != grid.size())
        throw PreconditionError("evolve_mode: operator does not match the grid");
    CnStepper st(prob, grid, L);
    const int n_steps = static_cast<int>(std::ceil(prob.t_end / prob.dt - 1e-9));

    ModeSeries out;
    out.rho = prob.rho;
    out.times.push_back(0.0);
    out.snapshots.push_back(g0);
    CVec g = g0;
    CVec s_prev = source ? (*source)(0.0) : CVec();
    for (int k = 1; k <= n_steps; ++k) {
        CVec rhs = st.forward * g;
        if (source) {
            CVec s_now = (*source)(k * prob.dt);
            rhs += 0.5 * prob.dt * (s_prev + s_now);
            s_prev = std::move(s_now);
        }
        g = st.lu.solve(rhs);
        if (k % prob.snapshot_stride == 0 || k == n_steps) {
            out.times.push_back(k * prob.dt);
            out.snapshots.push_back(g);
        }
    }
    return out;
}

}  // namespace

ModeSeries evolve_mode(const ModeProblem& prob, const VelocityGrid& grid,
                       const LinearOperator& L, const CVec& g0) {
    return run_mode(prob, grid, L, g0, nullptr);
}

ModeSeries inhomogeneous_evolve(const ModeProblem& prob, const VelocityGrid& grid,
                                const LinearOperator& L, const CVec& g0,
                                const std::function<CVec(double)>& source) {
    return run_mode(prob, grid, L, g0, &source);
}

CsvTable DecayReport::to_csv() const {
    CsvTable table;
    table.header = "t,norm,kind,rho_min,rho_max,n_xi,gamma";
    table.rows.reserve(t.size());
    for (size_t i = 0; i < t.size(); ++i)
        table.rows.push_back(fmt17(t[i]) + "," + fmt17(value[i]) + "," + kind + "," +
                             fmt17(rho_min) + "," + fmt17(rho_max) + "," + std::to_string(n_xi) +
                             "," + fmt17(gamma));
    return table;
}

std::vector<DecayReport> synthesize_norms(const SynthesisConfig& cfg, const VelocityGrid& grid,
                                          const LinearOperator& L, const Eigen::VectorXd& psi) {
    cfg.validate();
    const int n = grid.size();
    if (psi.size() != n) throw PreconditionError("synthesize_norms: psi does not match the grid");

    // log-spaced wavenumber magnitudes; int rho^2 F drho = sum_i w_i F(rho_i)
    // with w_i = rho_i^3 * (composite Simpson in log rho when the panel count
    // is even, trapezoid otherwise)
    const double dln = std::log(cfg.rho_max / cfg.rho_min) / (cfg.n_rho - 1);
    const bool simpson = (cfg.n_rho - 1) % 2 == 0;
    std::vector<double> rho(cfg.n_rho), wk(cfg.n_rho), phat(cfg.n_rho);
    const double s2 = cfg.bump_width * cfg.bump_width;
    for (int i = 0; i < cfg.n_rho; ++i) {
        rho[i] = cfg.rho_min * std::exp(i * dln);
        double lw;
        if (simpson)
            lw = (i == 0 || i == cfg.n_rho - 1) ? 1.0 / 3.0 : (i % 2 == 1 ? 4.0 / 3.0 : 2.0 / 3.0);
        else
            lw = (i == 0 || i == cfg.n_rho - 1) ? 0.5 : 1.0;
        wk[i] = rho[i] * rho[i] * rho[i] * dln * lw;
        phat[i] = std::pow(kTwoPi, 1.5) * cfg.bump_width * s2 * std::exp(-0.5 * s2 * rho[i] * rho[i]);
    }

    ModeProblem prob;
    prob.dt = cfg.dt;
    prob.t_end = cfg.t_end;
    prob.snapshot_stride = cfg.snapshot_stride;

    // accumulators indexed (snapshot, velocity node); fixed mode order keeps
    // the reduction deterministic
    std::vector<double> times;
    Eigen::MatrixXd sq, re, ab;
    CVec g0 = psi.cast<std::complex<double>>();
    std::function<double(double)> envelope;
    if (cfg.source_kind == "steady")
        envelope = [](double) { return 1.0; };
    else if (cfg.source_kind == "decaying")
        envelope = [&cfg](double t) { return std::pow(1.0 + t, -cfg.source_rate); };
    else if (cfg.source_kind != "none")
        throw PreconditionError("synthesize_norms: unknown source_kind " + cfg.source_kind);
    for (int m = 0; m < cfg.n_rho; ++m) {
        prob.rho = rho[m];
        ModeSeries series =
            envelope ? inhomogeneous_evolve(prob, grid, L, g0,
                                            [&](double t) -> CVec { return envelope(t) * g0; })
                     : evolve_mode(prob, grid, L, g0);
        if (times.empty()) {
            times = series.times;
            int n_t = static_cast<int>(times.size());
            sq = Eigen::MatrixXd::Zero(n_t, n);
            re = Eigen::MatrixXd::Zero(n_t, n);
            ab = Eigen::MatrixXd::Zero(n_t, n);
        }
        for (size_t k = 0; k < series.snapshots.size(); ++k) {
            const CVec& gh = series.snapshots[k];
            for (int i = 0; i < n; ++i) {
                double a = std::abs(gh[i]) * phat[m];
                sq(k, i) += wk[m] * a * a;
                re(k, i) += wk[m] * phat[m] * gh[i].real();
                ab(k, i) += wk[m] * a;
            }
        }
    }

    const int n_t = static_cast<int>(times.size());
    std::vector<DecayReport> reports(4);
    const char* kinds[4] = {"L2x", "center-L2xi", "center-wsup", "supx-proxy"};
    for (int r = 0; r < 4; ++r) {
        reports[r].kind = kinds[r];
        reports[r].t = times;
        reports[r].value.resize(n_t);
        reports[r].fit_lo = cfg.fit_lo;
        reports[r].fit_hi = cfg.fit_hi;
        reports[r].rho_min = cfg.rho_min;
        reports[r].rho_max = cfg.rho_max;
        reports[r].n_xi = grid.n_axis;
        reports[r].gamma = cfg.gamma;
    }
    for (int k = 0; k < n_t; ++k) {
        double l2 = 0.0, cl2 = 0.0, csup = 0.0, prox = 0.0;
        for (int i = 0; i < n; ++i) {
            double w = grid.weights[i];
            l2 += w * kGeom * sq(k, i);
            double c = kGeom * re(k, i);
            cl2 += w * c * c;
            double br = bracket(grid.nodes[i]);
            csup = std::max(csup,
                            std::exp(cfg.eps_hat * br * br) * std::pow(br, cfg.p2) * std::abs(c));
            double p = kGeom * ab(k, i);
            prox += w * p * p;
        }
        reports[0].value[k] = std::sqrt(l2);
        reports[1].value[k] = std::sqrt(cl2);
        reports[2].value[k] = csup;
        reports[3].value[k] = std::sqrt(prox);
    }
    for (auto& r : reports) {
        r.fit = fit_exponent(r.t, r.value, r.fit_lo, r.fit_hi, FitModel::power);
        r.clean = r.fit.r_squared >= cfg.r2_clean;
    }
    return reports;
}

SplitBound interpolation_split(const VelocityGrid& grid, const Eigen::VectorXd& H, double j,
                               double p2, double eps_hat) {
    if (!(j > 0.0)) throw PreconditionError("interpolation_split: need j > 0");
    if (H.size() != grid.size())
        throw PreconditionError("interpolation_split: H does not match the grid");
    auto wsup = [&](double q) {
        double best = 0.0;
        for (int i = 0; i < grid.size(); ++i) {
            double br = bracket(grid.nodes[i]);
            best = std::max(best,
                            std::exp(eps_hat * br * br) * std::pow(br, q) * std::abs(H[i]));
        }
        return best;
    };
    SplitBound out;
    out.lhs = wsup(p2 + j);
    double a = wsup(p2 + 2.0 * j), b = wsup(p2);
    out.rhs = 2.0 * std::sqrt(a * b);
    if (a > 0.0 && b > 0.0) {
        double br0 = std::pow(a / b, 0.5 / j);
        out.xi0 = std::sqrt(std::max(0.0, br0 * br0 - 1.0));
    }
    return out;
}

}  // namespace kinlab
