#include "kinlab/picard.hpp"

#include <Eigen/LU>
#include <cmath>

namespace kinlab {

namespace {

double bracket_x(double x) { return std::sqrt(1.0 + x * x); }

// Per-column weight values at time t; empty matrix means w == 1.
Eigen::MatrixXd weight_table(const SlabProblem& prob, const VelocityGrid& grid,
                             const WeightEvaluator* w, double t) {
    if (!w) return {};
    Eigen::MatrixXd W(grid.size(), prob.dom.n_x);
    for (int c = 0; c < prob.dom.n_x; ++c) {
        double x = prob.dom.x_at(c);
        for (int i = 0; i < grid.size(); ++i) W(i, c) = w->value(t, x, grid.nodes[i]);
    }
    return W;
}

void check_sizes(const SlabProblem& prob, const VelocityGrid& grid, const LinearOperator& L,
                 const SlabField& f0, const SlabSeries* source) {
    prob.validate();
    if (f0.rows() != grid.size() || f0.cols() != prob.dom.n_x)
        throw PreconditionError("slab solve: initial field does not match the mesh");
    if (static_cast<int>(L.nu.values.size()) != grid.size())
        throw PreconditionError("slab solve: operator does not match the grid");
    if (source && source->n_steps() != prob.n_steps())
        throw PreconditionError("slab solve: source series does not match the step grid");
}

// instability guard: one transport step can add at most ~dt times the source
// amplitude, so growth far beyond that on top of 10x is a blown-up step
void check_growth(const SlabField& prev, const SlabField& next, int step, double injected) {
    double a = prev.cwiseAbs().maxCoeff();
    double b = next.cwiseAbs().maxCoeff();
    if (b > 10.0 * (a + injected))
        throw NumericalError("slab solve: norm grew from " + fmt17(a) + " to " + fmt17(b) +
                             " in step " + std::to_string(step));
}

double injected_scale(const SlabSeries* source, int k, double dt) {
    if (!source) return 0.0;
    return dt * std::max(source->fields[k].cwiseAbs().maxCoeff(),
                         source->fields[k + 1].cwiseAbs().maxCoeff());
}

}  // namespace

SlabField apply_Kw(const SlabProblem& prob, const VelocityGrid& grid, const LinearOperator& L,
                   const WeightEvaluator* w, double t, const SlabField& f) {
    if (!w) return L.K.op * f;
    Eigen::MatrixXd W = weight_table(prob, grid, w, t);
    return W.cwiseProduct(L.K.op * f.cwiseQuotient(W));
}

SlabSeries solve_transport(const SlabProblem& prob, const VelocityGrid& grid,
                           const LinearOperator& L, const WeightEvaluator* w,
                           const SlabField& f0, const SlabSeries* source) {
    check_sizes(prob, grid, L, f0, source);
    const int n_steps = prob.n_steps();
    SlabSeries out;
    out.dt = prob.dt;
    out.fields.reserve(n_steps + 1);
    out.fields.push_back(f0);
    for (int k = 0; k < n_steps; ++k) {
        EvolutionStep st;
        st.s = k * prob.dt;
        st.t = (k + 1) * prob.dt;
        st.weight = w;
        st.nu = &L.nu;
        st.quad_order = prob.quad_order;
        st.max_substep = prob.max_substep;
        SlabField q = out.fields.back();
        if (source) q += 0.5 * prob.dt * source->fields[k];
        SlabField next = apply_S(prob.dom, grid, st, q);
        if (source) next += 0.5 * prob.dt * source->fields[k + 1];
        check_growth(out.fields.back(), next, k + 1, injected_scale(source, k, prob.dt));
        out.fields.push_back(std::move(next));
    }
    return out;
}

SlabSeries solve_coupled(const SlabProblem& prob, const VelocityGrid& grid,
                         const LinearOperator& L, const WeightEvaluator* w, const SlabField& f0,
                         const SlabSeries* source) {
    check_sizes(prob, grid, L, f0, source);
    const int n = grid.size();
    const int n_steps = prob.n_steps();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(n, n) -
                                            0.5 * prob.dt * L.K.op);

    SlabSeries out;
    out.dt = prob.dt;
    out.fields.reserve(n_steps + 1);
    out.fields.push_back(f0);
    for (int k = 0; k < n_steps; ++k) {
        double t0 = k * prob.dt, t1 = (k + 1) * prob.dt;
        EvolutionStep st;
        st.s = t0;
        st.t = t1;
        st.weight = w;
        st.nu = &L.nu;
        st.quad_order = prob.quad_order;
        st.max_substep = prob.max_substep;
        const SlabField& u = out.fields.back();
        SlabField q = u + 0.5 * prob.dt * apply_Kw(prob, grid, L, w, t0, u);
        if (source) q += 0.5 * prob.dt * source->fields[k];
        SlabField rhs = apply_S(prob.dom, grid, st, q);
        if (source) rhs += 0.5 * prob.dt * source->fields[k + 1];
        SlabField next;
        if (w) {
            Eigen::MatrixXd W = weight_table(prob, grid, w, t1);
            next = W.cwiseProduct(lu.solve(rhs.cwiseQuotient(W)));
        } else {
            next = lu.solve(rhs);
        }
        check_growth(u, next, k + 1, injected_scale(source, k, prob.dt));
        out.fields.push_back(std::move(next));
    }
    return out;
}

WaveSplit wave_split(const SlabProblem& prob, const VelocityGrid& grid, const LinearOperator& L,
                     const WeightEvaluator* w, const SlabField& f0, const SlabSeries* source,
                     int depth) {
    if (depth < 2 || depth > 8)
        throw PreconditionError("wave_split: depth must lie in [2, 8]");
    const int n_steps = prob.n_steps();
    WaveSplit out;
    out.levels.reserve(depth + 1);
    out.levels.push_back(solve_transport(prob, grid, L, w, f0, source));
    out.wave = out.levels.back();

    auto coupled_series = [&](const SlabSeries& s) {
        SlabSeries ks;
        ks.dt = prob.dt;
        ks.fields.reserve(n_steps + 1);
        for (int k = 0; k <= n_steps; ++k)
            ks.fields.push_back(apply_Kw(prob, grid, L, w, k * prob.dt, s.fields[k]));
        return ks;
    };

    SlabField zero = SlabField::Zero(grid.size(), prob.dom.n_x);
    for (int i = 0; i < depth; ++i) {
        SlabSeries drive = coupled_series(out.levels.back());
        out.levels.push_back(solve_transport(prob, grid, L, w, zero, &drive));
        for (int k = 0; k <= n_steps; ++k) out.wave.fields[k] += out.levels.back().fields[k];
    }
    SlabSeries tail_drive = coupled_series(out.levels.back());
    out.remainder = solve_coupled(prob, grid, L, w, zero, &tail_drive);
    return out;
}

TripleNorm triple_norm(const SlabProblem& prob, const VelocityGrid& grid, const SlabSeries& s,
                       double p1, double p2, double j, double eps_hat) {
    const double dx = prob.dom.dx();
    TripleNorm out;
    for (int k = 0; k <= s.n_steps(); ++k) {
        double tf = std::pow(1.0 + s.t_at(k), 0.75);
        const SlabField& f = s.fields[k];
        for (int i = 0; i < grid.size(); ++i) {
            double br = bracket(grid.nodes[i]);
            double wf = std::exp(eps_hat * std::pow(br, p1));
            double sup_x = f.row(i).cwiseAbs().maxCoeff();
            double sq = f.row(i).squaredNorm() -
                        0.5 * (f(i, 0) * f(i, 0) + f(i, f.cols() - 1) * f(i, f.cols() - 1));
            double l2_x = std::sqrt(std::max(0.0, sq) * dx);
            double lo = wf * std::pow(br, p2), hi = wf * std::pow(br, p2 + 2.0 * j);
            out.t_l2 = std::max(out.t_l2, tf * lo * l2_x);
            out.t_sup = std::max(out.t_sup, tf * lo * sup_x);
            out.j_l2 = std::max(out.j_l2, hi * l2_x);
            out.j_sup = std::max(out.j_sup, hi * sup_x);
        }
    }
    return out;
}

NonlinearStep nonlinear_iterate(const SlabProblem& prob, const VelocityGrid& grid,
                                const LinearOperator& L, const GammaTensor& T,
                                const SlabSeries* prev, double eta, const SlabField& f0,
                                double p1, double p2, double j, double eps_hat) {
    prob.validate();
    const int n_steps = prob.n_steps();
    SlabSeries src;
    src.dt = prob.dt;
    if (prev) {
        if (prev->n_steps() != n_steps)
            throw PreconditionError("nonlinear_iterate: iterate does not match the step grid");
        src.fields.reserve(n_steps + 1);
        for (int k = 0; k <= n_steps; ++k) {
            SlabField g(grid.size(), prob.dom.n_x);
            for (int c = 0; c < prob.dom.n_x; ++c)
                g.col(c) = T.apply(prev->fields[k].col(c), prev->fields[k].col(c),
                                   GammaPart::full);
            src.fields.push_back(std::move(g));
        }
    } else {
        src.fields.assign(n_steps + 1, SlabField::Zero(grid.size(), prob.dom.n_x));
    }
    NonlinearStep out;
    out.series = solve_coupled(prob, grid, L, nullptr, (eta * f0).eval(), &src);
    out.norm = triple_norm(prob, grid, out.series, p1, p2, j, eps_hat);
    return out;
}

TailFit spatial_tail_fit(const SlabProblem& prob, const VelocityGrid& grid,
                         const WeightEvaluator& w, double t, const SlabField& fw, double beta,
                         double x_lo, double x_hi) {
    if (w.kind() == WeightEvaluator::w3)
        throw PreconditionError("spatial_tail_fit: the velocity-only weight has no x profile");
    if (fw.rows() != grid.size() || fw.cols() != prob.dom.n_x)
        throw PreconditionError("spatial_tail_fit: field does not match the mesh");

    Eigen::VectorXd amp = fw.cwiseAbs().rowwise().maxCoeff();
    double big_m = (w.kind() == WeightEvaluator::w1) ? w.p1().M : w.p2().M;
    double alpha = (w.kind() == WeightEvaluator::w1)
                       ? 1.0
                       : w.p2().p / (w.p2().p + 1.0 - w.gamma());

    TailFit out;
    out.time = t;
    out.affine_abscissa = (w.kind() == WeightEvaluator::w2);
    std::vector<double> xs, ys;
    for (int c = 0; c < prob.dom.n_x; ++c) {
        double x = prob.dom.x_at(c);
        if (!(x >= x_lo && x <= x_hi)) continue;
        double envelope = 0.0;
        for (int i = 0; i < grid.size(); ++i) {
            double v = std::pow(bracket(grid.nodes[i]), beta) * amp[i] /
                       w.value(t, x, grid.nodes[i]);
            envelope = std::max(envelope, v);
        }
        if (!(envelope > 1e-290)) continue;
        double reach = bracket_x(x) + big_m * t;
        xs.push_back(out.affine_abscissa ? std::pow(reach, alpha) : std::log(reach));
        ys.push_back(std::log(envelope));
    }
    out.n_samples = static_cast<int>(xs.size());
    if (out.n_samples < 8) return out;  // flagged: fit left in its default state

    // least squares of ys against xs
    double n = out.n_samples, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < out.n_samples; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    out.fit.exponent = (n * sxy - sx * sy) / denom;
    out.fit.intercept = (sy - out.fit.exponent * sx) / n;
    out.fit.n_used = out.n_samples;
    double ss_res = 0, ss_tot = 0, ybar = sy / n;
    for (int i = 0; i < out.n_samples; ++i) {
        double r = ys[i] - (out.fit.intercept + out.fit.exponent * xs[i]);
        ss_res += r * r;
        ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
    }
    out.fit.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

}  // namespace kinlab
