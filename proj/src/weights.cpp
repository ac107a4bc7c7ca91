#include "kinlab/weights.hpp"

#include <cmath>
#include <limits>

namespace kinlab {

namespace {

// Shared structure of w1 and of the exponent of w2:
//   blend = 5 y^a (1 - chi(s)) + 3 q^p chi(s),   s = y / q^c,
// with y = delta(<x> - M t) and q a bracket of xi.  Returns the value and the
// partials through (y, q); the caller supplies dy/dt, dy/dx, dq/dxi.
struct Blend {
    double val;
    double d_y;  // partial wrt y
    double d_q;  // partial wrt q
};

Blend blend_eval(double y, double q, double p, double a, double c, const CutoffChi& chi) {
    double s = y * std::pow(q, -c);
    double ch = chi.value(s);
    double dch = chi.deriv(s);
    double qp = std::pow(q, p);
    // for s <= 1 the power-law branch has zero coefficient; skip it so that
    // negative y (inside the M t cone) never hits a fractional power
    double ya = (s > 1.0) ? std::pow(y, a) : 0.0;
    double dya = (s > 1.0) ? a * std::pow(y, a - 1.0) : 0.0;

    Blend b;
    b.val = 5.0 * ya * (1.0 - ch) + 3.0 * qp * ch;
    double ds_dy = std::pow(q, -c);
    double ds_dq = -c * y * std::pow(q, -c - 1.0);
    double d_chi_common = (3.0 * qp - 5.0 * ya) * dch;
    b.d_y = 5.0 * dya * (1.0 - ch) + d_chi_common * ds_dy;
    b.d_q = 3.0 * p * std::pow(q, p - 1.0) * ch + d_chi_common * ds_dq;
    return b;
}

double bracket_x(double x) { return std::sqrt(1.0 + x * x); }

}  // namespace

WeightEvaluator WeightEvaluator::make_w1(const W1Params& p, double gamma) {
    p.validate();
    if (!(gamma > -2.0 && gamma < 1.0))
        throw PreconditionError("WeightEvaluator: gamma must lie in (-2,1)");
    WeightEvaluator w;
    w.kind_ = w1;
    w.gamma_ = gamma;
    w.p1_ = p;
    return w;
}

WeightEvaluator WeightEvaluator::make_w2(const W2Params& p, double gamma) {
    p.validate();
    if (!(gamma > -2.0 && gamma < 1.0))
        throw PreconditionError("WeightEvaluator: gamma must lie in (-2,1)");
    WeightEvaluator w;
    w.kind_ = w2;
    w.gamma_ = gamma;
    w.p2_ = p;
    return w;
}

WeightEvaluator WeightEvaluator::make_w3(const W3Params& p) {
    p.validate();
    WeightEvaluator w;
    w.kind_ = w3;
    w.p3_ = p;
    return w;
}

WeightEvaluator unit_weight() {
    W3Params p;
    p.eps_hat = 0.0;
    return WeightEvaluator::make_w3(p);
}

double WeightEvaluator::log_w(double t, double x, const Vec3& xi) const {
    switch (kind_) {
        case w1: {
            double y = p1_.delta * (bracket_x(x) - p1_.M * t);
            double q = std::sqrt(p1_.D * p1_.D + norm2(xi));
            double a = p1_.p / (1.0 - gamma_);
            return std::log(blend_eval(y, q, p1_.p, a, 1.0 - gamma_, chi_).val);
        }
        case w2: {
            double y = p2_.delta * (bracket_x(x) - p2_.M * t);
            double q = bracket(xi);
            double a = p2_.p / (p2_.p + 1.0 - gamma_);
            return p2_.eps * blend_eval(y, q, p2_.p, a, p2_.p + 1.0 - gamma_, chi_).val;
        }
        case w3:
            return p3_.eps_hat * std::pow(bracket(xi), p3_.p1);
    }
    throw PreconditionError("WeightEvaluator: bad kind");
}

double WeightEvaluator::value(double t, double x, const Vec3& xi) const {
    double lw = log_w(t, x, xi);
    if (std::abs(lw) > 300.0)
        throw NumericalError("weight out of floating-point range: log w = " + fmt17(lw));
    return std::exp(lw);
}

LogDerivs WeightEvaluator::log_derivatives(double t, double x, const Vec3& xi) const {
    LogDerivs d;
    switch (kind_) {
        case w1: {
            double y = p1_.delta * (bracket_x(x) - p1_.M * t);
            double q = std::sqrt(p1_.D * p1_.D + norm2(xi));
            double a = p1_.p / (1.0 - gamma_);
            Blend b = blend_eval(y, q, p1_.p, a, 1.0 - gamma_, chi_);
            double dy_dt = -p1_.delta * p1_.M;
            double dy_dx = p1_.delta * x / bracket_x(x);
            d.dt = b.d_y * dy_dt / b.val;
            d.dx = b.d_y * dy_dx / b.val;
            for (int i = 0; i < 3; ++i) d.dxi[i] = b.d_q * (xi[i] / q) / b.val;
            return d;
        }
        case w2: {
            double y = p2_.delta * (bracket_x(x) - p2_.M * t);
            double q = bracket(xi);
            double a = p2_.p / (p2_.p + 1.0 - gamma_);
            Blend b = blend_eval(y, q, p2_.p, a, p2_.p + 1.0 - gamma_, chi_);
            double dy_dt = -p2_.delta * p2_.M;
            double dy_dx = p2_.delta * x / bracket_x(x);
            // log w2 = eps * blend, so log-derivatives skip the division by w
            d.dt = p2_.eps * b.d_y * dy_dt;
            d.dx = p2_.eps * b.d_y * dy_dx;
            for (int i = 0; i < 3; ++i) d.dxi[i] = p2_.eps * b.d_q * (xi[i] / q);
            return d;
        }
        case w3: {
            double q = bracket(xi);
            double f = p3_.eps_hat * p3_.p1 * std::pow(q, p3_.p1 - 2.0);
            for (int i = 0; i < 3; ++i) d.dxi[i] = f * xi[i];
            return d;
        }
    }
    throw PreconditionError("WeightEvaluator: bad kind");
}

double WeightEvaluator::ratio_check(double t, double x, const Vec3& xi, const Vec3& xi_s) const {
    return std::abs(std::expm1(log_w(t, x, xi) - log_w(t, x, xi_s)));
}

double WeightEvaluator::ratio_over_envelope(double t, double x, const Vec3& xi,
                                            const Vec3& xi_s) const {
    double r = ratio_check(t, x, xi, xi_s);
    double diff = std::abs(norm2(xi) - norm2(xi_s));
    double env;
    switch (kind_) {
        case w1:
            env = std::pow(p1_.D, -std::min(p1_.p, 2.0)) * std::pow(1.0 + diff, 0.5 * p1_.p);
            break;
        case w2: {
            double u = p2_.eps * std::pow(diff, 0.5 * p2_.p);
            env = u * std::exp(u);
            break;
        }
        case w3: {
            double u = p3_.eps_hat * std::pow(diff, 0.5 * p3_.p1);
            env = u * std::exp(u);
            break;
        }
        default:
            throw PreconditionError("WeightEvaluator: bad kind");
    }
    if (env == 0.0) return (r == 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
    return r / env;
}

std::vector<double> nu_tilde(const WeightEvaluator& w, const NuTable& nu, const VelocityGrid& grid,
                             double t, double x) {
    if (static_cast<int>(nu.values.size()) != grid.size())
        throw PreconditionError("nu_tilde: rate table does not match grid");
    if (w.kind() == WeightEvaluator::w1) {
        // declared validity flag for the damping regime
        double dm = w.p1().delta * w.p1().M;
        if (!(dm < 0.25 * nu.nu0_est))
            throw PreconditionError("weight regime: delta*M = " + fmt17(dm) +
                                    " must stay below nu0_est/4 = " + fmt17(0.25 * nu.nu0_est));
    }
    std::vector<double> out(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        LogDerivs d = w.log_derivatives(t, x, grid.nodes[i]);
        double damped = nu.values[i] - (d.dt + grid.nodes[i][0] * d.dx);
        if (damped < 0.5 * nu.values[i])
            throw NumericalError("damping regime violated at node " + std::to_string(i) +
                                 ": nu_tilde = " + fmt17(damped) + " < nu/2 = " +
                                 fmt17(0.5 * nu.values[i]));
        out[i] = damped;
    }
    return out;
}

}  // namespace kinlab
