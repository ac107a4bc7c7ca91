#pragma once
// The three space-time-velocity weights, their analytic logarithmic
// derivatives, the smooth cutoff profile, the weight-ratio diagnostics, and
// the damped collision rate nu_tilde.  Spatial variable is the 1D slab
// coordinate; <x> = sqrt(1+x^2).

#include <string>
#include <vector>

#include "kinlab/collision.hpp"

namespace kinlab {

// Quintic smoothstep profile: 1 for s <= 1, 0 for s >= 2, C^2 monotone
// non-increasing in between; scale R gives chi_R(s) = chi(s/R).
struct CutoffChi {
    double scale = 1.0;

    double value(double s) const {
        double u = s / scale - 1.0;
        if (u <= 0.0) return 1.0;
        if (u >= 1.0) return 0.0;
        return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    }
    double deriv(double s) const {  // d/ds
        double u = s / scale - 1.0;
        if (u <= 0.0 || u >= 1.0) return 0.0;
        double v = 1.0 - u;
        return -30.0 * u * u * v * v / scale;
    }
    double second(double s) const {
        double u = s / scale - 1.0;
        if (u <= 0.0 || u >= 1.0) return 0.0;
        return -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (scale * scale);
    }
};

struct W1Params {
    double delta = 1e-3;
    double M = 10.0;
    double D = 10.0;
    double p = 2.0;
    void validate() const {
        if (!(delta > 0.0 && M > 0.0 && D > 0.0 && p >= 1.0))
            throw PreconditionError("W1Params: need delta>0, M>0, D>0, p>=1");
    }
};
struct W2Params {
    double eps = 1e-2;
    double delta = 1e-3;
    double M = 10.0;
    double p = 2.0;
    void validate() const {
        if (!(eps > 0.0 && delta > 0.0 && M > 0.0 && p > 0.0 && p <= 2.0))
            throw PreconditionError("W2Params: need eps,delta,M>0 and 0<p<=2");
    }
};
struct W3Params {
    double eps_hat = 5e-3;
    double p1 = 2.0;
    void validate() const {
        if (!(eps_hat >= 0.0 && p1 > 0.0 && p1 <= 2.0))
            throw PreconditionError("W3Params: need eps_hat>=0 and 0<p1<=2");
    }
};

// Logarithmic derivatives at a point: (d_t w)/w, (d_x w)/w (slab x), and
// (grad_xi w)/w.
struct LogDerivs {
    double dt = 0.0;
    double dx = 0.0;
    Vec3 dxi{0.0, 0.0, 0.0};
};

class WeightEvaluator {
  public:
    enum Kind { w1, w2, w3 };

    static WeightEvaluator make_w1(const W1Params& p, double gamma);
    static WeightEvaluator make_w2(const W2Params& p, double gamma);
    static WeightEvaluator make_w3(const W3Params& p);

    // log w: always finite and safe to evaluate
    double log_w(double t, double x, const Vec3& xi) const;
    // w itself: throws NumericalError past the floating-point guard |log w|>300
    double value(double t, double x, const Vec3& xi) const;
    LogDerivs log_derivatives(double t, double x, const Vec3& xi) const;

    // |w(xi)/w(xi*) - 1| at fixed (t,x)
    double ratio_check(double t, double x, const Vec3& xi, const Vec3& xi_s) const;
    // the same divided by the kind-specific envelope in ||xi|^2-|xi*|^2|
    double ratio_over_envelope(double t, double x, const Vec3& xi, const Vec3& xi_s) const;

    Kind kind() const { return kind_; }
    double gamma() const { return gamma_; }
    const W1Params& p1() const { return p1_; }
    const W2Params& p2() const { return p2_; }
    const W3Params& p3() const { return p3_; }

  private:
    WeightEvaluator() = default;
    Kind kind_ = w3;
    double gamma_ = -0.5;
    W1Params p1_;
    W2Params p2_;
    W3Params p3_;
    CutoffChi chi_;
};

// Trivial weight (w identically 1), handy for the transport tests.
WeightEvaluator unit_weight();

// nu_tilde_i = nu_i - (d_t w + xi_1 d_x w)/w at (t,x); enforces the damping
// regime nu_tilde >= nu/2 and names the first offending node otherwise.
std::vector<double> nu_tilde(const WeightEvaluator& w, const NuTable& nu, const VelocityGrid& grid,
                             double t, double x);

}  // namespace kinlab
