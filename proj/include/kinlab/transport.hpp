#pragma once
// Damped transport along exact characteristics on the 1D-x slab (velocity
// stays 3D; transport uses the first velocity component), the commuting
// derivative t*grad_x + grad_xi, and the sup-bound helper for the
// time-decay/velocity-decay trade-off.

#include "kinlab/weights.hpp"

namespace kinlab {

// Uniform x-nodes on [-X, X], endpoints included; fields vanish outside.
struct SlabDomain {
    int n_x = 0;
    double X = 0.0;

    double dx() const { return 2.0 * X / (n_x - 1); }
    double x_at(int i) const { return -X + i * dx(); }
    void validate() const {
        if (n_x < 2 || !(X > 0.0)) throw PreconditionError("SlabDomain: need n_x >= 2, X > 0");
    }
};

// rows: velocity nodes, cols: x nodes
using SlabField = Eigen::MatrixXd;

// Linear interpolation in x with zero extension.
double slab_interp(const SlabDomain& dom, const SlabField& f, int v_row, double x);

struct EvolutionStep {
    double s = 0.0;
    double t = 0.0;
    const WeightEvaluator* weight = nullptr;  // null means w == 1
    const NuTable* nu = nullptr;
    int quad_order = 4;        // Gauss-Legendre order per substep of the line integral
    double max_substep = 0.25;

    void validate() const {
        if (!(t >= s)) throw PreconditionError("EvolutionStep: t >= s required");
        if (!nu) throw PreconditionError("EvolutionStep: collision rate table required");
    }
};

// q at time s -> damped-transported field at time t:
//   (S q)(t,x,xi) = q(x - (t-s) xi_1, xi) exp(-int_s^t nu_tilde(r, x-(t-r)xi_1, xi) dr)
SlabField apply_S(const SlabDomain& dom, const VelocityGrid& grid, const EvolutionStep& step,
                  const SlabField& q);

// Component c of (t grad_x + grad_xi) by centered differences (zero extension):
// c = 0 couples t d_x with d_{xi_1}; c = 1,2 are pure velocity derivatives.
SlabField apply_Dt(const SlabDomain& dom, const VelocityGrid& grid, const SlabField& f, double t,
                   int component);

// One free-transport step (no damping), used by the commutation study.
SlabField free_transport(const SlabDomain& dom, const VelocityGrid& grid, const SlabField& f,
                         double dt);

// max over u >= 0 of e^{-t(1+u)^{-alpha}} (1+u)^{-lambda}, divided by
// (1+t)^{-lambda/alpha}; golden-section search on log(1+u).
double caflisch_sup_bound(double alpha, double lambda, double t);

// sup over (x, xi) of <xi>^beta |f|
double slab_sup_norm(const VelocityGrid& grid, const SlabField& f, double beta);
// L^2 over (x, xi) with quadrature weights
double slab_l2_norm(const SlabDomain& dom, const VelocityGrid& grid, const SlabField& f);

}  // namespace kinlab
