// scratch driver: brute-force one row integral of K against sqrt-Maxwellian
// to decide whether the assembled matrix or the continuum identity is at fault
#include <cstdio>

#include "kinlab/collision.hpp"
#include "kinlab/quadrature.hpp"

using namespace kinlab;

int main() {
    VelocityGrid g = build_grid(8, 4.0);
    CollisionConfig c;
    c.gamma = -0.5;
    LinearOperator L = assemble_L(g, c);
    MacroBasis b = build_macro_basis(g);
    Eigen::VectorXd r0 = apply_L(L, b.chi[0]);

    const GaussRule& q = gauss_legendre(6);
    for (int probe : {g.flat(4, 4, 4), g.flat(4, 4, 5), g.flat(3, 4, 5), g.flat(4, 5, 6)}) {
        Vec3 xi = g.nodes[probe];
        // dense reference: GL6^3 per cell, spherical rule on the diagonal cell
        double ref = 0.0;
        for (int j = 0; j < g.size(); ++j) {
            if (j == probe) continue;
            Vec3 cj = g.nodes[j];
            double acc = 0.0;
            for (int a = 0; a < 6; ++a)
                for (int bb = 0; bb < 6; ++bb)
                    for (int cc = 0; cc < 6; ++cc) {
                        Vec3 p{cj[0] + 0.5 * g.h * q.x[a], cj[1] + 0.5 * g.h * q.x[bb],
                               cj[2] + 0.5 * g.h * q.x[cc]};
                        acc += q.w[a] * q.w[bb] * q.w[cc] * kernel(xi, p, c) *
                               sqrt_maxwellian(p);
                    }
            ref += acc * g.weights[j] / 8.0;
        }
        // diagonal cell in spherical coordinates, integrand includes sqrtM
        const GaussRule& rad = gauss_legendre(12);
        const GaussRule& pol = gauss_legendre(16);
        const int naz = 16;
        double diag = 0.0;
        for (int ip = 0; ip < 16; ++ip) {
            double mu = pol.x[ip], smu = std::sqrt(1.0 - mu * mu);
            for (int ia = 0; ia < naz; ++ia) {
                double phi = kTwoPi * (ia + 0.5) / naz;
                Vec3 dir{smu * std::cos(phi), smu * std::sin(phi), mu};
                double amax =
                    std::max({std::abs(dir[0]), std::abs(dir[1]), std::abs(dir[2])});
                double rmax = 0.5 * g.h / amax;
                double ray = 0.0;
                for (int ir = 0; ir < 12; ++ir) {
                    double r = 0.5 * rmax * (1.0 + rad.x[ir]);
                    Vec3 p = add(xi, scale(dir, r));
                    ray += 0.5 * rmax * rad.w[ir] * r * r * kernel(xi, p, c) *
                           sqrt_maxwellian(p);
                }
                diag += pol.w[ip] * (kTwoPi / naz) * ray;
            }
        }
        ref += diag;
        ref /= 2.0;  // chi0 normalization: chi0 = sqrtM / ||sqrtM|| ~ sqrtM * 1 (norm 1)
        ref *= 2.0;  // undo; keep raw integral of k * sqrtM

        double row = 0.0;
        for (int j = 0; j < g.size(); ++j) row += L.K.op(probe, j) * sqrt_maxwellian(g.nodes[j]);
        double nu_sm = L.nu.values[probe] * sqrt_maxwellian(xi);
        std::printf(
            "node %d |xi|=%.3f: row=%.6f ref=%.6f nu*sm=%.6f  row-ref=%.3e ref-nu=%.3e "
            "resid(chi0)=%.3e\n",
            probe, norm(xi), row, ref, nu_sm, row - ref, ref - nu_sm, r0[probe]);
    }
    return 0;
}
