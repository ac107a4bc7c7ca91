// scratch driver: localize the gamma tensor / bilinear mismatch and the
// null-mode residual composition
#include <cstdio>

#include "kinlab/collision.hpp"

using namespace kinlab;

int main() {
    VelocityGrid g = build_grid(6, 3.0);
    CollisionConfig c;
    c.gamma = -0.5;
    c.omega_polar = 4;
    c.omega_azimuth = 4;

    GammaTensor T = build_gamma_tensor(g, c);
    Eigen::VectorXd f(g.size()), h(g.size());
    for (int i = 0; i < g.size(); ++i) {
        f[i] = sqrt_maxwellian(g.nodes[i]) * (1.0 + 0.2 * g.nodes[i][1]);
        h[i] = sqrt_maxwellian(g.nodes[i]) * (1.0 - 0.1 * norm2(g.nodes[i]));
    }
    Eigen::VectorXd dg = gamma_bilinear(g, c, f, h, GammaPart::gain);
    Eigen::VectorXd tg = T.apply(f, h, GammaPart::gain);
    Eigen::VectorXd dl = gamma_bilinear(g, c, f, h, GammaPart::loss);
    Eigen::VectorXd tl = T.apply(f, h, GammaPart::loss);
    std::printf("gain direct norm %.6g tensor %.6g diff %.6g\n", dg.norm(), tg.norm(),
                (dg - tg).norm());
    std::printf("loss direct norm %.6g tensor %.6g diff %.6g\n", dl.norm(), tl.norm(),
                (dl - tl).norm());
    int worst = 0;
    (dg - tg).cwiseAbs().maxCoeff(&worst);
    std::printf("worst gain node %d: direct %.9g tensor %.9g\n", worst, dg[worst], tg[worst]);

    // null-mode composition at N=8
    VelocityGrid g8 = build_grid(8, 4.0);
    CollisionConfig c8;
    c8.gamma = -0.5;
    for (bool corr : {true, false}) {
        c8.lattice_correction = corr;
        LinearOperator L = assemble_L(g8, c8);
        MacroBasis b = build_macro_basis(g8);
        for (int m = 0; m < 5; ++m) {
            Eigen::VectorXd r = apply_L(L, b.chi[m]);
            std::printf("corr=%d m=%d resid %.6g\n", int(corr), m,
                        std::sqrt(grid_dot(g8, r, r)));
        }
        // residual L2 mass by radial shell for chi0 and chi4
        for (int m : {0, 4}) {
            Eigen::VectorXd r = apply_L(L, b.chi[m]);
            double shell[8] = {};
            for (int i = 0; i < g8.size(); ++i) {
                int s = std::min(7, int(norm(g8.nodes[i])));
                shell[s] += g8.weights[i] * r[i] * r[i];
            }
            std::printf("  m=%d shell sqrt-mass:", m);
            for (int s = 0; s < 8; ++s) std::printf(" %.3g", std::sqrt(shell[s]));
            std::printf("\n");
        }
    }

    // loss part alone vs its closed discrete form (midpoint nu-hat + k1 sum)
    {
        VelocityGrid gg = build_grid(8, 4.0);
        CollisionConfig cc;
        cc.gamma = -0.5;
        Eigen::VectorXd f(gg.size()), sm2(gg.size());
        for (int i = 0; i < gg.size(); ++i) {
            f[i] = gg.nodes[i][0] * gg.nodes[i][1] * sqrt_maxwellian(gg.nodes[i]);
            sm2[i] = 2.0 * sqrt_maxwellian(gg.nodes[i]);
        }
        Eigen::VectorXd lossG = gamma_bilinear(gg, cc, f, sm2, GammaPart::loss);
        Eigen::VectorXd want(gg.size());
        for (int i = 0; i < gg.size(); ++i) {
            double acc = 0.0;
            for (int j = 0; j < gg.size(); ++j) {
                if (j == i) continue;
                Vec3 d = sub(gg.nodes[i], gg.nodes[j]);
                double vg = std::pow(norm(d), cc.gamma);
                acc += gg.weights[j] * (k1(gg.nodes[i], gg.nodes[j], cc) * f[j] +
                                        kTwoPi * vg * maxwellian(gg.nodes[j]) * f[i]);
            }
            want[i] = acc;
        }
        std::printf("loss check: |G_loss - closed| = %.4g rel %.4g\n", (lossG - want).norm(),
                    (lossG - want).norm() / want.norm());
    }

    // convergence of the Gamma(f, 2 sqrtM) = L f identity in grid and omega
    for (auto [n, R, om] :
         {std::tuple{6, 3.0, 8}, {8, 4.0, 8}, {12, 4.5, 8}, {16, 4.0, 8}}) {
        VelocityGrid gg = build_grid(n, R);
        CollisionConfig cc;
        cc.gamma = -0.5;
        cc.omega_polar = om;
        cc.omega_azimuth = om;
        LinearOperator L = assemble_L(gg, cc);
        Eigen::VectorXd f(gg.size()), sm2(gg.size());
        for (int i = 0; i < gg.size(); ++i) {
            f[i] = gg.nodes[i][0] * gg.nodes[i][1] * sqrt_maxwellian(gg.nodes[i]);
            sm2[i] = 2.0 * sqrt_maxwellian(gg.nodes[i]);
        }
        Eigen::VectorXd lhs = gamma_bilinear(gg, cc, f, sm2, GammaPart::full);
        Eigen::VectorXd rhs = apply_L(L, f);
        double rel = std::sqrt(grid_dot(gg, lhs - rhs, lhs - rhs)) /
                     std::sqrt(grid_dot(gg, rhs, rhs));
        std::printf("identity N=%d R=%g om=%d rel=%.4g  |rhs|=%.4g\n", n, R, om, rel,
                    std::sqrt(grid_dot(gg, rhs, rhs)));
    }

    // scaling of the null residual with resolution
    for (auto [n, R] : {std::pair{8, 4.0}, {12, 6.0}, {16, 6.0}}) {
        VelocityGrid gg = build_grid(n, R);
        CollisionConfig cc;
        cc.gamma = -0.5;
        LinearOperator L = assemble_L(gg, cc);
        MacroBasis b = build_macro_basis(gg);
        std::printf("N=%d R=%g resid:", n, R);
        for (int m = 0; m < 5; ++m) {
            Eigen::VectorXd r = apply_L(L, b.chi[m]);
            std::printf(" %.4g", std::sqrt(grid_dot(gg, r, r)));
        }
        std::printf("  nu0_est=%.4g\n", L.nu.nu0_est);
    }
    return 0;
}
