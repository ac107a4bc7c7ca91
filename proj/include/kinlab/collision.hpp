#pragma once
// The collision rate nu(xi), the loss/gain kernels, the discrete integral
// operator K, the linearized operator L = -nu + K, weight conjugation, and
// the bilinear form Gamma = Gamma_gain - Gamma_loss.

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "kinlab/velocity.hpp"

namespace kinlab {

struct CollisionConfig {
    double gamma = -0.5;      // velocity-kernel exponent, soft range (-2,0)
    double kappa = 0.5;       // only used by the gain-kernel envelope check
    int omega_polar = 8;      // sphere rule: Gauss-Legendre nodes in cos(theta)
    int omega_azimuth = 8;    // uniform azimuth nodes
    int radial_order = 32;    // base order for the 1D radial quadratures
    bool lattice_correction = true;  // near-diagonal cell-average correction

    void validate() const {
        if (!(gamma > -2.0 && gamma <= 1.0))
            throw PreconditionError("CollisionConfig: gamma must lie in (-2,1]");
        if (!(kappa > 0.0 && kappa < 1.0))
            throw PreconditionError("CollisionConfig: kappa must lie in (0,1)");
    }
    std::uint64_t hash() const;
};

struct NuTable {
    std::vector<double> values;
    std::string method;   // quadrature descriptor
    double nu0_est = 0.0; // min over grid of nu/<xi>^gamma
    double nu1_est = 0.0; // max over grid of nu/<xi>^gamma
};

// Pointwise collision rate; radial quadrature with built-in refinement check.
double nu_at(const Vec3& xi, const CollisionConfig& cfg);
double nu_at_speed(double speed, const CollisionConfig& cfg);

NuTable compute_nu(const VelocityGrid& grid, const CollisionConfig& cfg);

// Loss kernel, closed form.
double k1(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg);

// Gain kernel: exact reduction of the two sphere integrals to the plane
// orthogonal to xi*-xi (Gaussian prefactor in closed form) followed by a 1D
// radial quadrature with a scaled Bessel-I0 factor.
double k2(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg);
// Same with a doubled-order refinement estimate (for convergence reporting).
std::pair<double, double> k2_refined(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg);

// Combined kernel -k1 + k2.
double kernel(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg);

// Upper envelope for the gain kernel used by the bound audits: the Gaussian
// factor exp(-(1-kappa)/8 [ (|xi|^2-|xi*|^2)^2/|xi-xi*|^2 + |xi-xi*|^2 ])
// times the gamma-branch amplitude (log branch at gamma = -1, floored near
// |xi-xi*| = 1 where the log vanishes).
double k2_envelope(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg);

struct KernelMatrix {
    Eigen::MatrixXd op;  // entries k(xi_i, xi_j) * weight_j
    std::uint64_t grid_hash = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t checksum() const;
};

struct LinearOperator {
    NuTable nu;
    KernelMatrix K;
    // L2 norms of (K - nu) applied to the five conserved modes before the
    // conservative closure; measures the raw quadrature quality
    std::array<double, 5> null_residual_raw{};
};

LinearOperator assemble_L(const VelocityGrid& grid, const CollisionConfig& cfg);

inline Eigen::VectorXd apply_L(const LinearOperator& L, const Eigen::VectorXd& g) {
    Eigen::VectorXd out = L.K.op * g;
    for (int i = 0; i < g.size(); ++i) out[i] -= L.nu.values[i] * g[i];
    return out;
}

// K_w = w K w^{-1}: entrywise rescale by per-node weight values.
KernelMatrix conjugate_Kw(const KernelMatrix& K, const std::vector<double>& w_nodes);

// KernelMatrix persistence (header + row-major doubles); the loader rejects
// grid/config mismatches and corrupted payloads.
void save_kernel_matrix(const std::string& path, const KernelMatrix& K, const VelocityGrid& grid,
                        const CollisionConfig& cfg);
std::optional<KernelMatrix> load_kernel_matrix(const std::string& path, const VelocityGrid& grid,
                                               const CollisionConfig& cfg);

enum class GammaPart { gain, loss, full };

// Direct (xi*, omega) quadrature of the bilinear collision form on the grid;
// post-collision velocities are evaluated by trilinear interpolation (zero
// outside the truncated box).
Eigen::VectorXd gamma_bilinear(const VelocityGrid& grid, const CollisionConfig& cfg,
                               const Eigen::VectorXd& g, const Eigen::VectorXd& h, GammaPart part);

// Precomputed dense third-order tensor for repeated Gamma evaluations on a
// small grid (the slab experiments): G_i = sum_{ab} T[i](a,b) g_a h_b.
struct GammaTensor {
    int n = 0;
    std::vector<Eigen::MatrixXd> gain;   // per output node, n x n
    Eigen::MatrixXd loss_conv;           // P: (P g)(xi_i) = sum_j |xi_i-xi_j|^g M^{1/2}_j w_j g_j
    Eigen::VectorXd sqrt_m;              // M^{1/2} at nodes

    Eigen::VectorXd apply(const Eigen::VectorXd& g, const Eigen::VectorXd& h, GammaPart part) const;
};

GammaTensor build_gamma_tensor(const VelocityGrid& grid, const CollisionConfig& cfg);

// Collision-invariance probe in the pre-substitution (weak) form: the same
// (xi*, omega) quadrature as gamma_bilinear applied to
// <psi sqrtM, Gamma(g,h)> with psi evaluated analytically at the
// post-collision velocities, so g and h are sampled at the nodes only.  For
// psi in {1, xi_1, xi_2, xi_3, |xi|^2} the integrand cancels pointwise under
// the i<->j symmetry of the rule (even azimuth count required), leaving pure
// roundoff; value[m] comes with the absolute-term scale[m] it should be
// compared against.  The defect of the interpolating gamma_bilinear against
// these zeros isolates the post-collision interpolation/truncation error.
struct InvarianceProbe {
    std::array<double, 5> value{};
    std::array<double, 5> scale{};
};
InvarianceProbe gamma_invariance_weak(const VelocityGrid& grid, const CollisionConfig& cfg,
                                      const Eigen::VectorXd& g, const Eigen::VectorXd& h);

}  // namespace kinlab
