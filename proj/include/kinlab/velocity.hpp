#pragma once
// Truncated 3D velocity quadrature, reference Maxwellian, the five-dimensional
// conserved-mode basis with its projections, and the weighted velocity norms.

#include <Eigen/Dense>
#include <functional>

#include "kinlab/util.hpp"

namespace kinlab {

constexpr double kTwoPi = 6.283185307179586477;

// (2pi)^{-3/2} e^{-|xi|^2/2}
inline double maxwellian(const Vec3& xi) {
    return 0.06349363593424096978 * std::exp(-0.5 * norm2(xi));
}
inline double sqrt_maxwellian(const Vec3& xi) {
    return 0.25197630354188742712 * std::exp(-0.25 * norm2(xi));
}

// Uniform tensor lattice offset by half a spacing; even per-axis count keeps
// the node set symmetric under xi -> -xi and excludes the origin, so every
// node pair keeps distance >= one spacing from the kernel singularity.
struct VelocityGrid {
    int n_axis = 0;            // nodes per axis
    double radius = 0.0;       // truncation radius R (box half-width)
    double h = 0.0;            // spacing = 2R/N
    std::vector<Vec3> nodes;   // size N^3, lexicographic in (i,j,k)
    std::vector<double> weights;
    double mass_defect = 0.0;  // 1 - sum w*M, reported not hidden

    int size() const { return static_cast<int>(nodes.size()); }
    double axis_coord(int i) const { return -radius + (i + 0.5) * h; }
    int flat(int i, int j, int k) const { return (i * n_axis + j) * n_axis + k; }

    // Trilinear interpolation of a grid vector at an arbitrary velocity;
    // zero outside the truncated box.
    double interpolate(const Eigen::VectorXd& g, const Vec3& xi) const;
    // Interpolation stencil: up to 8 (index, coefficient) pairs; empty part
    // of the stencil (outside the box) is dropped (zero extension).
    int stencil(const Vec3& xi, int idx[8], double coef[8]) const;

    std::uint64_t hash() const;
};

VelocityGrid build_grid(int n_axis, double radius);

// Quadrature inner product sum w_i a_i b_i.
double grid_dot(const VelocityGrid& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Conserved-mode basis: spans {M^{1/2}, xi_i M^{1/2}, (|xi|^2-3) M^{1/2}},
// re-orthonormalized on the grid (Gram-Schmidt in the quadrature inner product).
struct MacroBasis {
    std::array<Eigen::VectorXd, 5> chi;
    Eigen::VectorXd project(const VelocityGrid& grid, const Eigen::VectorXd& g) const;
    Eigen::VectorXd project_micro(const VelocityGrid& grid, const Eigen::VectorXd& g) const;
};

MacroBasis build_macro_basis(const VelocityGrid& grid);

struct NormSpec {
    enum Kind { LqBeta, Lsigma2, LinfWeighted } kind = LqBeta;
    double q = 2.0;     // order; infinity() for sup norm
    double beta = 0.0;  // polynomial weight exponent on <xi>
    double gamma = 0.0; // only Lsigma2: inner weight <xi>^{gamma/2}
    std::function<double(const Vec3&)> m;  // only LinfWeighted

    static NormSpec Lq(double q, double beta = 0.0) { return {LqBeta, q, beta, 0.0, {}}; }
    static NormSpec Linf(double beta = 0.0) {
        return {LqBeta, std::numeric_limits<double>::infinity(), beta, 0.0, {}};
    }
    static NormSpec sigma2(double gamma) { return {Lsigma2, 2.0, 0.0, gamma, {}}; }
    static NormSpec weighted_sup(std::function<double(const Vec3&)> m) {
        return {LinfWeighted, std::numeric_limits<double>::infinity(), 0.0, 0.0, std::move(m)};
    }
};

double weighted_norm(const VelocityGrid& grid, const Eigen::VectorXd& g, const NormSpec& spec);

}  // namespace kinlab
