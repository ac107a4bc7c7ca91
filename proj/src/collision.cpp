#include "kinlab/collision.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "kinlab/quadrature.hpp"

namespace kinlab {

namespace {

const int kGslOff = [] {
    gsl_set_error_handler_off();
    return 0;
}();

constexpr double kSqrt2Pi = 2.50662827463100050242;
constexpr double kInvTwoPiPow32 = 0.06349363593424096978;  // (2pi)^{-3/2}

// ---- collision rate ----------------------------------------------------

// Radial integrand of nu at speed s:
//   nu(s) = sqrt(2pi)/s * Int_0^inf r^{gamma+1} (e^{-(r-s)^2/2}-e^{-(r+s)^2/2}) dr
// (the angular integral of the off-center Gaussian is analytic);
// at s=0 the bracket degenerates to 2 r e^{-r^2/2}.
double nu_quad(double s, double gamma, int order) {
    auto radial = [&](double r) -> double {
        double bracket_term;
        if (s < 1e-8)
            bracket_term = 2.0 * r * std::exp(-0.5 * r * r);
        else
            bracket_term = std::exp(-0.5 * (r - s) * (r - s)) - std::exp(-0.5 * (r + s) * (r + s));
        return std::pow(r, gamma + 1.0) * bracket_term;
    };
    // First panel [0,1] under a tanh-sinh map (the double-exponential node
    // clustering integrates the algebraic r^{gamma+1} endpoint singularity at
    // any gamma > -2, where a fixed polynomial grading stalls near gamma = -2),
    // then unit panels out to where the Gaussian is dead.
    double total = 0.0;
    {
        const double h = 4.0 / order;
        for (int k = -order; k <= order; ++k) {
            double t = k * h;
            double u = 1.5707963267948966 * std::sinh(t);
            double x = 1.0 / (1.0 + std::exp(-2.0 * u));
            double w = h * 3.141592653589793238 * std::cosh(t) * x * (1.0 - x);
            if (x <= 0.0 || x >= 1.0 || w == 0.0) continue;
            total += w * radial(x);
        }
    }
    total += gl_integrate_panels(radial, 1.0, s + 12.0, order / 2 + 4, 1.0);
    double pref = (s < 1e-8) ? kSqrt2Pi : kSqrt2Pi / s;
    return pref * total;
}

// ---- gain kernel radial factor ----------------------------------------

struct JParams {
    double r2;     // |xi-xi*|^2
    double rho0;   // distance from xi to the line through xi and xi*
    double expo;   // (gamma-1)/2
};

double j_integrand(double rho, void* params) {
    const JParams& p = *static_cast<const JParams*>(params);
    double d = rho - p.rho0;
    return rho * std::pow(p.r2 + rho * rho, p.expo) * std::exp(-0.5 * d * d) *
           gsl_sf_bessel_I0_scaled(rho * p.rho0);
}

double j_factor(double r, double rho0, double gamma, int order, bool refine_pass) {
    JParams p{r * r, rho0, 0.5 * (gamma - 1.0)};
    double hi = rho0 + 9.0;
    double lo = std::max(0.0, rho0 - 9.0);
    if (r < 0.05) {
        // At separations far below the Gaussian scale the integrand carries
        // structure at rho ~ r that an adaptive rule cannot bridge across
        // many decades (and for gamma < -1 that inner region dominates,
        // J ~ r^{gamma+1}). Split at rho = c: the inner part in the scaled
        // variable rho = r sinh u is smooth and exponential in u, the outer
        // part sees a plain power and stays with the adaptive rule.
        double c = std::min(1.0, hi);
        double inner = r * r *
                       gl_integrate_panels(
                           [&](double u) {
                               double sh = std::sinh(u), ch = std::cosh(u);
                               double rho = r * sh;
                               double d = rho - rho0;
                               return sh * ch * std::pow(p.r2 * ch * ch, p.expo) *
                                      std::exp(-0.5 * d * d) *
                                      gsl_sf_bessel_I0_scaled(rho * rho0);
                           },
                           0.0, std::asinh(c / r), 16, 2.0);
        double outer = 0.0;
        if (hi > std::max(lo, c)) {
            gsl_integration_workspace* ws = gsl_integration_workspace_alloc(512);
            gsl_function f{&j_integrand, &p};
            double abserr = 0.0;
            double epsrel = refine_pass ? 1e-11 : 1e-9;
            int status = gsl_integration_qags(&f, std::max(lo, c), hi, 1e-14, epsrel, 512, ws,
                                              &outer, &abserr);
            gsl_integration_workspace_free(ws);
            if (status != 0 && std::abs(abserr) > 1e-6 * std::abs(outer))
                throw NumericalError("gain kernel radial quadrature did not converge");
        }
        return kTwoPi * (inner + outer);
    }
    if (r >= 2.0) {
        double panel = refine_pass ? 1.0 : 2.0;
        int ord = refine_pass ? order / 2 + 8 : order / 2;
        return kTwoPi *
               gl_integrate_panels([&](double rho) { return j_integrand(rho, &p); }, lo, hi,
                                   std::max(ord, 12), panel);
    }
    // At moderate and small separations the power factor develops structure
    // near rho ~ 0 on the scale of r: adaptive quadrature.
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(512);
    gsl_function f{&j_integrand, &p};
    double result = 0.0, abserr = 0.0;
    double epsrel = refine_pass ? 1e-11 : 1e-9;
    int status = gsl_integration_qags(&f, lo, hi, 1e-14, epsrel, 512, ws, &result, &abserr);
    gsl_integration_workspace_free(ws);
    if (status != 0 && std::abs(abserr) > 1e-6 * std::abs(result))
        throw NumericalError("gain kernel radial quadrature did not converge");
    return kTwoPi * result;
}

struct PairGeometry {
    double r;      // |xi*-xi|
    double a_sq;   // (|xi|^2-|xi*|^2)^2
    double rho0;   // |component of xi orthogonal to xi*-xi|
};

PairGeometry pair_geometry(const Vec3& xi, const Vec3& xi_s) {
    Vec3 z = sub(xi_s, xi);
    double r2 = norm2(z);
    if (r2 == 0.0) throw PreconditionError("kernel evaluation requires xi != xi*");
    double r = std::sqrt(r2);
    double a = norm2(xi) - norm2(xi_s);
    double along = dot(xi, z) / r;
    double perp2 = std::max(0.0, norm2(xi) - along * along);
    return {r, a * a, std::sqrt(perp2)};
}

double k2_eval(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg, bool refine_pass) {
    PairGeometry g = pair_geometry(xi, xi_s);
    double pref = 4.0 * kInvTwoPiPow32 / g.r *
                  std::exp(-g.a_sq / (8.0 * g.r * g.r) - g.r * g.r / 8.0);
    return pref * j_factor(g.r, g.rho0, cfg.gamma, cfg.radial_order, refine_pass);
}

// ---- tabulated gain kernel for assembly --------------------------------
//
// Assembling the operator needs millions of k2 evaluations, and the
// near-diagonal cells need intra-cell quadrature of the singular kernel
// (plain midpoint badly undercounts the ~|z|^{-1} mass there).  The radial
// factor J(r, rho0) is smooth in (log r, rho0) — every r-dependence enters
// through r^2 or r^{gamma+1}, both analytic in log r — so a bicubic table
// makes each evaluation ~100 ns at ~1e-6 relative accuracy.
struct JTable {
    double v0, dv;
    int nv;
    double drho;
    int nrho;
    std::vector<double> val;  // iv * nrho + ir

    static double cubic(double f0, double f1, double f2, double f3, double u) {
        // Catmull-Rom through f1, f2 at u in [0,1]
        double a = -0.5 * f0 + 1.5 * f1 - 1.5 * f2 + 0.5 * f3;
        double b = f0 - 2.5 * f1 + 2.0 * f2 - 0.5 * f3;
        double c = 0.5 * (f2 - f0);
        return ((a * u + b) * u + c) * u + f1;
    }

    double at(double r, double rho0) const {
        double sv = (std::log(r) - v0) / dv;
        double sr = rho0 / drho;
        int iv = std::clamp(static_cast<int>(std::floor(sv)), 1, nv - 3);
        int ir = std::clamp(static_cast<int>(std::floor(sr)), 1, nrho - 3);
        double uv = sv - iv, ur = sr - ir;
        double rows[4];
        for (int k = -1; k <= 2; ++k) {
            const double* row = &val[(iv + k) * nrho + (ir - 1)];
            rows[k + 1] = cubic(row[0], row[1], row[2], row[3], ur);
        }
        return cubic(rows[0], rows[1], rows[2], rows[3], uv);
    }
};

JTable build_jtable(const CollisionConfig& cfg, double r_min, double r_max, double rho_max) {
    JTable t;
    t.dv = 0.025;
    t.v0 = std::log(r_min) - 2.0 * t.dv;
    t.nv = static_cast<int>(std::ceil((std::log(r_max) - t.v0) / t.dv)) + 4;
    t.drho = 0.025;
    t.nrho = static_cast<int>(std::ceil(rho_max / t.drho)) + 4;
    t.val.resize(static_cast<size_t>(t.nv) * t.nrho);
#pragma omp parallel for schedule(dynamic, 8)
    for (int iv = 0; iv < t.nv; ++iv) {
        double r = std::exp(t.v0 + iv * t.dv);
        for (int ir = 0; ir < t.nrho; ++ir)
            t.val[static_cast<size_t>(iv) * t.nrho + ir] =
                j_factor(r, ir * t.drho, cfg.gamma, cfg.radial_order, false);
    }
    return t;
}

// full kernel -k1 + k2 with the tabulated radial factor
double kernel_tab(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg, const JTable& jt) {
    PairGeometry g = pair_geometry(xi, xi_s);
    double k1v = kTwoPi * std::pow(g.r, cfg.gamma) * kInvTwoPiPow32 *
                 std::exp(-0.25 * (norm2(xi) + norm2(xi_s)));
    double pref = 4.0 * kInvTwoPiPow32 / g.r *
                  std::exp(-g.a_sq / (8.0 * g.r * g.r) - g.r * g.r / 8.0);
    return -k1v + pref * jt.at(g.r, g.rho0);
}

// 6-point Gauss-Legendre on [0,1]
constexpr double kGl6X[6] = {0.0337652428984240, 0.1693953067668678, 0.3806904069584015,
                             0.6193095930415985, 0.8306046932331322, 0.9662347571015760};
constexpr double kGl6W[6] = {0.0856622461895852, 0.1803807865240693, 0.2339569672863455,
                             0.2339569672863455, 0.1803807865240693, 0.0856622461895852};

struct Panel {
    double x[6], w[6];
};

// Panels for one axis of the pair integral in difference coordinates: the
// support [o-h, o+h] of the triangular cell-correlation factor, split at its
// kink (o) and at 0, with polynomial grading into an endpoint at 0 so the
// tensor rule resolves the |Delta|^(gamma-1) kernel singularity.
void axis_panels(double o, double h, double grade, std::vector<Panel>& out) {
    double pts[4];
    int np = 0;
    pts[np++] = o - h;
    pts[np++] = o;
    pts[np++] = o + h;
    if (o != 0.0 && o - h < 0.0 && 0.0 < o + h) pts[np++] = 0.0;
    std::sort(pts, pts + np);
    out.clear();
    for (int s = 0; s + 1 < np; ++s) {
        double a = pts[s], b = pts[s + 1];
        if (b - a <= 0.0) continue;
        Panel p;
        if (a == 0.0 || b == 0.0) {
            // graded toward the singular endpoint at 0
            double c = (a == 0.0) ? b : a;
            for (int k = 0; k < 6; ++k) {
                double t = kGl6X[k];
                p.x[k] = c * std::pow(t, grade);
                p.w[k] = kGl6W[k] * std::abs(c) * grade * std::pow(t, grade - 1.0);
            }
        } else {
            for (int k = 0; k < 6; ++k) {
                p.x[k] = a + (b - a) * kGl6X[k];
                p.w[k] = kGl6W[k] * (b - a);
            }
        }
        out.push_back(p);
    }
}

// Average of the kernel over a pair of grid cells,
//   (1/h^6) int_{cell_i} int_{cell_j} k(xi, xi') dxi dxi',
// reduced to a 3D integral over Delta = xi' - xi against the separable
// triangular correlation volume of the two cubes, with the slowly varying
// midpoint frozen at the node midpoint. A plain point value misrepresents
// the integrable kernel singularity by O(1) per touching cell, which is
// what decides the sign of the diagonal left over by the Maxwellian
// identity at the low-nu outer nodes.
double cell_pair_avg(const Vec3& ci, const Vec3& cj, double h, const CollisionConfig& cfg,
                     const JTable& jt) {
    Vec3 m{0.5 * (ci[0] + cj[0]), 0.5 * (ci[1] + cj[1]), 0.5 * (ci[2] + cj[2])};
    double grade = std::clamp(2.2 / (cfg.gamma + 2.0), 2.0, 5.0);
    std::vector<Panel> px, py, pz;
    axis_panels(cj[0] - ci[0], h, grade, px);
    axis_panels(cj[1] - ci[1], h, grade, py);
    axis_panels(cj[2] - ci[2], h, grade, pz);
    auto tri = [h](double x, double o) { return std::max(0.0, h - std::abs(x - o)); };
    double total = 0.0;
    for (const Panel& ax : px)
        for (const Panel& ay : py)
            for (const Panel& az : pz)
                for (int a = 0; a < 6; ++a)
                    for (int b = 0; b < 6; ++b)
                        for (int c = 0; c < 6; ++c) {
                            double dx = ax.x[a], dy = ay.x[b], dz = az.x[c];
                            double wgt = ax.w[a] * ay.w[b] * az.w[c] *
                                         tri(dx, cj[0] - ci[0]) * tri(dy, cj[1] - ci[1]) *
                                         tri(dz, cj[2] - ci[2]);
                            if (wgt == 0.0) continue;
                            Vec3 lo{m[0] - 0.5 * dx, m[1] - 0.5 * dy, m[2] - 0.5 * dz};
                            Vec3 hi{m[0] + 0.5 * dx, m[1] + 0.5 * dy, m[2] + 0.5 * dz};
                            total += wgt * kernel_tab(lo, hi, cfg, jt);
                        }
    return total / (h * h * h * h * h * h);
}

}  // namespace

std::uint64_t CollisionConfig::hash() const {
    std::uint64_t h = fnv1a(&gamma, sizeof gamma);
    h = fnv1a(&kappa, sizeof kappa, h);
    h = fnv1a(&omega_polar, sizeof omega_polar, h);
    h = fnv1a(&omega_azimuth, sizeof omega_azimuth, h);
    h = fnv1a(&radial_order, sizeof radial_order, h);
    h = fnv1a(&lattice_correction, sizeof lattice_correction, h);
    return h;
}

double nu_at_speed(double speed, const CollisionConfig& cfg) {
    cfg.validate();
    double coarse = nu_quad(speed, cfg.gamma, cfg.radial_order);
    double fine = nu_quad(speed, cfg.gamma, 2 * cfg.radial_order);
    if (std::abs(fine - coarse) > 1e-8 * std::abs(fine))
        throw NumericalError("nu quadrature did not converge: coarse=" + fmt17(coarse) +
                             " fine=" + fmt17(fine));
    return fine;
}

double nu_at(const Vec3& xi, const CollisionConfig& cfg) { return nu_at_speed(norm(xi), cfg); }

NuTable compute_nu(const VelocityGrid& grid, const CollisionConfig& cfg) {
    cfg.validate();
    NuTable t;
    t.values.resize(grid.size());
    t.method = "radial-GL order " + std::to_string(cfg.radial_order) + " (refined x2)";
    // nu depends on |xi| only; the lattice has few distinct speeds.
    std::map<long long, double> by_speed;
    for (int i = 0; i < grid.size(); ++i) {
        double s2 = norm2(grid.nodes[i]);
        long long key = std::llround(4.0 * s2 / (grid.h * grid.h));
        auto it = by_speed.find(key);
        if (it == by_speed.end()) it = by_speed.emplace(key, nu_at_speed(std::sqrt(s2), cfg)).first;
        t.values[i] = it->second;
    }
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
        double ratio = t.values[i] / std::pow(bracket(grid.nodes[i]), cfg.gamma);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        if (!(t.values[i] > 0.0)) throw NumericalError("nu must be positive");
    }
    t.nu0_est = lo;
    t.nu1_est = hi;
    return t;
}

double k1(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg) {
    Vec3 z = sub(xi, xi_s);
    double r2 = norm2(z);
    if (r2 == 0.0) throw PreconditionError("k1 is singular at xi = xi*");
    return kTwoPi * std::pow(r2, 0.5 * cfg.gamma) * kInvTwoPiPow32 *
           std::exp(-0.25 * (norm2(xi) + norm2(xi_s)));
}

double k2(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg) {
    cfg.validate();
    return k2_eval(xi, xi_s, cfg, false);
}

std::pair<double, double> k2_refined(const Vec3& xi, const Vec3& xi_s,
                                     const CollisionConfig& cfg) {
    cfg.validate();
    return {k2_eval(xi, xi_s, cfg, false), k2_eval(xi, xi_s, cfg, true)};
}

double kernel(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg) {
    return -k1(xi, xi_s, cfg) + k2_eval(xi, xi_s, cfg, false);
}

double k2_envelope(const Vec3& xi, const Vec3& xi_s, const CollisionConfig& cfg) {
    PairGeometry g = pair_geometry(xi, xi_s);
    double gauss = std::exp(-(1.0 - cfg.kappa) / 8.0 * (g.a_sq / (g.r * g.r) + g.r * g.r));
    double speeds = 1.0 + norm(xi) + norm(xi_s);
    double amp;
    if (std::abs(cfg.gamma + 1.0) < 1e-12) {
        // log branch; floored near r=1 where ln r vanishes
        amp = std::max(std::abs(std::log(g.r)), 1e-2) / g.r;
    } else if (cfg.gamma > -1.0) {
        amp = 1.0 / g.r;
    } else {
        amp = std::pow(g.r, cfg.gamma);
    }
    return amp * std::pow(speeds, cfg.gamma - 1.0) * gauss;
}

std::uint64_t KernelMatrix::checksum() const {
    return fnv1a(op.data(), sizeof(double) * op.size());
}

LinearOperator assemble_L(const VelocityGrid& grid, const CollisionConfig& cfg) {
    cfg.validate();
    LinearOperator L;
    L.nu = compute_nu(grid, cfg);
    const int n = grid.size();
    L.K.op.resize(n, n);
    L.K.grid_hash = grid.hash();
    L.K.config_hash = cfg.hash();
    const int na = grid.n_axis;

    // table covers all pair distances plus the deep graded panels of the
    // near-pair cell averages (below-range lookups clamp, which is harmless:
    // the r^{gamma+1} mass below the floor is negligible)
    double span = 2.0 * grid.radius * std::sqrt(3.0) + 2.0 * grid.h;
    double r_min = 1e-8 * grid.h;
    JTable jt = build_jtable(cfg, r_min, span, grid.radius * std::sqrt(3.0) + 2.0 * grid.h);

#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            // pairs within two cells get the cell-averaged kernel: the point
            // value is O(1) wrong per touching cell against the integrable
            // singularity, and that error lands on the diagonal via the
            // Maxwellian identity below, where it can overwhelm nu at the
            // outer nodes and destroy micro-subspace dissipativity
            double dmax = 0.0;
            for (int a = 0; a < 3; ++a)
                dmax = std::max(dmax, std::abs(grid.nodes[j][a] - grid.nodes[i][a]));
            double kv = dmax <= 2.0 * grid.h + 0.5 * grid.h
                            ? cell_pair_avg(grid.nodes[i], grid.nodes[j], grid.h, cfg, jt)
                            : kernel_tab(grid.nodes[i], grid.nodes[j], cfg, jt);
            L.K.op(i, j) = kv * grid.weights[j];
            L.K.op(j, i) = kv * grid.weights[i];
        }
        // The diagonal is the true self-cell average, i.e. the operator is
        // the velocity box's Galerkin truncation of the continuum one. Its
        // quadratic form on zero-extended functions then IS the continuum
        // form, so micro-subspace coercivity survives discretization; filling
        // the diagonal from the Maxwellian identity instead would smuggle the
        // out-of-box kernel mass back in (at a corner node 7/8 of the
        // singular neighborhood lies outside), anti-damping boundary nodes
        // whose nu is smallest. The price, a Gaussian-tail null-mode
        // residual, goes to the conservative closure below.
        L.K.op(i, i) = cell_pair_avg(grid.nodes[i], grid.nodes[i], grid.h, cfg, jt) *
                       grid.weights[i];
    }
    if (cfg.lattice_correction) {
        // Conservative closure: the conserved directions are
        // enforced as exact null modes of K - nu by the minimal self-adjoint
        // update in the quadrature-weighted inner product (the usual
        // conservation fix for discrete-velocity collision operators).
        MacroBasis basis = build_macro_basis(grid);
        Eigen::MatrixXd X(n, 5), T(n, 5);
        for (int m = 0; m < 5; ++m) {
            X.col(m) = basis.chi[m];
            T.col(m) = Eigen::Map<const Eigen::VectorXd>(L.nu.values.data(), n)
                           .cwiseProduct(basis.chi[m]) -
                       L.K.op * basis.chi[m];
            L.null_residual_raw[m] = std::sqrt(grid_dot(grid, T.col(m), T.col(m)));
        }
        Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(grid.weights.data(), n);
        Eigen::MatrixXd S = X.transpose() * w.asDiagonal() * T;  // symmetric by self-adjointness
        Eigen::MatrixXd C =
            T * X.transpose() + X * T.transpose() - X * (0.5 * (S + S.transpose())) * X.transpose();
        C = 0.5 * (C + C.transpose()).eval();  // bitwise symmetry despite gemm rounding
        L.K.op += C * w.asDiagonal();
    }
    return L;
}

KernelMatrix conjugate_Kw(const KernelMatrix& K, const std::vector<double>& w_nodes) {
    const int n = static_cast<int>(K.op.rows());
    if (static_cast<int>(w_nodes.size()) != n)
        throw PreconditionError("conjugate_Kw: weight vector size mismatch");
    for (double w : w_nodes)
        if (!(w > 0.0)) throw PreconditionError("conjugate_Kw: weight must be positive");
    KernelMatrix out;
    out.grid_hash = K.grid_hash;
    out.config_hash = K.config_hash;
    out.op.resize(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) out.op(i, j) = K.op(i, j) * (w_nodes[i] / w_nodes[j]);
    return out;
}

namespace {
constexpr std::uint32_t kMagic = 0x4b4c4b4d;  // "KLKM"
constexpr std::uint32_t kVersion = 2;  // v2: cell-averaged near-pair kernel entries
}  // namespace

void save_kernel_matrix(const std::string& path, const KernelMatrix& K, const VelocityGrid& grid,
                        const CollisionConfig& cfg) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PreconditionError("cannot open for write: " + path);
    auto put = [&](const void* p, size_t n) { f.write(static_cast<const char*>(p), n); };
    put(&kMagic, 4);
    put(&kVersion, 4);
    put(&cfg.gamma, 8);
    std::int32_t na = grid.n_axis;
    put(&na, 4);
    put(&grid.radius, 8);
    std::uint64_t gh = grid.hash(), ch = cfg.hash();
    put(&gh, 8);
    put(&ch, 8);
    std::int64_t n = K.op.rows();
    put(&n, 8);
    std::uint64_t cs = K.checksum();
    put(&cs, 8);
    put(K.op.data(), sizeof(double) * K.op.size());
    if (!f) throw NumericalError("write failed: " + path);
}

std::optional<KernelMatrix> load_kernel_matrix(const std::string& path, const VelocityGrid& grid,
                                               const CollisionConfig& cfg) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    auto get = [&](void* p, size_t n) { f.read(static_cast<char*>(p), n); };
    std::uint32_t magic = 0, version = 0;
    double gamma = 0, radius = 0;
    std::int32_t na = 0;
    std::uint64_t gh = 0, ch = 0, cs = 0;
    std::int64_t n = 0;
    get(&magic, 4);
    get(&version, 4);
    get(&gamma, 8);
    get(&na, 4);
    get(&radius, 8);
    get(&gh, 8);
    get(&ch, 8);
    get(&n, 8);
    get(&cs, 8);
    if (!f || magic != kMagic || version != kVersion) return std::nullopt;
    if (gh != grid.hash() || ch != cfg.hash()) return std::nullopt;
    if (n != grid.size()) return std::nullopt;
    KernelMatrix K;
    K.grid_hash = gh;
    K.config_hash = ch;
    K.op.resize(n, n);
    get(K.op.data(), sizeof(double) * n * n);
    if (!f || K.checksum() != cs) return std::nullopt;
    return K;
}

namespace {

struct OmegaRule {
    // polar cosine split at 0 (the |cos| kink), mirrored; azimuth uniform
    std::vector<double> mu, wmu;
    int naz;
};

OmegaRule omega_rule(const CollisionConfig& cfg) {
    OmegaRule r;
    const GaussRule& g = gauss_legendre(cfg.omega_polar);
    for (int i = 0; i < cfg.omega_polar; ++i) {
        double m = 0.5 * (1.0 + g.x[i]);  // (0,1)
        double w = 0.5 * g.w[i];
        r.mu.push_back(m);
        r.wmu.push_back(w);
        r.mu.push_back(-m);
        r.wmu.push_back(w);
    }
    r.naz = cfg.omega_azimuth;
    return r;
}

void orthonormal_frame(const Vec3& v, Vec3& e1, Vec3& e2) {
    // deterministic frame orthogonal to v
    Vec3 a = std::abs(v[0]) < 0.9 * norm(v) ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 u = {v[1] * a[2] - v[2] * a[1], v[2] * a[0] - v[0] * a[2], v[0] * a[1] - v[1] * a[0]};
    double nu_ = norm(u);
    e1 = scale(u, 1.0 / nu_);
    Vec3 w = {v[1] * e1[2] - v[2] * e1[1], v[2] * e1[0] - v[0] * e1[2], v[0] * e1[1] - v[1] * e1[0]};
    e2 = scale(w, 1.0 / norm(w));
}

}  // namespace

Eigen::VectorXd gamma_bilinear(const VelocityGrid& grid, const CollisionConfig& cfg,
                               const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                               GammaPart part) {
    cfg.validate();
    const int n = grid.size();
    if (g.size() != n || h.size() != n)
        throw PreconditionError("gamma_bilinear: vector size mismatch");
    OmegaRule om = omega_rule(cfg);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    const bool want_gain = part != GammaPart::loss;
    const bool want_loss = part != GammaPart::gain;

#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        const Vec3& xi = grid.nodes[i];
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            Vec3 V = sub(xi, grid.nodes[j]);
            double vn = norm(V);
            double base = 0.5 * grid.weights[j] * std::pow(vn, cfg.gamma) *
                          sqrt_maxwellian(grid.nodes[j]);
            Vec3 vhat = scale(V, 1.0 / vn);
            Vec3 e1, e2;
            orthonormal_frame(V, e1, e2);
            double wmu_sum = 0.0;
            for (size_t im = 0; im < om.mu.size(); ++im) {
                double mu = om.mu[im];
                double bw = om.wmu[im] * std::abs(mu);
                wmu_sum += bw;
                if (!want_gain) continue;
                double smu = std::sqrt(std::max(0.0, 1.0 - mu * mu));
                for (int ia = 0; ia < om.naz; ++ia) {
                    double phi = kTwoPi * (ia + 0.5) / om.naz;
                    Vec3 omega{mu * vhat[0] + smu * (std::cos(phi) * e1[0] + std::sin(phi) * e2[0]),
                               mu * vhat[1] + smu * (std::cos(phi) * e1[1] + std::sin(phi) * e2[1]),
                               mu * vhat[2] + smu * (std::cos(phi) * e1[2] + std::sin(phi) * e2[2])};
                    double s = vn * mu;
                    Vec3 xip = sub(xi, scale(omega, s));
                    Vec3 xisp = add(grid.nodes[j], scale(omega, s));
                    double gp = grid.interpolate(g, xip), gsp = grid.interpolate(g, xisp);
                    double hp = grid.interpolate(h, xip), hsp = grid.interpolate(h, xisp);
                    acc += base * bw * (kTwoPi / om.naz) * (gsp * hp + gp * hsp);
                }
            }
            if (want_loss) {
                double loss_term = base * wmu_sum * kTwoPi * (g[j] * h[i] + g[i] * h[j]);
                acc += (part == GammaPart::loss) ? loss_term : -loss_term;
            }
        }
        out[i] = acc;
    }
    return out;
}

InvarianceProbe gamma_invariance_weak(const VelocityGrid& grid, const CollisionConfig& cfg,
                                      const Eigen::VectorXd& g, const Eigen::VectorXd& h) {
    cfg.validate();
    const int n = grid.size();
    if (g.size() != n || h.size() != n)
        throw PreconditionError("gamma_invariance_weak: vector size mismatch");
    if (cfg.omega_azimuth % 2 != 0)
        throw PreconditionError(
            "gamma_invariance_weak: even azimuth count needed for the reflection symmetry");
    OmegaRule om = omega_rule(cfg);
    InvarianceProbe probe;
    for (int i = 0; i < n; ++i) {
        const Vec3& xi = grid.nodes[i];
        double smi = sqrt_maxwellian(xi);
        std::array<double, 5> psi_i = {1.0, xi[0], xi[1], xi[2], norm2(xi)};
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            Vec3 V = sub(xi, grid.nodes[j]);
            double vn = norm(V);
            double base = 0.5 * grid.weights[i] * grid.weights[j] * std::pow(vn, cfg.gamma) *
                          smi * sqrt_maxwellian(grid.nodes[j]) * (g[i] * h[j] + g[j] * h[i]);
            Vec3 vhat = scale(V, 1.0 / vn);
            Vec3 e1, e2;
            orthonormal_frame(V, e1, e2);
            for (size_t im = 0; im < om.mu.size(); ++im) {
                double mu = om.mu[im];
                double bw = om.wmu[im] * std::abs(mu);
                double smu = std::sqrt(std::max(0.0, 1.0 - mu * mu));
                for (int ia = 0; ia < om.naz; ++ia) {
                    double phi = kTwoPi * (ia + 0.5) / om.naz;
                    Vec3 omega{
                        mu * vhat[0] + smu * (std::cos(phi) * e1[0] + std::sin(phi) * e2[0]),
                        mu * vhat[1] + smu * (std::cos(phi) * e1[1] + std::sin(phi) * e2[1]),
                        mu * vhat[2] + smu * (std::cos(phi) * e1[2] + std::sin(phi) * e2[2])};
                    Vec3 xip = sub(xi, scale(omega, vn * mu));
                    double c = base * bw * (kTwoPi / om.naz);
                    std::array<double, 5> psi_p = {1.0, xip[0], xip[1], xip[2], norm2(xip)};
                    for (int m = 0; m < 5; ++m) {
                        probe.value[m] += c * (psi_p[m] - psi_i[m]);
                        probe.scale[m] += std::abs(c) * (std::abs(psi_p[m]) + std::abs(psi_i[m]));
                    }
                }
            }
        }
    }
    return probe;
}

GammaTensor build_gamma_tensor(const VelocityGrid& grid, const CollisionConfig& cfg) {
    cfg.validate();
    const int n = grid.size();
    GammaTensor T;
    T.n = n;
    T.sqrt_m.resize(n);
    for (int i = 0; i < n; ++i) T.sqrt_m[i] = sqrt_maxwellian(grid.nodes[i]);
    T.loss_conv = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double vn = norm(sub(grid.nodes[i], grid.nodes[j]));
            T.loss_conv(i, j) = grid.weights[j] * std::pow(vn, cfg.gamma) * T.sqrt_m[j];
        }

    OmegaRule om = omega_rule(cfg);
    T.gain.assign(n, Eigen::MatrixXd::Zero(n, n));
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd& Ti = T.gain[i];
        const Vec3& xi = grid.nodes[i];
        int idxp[8], idxs[8];
        double cp[8], cs[8];
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            Vec3 V = sub(xi, grid.nodes[j]);
            double vn = norm(V);
            double base = 0.5 * grid.weights[j] * std::pow(vn, cfg.gamma) * T.sqrt_m[j];
            Vec3 vhat = scale(V, 1.0 / vn);
            Vec3 e1, e2;
            orthonormal_frame(V, e1, e2);
            for (size_t im = 0; im < om.mu.size(); ++im) {
                double mu = om.mu[im];
                double bw = om.wmu[im] * std::abs(mu) * (kTwoPi / om.naz) * base;
                double smu = std::sqrt(std::max(0.0, 1.0 - mu * mu));
                for (int ia = 0; ia < om.naz; ++ia) {
                    double phi = kTwoPi * (ia + 0.5) / om.naz;
                    Vec3 omega{mu * vhat[0] + smu * (std::cos(phi) * e1[0] + std::sin(phi) * e2[0]),
                               mu * vhat[1] + smu * (std::cos(phi) * e1[1] + std::sin(phi) * e2[1]),
                               mu * vhat[2] + smu * (std::cos(phi) * e1[2] + std::sin(phi) * e2[2])};
                    double s = vn * mu;
                    Vec3 xip = sub(xi, scale(omega, s));
                    Vec3 xisp = add(grid.nodes[j], scale(omega, s));
                    int np = grid.stencil(xip, idxp, cp);
                    int ns = grid.stencil(xisp, idxs, cs);
                    // g(xi*') h(xi') + g(xi') h(xi*')
                    for (int a = 0; a < ns; ++a)
                        for (int b = 0; b < np; ++b) {
                            Ti(idxs[a], idxp[b]) += bw * cs[a] * cp[b];
                            Ti(idxp[b], idxs[a]) += bw * cp[b] * cs[a];
                        }
                }
            }
        }
    }
    return T;
}

Eigen::VectorXd GammaTensor::apply(const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                                   GammaPart part) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (part != GammaPart::loss)
        for (int i = 0; i < n; ++i) out[i] += g.dot(gain[i] * h);
    if (part != GammaPart::gain) {
        Eigen::VectorXd pg = loss_conv * g, ph = loss_conv * h;
        const double pi = 0.5 * kTwoPi;
        const double sgn = (part == GammaPart::loss) ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) out[i] += sgn * pi * (h[i] * pg[i] + g[i] * ph[i]);
    }
    return out;
}

}  // namespace kinlab
