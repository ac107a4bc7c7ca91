#include "kinlab/velocity.hpp"

#include <cmath>

namespace kinlab {

VelocityGrid build_grid(int n_axis, double radius) {
    if (n_axis < 4) throw PreconditionError("build_grid: axis count must be >= 4");
    if (n_axis % 2 != 0) throw PreconditionError("build_grid: odd axis count");
    if (!(radius > 0.0)) throw PreconditionError("build_grid: radius must be positive");

    VelocityGrid g;
    g.n_axis = n_axis;
    g.radius = radius;
    g.h = 2.0 * radius / n_axis;
    const int n3 = n_axis * n_axis * n_axis;
    g.nodes.reserve(n3);
    g.weights.assign(n3, g.h * g.h * g.h);

    double mass = 0.0;
    for (int i = 0; i < n_axis; ++i)
        for (int j = 0; j < n_axis; ++j)
            for (int k = 0; k < n_axis; ++k) {
                Vec3 xi{g.axis_coord(i), g.axis_coord(j), g.axis_coord(k)};
                g.nodes.push_back(xi);
                mass += g.weights.back() * maxwellian(xi);
            }
    g.mass_defect = 1.0 - mass;
    return g;
}

int VelocityGrid::stencil(const Vec3& xi, int idx[8], double coef[8]) const {
    // Cell coordinates: node index i corresponds to axis_coord(i); the point
    // lies between floor indices i0 and i0+1 on each axis.
    double u[3];
    int i0[3];
    for (int a = 0; a < 3; ++a) {
        double s = (xi[a] + radius) / h - 0.5;  // fractional node index
        double fl = std::floor(s);
        i0[a] = static_cast<int>(fl);
        u[a] = s - fl;
    }
    int cnt = 0;
    for (int da = 0; da < 2; ++da)
        for (int db = 0; db < 2; ++db)
            for (int dc = 0; dc < 2; ++dc) {
                int ia = i0[0] + da, ib = i0[1] + db, ic = i0[2] + dc;
                if (ia < 0 || ia >= n_axis || ib < 0 || ib >= n_axis || ic < 0 || ic >= n_axis)
                    continue;
                double c = (da ? u[0] : 1.0 - u[0]) * (db ? u[1] : 1.0 - u[1]) *
                           (dc ? u[2] : 1.0 - u[2]);
                if (c == 0.0) continue;
                idx[cnt] = flat(ia, ib, ic);
                coef[cnt] = c;
                ++cnt;
            }
    return cnt;
}

double VelocityGrid::interpolate(const Eigen::VectorXd& g, const Vec3& xi) const {
    int idx[8];
    double coef[8];
    int n = stencil(xi, idx, coef);
    double v = 0.0;
    for (int s = 0; s < n; ++s) v += coef[s] * g[idx[s]];
    return v;
}

std::uint64_t VelocityGrid::hash() const {
    std::uint64_t h64 = fnv1a(&n_axis, sizeof n_axis);
    h64 = fnv1a(&radius, sizeof radius, h64);
    return h64;
}

double grid_dot(const VelocityGrid& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double s = 0.0;
    for (int i = 0; i < grid.size(); ++i) s += grid.weights[i] * a[i] * b[i];
    return s;
}

MacroBasis build_macro_basis(const VelocityGrid& grid) {
    const int n = grid.size();
    MacroBasis basis;
    std::array<Eigen::VectorXd, 5> raw;
    for (auto& v : raw) v.resize(n);
    for (int i = 0; i < n; ++i) {
        const Vec3& xi = grid.nodes[i];
        double sm = sqrt_maxwellian(xi);
        raw[0][i] = sm;
        raw[1][i] = xi[0] * sm;
        raw[2][i] = xi[1] * sm;
        raw[3][i] = xi[2] * sm;
        raw[4][i] = (norm2(xi) - 3.0) * sm * 0.40824829046386301637;  // 1/sqrt(6)
    }
    for (int m = 0; m < 5; ++m) {
        Eigen::VectorXd v = raw[m];
        for (int k = 0; k < m; ++k) v -= grid_dot(grid, basis.chi[k], raw[m]) * basis.chi[k];
        double nv = std::sqrt(grid_dot(grid, v, v));
        if (!(nv > 0.0)) throw NumericalError("macro basis degenerate on this grid");
        basis.chi[m] = v / nv;
    }
    return basis;
}

Eigen::VectorXd MacroBasis::project(const VelocityGrid& grid, const Eigen::VectorXd& g) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
    for (const auto& c : chi) out += grid_dot(grid, c, g) * c;
    return out;
}

Eigen::VectorXd MacroBasis::project_micro(const VelocityGrid& grid, const Eigen::VectorXd& g) const {
    return g - project(grid, g);
}

double weighted_norm(const VelocityGrid& grid, const Eigen::VectorXd& g, const NormSpec& spec) {
    const int n = grid.size();
    switch (spec.kind) {
        case NormSpec::LqBeta: {
            if (!(spec.q >= 1.0)) throw PreconditionError("weighted_norm: order must be in [1,inf]");
            if (std::isinf(spec.q)) {
                double m = 0.0;
                for (int i = 0; i < n; ++i)
                    m = std::max(m, std::pow(bracket(grid.nodes[i]), spec.beta) * std::abs(g[i]));
                return m;
            }
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                s += grid.weights[i] *
                     std::pow(std::pow(bracket(grid.nodes[i]), spec.beta) * std::abs(g[i]), spec.q);
            return std::pow(s, 1.0 / spec.q);
        }
        case NormSpec::Lsigma2: {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                double w = std::pow(bracket(grid.nodes[i]), spec.gamma * 0.5);
                s += grid.weights[i] * w * w * g[i] * g[i];
            }
            return std::sqrt(s);
        }
        case NormSpec::LinfWeighted: {
            if (!spec.m) throw PreconditionError("weighted_norm: missing weight function");
            double m = 0.0;
            for (int i = 0; i < n; ++i) m = std::max(m, spec.m(grid.nodes[i]) * std::abs(g[i]));
            return m;
        }
    }
    throw PreconditionError("weighted_norm: bad spec");
}

}  // namespace kinlab
