#include "kinlab/bounds.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <map>

namespace kinlab {

namespace {

// ---- registry ------------------------------------------------------------

const std::map<std::string, BoundInfo>& registry() {
    using K = BoundInfo::Kind;
    static const std::map<std::string, BoundInfo> reg = {
        {"loss-kernel-pointwise", {K::pointwise, false, false, "-2 < gamma < 0"}},
        {"gain-kernel-pointwise", {K::pointwise, false, false, "-2 < gamma < 0"}},
        {"k-moment", {K::moment, false, true, "-2 < gamma < 0"}},
        {"grad-k-moment", {K::moment, false, true, "-2 < gamma < 0"}},
        {"k2-moment", {K::moment, false, true, "-3/2 < gamma < 0"}},
        {"kq-moment", {K::moment, false, true, "-2 < gamma <= -3/2 with 1 <= q < 3/(-gamma)"}},
        {"kw-moment", {K::moment, true, true, "-2 < gamma < 0"}},
        {"kw-moment-dual", {K::moment, true, true, "-2 < gamma < 0"}},
        {"gain-weight-sup", {K::functional, false, true, "-3/2 < gamma < 0"}},
        {"gain-weight-lq", {K::functional, false, true, "-2 < gamma <= -3/2 with q > 3/(3+gamma)"}},
        {"gain-weight-l4", {K::functional, false, true, "-2 < gamma <= -3/2"}},
        {"kw-sup", {K::functional, true, true, "-2 < gamma < 0"}},
        {"kw-l2", {K::functional, true, true, "-2 < gamma < 0"}},
        {"kw-bootstrap-sup", {K::functional, true, true, "-3/2 < gamma < 0"}},
        {"kw-bootstrap-lq", {K::functional, true, true, "-2 < gamma <= -3/2 with q > 3/(3+gamma)"}},
        {"kw-bootstrap-l4", {K::functional, true, true, "-2 < gamma <= -3/2"}},
        {"gamma-product", {K::bilinear, false, true, "-2 < gamma < 0"}},
        {"gamma-l2", {K::bilinear, false, true, "-2 < gamma < 0"}},
        {"gamma-sup", {K::bilinear, false, true, "-2 < gamma < 0"}},
        {"gamma-sup-loss", {K::bilinear, false, true, "-2 < gamma < 0"}},
        {"gamma-sup-gain", {K::bilinear, false, true, "-2 < gamma < 0"}},
        {"gamma-loss-pointwise", {K::bilinear, false, true, "-2 < gamma < 0"}},
        {"gamma-w-sup", {K::bilinear, true, true, "-2 < gamma < 0"}},
    };
    return reg;
}

void check_range(const std::string& id, const BoundInfo& info, const AuditSpec& spec,
                 double gamma) {
    auto fail = [&]() {
        throw PreconditionError("audit " + id + ": requires " + info.range + " (gamma=" +
                                fmt17(gamma) + ", q=" + fmt17(spec.q) + ")");
    };
    if (!(gamma > -2.0 && gamma < 0.0)) fail();
    bool narrow = id == "k2-moment" || id == "gain-weight-sup" || id == "kw-bootstrap-sup";
    bool wide_only = id == "kq-moment" || id == "gain-weight-lq" || id == "gain-weight-l4" ||
                     id == "kw-bootstrap-lq" || id == "kw-bootstrap-l4";
    if (narrow && !(gamma > -1.5)) fail();
    if (wide_only && !(gamma <= -1.5)) fail();
    if (id == "kq-moment" && !(spec.q >= 1.0 && spec.q < 3.0 / (-gamma))) fail();
    if ((id == "gain-weight-lq" || id == "kw-bootstrap-lq") && !(spec.q > 3.0 / (3.0 + gamma)))
        fail();
    if (info.needs_weight && !spec.weight)
        throw PreconditionError("audit " + id + ": needs a conjugating weight");
}

// ---- auxiliary quadrature around a shifted center --------------------------

struct ShiftRule {
    std::vector<double> r, wr;     // radial nodes / weights including r^2
    std::vector<Vec3> dir;
    std::vector<double> wdir;
};

// The audited integrands depend on the direction only through the polar angle
// against the center (the kernel is isotropic and the weights are radial in
// xi), so the azimuth integral is exactly 2 pi and all angular resolution goes
// into the polar nodes — the gain kernel carries an angular ridge of width
// ~ sqrt(8)/(2|xi|) in cos(theta) that a coarse sphere rule misses.
ShiftRule make_shift_rule(int radial_order, int polar_order, double r_max, const Vec3& center) {
    ShiftRule rule;
    const double edges[] = {0.0, 1.0 / 16, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, r_max};
    gsl_integration_glfixed_table* tr =
        gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(radial_order));
    for (int p = 0; p + 1 < static_cast<int>(std::size(edges)); ++p)
        for (int i = 0; i < radial_order; ++i) {
            double xi, wi;
            gsl_integration_glfixed_point(edges[p], edges[p + 1], i, &xi, &wi, tr);
            rule.r.push_back(xi);
            rule.wr.push_back(wi * xi * xi);
        }
    gsl_integration_glfixed_table_free(tr);

    double cn = norm(center);
    Vec3 axis = cn > 1e-12 ? scale(center, 1.0 / cn) : Vec3{0.0, 0.0, 1.0};
    Vec3 ref = std::abs(axis[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    Vec3 u = sub(ref, scale(axis, dot(ref, axis)));
    u = scale(u, 1.0 / norm(u));
    gsl_integration_glfixed_table* tc =
        gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(polar_order));
    for (int i = 0; i < polar_order; ++i) {
        double ct, wct;
        gsl_integration_glfixed_point(-1.0, 1.0, i, &ct, &wct, tc);
        double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        rule.dir.push_back(add(scale(axis, ct), scale(u, st)));
        rule.wdir.push_back(wct * kTwoPi);
    }
    gsl_integration_glfixed_table_free(tc);
    return rule;
}

template <class F>
double integrate_shifted(const ShiftRule& rule, const Vec3& center, F&& f) {
    double total = 0.0;
    for (std::size_t d = 0; d < rule.dir.size(); ++d) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.r.size(); ++i)
            acc += rule.wr[i] * f(add(center, scale(rule.dir[d], rule.r[i])), rule.r[i]);
        total += rule.wdir[d] * acc;
    }
    return total;
}

double grad_kernel_norm(const Vec3& xi, const Vec3& y, double r, const CollisionConfig& cfg) {
    double h = std::min(1e-3, 0.1 * r);
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        Vec3 a = xi, b = xi;
        a[c] += h;
        b[c] -= h;
        double d = (kernel(a, y, cfg) - kernel(b, y, cfg)) / (2.0 * h);
        s += d * d;
    }
    return std::sqrt(s);
}

// ---- samples and norms -----------------------------------------------------

Eigen::VectorXd random_field(Rng& rng, const VelocityGrid& grid) {
    Eigen::VectorXd g(grid.size());
    for (int i = 0; i < grid.size(); ++i)
        g[i] = rng.normal() * std::exp(-0.125 * norm2(grid.nodes[i]));
    return g;
}

double lq_norm(const VelocityGrid& grid, const Eigen::VectorXd& g, double q, double beta) {
    double acc = 0.0;
    for (int i = 0; i < grid.size(); ++i)
        acc += grid.weights[i] * std::pow(std::abs(std::pow(bracket(grid.nodes[i]), beta) * g[i]), q);
    return std::pow(acc, 1.0 / q);
}

double sup_norm(const VelocityGrid& grid, const Eigen::VectorXd& g, double beta) {
    double m = 0.0;
    for (int i = 0; i < grid.size(); ++i)
        m = std::max(m, std::pow(bracket(grid.nodes[i]), beta) * std::abs(g[i]));
    return m;
}

double sigma_norm(const VelocityGrid& grid, const Eigen::VectorXd& g, double gamma) {
    return lq_norm(grid, g, 2.0, 0.5 * gamma);
}

// ---- aggregation -----------------------------------------------------------

AuditReport aggregate(const std::string& id, const AuditSpec& spec, double gamma,
                      std::vector<BoundCase> cases) {
    const BoundInfo& info = bound_info(id);
    AuditReport rep;
    rep.lemma = id;
    rep.gamma = gamma;
    rep.tau = spec.tau;
    rep.q = spec.q;
    rep.seed = spec.seed;
    rep.n_samples = static_cast<int>(cases.size());
    std::vector<double> ratios;
    bool finite = true;
    for (const BoundCase& c : cases) {
        if (!c.converged) ++rep.n_unconverged;
        if (!std::isfinite(c.ratio)) finite = false;
        rep.max_ratio = std::max(rep.max_ratio, c.ratio);
        ratios.push_back(c.ratio);
    }
    std::sort(ratios.begin(), ratios.end());
    rep.median_ratio = ratios.empty() ? 0.0 : ratios[ratios.size() / 2];
    rep.dispersion = rep.median_ratio > 0.0 ? rep.max_ratio / rep.median_ratio : 0.0;

    // monotone-growth probe along |xi|: compare the median ratio over the
    // smallest-|xi| third against the largest-|xi| third; only meaningful
    // where the ratio is supposed to be flat (same gate as the dispersion
    // budget — the slack pointwise envelopes fail it by construction)
    bool any_scale = false;
    for (const BoundCase& c : cases)
        if (c.scale > 0.0) any_scale = true;
    bool geometric = info.has_dispersion_budget && any_scale;
    if (geometric && cases.size() >= 9) {
        std::vector<BoundCase> sorted = cases;
        std::sort(sorted.begin(), sorted.end(),
                  [](const BoundCase& a, const BoundCase& b) { return a.scale < b.scale; });
        std::size_t third = sorted.size() / 3;
        auto med = [&](std::size_t lo, std::size_t hi) {
            std::vector<double> v;
            for (std::size_t i = lo; i < hi; ++i) v.push_back(sorted[i].ratio);
            std::sort(v.begin(), v.end());
            return v[v.size() / 2];
        };
        double low = med(0, third), high = med(sorted.size() - third, sorted.size());
        rep.growing = high > 3.0 * low;
    }
    rep.plausible = finite && rep.n_unconverged == 0 && !rep.growing &&
                    (!info.has_dispersion_budget || rep.dispersion <= 10.0);
    rep.cases = std::move(cases);
    return rep;
}

// ---- per-kind drivers -------------------------------------------------------

AuditReport audit_pointwise(const std::string& id, const AuditSpec& spec,
                            const CollisionConfig& cfg) {
    Halton seq(6, spec.seed);
    std::vector<BoundCase> cases;
    while (static_cast<int>(cases.size()) < spec.n_samples) {
        std::vector<double> u = seq.next();
        Vec3 xi{spec.box * (2.0 * u[0] - 1.0), spec.box * (2.0 * u[1] - 1.0),
                spec.box * (2.0 * u[2] - 1.0)};
        Vec3 xs{spec.box * (2.0 * u[3] - 1.0), spec.box * (2.0 * u[4] - 1.0),
                spec.box * (2.0 * u[5] - 1.0)};
        double r = norm(sub(xi, xs));
        if (r < 1e-3) continue;
        BoundCase c;
        c.sample = static_cast<int>(cases.size());
        c.scale = norm(xi);
        if (id == "loss-kernel-pointwise") {
            c.lhs = k1(xi, xs, cfg);
            c.rhs = std::pow(r, cfg.gamma) * std::exp(-0.25 * (norm2(xi) + norm2(xs)));
        } else {
            auto [coarse, fine] = k2_refined(xi, xs, cfg);
            c.lhs = fine;
            c.converged = std::abs(fine - coarse) <= 0.01 * std::abs(fine) + 1e-300;
            c.rhs = k2_envelope(xi, xs, cfg);
        }
        c.ratio = c.lhs / c.rhs;
        cases.push_back(c);
    }
    return aggregate(id, spec, cfg.gamma, std::move(cases));
}

AuditReport audit_moment(const std::string& id, const AuditSpec& spec,
                         const CollisionConfig& cfg) {
    const double g = cfg.gamma;
    const double r_max = 2.0 * spec.box * 1.7320508 + 2.0;

    double rhs_pow = spec.tau + g - 2.0;
    if (id == "grad-k-moment") rhs_pow = spec.tau + g - 1.0;
    if (id == "k2-moment") rhs_pow = spec.tau + 2.0 * g - 3.0;
    if (id == "kq-moment") rhs_pow = spec.tau + spec.q * (g - 1.0) - 1.0;

    Halton seq(3, spec.seed);
    std::vector<BoundCase> cases;
    for (int s = 0; s < spec.n_samples; ++s) {
        std::vector<double> u = seq.next();
        Vec3 xi{spec.box * (2.0 * u[0] - 1.0), spec.box * (2.0 * u[1] - 1.0),
                spec.box * (2.0 * u[2] - 1.0)};
        double lw_c = spec.weight ? spec.weight->log_w(spec.t, spec.x, xi) : 0.0;
        auto integrand = [&](const Vec3& y, double r) -> double {
            if (r < 1e-6) return 0.0;
            if (id == "k-moment")
                return std::abs(kernel(xi, y, cfg)) * std::pow(bracket(y), spec.tau);
            if (id == "grad-k-moment")
                return grad_kernel_norm(xi, y, r, cfg) * std::pow(bracket(y), spec.tau);
            if (id == "k2-moment") {
                double k = kernel(xi, y, cfg);
                return std::pow(1.0 + norm(y), spec.tau) * k * k;
            }
            if (id == "kq-moment")
                return std::pow(1.0 + norm(y), spec.tau) *
                       std::pow(std::abs(kernel(xi, y, cfg)), spec.q);
            double lw_y = spec.weight->log_w(spec.t, spec.x, y);
            double conj = id == "kw-moment" ? std::exp(lw_c - lw_y) : std::exp(lw_y - lw_c);
            return std::abs(kernel(xi, y, cfg)) * conj * std::pow(bracket(y), spec.tau);
        };
        BoundCase c;
        c.sample = s;
        c.scale = norm(xi);
        ShiftRule base = make_shift_rule(spec.radial_order, 4 * spec.sphere_order, r_max, xi);
        ShiftRule fine = make_shift_rule(2 * spec.radial_order, 8 * spec.sphere_order, r_max, xi);
        double coarse = integrate_shifted(base, xi, integrand);
        c.lhs = integrate_shifted(fine, xi, integrand);
        c.converged = std::abs(c.lhs - coarse) <= 0.01 * std::abs(c.lhs) + 1e-300;
        c.rhs = std::pow(bracket(xi), rhs_pow);
        c.ratio = c.lhs / c.rhs;
        cases.push_back(c);
    }
    return aggregate(id, spec, g, std::move(cases));
}

Eigen::MatrixXd raw_kernel_matrix(const VelocityGrid& grid, const CollisionConfig& cfg) {
    const int n = grid.size();
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            K(i, j) = i == j ? 0.0 : kernel(grid.nodes[i], grid.nodes[j], cfg) * grid.weights[j];
    return K;
}

AuditReport audit_functional(const std::string& id, const AuditSpec& spec,
                             const VelocityGrid& grid, const CollisionConfig& cfg) {
    const double g = cfg.gamma;
    Eigen::MatrixXd K = raw_kernel_matrix(grid, cfg);
    if (spec.weight) {
        for (int i = 0; i < grid.size(); ++i)
            for (int j = 0; j < grid.size(); ++j)
                K(i, j) *= std::exp(spec.weight->log_w(spec.t, spec.x, grid.nodes[i]) -
                                    spec.weight->log_w(spec.t, spec.x, grid.nodes[j]));
    }
    Rng rng(spec.seed ^ fnv1a(id));
    std::vector<BoundCase> cases;
    for (int s = 0; s < spec.n_samples; ++s) {
        Eigen::VectorXd f = random_field(rng, grid);
        Eigen::VectorXd Kf = K * f;
        BoundCase c;
        c.sample = s;
        if (id == "gain-weight-sup") {
            c.lhs = sup_norm(grid, Kf, spec.tau - g + 1.5);
            c.rhs = lq_norm(grid, f, 2.0, spec.tau);
        } else if (id == "gain-weight-lq") {
            c.lhs = sup_norm(grid, Kf, spec.tau + 2.0 - g - 1.0 / spec.q);
            c.rhs = lq_norm(grid, f, spec.q, spec.tau);
        } else if (id == "gain-weight-l4" || id == "kw-bootstrap-l4") {
            c.lhs = lq_norm(grid, Kf, 4.0, 1.0 - g);
            c.rhs = lq_norm(grid, f, 2.0, 0.0);
        } else if (id == "kw-sup") {
            c.lhs = sup_norm(grid, Kf, spec.tau + 2.0 - g);
            c.rhs = sup_norm(grid, f, spec.tau);
        } else if (id == "kw-l2") {
            c.lhs = lq_norm(grid, Kf, 2.0, spec.tau);
            c.rhs = lq_norm(grid, f, 2.0, spec.tau - 2.0 + g);
        } else if (id == "kw-bootstrap-sup") {
            c.lhs = sup_norm(grid, Kf, spec.tau);
            c.rhs = lq_norm(grid, f, 2.0, spec.tau - 1.5 + g);
        } else {  // kw-bootstrap-lq
            c.lhs = sup_norm(grid, Kf, spec.tau);
            c.rhs = lq_norm(grid, f, spec.q, spec.tau - 2.0 + g + 1.0 / spec.q);
        }
        c.ratio = c.lhs / c.rhs;
        cases.push_back(c);
    }
    return aggregate(id, spec, g, std::move(cases));
}

struct BilinearLab {
    GammaTensor T;
    NuTable nu;
};

AuditReport audit_bilinear(const std::string& id, const AuditSpec& spec, const VelocityGrid& grid,
                           const CollisionConfig& cfg, const BilinearLab& lab) {
    const double g = cfg.gamma;
    const double lam = spec.tau;
    const int n = grid.size();
    Rng rng(spec.seed ^ fnv1a(id));
    std::vector<BoundCase> cases;
    for (int s = 0; s < spec.n_samples; ++s) {
        Eigen::VectorXd fa = random_field(rng, grid);
        Eigen::VectorXd fb = random_field(rng, grid);
        Eigen::VectorXd fc = random_field(rng, grid);
        BoundCase c;
        c.sample = s;
        if (id == "gamma-product") {
            Eigen::VectorXd G = lab.T.apply(fb, fc, GammaPart::full);
            c.lhs = std::abs(grid_dot(grid, fa, G));
            c.rhs = sigma_norm(grid, fa, g) *
                    (sigma_norm(grid, fb, g) * sup_norm(grid, fc, 0.0) +
                     sup_norm(grid, fb, 0.0) * sigma_norm(grid, fc, g));
        } else if (id == "gamma-l2") {
            Eigen::VectorXd G = lab.T.apply(fb, fc, GammaPart::full);
            for (int i = 0; i < n; ++i) G[i] /= lab.nu.values[i];
            c.lhs = lq_norm(grid, G, 2.0, 0.0);
            c.rhs = sup_norm(grid, fb, 0.0) * lq_norm(grid, fc, 2.0, 0.0) +
                    lq_norm(grid, fb, 2.0, 0.0) * sup_norm(grid, fc, 0.0);
        } else if (id == "gamma-sup") {
            Eigen::VectorXd G = lab.T.apply(fb, fc, GammaPart::full);
            for (int i = 0; i < n; ++i) G[i] /= lab.nu.values[i];
            c.lhs = sup_norm(grid, G, lam);
            c.rhs = sup_norm(grid, fb, lam) * sup_norm(grid, fc, lam);
        } else if (id == "gamma-sup-loss") {
            Eigen::VectorXd G = lab.T.apply(fb, fc, GammaPart::loss);
            c.lhs = sup_norm(grid, G, lam);
            c.rhs = sup_norm(grid, fb, 0.0) * sup_norm(grid, fc, lam + g) +
                    sup_norm(grid, fc, 0.0) * sup_norm(grid, fb, lam + g);
        } else if (id == "gamma-sup-gain") {
            Eigen::VectorXd G = lab.T.apply(fb, fc, GammaPart::gain);
            c.lhs = sup_norm(grid, G, lam);
            c.rhs = sup_norm(grid, fb, lam + g - 1.0) * sup_norm(grid, fc, lam + g - 1.0);
        } else if (id == "gamma-loss-pointwise") {
            Eigen::VectorXd G = lab.T.apply(fb, fc, GammaPart::loss);
            double sb = sup_norm(grid, fb, 0.0), sc = sup_norm(grid, fc, 0.0);
            double best = 0.0, best_num = 0.0, best_den = 1.0, den_cap = 0.0;
            for (int i = 0; i < n; ++i)
                den_cap = std::max(den_cap, lab.nu.values[i] *
                                                (sb * std::abs(fc[i]) + std::abs(fb[i]) * sc));
            for (int i = 0; i < n; ++i) {
                double den = lab.nu.values[i] * (sb * std::abs(fc[i]) + std::abs(fb[i]) * sc);
                if (den < 1e-10 * den_cap) continue;
                double r = std::abs(G[i]) / den;
                if (r > best) best = r, best_num = std::abs(G[i]), best_den = den;
            }
            c.lhs = best_num;
            c.rhs = best_den;
        } else {  // gamma-w-sup
            const WeightEvaluator& w = *spec.weight;
            Eigen::VectorXd hb(n), wv(n);
            for (int i = 0; i < n; ++i) {
                wv[i] = std::exp(w.log_w(spec.t, spec.x, grid.nodes[i]));
                hb[i] = fc[i] / wv[i];
            }
            Eigen::VectorXd G = lab.T.apply(fb, hb, GammaPart::full);
            for (int i = 0; i < n; ++i) G[i] *= wv[i] / lab.nu.values[i];
            c.lhs = sup_norm(grid, G, lam);
            double hs = 0.0;
            for (int i = 0; i < n; ++i) {
                double br = bracket(grid.nodes[i]);
                double amp = std::pow(br, lam);
                if (w.kind() == WeightEvaluator::w1)
                    amp *= std::pow(br, w.p1().p);
                else if (w.kind() == WeightEvaluator::w2)
                    amp *= std::pow(br, w.p2().p) * std::exp(w.p2().eps * std::pow(br, w.p2().p));
                else
                    amp *= std::exp(w.p3().eps_hat * std::pow(br, w.p3().p1));
                hs = std::max(hs, amp * std::abs(fc[i]));
            }
            c.rhs = sup_norm(grid, fb, lam) * hs;
        }
        c.ratio = c.rhs > 0.0 ? c.lhs / c.rhs : 0.0;
        cases.push_back(c);
    }
    return aggregate(id, spec, g, std::move(cases));
}

}  // namespace

const BoundInfo& bound_info(const std::string& id) {
    auto it = registry().find(id);
    if (it == registry().end()) throw PreconditionError("unknown bound id: " + id);
    return it->second;
}

std::vector<std::string> registered_bounds() {
    std::vector<std::string> out;
    for (const auto& [id, info] : registry()) out.push_back(id);
    return out;
}

AuditReport audit(const std::string& id, const AuditSpec& spec, const VelocityGrid& grid,
                  const CollisionConfig& cfg) {
    const BoundInfo& info = bound_info(id);
    cfg.validate();
    check_range(id, info, spec, cfg.gamma);
    if (spec.n_samples < 1) throw PreconditionError("audit: need n_samples >= 1");
    switch (info.kind) {
        case BoundInfo::pointwise:
            return audit_pointwise(id, spec, cfg);
        case BoundInfo::moment:
            return audit_moment(id, spec, cfg);
        case BoundInfo::functional:
            return audit_functional(id, spec, grid, cfg);
        default: {
            BilinearLab lab{build_gamma_tensor(grid, cfg), compute_nu(grid, cfg)};
            return audit_bilinear(id, spec, grid, cfg, lab);
        }
    }
}

std::vector<AuditReport> audit_gamma_family(const AuditSpec& spec, const VelocityGrid& grid,
                                            const CollisionConfig& cfg) {
    cfg.validate();
    BilinearLab lab{build_gamma_tensor(grid, cfg), compute_nu(grid, cfg)};
    std::vector<AuditReport> out;
    for (const char* id : {"gamma-product", "gamma-l2", "gamma-sup", "gamma-sup-loss",
                           "gamma-sup-gain", "gamma-loss-pointwise"})
        out.push_back(audit_bilinear(id, spec, grid, cfg, lab));
    return out;
}

CsvTable audit_csv(const std::vector<AuditReport>& reports) {
    CsvTable t;
    t.header = "lemma,gamma,tau,q,sample,lhs,rhs,ratio";
    for (const AuditReport& r : reports)
        for (const BoundCase& c : r.cases)
            t.rows.push_back(r.lemma + "," + fmt17(r.gamma) + "," + fmt17(r.tau) + "," +
                             fmt17(r.q) + "," + std::to_string(c.sample) + "," + fmt17(c.lhs) +
                             "," + fmt17(c.rhs) + "," + fmt17(c.ratio));
    return t;
}

std::string audit_summary(const AuditReport& r) {
    return r.lemma + " gamma=" + fmt17(r.gamma) + " n=" + std::to_string(r.n_samples) +
           " max=" + fmt17(r.max_ratio) + " median=" + fmt17(r.median_ratio) +
           " dispersion=" + fmt17(r.dispersion) +
           " unconverged=" + std::to_string(r.n_unconverged) +
           (r.plausible ? " verdict=uniform-constant-plausible" : " verdict=suspect");
}

}  // namespace kinlab
