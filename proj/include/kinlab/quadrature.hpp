#pragma once
// Gauss-Legendre rules (Newton on the Legendre recurrence) plus a composite
// panel helper.  Orders are small (<= 64); nodes are cached per order.

#include <map>
#include <mutex>
#include <vector>

#include "kinlab/util.hpp"

namespace kinlab {

struct GaussRule {
    std::vector<double> x;  // nodes on (-1,1)
    std::vector<double> w;
};

inline const GaussRule& gauss_legendre(int order) {
    static std::map<int, GaussRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
    if (order < 1) throw PreconditionError("gauss_legendre: order >= 1 required");
    GaussRule r;
    r.x.resize(order);
    r.w.resize(order);
    for (int i = 0; i < (order + 1) / 2; ++i) {
        // Chebyshev initial guess, Newton refinement.
        double x = std::cos(3.141592653589793238 * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < order; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = order * (x * p0 - p1) / (x * x - 1.0);
            double dx = -p0 / pp;
            x += dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.x[i] = -x;
        r.x[order - 1 - i] = x;
        r.w[i] = r.w[order - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return cache.emplace(order, std::move(r)).first->second;
}

// Integrate f over [a,b] with a single mapped rule.
template <class F>
double gl_integrate(F&& f, double a, double b, int order) {
    const GaussRule& r = gauss_legendre(order);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a), s = 0.0;
    for (int i = 0; i < order; ++i) s += r.w[i] * f(mid + half * r.x[i]);
    return s * half;
}

// Composite: unit-length panels (last one possibly shorter).
template <class F>
double gl_integrate_panels(F&& f, double a, double b, int order, double panel = 1.0) {
    double s = 0.0;
    for (double lo = a; lo < b; lo += panel) s += gl_integrate(f, lo, std::min(lo + panel, b), order);
    return s;
}

}  // namespace kinlab
