#pragma once
// Quadrature-oracle audits of the kernel, weighted-operator, and bilinear-form
// inequalities: each registered bound id evaluates both sides on low-discrepancy
// or seeded-random arguments and reports the empirical constant.  Left-hand
// sides of the moment bounds are integrated on an auxiliary shifted spherical
// mesh, independent of the production kernel matrix, with a doubled-resolution
// convergence check per case.

#include "kinlab/collision.hpp"
#include "kinlab/harness.hpp"
#include "kinlab/weights.hpp"

namespace kinlab {

// One audited argument tuple.
struct BoundCase {
    int sample = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double scale = 0.0;    // |xi| of the sampled center (0 when not geometric)
    bool converged = true; // doubled-resolution lhs within 1%
};

struct AuditSpec {
    int n_samples = 64;
    double box = 6.0;       // sampled velocities live in [-box, box]^3
    double tau = 0.0;       // polynomial moment exponent (lambda for sup bounds)
    double q = 0.0;         // Lq / power exponent where the bound carries one
    std::uint64_t seed = 1;
    int radial_order = 8;   // Gauss-Legendre order per radial panel
    int sphere_order = 8;   // polar x azimuth resolution of the shifted sphere
    const WeightEvaluator* weight = nullptr;  // conjugating weight, if any
    double t = 0.0, x = 0.0;                  // evaluation point of the weight
};

struct AuditReport {
    std::string lemma;
    double gamma = 0.0;
    double tau = 0.0;
    double q = 0.0;
    std::uint64_t seed = 0;
    int n_samples = 0;
    int n_unconverged = 0;
    double max_ratio = 0.0;
    double median_ratio = 0.0;
    double dispersion = 0.0;  // max / median
    bool growing = false;     // ratio grows monotonically with |xi|
    bool plausible = false;   // uniform constant plausible
    std::vector<BoundCase> cases;
};

// How a bound id is audited and which dispersion budget applies to it.
// Pointwise envelope bounds deliberately overshoot away from the kernel
// singularity (their Gaussian factor is slack by construction), so their
// dispersion carries no information; they are held to a finite constant and
// convergence only.
struct BoundInfo {
    enum Kind { pointwise, moment, functional, bilinear };
    Kind kind = moment;
    bool needs_weight = false;
    bool has_dispersion_budget = true;
    std::string range;  // human-readable validity description
};

// Registered bound ids; throws PreconditionError for unknown ids.
const BoundInfo& bound_info(const std::string& id);
std::vector<std::string> registered_bounds();

// Runs one audit.  Throws PreconditionError when gamma (or the exponent in
// spec.q) lies outside the bound's validity range, naming the range.
AuditReport audit(const std::string& id, const AuditSpec& spec, const VelocityGrid& grid,
                  const CollisionConfig& cfg);

// The bilinear-form family on random triples: product, L2, weighted-sup, and
// the pointwise loss envelope; gain and loss parts audited separately where
// the displays separate them.
std::vector<AuditReport> audit_gamma_family(const AuditSpec& spec, const VelocityGrid& grid,
                                            const CollisionConfig& cfg);

// CSV artifact: lemma,gamma,tau,q,sample,lhs,rhs,ratio.
CsvTable audit_csv(const std::vector<AuditReport>& reports);

// One summary line per report.
std::string audit_summary(const AuditReport& r);

}  // namespace kinlab
