// Python bindings for the velocity grid, the linearized operator, the decay
// synthesis, and the bound audits; enough surface to script experiments and
// inspect artifacts from a notebook.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kinlab/bounds.hpp"
#include "kinlab/decay.hpp"

namespace py = pybind11;
using namespace kinlab;

PYBIND11_MODULE(_kinlab, m) {
    m.doc() = "soft-potential kinetic-equation laboratory";

    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<VelocityGrid>(m, "VelocityGrid")
        .def_readonly("n_axis", &VelocityGrid::n_axis)
        .def_readonly("radius", &VelocityGrid::radius)
        .def_readonly("h", &VelocityGrid::h)
        .def_readonly("nodes", &VelocityGrid::nodes)
        .def_readonly("weights", &VelocityGrid::weights)
        .def_readonly("mass_defect", &VelocityGrid::mass_defect)
        .def("size", &VelocityGrid::size)
        .def("interpolate", &VelocityGrid::interpolate);
    m.def("build_grid", &build_grid, py::arg("n_axis"), py::arg("radius"));

    py::class_<CollisionConfig>(m, "CollisionConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &CollisionConfig::gamma)
        .def_readwrite("kappa", &CollisionConfig::kappa)
        .def_readwrite("omega_polar", &CollisionConfig::omega_polar)
        .def_readwrite("omega_azimuth", &CollisionConfig::omega_azimuth)
        .def_readwrite("radial_order", &CollisionConfig::radial_order)
        .def_readwrite("lattice_correction", &CollisionConfig::lattice_correction);

    m.def("nu_at_speed", &nu_at_speed, py::arg("speed"), py::arg("config"));
    m.def("loss_kernel", &k1);
    m.def("gain_kernel", &k2);
    m.def("kernel", &kernel);

    py::class_<LinearOperator>(m, "LinearOperator")
        .def_property_readonly("nu",
                               [](const LinearOperator& L) { return L.nu.values; })
        .def_property_readonly("nu0", [](const LinearOperator& L) { return L.nu.nu0_est; })
        .def_property_readonly("nu1", [](const LinearOperator& L) { return L.nu.nu1_est; })
        .def_property_readonly(
            "null_residual_raw",
            [](const LinearOperator& L) {
                return std::vector<double>(L.null_residual_raw.begin(),
                                           L.null_residual_raw.end());
            })
        .def("apply", [](const LinearOperator& L, const Eigen::VectorXd& g) {
            return apply_L(L, g);
        });
    m.def("assemble_operator", &assemble_L, py::arg("grid"), py::arg("config"));

    py::enum_<FitModel>(m, "FitModel")
        .value("power", FitModel::power)
        .value("stretched_exp", FitModel::stretched_exp);
    py::class_<FitResult>(m, "FitResult")
        .def_readonly("exponent", &FitResult::exponent)
        .def_readonly("intercept", &FitResult::intercept)
        .def_readonly("r_squared", &FitResult::r_squared)
        .def_readonly("n_used", &FitResult::n_used);
    m.def("fit_exponent", &fit_exponent, py::arg("t"), py::arg("y"), py::arg("t_lo"),
          py::arg("t_hi"), py::arg("model") = FitModel::power, py::arg("stretch_power") = 1.0);

    py::class_<DecayReport>(m, "DecayReport")
        .def_readonly("kind", &DecayReport::kind)
        .def_readonly("t", &DecayReport::t)
        .def_readonly("value", &DecayReport::value)
        .def_readonly("fit", &DecayReport::fit)
        .def_readonly("clean", &DecayReport::clean);
    py::class_<SynthesisConfig>(m, "SynthesisConfig")
        .def(py::init<>())
        .def_readwrite("n_rho", &SynthesisConfig::n_rho)
        .def_readwrite("rho_min", &SynthesisConfig::rho_min)
        .def_readwrite("rho_max", &SynthesisConfig::rho_max)
        .def_readwrite("bump_width", &SynthesisConfig::bump_width)
        .def_readwrite("dt", &SynthesisConfig::dt)
        .def_readwrite("t_end", &SynthesisConfig::t_end)
        .def_readwrite("snapshot_stride", &SynthesisConfig::snapshot_stride)
        .def_readwrite("fit_lo", &SynthesisConfig::fit_lo)
        .def_readwrite("fit_hi", &SynthesisConfig::fit_hi)
        .def_readwrite("source_kind", &SynthesisConfig::source_kind)
        .def_readwrite("source_rate", &SynthesisConfig::source_rate)
        .def_readwrite("gamma", &SynthesisConfig::gamma);
    m.def("synthesize_norms", &synthesize_norms, py::arg("config"), py::arg("grid"),
          py::arg("operator"), py::arg("psi"));

    py::class_<AuditReport>(m, "AuditReport")
        .def_readonly("lemma", &AuditReport::lemma)
        .def_readonly("gamma", &AuditReport::gamma)
        .def_readonly("n_samples", &AuditReport::n_samples)
        .def_readonly("n_unconverged", &AuditReport::n_unconverged)
        .def_readonly("max_ratio", &AuditReport::max_ratio)
        .def_readonly("median_ratio", &AuditReport::median_ratio)
        .def_readonly("dispersion", &AuditReport::dispersion)
        .def_readonly("plausible", &AuditReport::plausible)
        .def("summary", [](const AuditReport& r) { return audit_summary(r); });
    m.def("registered_bounds", &registered_bounds);
    m.def(
        "audit_bound",
        [](const std::string& id, const VelocityGrid& grid, const CollisionConfig& cfg,
           int n_samples, double tau, double q, std::uint64_t seed) {
            AuditSpec spec;
            spec.n_samples = n_samples;
            spec.tau = tau;
            spec.q = q;
            spec.seed = seed;
            return audit(id, spec, grid, cfg);
        },
        py::arg("id"), py::arg("grid"), py::arg("config"), py::arg("n_samples") = 32,
        py::arg("tau") = 1.0, py::arg("q") = 0.0, py::arg("seed") = 1);

    m.def("sqrt_maxwellian",
          [](const Vec3& xi) { return sqrt_maxwellian(xi); });
}
