#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "folsim/geometry.hpp"

namespace folsim {

// A foliated SDE together with a transversal perturbation:
//   dx = X0 dt + sum_k Xk o dB^k          (unperturbed)
//   dy = X0 dt + sum_k Xk o dB^k + eps*K dt
// X0..Xr are leaf-tangent; only eps*K moves the vertical coordinate.
struct FoliatedSystem {
    std::string name;
    std::shared_ptr<const FoliatedChart> chart;
    VectorField drift;                   // X0
    std::vector<VectorField> diffusion;  // X1..Xr
    VectorField perturbation;            // K
    double epsilon = 0.0;

    Vec default_x0;

    // Closed-form flow of the unperturbed system over one step, available for
    // systems whose leaf dynamics integrate exactly (keeps leaf-integration
    // error out of rate measurements). Null when no closed form exists.
    std::function<Vec(const Vec& state, double dt, const Vec& db)> exact_leaf_step;

    // Average of g over the leaf above vertical point v against the declared
    // invariant measure, with the given node count. Null when the example
    // declares no invariant measure.
    std::function<double(const std::function<double(const Vec&)>& g, const Vec& v, int nodes)>
        leaf_average;

    // Analytic averaged field (Q^{dpi_1 K}, ..., Q^{dpi_d K}), when known.
    std::function<Vec(const Vec& v)> averaged_closed_form;

    // Structure flags for the improved time envelopes: fields constant along
    // the leaves in chart coordinates, and additionally a constant X0.
    bool fields_depend_only_on_vertical = false;
    bool drift_constant_in_chart = false;

    int driving_dims() const { return static_cast<int>(diffusion.size()); }
    bool has_exact_leaf() const { return static_cast<bool>(exact_leaf_step); }
    bool has_leaf_measure() const { return static_cast<bool>(leaf_average); }

    FoliatedSystem with_epsilon(double eps) const {
        FoliatedSystem s = *this;
        s.epsilon = eps;
        return s;
    }

    // g = dpi_i(K), the i-th vertical component of the perturbation.
    std::function<double(const Vec&)> vertical_component(int i) const;
};

enum class PerturbationKind { none, constant, linear_x };

struct CylinderParams {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    Interval r_range{0.2, 4.0};
    Interval z_range{-2.0, 2.0};
    PerturbationKind kind = PerturbationKind::constant;
    double k1 = 1.0, k2 = 0.0, k3 = 0.0;  // constant-perturbation components
};

// Rotationally invariant system on R^3 minus the z-axis: circular leaves of
// fixed (r, z), driven by dx = A x (lambda1 dt + lambda2 o dB) with A the
// rotation generator in the horizontal plane.
FoliatedSystem make_cylinder_system(const CylinderParams& params, double epsilon);

struct SphereParams {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    Interval r_range{0.2, 4.0};
    PerturbationKind kind = PerturbationKind::constant;
    double k1 = 1.0, k2 = 0.0, k3 = 0.0;
};

// Spherical leaves in R^3 minus the origin, driven by the three rotation
// generators; the uniform measure on each sphere is invariant.
FoliatedSystem make_sphere_system(const SphereParams& params, double epsilon);

// One-dimensional linear leaf dynamics dx = x o dB embedded in the plane with
// horizontal-line leaves, perturbed along the leaf: dy = y o dB + eps dt.
// With epsilon = 0 this is the textbook system with solution x0 * exp(B_t).
FoliatedSystem make_scalar_linear_system(double epsilon, Interval v_range = {-1.0, 1.0});

}  // namespace folsim
