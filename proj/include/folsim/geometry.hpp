#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "folsim/linalg.hpp"

namespace folsim {

// Open interval (lo, hi).
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Axis-aligned open box in R^d, used as the vertical domain V.
class Box {
public:
    Box() = default;
    explicit Box(std::vector<Interval> bounds);

    int dim() const { return static_cast<int>(bounds_.size()); }
    const Interval& bound(int i) const { return bounds_[i]; }

    bool contains(const Vec& v) const;

    // Euclidean distance from an interior point to the boundary (distance to
    // the nearest face). Negative for points outside.
    double boundary_distance(const Vec& v) const;

private:
    std::vector<Interval> bounds_;
};

struct ChartPoint {
    Vec u;  // leaf coordinates, length n
    Vec v;  // vertical coordinates, length d
};

// A foliated chart phi: U -> L x V with vertical projection pi. Charts are
// immutable after construction and safe to share across threads.
//
// Points are checked against the vertical domain only: the leaf factor is
// compact and saturated, so membership in U is determined by pi(p) in V.
class FoliatedChart {
public:
    virtual ~FoliatedChart() = default;

    virtual std::string name() const = 0;
    virtual int ambient_dim() const = 0;
    virtual int leaf_dim() const = 0;
    int codim() const { return vertical_domain().dim(); }
    virtual const Box& vertical_domain() const = 0;

    virtual ChartPoint to_chart(const Vec& p) const = 0;
    virtual Vec to_ambient(const ChartPoint& q) const = 0;

    // Differential of the vertical projection applied to an ambient tangent.
    virtual Vec dpi(const Vec& p, const Vec& tangent) const = 0;

    // Differential of the leaf coordinate (u-part of d phi).
    virtual Vec dleaf(const Vec& p, const Vec& tangent) const = 0;

    // pi(p) without the domain check; must be well defined on all of M near U.
    virtual Vec project(const Vec& p) const = 0;

    bool in_domain(const Vec& p) const { return vertical_domain().contains(project(p)); }

    // pi(p), throwing DomainError (with the offending point) outside U.
    Vec vertical_projection(const Vec& p) const;

    // Deterministic quasi-random ambient points inside the chart domain,
    // used by self-checks and foliation verification.
    std::vector<Vec> sample_domain_points(int count, std::uint64_t seed) const;

protected:
    // Leaf-coordinate ranges for sampling (kept strictly inside any
    // coordinate-singular set).
    virtual std::vector<Interval> leaf_sampling_ranges() const = 0;
};

// Tangent-vector field on the ambient space. The Jacobian is optional; it is
// required only by the Lyapunov estimator and by finite-difference checks.
struct VectorField {
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian;  // may be empty

    bool has_jacobian() const { return static_cast<bool>(jacobian); }
};

VectorField constant_field(Vec value);
VectorField linear_field(Mat m);  // eval = m * x, jacobian = m

// Cylindrical chart on R^3 minus the z-axis: u in (-pi, pi] is the angle,
// v = (r, z). The angular branch cut sits on the half-plane {x <= 0, y = 0};
// r and z are globally defined, so domain membership and exit detection do
// not see the cut.
std::shared_ptr<const FoliatedChart> make_cylinder_chart(Interval r_range, Interval z_range);

// Spherical-shell chart on R^3 minus the origin: leaves are concentric
// spheres, u = (polar, azimuth), v = (r). Undefined exactly at the poles.
std::shared_ptr<const FoliatedChart> make_sphere_chart(Interval r_range);

// Trivial product chart on R^2: u = x1 (leaf direction), v = x2. Used by the
// one-dimensional linear example embedded in the plane.
std::shared_ptr<const FoliatedChart> make_strip_chart(Interval v_range);

struct VectorDecomposition {
    Vec horizontal;  // u-part of d phi(K), length n
    Vec vertical;    // v-part, equal to dpi(K), length d
};

VectorDecomposition decompose_vector(const FoliatedChart& chart, const Vec& p, const Vec& k);

struct FoliationReport {
    double max_violation = 0.0;
    int worst_field = -1;
    Vec worst_point;
};

// Checks |dpi(X_k(p))| <= tol for every field at every sample point. Throws
// FoliationViolation describing the worst offender on failure.
FoliationReport verify_foliated(const std::vector<VectorField>& fields, const FoliatedChart& chart,
                                const std::vector<Vec>& sample_points, double tol = 1e-8);

}  // namespace folsim
