#include "folsim/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "folsim/errors.hpp"
#include "folsim/noise.hpp"

namespace folsim {

namespace {

std::string point_to_string(const Vec& p) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) os << ", ";
        os << p[i];
    }
    os << ")";
    return os.str();
}

}  // namespace

Box::Box(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
    for (const auto& b : bounds_)
        if (!(b.lo < b.hi)) throw ParameterError("Box: empty interval");
}

bool Box::contains(const Vec& v) const {
    if (static_cast<int>(v.size()) != dim()) return false;
    for (int i = 0; i < dim(); ++i)
        if (!(v[i] > bounds_[i].lo && v[i] < bounds_[i].hi)) return false;
    return true;
}

double Box::boundary_distance(const Vec& v) const {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim(); ++i) {
        d = std::min(d, v[i] - bounds_[i].lo);
        d = std::min(d, bounds_[i].hi - v[i]);
    }
    return d;
}

Vec FoliatedChart::vertical_projection(const Vec& p) const {
    const Vec v = project(p);
    if (!vertical_domain().contains(v))
        throw DomainError("point outside chart domain: " + point_to_string(p));
    return v;
}

std::vector<Vec> FoliatedChart::sample_domain_points(int count, std::uint64_t seed) const {
    const CounterRng rng(seed, 0x67656f6d);  // "geom"
    const Box& box = vertical_domain();
    const std::vector<Interval> leaf_ranges = leaf_sampling_ranges();
    std::vector<Vec> points;
    points.reserve(count);
    std::uint64_t ctr = 0;
    for (int i = 0; i < count; ++i) {
        ChartPoint q;
        for (const Interval& range : leaf_ranges)
            q.u.push_back(range.lo + (range.hi - range.lo) * rng.uniform01(ctr++));
        for (int axis = 0; axis < box.dim(); ++axis) {
            const Interval& b = box.bound(axis);
            // Stay 5% inside each face so round-trip checks have headroom.
            const double pad = 0.05 * (b.hi - b.lo);
            q.v.push_back(b.lo + pad + (b.hi - b.lo - 2.0 * pad) * rng.uniform01(ctr++));
        }
        points.push_back(to_ambient(q));
    }
    return points;
}

VectorField constant_field(Vec value) {
    const int n = static_cast<int>(value.size());
    VectorField f;
    f.eval = [value = std::move(value)](const Vec&) { return value; };
    f.jacobian = [n](const Vec&) { return Mat(n, n); };
    return f;
}

VectorField linear_field(Mat m) {
    VectorField f;
    auto shared = std::make_shared<Mat>(std::move(m));
    f.eval = [shared](const Vec& x) { return shared->apply(x); };
    f.jacobian = [shared](const Vec&) { return *shared; };
    return f;
}

// ---------------------------------------------------------------------------
// Cylinder chart

namespace {

class CylinderChart final : public FoliatedChart {
public:
    CylinderChart(Interval r_range, Interval z_range) : domain_({r_range, z_range}) {
        if (!(r_range.lo > 0.0)) throw ParameterError("cylinder chart: r_min must be positive");
    }

    std::string name() const override { return "cylinder"; }
    int ambient_dim() const override { return 3; }
    int leaf_dim() const override { return 1; }
    const Box& vertical_domain() const override { return domain_; }

    Vec project(const Vec& p) const override { return {std::hypot(p[0], p[1]), p[2]}; }

    ChartPoint to_chart(const Vec& p) const override {
        return {{std::atan2(p[1], p[0])}, project(p)};
    }

    Vec to_ambient(const ChartPoint& q) const override {
        const double u = q.u[0], r = q.v[0], z = q.v[1];
        return {r * std::cos(u), r * std::sin(u), z};
    }

    Vec dpi(const Vec& p, const Vec& w) const override {
        const double r = std::hypot(p[0], p[1]);
        return {(p[0] * w[0] + p[1] * w[1]) / r, w[2]};
    }

    Vec dleaf(const Vec& p, const Vec& w) const override {
        const double r2 = p[0] * p[0] + p[1] * p[1];
        return {(-p[1] * w[0] + p[0] * w[1]) / r2};
    }

protected:
    std::vector<Interval> leaf_sampling_ranges() const override {
        const double pi = std::numbers::pi;
        return {{-0.95 * pi, 0.95 * pi}};
    }

private:
    Box domain_;
};

// ---------------------------------------------------------------------------
// Sphere chart

class SphereChart final : public FoliatedChart {
public:
    explicit SphereChart(Interval r_range) : domain_({r_range}) {
        if (!(r_range.lo > 0.0)) throw ParameterError("sphere chart: r_min must be positive");
    }

    std::string name() const override { return "sphere"; }
    int ambient_dim() const override { return 3; }
    int leaf_dim() const override { return 2; }
    const Box& vertical_domain() const override { return domain_; }

    Vec project(const Vec& p) const override {
        return {std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])};
    }

    ChartPoint to_chart(const Vec& p) const override {
        const double r = project(p)[0];
        return {{std::acos(p[2] / r), std::atan2(p[1], p[0])}, {r}};
    }

    Vec to_ambient(const ChartPoint& q) const override {
        const double th = q.u[0], ph = q.u[1], r = q.v[0];
        return {r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph),
                r * std::cos(th)};
    }

    Vec dpi(const Vec& p, const Vec& w) const override {
        const double r = project(p)[0];
        return {(p[0] * w[0] + p[1] * w[1] + p[2] * w[2]) / r};
    }

    Vec dleaf(const Vec& p, const Vec& w) const override {
        const double r = project(p)[0];
        const double rho2 = p[0] * p[0] + p[1] * p[1];
        const double rho = std::sqrt(rho2);
        const double dr = (p[0] * w[0] + p[1] * w[1] + p[2] * w[2]) / r;
        // theta = acos(z/r): d theta = (z dr / r - dz) / (r sin theta)
        const double dtheta = (p[2] * dr / r - w[2]) / rho;
        const double dphi = (-p[1] * w[0] + p[0] * w[1]) / rho2;
        return {dtheta, dphi};
    }

protected:
    std::vector<Interval> leaf_sampling_ranges() const override {
        const double pi = std::numbers::pi;
        return {{0.1 * pi, 0.9 * pi}, {-0.95 * pi, 0.95 * pi}};
    }

private:
    Box domain_;
};

// ---------------------------------------------------------------------------
// Strip chart (plane with horizontal-line leaves)

class StripChart final : public FoliatedChart {
public:
    explicit StripChart(Interval v_range) : domain_({v_range}) {}

    std::string name() const override { return "strip"; }
    int ambient_dim() const override { return 2; }
    int leaf_dim() const override { return 1; }
    const Box& vertical_domain() const override { return domain_; }

    Vec project(const Vec& p) const override { return {p[1]}; }
    ChartPoint to_chart(const Vec& p) const override { return {{p[0]}, {p[1]}}; }
    Vec to_ambient(const ChartPoint& q) const override { return {q.u[0], q.v[0]}; }
    Vec dpi(const Vec&, const Vec& w) const override { return {w[1]}; }
    Vec dleaf(const Vec&, const Vec& w) const override { return {w[0]}; }

protected:
    std::vector<Interval> leaf_sampling_ranges() const override { return {{-2.0, 2.0}}; }

private:
    Box domain_;
};

}  // namespace

std::shared_ptr<const FoliatedChart> make_cylinder_chart(Interval r_range, Interval z_range) {
    return std::make_shared<CylinderChart>(r_range, z_range);
}

std::shared_ptr<const FoliatedChart> make_sphere_chart(Interval r_range) {
    return std::make_shared<SphereChart>(r_range);
}

std::shared_ptr<const FoliatedChart> make_strip_chart(Interval v_range) {
    return std::make_shared<StripChart>(v_range);
}

VectorDecomposition decompose_vector(const FoliatedChart& chart, const Vec& p, const Vec& k) {
    if (!chart.in_domain(p))
        throw DomainError("decompose_vector: point outside chart domain: " + point_to_string(p));
    return {chart.dleaf(p, k), chart.dpi(p, k)};
}

FoliationReport verify_foliated(const std::vector<VectorField>& fields, const FoliatedChart& chart,
                                const std::vector<Vec>& sample_points, double tol) {
    FoliationReport report;
    for (const Vec& p : sample_points) {
        if (!chart.in_domain(p))
            throw DomainError("verify_foliated: sample point outside chart domain: " +
                              point_to_string(p));
        for (std::size_t k = 0; k < fields.size(); ++k) {
            const double violation = norm(chart.dpi(p, fields[k].eval(p)));
            if (violation > report.max_violation) {
                report.max_violation = violation;
                report.worst_field = static_cast<int>(k);
                report.worst_point = p;
            }
        }
    }
    if (report.max_violation > tol) {
        std::ostringstream os;
        os << "field X_" << report.worst_field << " has |dpi(X)| = " << report.max_violation
           << " > " << tol << " at " << point_to_string(report.worst_point);
        throw FoliationViolation(os.str());
    }
    return report;
}

}  // namespace folsim
