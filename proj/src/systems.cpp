#include "folsim/systems.hpp"

#include <cmath>
#include <numbers>

#include "folsim/errors.hpp"

namespace folsim {

namespace {

constexpr double kPi = std::numbers::pi;

Mat rotation_generator_z3() {
    Mat a(3, 3);
    a(0, 1) = -1.0;
    a(1, 0) = 1.0;
    return a;
}

Mat rotation_generator_x3() {
    Mat a(3, 3);
    a(1, 2) = -1.0;
    a(2, 1) = 1.0;
    return a;
}

Mat rotation_generator_y3() {
    Mat a(3, 3);
    a(2, 0) = -1.0;
    a(0, 2) = 1.0;
    return a;
}

// Rodrigues rotation of v about axis-angle vector omega.
Vec rotate_axis_angle(const Vec& omega, const Vec& v) {
    const double theta = norm(omega);
    if (theta == 0.0) return v;
    const Vec n = scaled(omega, 1.0 / theta);
    const double c = std::cos(theta), s = std::sin(theta);
    const Vec cross{n[1] * v[2] - n[2] * v[1], n[2] * v[0] - n[0] * v[2],
                    n[0] * v[1] - n[1] * v[0]};
    const double nv = dot(n, v);
    Vec out(3);
    for (int i = 0; i < 3; ++i) out[i] = c * v[i] + s * cross[i] + (1.0 - c) * nv * n[i];
    return out;
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

VectorField perturbation_field(PerturbationKind kind, double k1, double k2, double k3, int dim) {
    switch (kind) {
        case PerturbationKind::none:
            return constant_field(Vec(dim, 0.0));
        case PerturbationKind::constant: {
            Vec k{k1, k2};
            if (dim == 3) k.push_back(k3);
            return constant_field(std::move(k));
        }
        case PerturbationKind::linear_x: {
            Mat m(dim, dim);
            m(0, 0) = 1.0;
            return linear_field(std::move(m));
        }
    }
    throw ParameterError("unknown perturbation kind");
}

}  // namespace

std::function<double(const Vec&)> FoliatedSystem::vertical_component(int i) const {
    const auto chart_ptr = chart;
    const auto k = perturbation;
    return [chart_ptr, k, i](const Vec& p) { return chart_ptr->dpi(p, k.eval(p))[i]; };
}

FoliatedSystem make_cylinder_system(const CylinderParams& params, double epsilon) {
    FoliatedSystem sys;
    sys.name = "cylinder";
    sys.chart = make_cylinder_chart(params.r_range, params.z_range);
    sys.epsilon = epsilon;
    sys.default_x0 = {1.0, 0.0, 0.0};

    const Mat a = rotation_generator_z3();
    Mat drift_m(3, 3), diff_m(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            drift_m(i, j) = params.lambda1 * a(i, j);
            diff_m(i, j) = params.lambda2 * a(i, j);
        }
    sys.drift = linear_field(std::move(drift_m));
    sys.diffusion = {linear_field(std::move(diff_m))};
    sys.perturbation = perturbation_field(params.kind, params.k1, params.k2, params.k3, 3);

    // In chart coordinates the leaf dynamics is du = lambda1 dt + lambda2 o dB
    // with (r, z) frozen, so both improved envelope forms apply.
    sys.fields_depend_only_on_vertical = true;
    sys.drift_constant_in_chart = true;

    const double l1 = params.lambda1, l2 = params.lambda2;
    sys.exact_leaf_step = [l1, l2](const Vec& p, double dt, const Vec& db) {
        const double dtheta = l1 * dt + l2 * db[0];
        const double c = std::cos(dtheta), s = std::sin(dtheta);
        return Vec{c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
    };

    sys.leaf_average = [](const std::function<double(const Vec&)>& g, const Vec& v, int nodes) {
        // Normalized angle measure on the circle leaf: periodic trapezoid rule.
        const double r = v[0], z = v[1];
        double s = 0.0;
        for (int j = 0; j < nodes; ++j) {
            const double u = -kPi + 2.0 * kPi * j / nodes;
            s += g(Vec{r * std::cos(u), r * std::sin(u), z});
        }
        return s / nodes;
    };

    switch (params.kind) {
        case PerturbationKind::none:
            sys.averaged_closed_form = [](const Vec&) { return Vec{0.0, 0.0}; };
            break;
        case PerturbationKind::constant: {
            const double k3 = params.k3;
            sys.averaged_closed_form = [k3](const Vec&) { return Vec{0.0, k3}; };
            break;
        }
        case PerturbationKind::linear_x:
            sys.averaged_closed_form = [](const Vec& v) { return Vec{v[0] / 2.0, 0.0}; };
            break;
    }
    return sys;
}

FoliatedSystem make_sphere_system(const SphereParams& params, double epsilon) {
    FoliatedSystem sys;
    sys.name = "sphere";
    sys.chart = make_sphere_chart(params.r_range);
    sys.epsilon = epsilon;
    sys.default_x0 = {1.0, 0.0, 0.0};

    const Mat ax = rotation_generator_x3(), ay = rotation_generator_y3(),
              az = rotation_generator_z3();
    Mat drift_m(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) drift_m(i, j) = params.lambda1 * az(i, j);
    sys.drift = linear_field(std::move(drift_m));
    for (const Mat* gen : {&ax, &ay, &az}) {
        Mat m(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = params.lambda2 * (*gen)(i, j);
        sys.diffusion.push_back(linear_field(std::move(m)));
    }
    sys.perturbation = perturbation_field(params.kind, params.k1, params.k2, params.k3, 3);

    const double l1 = params.lambda1, l2 = params.lambda2;
    // Exponential (Rodrigues) step: exact on the leaf, strong order 1 in law.
    sys.exact_leaf_step = [l1, l2](const Vec& p, double dt, const Vec& db) {
        const Vec omega{l2 * db[0], l2 * db[1], l1 * dt + l2 * db[2]};
        return rotate_axis_angle(omega, p);
    };

    sys.leaf_average = [](const std::function<double(const Vec&)>& g, const Vec& v, int nodes) {
        // Uniform measure on the sphere: Gauss-Legendre in cos(theta) times
        // periodic trapezoid in azimuth.
        const double r = v[0];
        std::vector<double> cn, cw;
        gauss_legendre(nodes, cn, cw);
        double total = 0.0;
        for (int i = 0; i < nodes; ++i) {
            const double c = cn[i], s = std::sqrt(std::max(0.0, 1.0 - c * c));
            double ring = 0.0;
            for (int j = 0; j < nodes; ++j) {
                const double ph = -kPi + 2.0 * kPi * j / nodes;
                ring += g(Vec{r * s * std::cos(ph), r * s * std::sin(ph), r * c});
            }
            total += cw[i] * ring / nodes;
        }
        return total / 2.0;
    };

    switch (params.kind) {
        case PerturbationKind::none:
        case PerturbationKind::constant:
            sys.averaged_closed_form = [](const Vec&) { return Vec{0.0}; };
            break;
        case PerturbationKind::linear_x:
            sys.averaged_closed_form = [](const Vec& v) { return Vec{v[0] / 3.0}; };
            break;
    }
    return sys;
}

FoliatedSystem make_scalar_linear_system(double epsilon, Interval v_range) {
    FoliatedSystem sys;
    sys.name = "scalar_linear";
    sys.chart = make_strip_chart(v_range);
    sys.epsilon = epsilon;
    sys.default_x0 = {1.0, 0.0};

    sys.drift = constant_field(Vec{0.0, 0.0});
    Mat e11(2, 2);
    e11(0, 0) = 1.0;
    sys.diffusion = {linear_field(std::move(e11))};
    sys.perturbation = constant_field(Vec{1.0, 0.0});

    sys.exact_leaf_step = [](const Vec& p, double, const Vec& db) {
        return Vec{p[0] * std::exp(db[0]), p[1]};
    };
    // Leaves are unbounded lines: no invariant leaf measure is declared, and
    // the diffusion coefficient varies along the leaf.
    sys.fields_depend_only_on_vertical = false;
    sys.drift_constant_in_chart = true;
    return sys;
}

}  // namespace folsim
