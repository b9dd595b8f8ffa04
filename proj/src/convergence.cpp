#include "se3ocp/convergence.hpp"

#include <cmath>
#include <stdexcept>

#include "se3ocp/linearize.hpp"

namespace se3ocp {

namespace {

int whole_steps(double horizon, double h) {
    const double n = horizon / h;
    const double rounded = std::round(n);
    if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * rounded) {
        throw std::invalid_argument("step size does not divide the horizon into whole steps");
    }
    return static_cast<int>(rounded);
}

RigidBodyState endpoint(const BodyParams& p, const GravityParams& g, const RigidBodyState& s0, double horizon,
                        int n, Order order) {
    const std::size_t samples = static_cast<std::size_t>(order == Order::Second ? n + 1 : n);
    const std::vector<ControlSample> none(samples);
    return simulate(p, g, StepSize(horizon / n), s0, none, order).back();
}

}  // namespace

ConvergenceTable convergence_study(const BodyParams& p, const GravityParams& g, const RigidBodyState& s0,
                                   double horizon, std::span<const double> step_sizes, Order order) {
    if (step_sizes.size() < 3) throw std::invalid_argument("convergence study needs at least three step sizes");
    if (!(horizon > 0.0)) throw std::invalid_argument("convergence horizon must be positive");
    const double ratio = step_sizes[0] / step_sizes[1];
    if (!(ratio > 1.0)) throw std::invalid_argument("step sizes must decrease");
    for (std::size_t i = 1; i + 1 < step_sizes.size(); ++i) {
        if (std::abs(step_sizes[i] / step_sizes[i + 1] - ratio) > 1e-9 * ratio) {
            throw std::invalid_argument("step sizes must form a geometric progression");
        }
    }

    ConvergenceTable t;
    t.order = order;
    Trajectory ends;
    for (double h : step_sizes) {
        const int n = whole_steps(horizon, h);
        t.rows.push_back({h, n, 0.0});
        ends.push_back(endpoint(p, g, s0, horizon, n, order));
    }

    // y_ref = y_fine + (y_fine - y_coarse) / (r^p - 1), taken in the local chart at y_fine.
    const RigidBodyState& fine = ends.back();
    const RigidBodyState& coarse = ends[ends.size() - 2];
    const double weight = 1.0 / (std::pow(ratio, static_cast<int>(order)) - 1.0);
    t.reference = perturb(fine, weight * difference(fine, coarse));

    double scale = 1.0;
    for (const RigidBodyState& s : ends) scale = std::max({scale, s.x.norm(), s.gamma.norm(), s.Pi.norm()});
    bool exact = true;
    for (std::size_t i = 0; i < ends.size(); ++i) {
        t.rows[i].error = difference(t.reference, ends[i]).norm();
        exact = exact && t.rows[i].error <= 1e-12 * scale;
    }
    t.exact = exact;
    if (exact) return t;

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double m = static_cast<double>(t.rows.size());
    for (const ConvergenceRow& r : t.rows) {
        const double lx = std::log(r.h);
        const double ly = std::log(std::max(r.error, 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    t.fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return t;
}

}  // namespace se3ocp
