#pragma once

#include <optional>
#include <span>
#include <vector>

#include "se3ocp/dynamics.hpp"

namespace se3ocp {

struct ConvergenceRow {
    double h;
    int steps;
    /// |difference(reference, s_N(h))|
    double error;
};

struct ConvergenceTable {
    Order order;
    std::vector<ConvergenceRow> rows;
    /// Richardson extrapolation from the two finest runs at the nominal order.
    RigidBodyState reference;
    /// Least-squares slope of log error against log h; empty when exact.
    std::optional<double> fitted_order;
    /// Every error at round-off level (the flow is reproduced exactly).
    bool exact = false;
};

/// Uncontrolled runs over a fixed horizon with each step size.
///
/// Needs at least three step sizes in geometric progression, each dividing
/// the horizon into a whole number of steps. Throws std::invalid_argument
/// otherwise.
ConvergenceTable convergence_study(const BodyParams& p, const GravityParams& g, const RigidBodyState& s0,
                                   double horizon, std::span<const double> step_sizes, Order order);

}  // namespace se3ocp
