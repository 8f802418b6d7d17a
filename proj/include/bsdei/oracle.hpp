#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bsdei/driver.hpp"
#include "bsdei/measure.hpp"
#include "bsdei/stochastic.hpp"

namespace bsdei {

// Independent reference routes used to validate the Monte Carlo solver and the
// transport LP.  Everything here is deliberately implemented with different
// algorithms from the production paths.

// Trajectory of the noiseless backward system on a uniform grid:
// positions[j][k] approximates Y(u_k, t_j) where dY/d(T - t) equals the heavy
// drift, integrated from the terminal state with classical RK4.  `atoms`
// counts every column: the weighted atoms first, then any ride-along probes.
struct OdeTrajectory {
    double horizon = 0.0;
    std::size_t steps = 0, atoms = 0, dim = 0;
    std::vector<double> positions;  // [node j][atom k][coord]

    std::span<const double> at(std::size_t j, std::size_t k) const {
        return {positions.data() + (j * atoms + k) * dim, dim};
    }
};

// Solves the deterministic backward system for the atoms of mu0 (terminal
// state xi(u_k)); `probes` are extra zero-weight points carried through the
// same flow.  Probe columns follow the atom columns.  Requires a
// deterministic terminal field.
OdeTrajectory backward_ode_solve(const DiscreteMeasure& mu0, const TerminalField& terminal,
                                 const DriverSpec& driver, double horizon, std::size_t steps,
                                 std::span<const Point> probes = {});

// Re-integrates the flow forward from the computed t = 0 state and returns the
// max-norm gap to the terminal state actually used.  A fourth-order integrator
// should shrink this by ~16x per step halving.
double forward_replay_error(const OdeTrajectory& trajectory, const DiscreteMeasure& mu0,
                            const DriverSpec& driver);

// Exact optimal transport by brute force: enumerates every basic feasible
// solution (vertex) of the transportation polytope.  Only viable for
// measures with <= 4 atoms; p = 0 selects the bounded cost r / (1 + r)
// without a root, p >= 1 the usual |u - v|^p cost with a 1/p root.
double brute_force_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p);

// Closed-form conditional expectations for d = 1 reference targets.
enum class AnalyticCase {
    TerminalValue,    // E[B(T)        | F_t] = B(t)
    SquaredTerminal,  // E[B(T)^2      | F_t] = B(t)^2 + (T - t)
    AffineTerminal,   // E[u + B(T)    | F_t] = u + B(t)
};
AnalyticCase analytic_case_from_string(std::string_view id);  // throws on unknown id

// Per-path reference values of the case's conditional expectation at `node`.
std::vector<double> analytic_reference(AnalyticCase which, const BrownianEnsemble& ensemble,
                                       std::size_t node, double u = 0.0);

}  // namespace bsdei
