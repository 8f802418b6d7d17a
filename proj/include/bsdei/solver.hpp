#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bsdei/driver.hpp"
#include "bsdei/measure.hpp"
#include "bsdei/stochastic.hpp"

namespace bsdei {

struct SolverConfig {
    double tolerance = 1e-6;        // stop when the Y residual a_i drops below this
    std::size_t max_iterations = 50;
    int basis_degree = 3;           // total degree of the regression monomials
    double ridge = 1e-8;            // absolute Tikhonov term on the normal equations
};

// Backward solution on the grid: Y[k][j][m] in R^d and Z[k][j][m] in R^{d x d}
// for particle k, node j, path m.  Z at the terminal node is identically zero
// (the control lives on [0, T)).
struct SolutionField {
    std::size_t particles = 0, nodes = 0, paths = 0, dim = 0;
    TimeGrid grid{1.0, 1};
    std::uint64_t ensemble_seed = 0;
    std::vector<double> weights;  // particle weights p_k
    std::vector<double> y;        // [k][j][m][c]
    std::vector<double> z;        // [k][j][m][r][c]

    SolutionField() = default;
    SolutionField(std::size_t particles, const TimeGrid& grid, std::size_t paths, std::size_t dim,
                  std::vector<double> weights, std::uint64_t ensemble_seed);

    std::span<double> y_at(std::size_t k, std::size_t j, std::size_t m) {
        return {y.data() + ((k * nodes + j) * paths + m) * dim, dim};
    }
    std::span<const double> y_at(std::size_t k, std::size_t j, std::size_t m) const {
        return {y.data() + ((k * nodes + j) * paths + m) * dim, dim};
    }
    std::span<double> z_at(std::size_t k, std::size_t j, std::size_t m) {
        return {z.data() + ((k * nodes + j) * paths + m) * dim * dim, dim * dim};
    }
    std::span<const double> z_at(std::size_t k, std::size_t j, std::size_t m) const {
        return {z.data() + ((k * nodes + j) * paths + m) * dim * dim, dim * dim};
    }
};

// Residual history of the fixed-point iteration.  residual_y[i] is the
// particle-summed, time-averaged, path-mean squared change of Y between
// sweeps i and i+1 of the recorded history (index 0 compares against the
// initial guess); residual_z is the analogous time-integrated change of Z.
struct PicardReport {
    std::vector<double> residual_y;
    std::vector<double> residual_z;
    bool converged = false;
    double tolerance = 0.0;
    std::size_t iterations() const { return residual_y.size(); }
    // Sweeps that moved the solution by at least the tolerance.
    std::size_t effective_iterations() const;
};

// E[target | F_{t_cond}] for a target observed per path at node src >= cond.
// The target is least-squares fitted on the monomial basis of B(t_src) (total
// degree per config, ridge-regularized) and the fitted polynomial is then
// conditioned in closed form down to B(t_cond) under the Gaussian transition.
// In-span targets are therefore reproduced to solver precision, independent
// of the path count.  Throws if paths < basis size (degenerate regression)
// or on node/dimension misuse.  target is a flat [m][c] buffer of extent
// paths x dim; the result has the same layout.
std::vector<double> conditional_expectation(std::span<const double> target, std::size_t dim,
                                            const BrownianEnsemble& ensemble, std::size_t src_node,
                                            std::size_t cond_node, const SolverConfig& config);

// One backward linear pass with frozen drift samples:
//   Y[k][n] = xi[k],   Y[k][j] = E[Y[k][j+1] | F_{t_j}] + drift[k][j] dt,
//   Z[k][j] = E[Y[k][j+1] (deltaB_j)^T | F_{t_j}] / dt.
// drift is flat [k][j][m][c] over j in [0, steps); terminal is flat [k][m][c].
// The terminal node is pinned exactly.  weights are carried into the field.
SolutionField linear_bsde_solve(std::span<const double> drift, std::span<const double> terminal,
                                std::span<const double> weights, const BrownianEnsemble& ensemble,
                                const SolverConfig& config);

enum class PicardInit {
    Zero,                // Y^0 = 0
    TerminalPropagated,  // Y^0(t_j) = realized xi for every node
};

// Heavy-particle solve: Picard iteration of the backward system coupled
// through its own empirical measure, starting from the given initial guess.
// Non-convergence is reported, never thrown.
struct PicardOutcome {
    SolutionField field;
    PicardReport report;
};
PicardOutcome picard_iterate(const DiscreteMeasure& mu0, const TerminalField& terminal,
                             const DriverSpec& driver, const BrownianEnsemble& ensemble,
                             const SolverConfig& config, PicardInit init = PicardInit::Zero);

// Solution for one extra (weightless) point u riding on a frozen heavy field:
// same backward equation, with the interaction term driven entirely by the
// heavy trajectories.  y is flat [j][m][c], z flat [j][m][r][c].
struct LightSolution {
    std::size_t nodes = 0, paths = 0, dim = 0;
    std::vector<double> y;
    std::vector<double> z;
    PicardReport report;

    std::span<const double> y_at(std::size_t j, std::size_t m) const {
        return {y.data() + (j * paths + m) * dim, dim};
    }
    std::span<const double> z_at(std::size_t j, std::size_t m) const {
        return {z.data() + (j * paths + m) * dim * dim, dim * dim};
    }
};
LightSolution solve_light(std::span<const double> u, const SolutionField& heavy,
                          const TerminalField& terminal, const DriverSpec& driver,
                          const BrownianEnsemble& ensemble, const SolverConfig& config);

// Runs the heavy solve from both initial guesses on the same ensemble and
// reports the largest per-(particle, node) cross-path RMS discrepancy between
// the two converged solutions.  Inconclusive when either run fails to converge.
struct UniquenessReport {
    bool conclusive = false;
    double y_rms = 0.0;
    double z_rms = 0.0;
    PicardReport from_zero;
    PicardReport from_terminal;
};
UniquenessReport uniqueness_probe(const DiscreteMeasure& mu0, const TerminalField& terminal,
                                  const DriverSpec& driver, const BrownianEnsemble& ensemble,
                                  const SolverConfig& config);

// Empirical measure flow of a solution: per (node, path) the atoms are the
// particle values Y[.][j][m] under the original weights.
MeasureFlow measure_flow(const SolutionField& field);

}  // namespace bsdei
