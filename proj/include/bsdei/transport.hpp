#pragma once

#include <cstddef>
#include <vector>

#include "bsdei/measure.hpp"

namespace bsdei {

// Transport plan between two discrete measures, stored row-major
// (rows = atoms of mu, cols = atoms of nu) together with the achieved cost.
struct Coupling {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> flow;  // rows * cols entries
    double cost = 0.0;

    double at(std::size_t i, std::size_t j) const { return flow[i * cols + j]; }

    // Largest marginal violation against the given measures.
    double marginal_error(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const;
};

// Order-p Wasserstein distance ( inf over couplings of sum pi_ij |u_i - v_j|^p )^(1/p),
// p >= 1, computed with an exact transportation-simplex solve.
double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p);

// Order-zero transport distance with bounded cost r -> r / (1 + r); no root.
// Metrizes the same topology and always lies in [0, 1).
double wasserstein_0(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Closed-form order-p distance for d = 1 via the quantile (monotone) coupling.
// Exact for convex costs, hence equals wasserstein() for p >= 1.
double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p);

// Optimal plan for order p (p = 0 selects the bounded cost above).
Coupling optimal_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p);

namespace detail {
// Exact solver for the balanced transportation problem
//   min sum_ij flow_ij cost_ij,  row sums = supply, col sums = demand.
// Returns the optimal cost; optionally exports the plan.
double solve_transport(std::span<const double> supply, std::span<const double> demand,
                       const std::vector<double>& cost, std::vector<double>* plan_out);
}  // namespace detail

}  // namespace bsdei
