#include "bsdei/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace bsdei {

namespace {

// Deterministic terminal data; the oracle handles noiseless systems only.
Point deterministic_terminal(const TerminalField& field, const Point& u) {
    switch (field.family) {
        case TerminalField::Family::Identity:
            return u;
        case TerminalField::Family::DeterministicMap: {
            Point out(u.size(), 0.0);
            for (std::size_t c = 0; c < u.size(); ++c) {
                double acc = 0.0;
                for (std::size_t r = field.coeffs.size(); r-- > 0;) acc = acc * u[c] + field.coeffs[r];
                out[c] = acc;
            }
            return out;
        }
        case TerminalField::Family::AffineTerminal:
            break;
    }
    throw std::invalid_argument("backward_ode_solve: terminal field must be deterministic");
}

// One classical RK4 step of x' = sign * drift(x) with stage buffers reused.
struct Rk4Workspace {
    std::vector<double> k1, k2, k3, k4, tmp;
    void resize(std::size_t n) {
        k1.resize(n);
        k2.resize(n);
        k3.resize(n);
        k4.resize(n);
        tmp.resize(n);
    }
};

void rk4_step(std::vector<double>& x, double h, double sign, const DriverSpec& driver,
              std::span<const double> weights, std::size_t dim, Rk4Workspace& ws) {
    const std::size_t n = x.size();
    ws.resize(n);
    auto eval = [&](const std::vector<double>& state, std::vector<double>& out) {
        heavy_drift(driver, state, weights, dim, out);
        if (sign < 0)
            for (double& v : out) v = -v;
    };
    eval(x, ws.k1);
    for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = x[i] + 0.5 * h * ws.k1[i];
    eval(ws.tmp, ws.k2);
    for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = x[i] + 0.5 * h * ws.k2[i];
    eval(ws.tmp, ws.k3);
    for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = x[i] + h * ws.k3[i];
    eval(ws.tmp, ws.k4);
    for (std::size_t i = 0; i < n; ++i)
        x[i] += h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
}

}  // namespace

OdeTrajectory backward_ode_solve(const DiscreteMeasure& mu0, const TerminalField& terminal,
                                 const DriverSpec& driver, double horizon, std::size_t steps,
                                 std::span<const Point> probes) {
    if (!(horizon > 0.0)) throw std::invalid_argument("backward_ode_solve: horizon must be positive");
    if (steps == 0) throw std::invalid_argument("backward_ode_solve: need at least one step");

    const std::size_t d = mu0.dim();
    const std::size_t cols = mu0.size() + probes.size();

    // Probe columns ride along with zero weight: they feel the atoms' flow but
    // do not contribute to it.
    std::vector<double> weights(cols, 0.0);
    for (std::size_t k = 0; k < mu0.size(); ++k) weights[k] = mu0.weight(k);

    std::vector<double> state(cols * d);
    for (std::size_t k = 0; k < mu0.size(); ++k) {
        const Point xi = deterministic_terminal(terminal, mu0.atom(k));
        std::copy(xi.begin(), xi.end(), state.begin() + k * d);
    }
    for (std::size_t q = 0; q < probes.size(); ++q) {
        if (probes[q].size() != d)
            throw std::invalid_argument("backward_ode_solve: probe dimension mismatch");
        const Point xi = deterministic_terminal(terminal, probes[q]);
        std::copy(xi.begin(), xi.end(), state.begin() + (mu0.size() + q) * d);
    }

    OdeTrajectory out;
    out.horizon = horizon;
    out.steps = steps;
    out.atoms = cols;
    out.dim = d;
    out.positions.assign((steps + 1) * cols * d, 0.0);

    // Integrate in reversed time tau = T - t from the terminal state; node
    // steps holds t = T, node 0 holds t = 0.
    const double h = horizon / static_cast<double>(steps);
    Rk4Workspace ws;
    std::copy(state.begin(), state.end(), out.positions.begin() + steps * cols * d);
    for (std::size_t i = 0; i < steps; ++i) {
        rk4_step(state, h, +1.0, driver, weights, d, ws);
        const std::size_t node = steps - 1 - i;
        std::copy(state.begin(), state.end(), out.positions.begin() + node * cols * d);
    }
    return out;
}

double forward_replay_error(const OdeTrajectory& trajectory, const DiscreteMeasure& mu0,
                            const DriverSpec& driver) {
    const std::size_t d = trajectory.dim;
    const std::size_t cols = trajectory.atoms;
    std::vector<double> weights(cols, 0.0);
    for (std::size_t k = 0; k < mu0.size(); ++k) weights[k] = mu0.weight(k);

    std::vector<double> state(trajectory.positions.begin(), trajectory.positions.begin() + cols * d);
    const double h = trajectory.horizon / static_cast<double>(trajectory.steps);
    Rk4Workspace ws;
    // Forward in t the flow satisfies x' = -drift(x).
    for (std::size_t i = 0; i < trajectory.steps; ++i) rk4_step(state, h, -1.0, driver, weights, d, ws);

    double worst = 0.0;
    const double* terminal = trajectory.positions.data() + trajectory.steps * cols * d;
    for (std::size_t i = 0; i < state.size(); ++i)
        worst = std::max(worst, std::abs(state[i] - terminal[i]));
    return worst;
}

double brute_force_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("brute_force_ot: measures of different dimension");
    if (mu.size() > 4 || nu.size() > 4)
        throw std::invalid_argument("brute_force_ot: supports at most 4 atoms per measure");
    if (p < 0) throw std::invalid_argument("brute_force_ot: order must be >= 0");

    const std::size_t m = mu.size(), n = nu.size();
    std::vector<double> cost(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double r = std::sqrt(sq_dist(mu.atom(i), nu.atom(j)));
            cost[i * n + j] = p == 0 ? r / (1.0 + r) : (p == 1 ? r : std::pow(r, p));
        }
    }

    const unsigned cells = static_cast<unsigned>(m * n);
    const unsigned basis = static_cast<unsigned>(m + n - 1);
    double best = std::numeric_limits<double>::infinity();

    // Every vertex of the transportation polytope is supported on a spanning
    // tree, i.e. on some (m + n - 1)-subset whose flows peel off uniquely.
    for (std::uint32_t mask = 0; mask < (1u << cells); ++mask) {
        if (std::popcount(mask) != static_cast<int>(basis)) continue;

        double a[4], b[4], flow[16];
        for (std::size_t i = 0; i < m; ++i) a[i] = mu.weight(i);
        for (std::size_t j = 0; j < n; ++j) b[j] = nu.weight(j);
        std::uint32_t active = mask;
        bool ok = true;

        for (unsigned assigned = 0; assigned < basis; ++assigned) {
            // Find a row or column with exactly one active cell left.
            int pick = -1;
            for (std::size_t i = 0; i < m && pick < 0; ++i) {
                int count = 0, cell = -1;
                for (std::size_t j = 0; j < n; ++j)
                    if (active & (1u << (i * n + j))) ++count, cell = static_cast<int>(i * n + j);
                if (count == 1) pick = cell;
            }
            for (std::size_t j = 0; j < n && pick < 0; ++j) {
                int count = 0, cell = -1;
                for (std::size_t i = 0; i < m; ++i)
                    if (active & (1u << (i * n + j))) ++count, cell = static_cast<int>(i * n + j);
                if (count == 1) pick = cell;
            }
            if (pick < 0) {  // contains a cycle; not a basic solution
                ok = false;
                break;
            }
            const std::size_t i = static_cast<std::size_t>(pick) / n;
            const std::size_t j = static_cast<std::size_t>(pick) % n;
            // A leaf in its row takes the remaining row mass, else column mass.
            int row_count = 0;
            for (std::size_t jj = 0; jj < n; ++jj)
                if (active & (1u << (i * n + jj))) ++row_count;
            const double f = row_count == 1 ? a[i] : b[j];
            flow[pick] = f;
            a[i] -= f;
            b[j] -= f;
            active &= ~(1u << pick);
        }
        if (!ok) continue;

        bool feasible = true;
        double total = 0.0;
        for (unsigned cell = 0; cell < cells; ++cell) {
            if (!(mask & (1u << cell))) continue;
            if (flow[cell] < -1e-12) {
                feasible = false;
                break;
            }
            total += std::max(0.0, flow[cell]) * cost[cell];
        }
        for (std::size_t i = 0; i < m && feasible; ++i) feasible = std::abs(a[i]) < 1e-9;
        for (std::size_t j = 0; j < n && feasible; ++j) feasible = std::abs(b[j]) < 1e-9;
        if (feasible) best = std::min(best, total);
    }

    if (!std::isfinite(best)) throw std::runtime_error("brute_force_ot: no feasible vertex found");
    if (p <= 1) return best;
    if (p == 2) return std::sqrt(std::max(0.0, best));
    return std::pow(std::max(0.0, best), 1.0 / p);
}

AnalyticCase analytic_case_from_string(std::string_view id) {
    if (id == "terminal-value") return AnalyticCase::TerminalValue;
    if (id == "squared-terminal") return AnalyticCase::SquaredTerminal;
    if (id == "affine-terminal") return AnalyticCase::AffineTerminal;
    throw std::invalid_argument("analytic_case_from_string: unknown case id: " + std::string(id));
}

std::vector<double> analytic_reference(AnalyticCase which, const BrownianEnsemble& ensemble,
                                       std::size_t node, double u) {
    if (ensemble.dim() != 1)
        throw std::invalid_argument("analytic_reference: cases are defined for d = 1");
    if (node >= ensemble.grid().nodes())
        throw std::invalid_argument("analytic_reference: node out of range");

    const double remaining = ensemble.grid().horizon() - ensemble.grid().node(node);
    std::vector<double> out(ensemble.paths());
    for (std::size_t m = 0; m < ensemble.paths(); ++m) {
        const double b = ensemble.value(m, node)[0];
        switch (which) {
            case AnalyticCase::TerminalValue: out[m] = b; break;
            case AnalyticCase::SquaredTerminal: out[m] = b * b + remaining; break;
            case AnalyticCase::AffineTerminal: out[m] = u + b; break;
        }
    }
    return out;
}

}  // namespace bsdei
