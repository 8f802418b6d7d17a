#include "bsdei/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bsdei/rng.hpp"
#include "bsdei/transport.hpp"

namespace bsdei {

namespace detail {

namespace {

DiscreteMeasure make_measure(std::span<const double> atoms, std::span<const double> weights,
                             std::size_t dim) {
    std::vector<Point> pts(weights.size(), Point(dim, 0.0));
    for (std::size_t k = 0; k < weights.size(); ++k)
        for (std::size_t c = 0; c < dim; ++c) pts[k][c] = atoms[k * dim + c];
    return DiscreteMeasure(std::move(pts), {weights.begin(), weights.end()});
}

// Exact squared 2-cost in d = 1 via the monotone (quantile) coupling.
double quantile_w2_sq(std::span<const double> a, std::span<const double> wa,
                      std::span<const double> b, std::span<const double> wb) {
    constexpr double kResidualTol = 1e-15;
    std::vector<std::size_t> sa(wa.size()), sb(wb.size());
    std::iota(sa.begin(), sa.end(), 0);
    std::iota(sb.begin(), sb.end(), 0);
    std::sort(sa.begin(), sa.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });
    std::sort(sb.begin(), sb.end(), [&](std::size_t i, std::size_t j) { return b[i] < b[j]; });

    double cost = 0.0;
    std::size_t ia = 0, ib = 0;
    double ra = wa[sa[0]], rb = wb[sb[0]];
    while (ia < sa.size() && ib < sb.size()) {
        const double mass = std::min(ra, rb);
        const double diff = a[sa[ia]] - b[sb[ib]];
        cost += mass * diff * diff;
        ra -= mass;
        rb -= mass;
        if (ra <= kResidualTol) {
            ++ia;
            if (ia < sa.size()) ra = wa[sa[ia]];
        }
        if (rb <= kResidualTol) {
            ++ib;
            if (ib < sb.size()) rb = wb[sb[ib]];
        }
    }
    return cost;
}

}  // namespace

double w2_sq_fast(std::span<const double> atoms_a, std::span<const double> weights_a,
                  std::span<const double> atoms_b, std::span<const double> weights_b,
                  std::size_t dim) {
    if (dim == 0 || atoms_a.size() != weights_a.size() * dim ||
        atoms_b.size() != weights_b.size() * dim)
        throw std::invalid_argument("w2_sq_fast: atom/weight extent mismatch");
    if (dim == 1) return quantile_w2_sq(atoms_a, weights_a, atoms_b, weights_b);
    const double w = wasserstein(make_measure(atoms_a, weights_a, dim),
                                 make_measure(atoms_b, weights_b, dim), 2);
    return w * w;
}

}  // namespace detail

namespace {

DiscreteMeasure random_measure(NormalStream& normal, Xoshiro256pp& uni, std::size_t dim) {
    const std::size_t atoms = 1 + static_cast<std::size_t>(uni.uniform01() * 8.0);
    std::vector<Point> pts(atoms, Point(dim, 0.0));
    std::vector<double> w(atoms);
    double total = 0.0;
    for (std::size_t k = 0; k < atoms; ++k) {
        for (std::size_t c = 0; c < dim; ++c) pts[k][c] = normal.next();
        w[k] = 0.1 + uni.uniform01();
        total += w[k];
    }
    for (double& x : w) x /= total;
    // Absorb the normalization residual so the weights sum to one exactly.
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < atoms; ++k) sum += w[k];
    w[atoms - 1] = 1.0 - sum;
    return DiscreteMeasure(std::move(pts), std::move(w));
}

}  // namespace

LipschitzReport check_driver_lipschitz(const DriverSpec& driver, std::size_t trials,
                                       std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("check_driver_lipschitz: trials == 0");
    LipschitzReport rep;
    rep.trials = trials;

    Xoshiro256pp uni(substream_seed(seed, 0));
    NormalStream normal(substream_seed(seed, 1));
    const double bound_factor = 2.0 * std::max(1.0, driver.lipschitz * driver.lipschitz);

    Point fy, fy1;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t dim = (uni.uniform01() < 0.5) ? 1 : 2;
        fy.assign(dim, 0.0);
        fy1.assign(dim, 0.0);
        Point y(dim), y1(dim);
        for (std::size_t c = 0; c < dim; ++c) {
            y[c] = normal.next();
            y1[c] = normal.next();
        }
        const DiscreteMeasure mu = random_measure(normal, uni, dim);
        const DiscreteMeasure nu = random_measure(normal, uni, dim);

        eval_driver(driver, y, mu, fy);
        eval_driver(driver, y1, nu, fy1);

        const double lhs = sq_dist(fy, fy1);
        const double w2 = wasserstein(mu, nu, 2);
        const double rhs = bound_factor * (sq_dist(y, y1) + w2 * w2);
        if (rhs <= 0.0) continue;  // identical inputs carry no information
        rep.worst_ratio = std::max(rep.worst_ratio, lhs / rhs);
        if (lhs > rhs * (1.0 + 1e-12)) ++rep.violations;
    }
    rep.pass = rep.violations == 0;
    return rep;
}

StabilityRecord check_stability(const BrownianEnsemble& ensemble, const SolverConfig& config,
                                const DriverSpec& driver, const TerminalField& terminal,
                                std::span<const double> u1, std::span<const double> u2,
                                const DiscreteMeasure& mu1, const DiscreteMeasure& mu2) {
    const std::size_t d = ensemble.dim();
    if (u1.size() != d || u2.size() != d)
        throw std::invalid_argument("check_stability: point dimension mismatch");
    if (mu1.dim() != d || mu2.dim() != d)
        throw std::invalid_argument("check_stability: measure dimension mismatch");

    StabilityRecord rec;

    const PicardOutcome heavy1 = picard_iterate(mu1, terminal, driver, ensemble, config);
    const PicardOutcome heavy2 = picard_iterate(mu2, terminal, driver, ensemble, config);
    const LightSolution light1 = solve_light(u1, heavy1.field, terminal, driver, ensemble, config);
    const LightSolution light2 = solve_light(u2, heavy2.field, terminal, driver, ensemble, config);
    rec.conclusive = heavy1.report.converged && heavy2.report.converged &&
                     light1.report.converged && light2.report.converged;

    const std::size_t paths = ensemble.paths();
    const std::size_t steps = ensemble.grid().steps();
    const double dt = ensemble.grid().dt();
    const double inv_paths = 1.0 / static_cast<double>(paths);

    for (std::size_t m = 0; m < paths; ++m)
        rec.left_y += sq_dist(light1.y_at(0, m), light2.y_at(0, m));
    rec.left_y *= inv_paths;

    for (std::size_t j = 0; j < steps; ++j) {
        double node_z = 0.0;
        for (std::size_t m = 0; m < paths; ++m)
            node_z += sq_dist(light1.z_at(j, m), light2.z_at(j, m));
        rec.left_z += node_z * inv_paths * dt;
    }
    rec.left = rec.left_y + rec.left_z;

    rec.u_gap_sq = sq_dist(u1, u2);
    const MeasureFlow flow1 = measure_flow(heavy1.field);
    const MeasureFlow flow2 = measure_flow(heavy2.field);
    for (std::size_t j = 0; j < steps; ++j) {
        double node_gap = 0.0;
        for (std::size_t m = 0; m < paths; ++m)
            node_gap += detail::w2_sq_fast(flow1.block(j, m), flow1.weights(), flow2.block(j, m),
                                           flow2.weights(), d);
        rec.flow_gap += node_gap * inv_paths * dt;
    }
    rec.right = rec.u_gap_sq + rec.flow_gap;
    rec.ratio = rec.right > 0.0 ? rec.left / rec.right
                                : (rec.left > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return rec;
}

StudyResult convergence_study(const MeasureFamily& family, const std::vector<std::size_t>& atom_counts,
                              std::size_t reference_atoms, const DriverSpec& driver,
                              const TerminalField& terminal, const BrownianEnsemble& ensemble,
                              const SolverConfig& config, const std::vector<Point>& probes) {
    if (atom_counts.empty()) throw std::invalid_argument("convergence_study: no atom counts");
    for (std::size_t n : atom_counts)
        if (n == 0 || n > reference_atoms)
            throw std::invalid_argument("convergence_study: atom counts must lie in [1, reference]");
    if (family.dim() != ensemble.dim())
        throw std::invalid_argument("convergence_study: family dimension mismatch");
    for (const Point& u : probes)
        if (u.size() != ensemble.dim())
            throw std::invalid_argument("convergence_study: probe dimension mismatch");

    StudyResult result;
    result.reference_atoms = reference_atoms;

    const std::size_t paths = ensemble.paths();
    const std::size_t steps = ensemble.grid().steps();
    const std::size_t d = ensemble.dim();
    const double dt = ensemble.grid().dt();
    const double horizon = ensemble.grid().horizon();
    const double inv_paths = 1.0 / static_cast<double>(paths);

    const DiscreteMeasure ref_measure = quantize(family, reference_atoms, ensemble.seed());
    const PicardOutcome ref = picard_iterate(ref_measure, terminal, driver, ensemble, config);
    result.all_converged = ref.report.converged;
    const MeasureFlow ref_flow = measure_flow(ref.field);

    std::vector<LightSolution> ref_probes;
    ref_probes.reserve(probes.size());
    for (const Point& u : probes)
        ref_probes.push_back(solve_light(u, ref.field, terminal, driver, ensemble, config));

    for (std::size_t n : atom_counts) {
        ConvergenceRecord rec;
        rec.atoms = n;

        const DiscreteMeasure mu_n = quantize(family, n, ensemble.seed());
        const PicardOutcome run = picard_iterate(mu_n, terminal, driver, ensemble, config);
        rec.converged = run.report.converged;
        result.all_converged = result.all_converged && rec.converged;

        const MeasureFlow flow = measure_flow(run.field);
        rec.node_flow_gap_sq.assign(steps + 1, 0.0);
        for (std::size_t j = 0; j <= steps; ++j) {
            double acc = 0.0;
            for (std::size_t m = 0; m < paths; ++m)
                acc += detail::w2_sq_fast(flow.block(j, m), flow.weights(), ref_flow.block(j, m),
                                          ref_flow.weights(), d);
            rec.node_flow_gap_sq[j] = acc * inv_paths;
            rec.max_node_flow_gap_sq = std::max(rec.max_node_flow_gap_sq, rec.node_flow_gap_sq[j]);
        }
        rec.terminal_gap_sq = rec.node_flow_gap_sq[steps];

        rec.probe_y_gap_sq.assign(probes.size(), 0.0);
        rec.probe_z_gap.assign(probes.size(), 0.0);
        for (std::size_t pi = 0; pi < probes.size(); ++pi) {
            const LightSolution probe =
                solve_light(probes[pi], run.field, terminal, driver, ensemble, config);
            double y_avg = 0.0, z_int = 0.0;
            for (std::size_t j = 0; j < steps; ++j) {
                double node_y = 0.0, node_z = 0.0;
                for (std::size_t m = 0; m < paths; ++m) {
                    node_y += sq_dist(probe.y_at(j, m), ref_probes[pi].y_at(j, m));
                    node_z += sq_dist(probe.z_at(j, m), ref_probes[pi].z_at(j, m));
                }
                y_avg += node_y * inv_paths * dt / horizon;
                z_int += node_z * inv_paths * dt;
            }
            rec.probe_y_gap_sq[pi] = y_avg;
            rec.probe_z_gap[pi] = z_int;
            rec.y_gap_sq += y_avg / static_cast<double>(probes.size());
            rec.z_gap += z_int / static_cast<double>(probes.size());
        }

        result.records.push_back(std::move(rec));
    }

    // Premise: the terminal-measure quantization gap shrinks as atoms grow.
    result.premise_monotone = true;
    for (std::size_t i = 0; i + 1 < result.records.size(); ++i)
        if (result.records[i + 1].terminal_gap_sq >= result.records[i].terminal_gap_sq)
            result.premise_monotone = false;

    // Trend: refined runs end at least as close to the reference as the first,
    // with gaps below solver precision counted as converged.
    constexpr double kTrendFloor = 1e-12;
    const auto improves = [&](double first, double last) {
        return last <= first || last <= kTrendFloor;
    };
    result.trend_ok = !result.records.empty();
    if (result.records.size() > 1) {
        const ConvergenceRecord& first = result.records.front();
        const ConvergenceRecord& last = result.records.back();
        result.trend_ok = improves(first.max_node_flow_gap_sq, last.max_node_flow_gap_sq) &&
                          improves(first.y_gap_sq, last.y_gap_sq) &&
                          improves(first.z_gap, last.z_gap);
    }
    return result;
}

}  // namespace bsdei
