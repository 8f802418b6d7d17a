#include "bsdei/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "bsdei/parallel.hpp"

namespace bsdei {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Monomials of a d-dimensional variable up to a total degree, enumerated by
// (total degree, lexicographic) so the basis order is stable.
struct MonomialBasis {
    std::size_t dim = 0;
    int degree = 0;
    std::vector<std::vector<int>> exps;

    std::size_t size() const { return exps.size(); }

    static MonomialBasis make(std::size_t dim, int degree) {
        MonomialBasis b;
        b.dim = dim;
        b.degree = degree;
        std::vector<int> current(dim, 0);
        for (int total = 0; total <= degree; ++total) enumerate(b, current, 0, total);
        return b;
    }

private:
    static void enumerate(MonomialBasis& b, std::vector<int>& current, std::size_t pos, int left) {
        if (pos + 1 == current.size()) {
            current[pos] = left;
            b.exps.push_back(current);
            return;
        }
        for (int e = left; e >= 0; --e) {
            current[pos] = e;
            enumerate(b, current, pos + 1, left - e);
        }
    }
};

std::vector<std::vector<double>> pascal_triangle(int degree) {
    std::vector<std::vector<double>> c(degree + 1);
    for (int e = 0; e <= degree; ++e) {
        c[e].assign(e + 1, 1.0);
        for (int r = 1; r < e; ++r) c[e][r] = c[e - 1][r - 1] + c[e - 1][r];
    }
    return c;
}

// Per-path, per-coordinate closed-form Gaussian conditioning tables for the
// monomial basis: with x the conditioning value and delta ~ N(0, var),
//   m_tab[e] = E[(x + delta)^e]        and   n_tab[e] = E[(x + delta)^e delta].
// Conditioning a fitted polynomial is then a pure table contraction, so
// in-span targets are reproduced with no Monte Carlo error at all.
struct PropTables {
    std::size_t paths = 0, dim = 0;
    int degree = 0;
    std::vector<double> m_tab, n_tab;  // [m][c][e]

    const double* m_row(std::size_t m, std::size_t c) const {
        return m_tab.data() + (m * dim + c) * (degree + 1);
    }
    const double* n_row(std::size_t m, std::size_t c) const {
        return n_tab.data() + (m * dim + c) * (degree + 1);
    }
};

PropTables build_prop_tables(const BrownianEnsemble& ensemble, std::size_t cond_node, double var,
                             int degree) {
    PropTables t;
    t.paths = ensemble.paths();
    t.dim = ensemble.dim();
    t.degree = degree;
    t.m_tab.assign(t.paths * t.dim * (degree + 1), 0.0);
    t.n_tab.assign(t.paths * t.dim * (degree + 1), 0.0);

    // Central moments E[delta^r]; r up to degree + 1 feeds the n-tables.
    std::vector<double> mu(degree + 2, 0.0);
    mu[0] = 1.0;
    for (int r = 2; r <= degree + 1; ++r) mu[r] = static_cast<double>(r - 1) * var * mu[r - 2];
    const auto binom = pascal_triangle(degree + 1);

    std::vector<double> xpow(degree + 1);
    for (std::size_t m = 0; m < t.paths; ++m) {
        const auto x = ensemble.value(m, cond_node);
        for (std::size_t c = 0; c < t.dim; ++c) {
            xpow[0] = 1.0;
            for (int e = 1; e <= degree; ++e) xpow[e] = xpow[e - 1] * x[c];
            double* mrow = t.m_tab.data() + (m * t.dim + c) * (degree + 1);
            double* nrow = t.n_tab.data() + (m * t.dim + c) * (degree + 1);
            for (int e = 0; e <= degree; ++e) {
                double ms = 0.0, ns = 0.0;
                for (int r = 0; r <= e; ++r) {
                    const double term = binom[e][r] * xpow[e - r];
                    ms += term * mu[r];
                    ns += term * mu[r + 1];
                }
                mrow[e] = ms;
                nrow[e] = ns;
            }
        }
    }
    return t;
}

Eigen::MatrixXd build_design(const BrownianEnsemble& ensemble, std::size_t node,
                             const MonomialBasis& basis) {
    const std::size_t paths = ensemble.paths();
    Eigen::MatrixXd design(paths, basis.size());
    for (std::size_t m = 0; m < paths; ++m) {
        const auto x = ensemble.value(m, node);
        for (std::size_t p = 0; p < basis.size(); ++p) {
            double v = 1.0;
            const auto& e = basis.exps[p];
            for (std::size_t c = 0; c < basis.dim; ++c)
                for (int r = 0; r < e[c]; ++r) v *= x[c];
            design(m, p) = v;
        }
    }
    return design;
}

// Evaluates the conditioned fit for one path: y_out[r] = sum_p A(p, r) E[phi_p | x_m],
// and optionally z_out[r][c] = sum_p A(p, r) E[phi_p delta_c | x_m].
void predict_path(const PropTables& tables, const MonomialBasis& basis, const Eigen::MatrixXd& coeff,
                  std::size_t m, double* y_out, double* z_out) {
    const std::size_t out_dim = coeff.cols();
    const std::size_t d = basis.dim;
    for (std::size_t r = 0; r < out_dim; ++r) y_out[r] = 0.0;
    if (z_out)
        for (std::size_t i = 0; i < out_dim * d; ++i) z_out[i] = 0.0;

    for (std::size_t p = 0; p < basis.size(); ++p) {
        const auto& e = basis.exps[p];
        double prod = 1.0;
        for (std::size_t c = 0; c < d; ++c) prod *= tables.m_row(m, c)[e[c]];
        for (std::size_t r = 0; r < out_dim; ++r) y_out[r] += coeff(p, r) * prod;

        if (z_out) {
            for (std::size_t cz = 0; cz < d; ++cz) {
                double term = tables.n_row(m, cz)[e[cz]];
                for (std::size_t c = 0; c < d; ++c)
                    if (c != cz) term *= tables.m_row(m, c)[e[c]];
                for (std::size_t r = 0; r < out_dim; ++r) z_out[r * d + cz] += coeff(p, r) * term;
            }
        }
    }
}

void check_regression_size(std::size_t paths, std::size_t basis_size) {
    if (paths < basis_size)
        throw std::invalid_argument(
            "conditional_expectation: degenerate regression (paths < basis size)");
}

}  // namespace

SolutionField::SolutionField(std::size_t particles_, const TimeGrid& grid_, std::size_t paths_,
                             std::size_t dim_, std::vector<double> weights_,
                             std::uint64_t ensemble_seed_)
    : particles(particles_),
      nodes(grid_.nodes()),
      paths(paths_),
      dim(dim_),
      grid(grid_),
      ensemble_seed(ensemble_seed_),
      weights(std::move(weights_)) {
    y.assign(particles * nodes * paths * dim, 0.0);
    z.assign(particles * nodes * paths * dim * dim, 0.0);
}

std::size_t PicardReport::effective_iterations() const {
    std::size_t n = 0;
    for (double r : residual_y)
        if (r >= tolerance) ++n;
    return n;
}

std::vector<double> conditional_expectation(std::span<const double> target, std::size_t dim,
                                            const BrownianEnsemble& ensemble, std::size_t src_node,
                                            std::size_t cond_node, const SolverConfig& config) {
    if (dim == 0) throw std::invalid_argument("conditional_expectation: dimension must be >= 1");
    const std::size_t paths = ensemble.paths();
    if (target.size() != paths * dim)
        throw std::invalid_argument("conditional_expectation: target extent mismatch");
    if (src_node >= ensemble.grid().nodes() || cond_node > src_node)
        throw std::invalid_argument("conditional_expectation: need cond_node <= src_node < nodes");
    if (config.basis_degree < 0) throw std::invalid_argument("conditional_expectation: degree < 0");
    if (!(config.ridge >= 0.0)) throw std::invalid_argument("conditional_expectation: ridge < 0");

    const auto basis = MonomialBasis::make(ensemble.dim(), config.basis_degree);
    check_regression_size(paths, basis.size());

    const Eigen::MatrixXd design = build_design(ensemble, src_node, basis);
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += config.ridge;
    const auto solver = gram.ldlt();

    Eigen::Map<const RowMatrix> values(target.data(), paths, dim);
    const Eigen::MatrixXd coeff = solver.solve(design.transpose() * values);

    const double var = ensemble.grid().node(src_node) - ensemble.grid().node(cond_node);
    const PropTables tables = build_prop_tables(ensemble, cond_node, var, config.basis_degree);

    std::vector<double> out(paths * dim, 0.0);
    for (std::size_t m = 0; m < paths; ++m)
        predict_path(tables, basis, coeff, m, out.data() + m * dim, nullptr);
    return out;
}

SolutionField linear_bsde_solve(std::span<const double> drift, std::span<const double> terminal,
                                std::span<const double> weights, const BrownianEnsemble& ensemble,
                                const SolverConfig& config) {
    const std::size_t particles = weights.size();
    const std::size_t paths = ensemble.paths();
    const std::size_t d = ensemble.dim();
    const std::size_t steps = ensemble.grid().steps();
    if (particles == 0) throw std::invalid_argument("linear_bsde_solve: no particles");
    if (drift.size() != particles * steps * paths * d)
        throw std::invalid_argument("linear_bsde_solve: drift extent mismatch");
    if (terminal.size() != particles * paths * d)
        throw std::invalid_argument("linear_bsde_solve: terminal extent mismatch");
    if (config.basis_degree < 0) throw std::invalid_argument("linear_bsde_solve: degree < 0");

    const auto basis = MonomialBasis::make(d, config.basis_degree);
    check_regression_size(paths, basis.size());

    SolutionField field(particles, ensemble.grid(), paths, d,
                        std::vector<double>(weights.begin(), weights.end()), ensemble.seed());

    // Terminal node pinned to the data exactly; Z(T) stays zero.
    for (std::size_t k = 0; k < particles; ++k) {
        const double* xi = terminal.data() + k * paths * d;
        std::copy(xi, xi + paths * d, field.y.data() + ((k * field.nodes + steps) * paths) * d);
    }

    const double dt = ensemble.grid().dt();
    for (std::size_t j = steps; j-- > 0;) {
        const Eigen::MatrixXd design = build_design(ensemble, j + 1, basis);
        Eigen::MatrixXd gram = design.transpose() * design;
        gram.diagonal().array() += config.ridge;
        const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
        const PropTables tables = build_prop_tables(ensemble, j, dt, config.basis_degree);

        parallel_for(particles, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t k = lo; k < hi; ++k) {
                Eigen::Map<const RowMatrix> next(
                    field.y.data() + ((k * field.nodes + j + 1) * paths) * d, paths, d);
                const Eigen::MatrixXd coeff = solver.solve(design.transpose() * next);

                double* yj = field.y.data() + ((k * field.nodes + j) * paths) * d;
                double* zj = field.z.data() + ((k * field.nodes + j) * paths) * d * d;
                const double* fj = drift.data() + ((k * steps + j) * paths) * d;
                for (std::size_t m = 0; m < paths; ++m) {
                    predict_path(tables, basis, coeff, m, yj + m * d, zj + m * d * d);
                    for (std::size_t c = 0; c < d; ++c) yj[m * d + c] += fj[m * d + c] * dt;
                    for (std::size_t i = 0; i < d * d; ++i) zj[m * d * d + i] /= dt;
                }
            }
        });
    }
    return field;
}

namespace {

// Interaction drift of a single state y against frozen positions:
// out = sum_k w_k h(y, pos_k).
void drift_against(const DriverSpec& spec, const double* y, const double* positions,
                   std::span<const double> weights, std::size_t d, double* out) {
    for (std::size_t c = 0; c < d; ++c) out[c] = 0.0;
    switch (spec.family) {
        case DriverSpec::Family::Zero:
            return;
        case DriverSpec::Family::Linear:
            for (std::size_t k = 0; k < weights.size(); ++k) {
                const double* v = positions + k * d;
                for (std::size_t c = 0; c < d; ++c)
                    out[c] += weights[k] * (spec.alpha * y[c] + spec.beta * v[c]);
            }
            return;
        case DriverSpec::Family::Attraction:
            for (std::size_t k = 0; k < weights.size(); ++k) {
                const double* v = positions + k * d;
                for (std::size_t c = 0; c < d; ++c) out[c] += weights[k] * spec.kappa * (v[c] - y[c]);
            }
            return;
        case DriverSpec::Family::BoundedSmooth:
            for (std::size_t k = 0; k < weights.size(); ++k) {
                const double* v = positions + k * d;
                for (std::size_t c = 0; c < d; ++c)
                    out[c] += weights[k] * spec.scale * std::tanh(y[c]) * std::tanh(v[c]);
            }
            return;
    }
    throw std::invalid_argument("drift_against: unsupported driver family");
}

struct Residuals {
    double y = 0.0;
    double z = 0.0;
};

// a-residual: particle sum of the time-averaged path-mean squared Y change;
// b-residual: particle sum of the path-mean time-integrated squared Z change.
Residuals picard_residuals(const SolutionField& a, const SolutionField& b) {
    Residuals r;
    const double dt = a.grid.dt();
    const double horizon = a.grid.horizon();
    const std::size_t steps = a.grid.steps();
    for (std::size_t k = 0; k < a.particles; ++k) {
        double acc_y = 0.0, acc_z = 0.0;
        for (std::size_t j = 0; j < steps; ++j) {
            double node_y = 0.0, node_z = 0.0;
            for (std::size_t m = 0; m < a.paths; ++m) {
                node_y += sq_dist(a.y_at(k, j, m), b.y_at(k, j, m));
                node_z += sq_dist(a.z_at(k, j, m), b.z_at(k, j, m));
            }
            acc_y += node_y;
            acc_z += node_z;
        }
        const double inv_paths = 1.0 / static_cast<double>(a.paths);
        r.y += acc_y * inv_paths * dt / horizon;
        r.z += acc_z * inv_paths * dt;
    }
    return r;
}

std::vector<double> realized_terminal(const DiscreteMeasure& mu0, const TerminalField& terminal,
                                      const BrownianEnsemble& ensemble) {
    const std::size_t d = ensemble.dim();
    std::vector<double> xi(mu0.size() * ensemble.paths() * d);
    for (std::size_t k = 0; k < mu0.size(); ++k)
        for (std::size_t m = 0; m < ensemble.paths(); ++m)
            eval_terminal(terminal, {mu0.atom(k).data(), d}, ensemble, m,
                          {xi.data() + (k * ensemble.paths() + m) * d, d});
    return xi;
}

}  // namespace

PicardOutcome picard_iterate(const DiscreteMeasure& mu0, const TerminalField& terminal,
                             const DriverSpec& driver, const BrownianEnsemble& ensemble,
                             const SolverConfig& config, PicardInit init) {
    const std::size_t d = ensemble.dim();
    if (mu0.dim() != d)
        throw std::invalid_argument("picard_iterate: measure and ensemble dimension mismatch");
    if (config.max_iterations == 0) throw std::invalid_argument("picard_iterate: max_iterations == 0");
    if (!(config.tolerance > 0.0)) throw std::invalid_argument("picard_iterate: tolerance <= 0");

    const std::size_t particles = mu0.size();
    const std::size_t paths = ensemble.paths();
    const std::size_t steps = ensemble.grid().steps();
    const std::vector<double> xi = realized_terminal(mu0, terminal, ensemble);

    SolutionField prev(particles, ensemble.grid(), paths, d, mu0.weights(), ensemble.seed());
    if (init == PicardInit::TerminalPropagated) {
        for (std::size_t k = 0; k < particles; ++k)
            for (std::size_t j = 0; j < prev.nodes; ++j)
                std::copy(xi.data() + k * paths * d, xi.data() + (k + 1) * paths * d,
                          prev.y.data() + ((k * prev.nodes + j) * paths) * d);
    }

    PicardReport report;
    report.tolerance = config.tolerance;
    std::vector<double> drift(particles * steps * paths * d);

    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        // Drift samples frozen from the previous sweep's field.
        parallel_for(steps * paths, [&](std::size_t lo, std::size_t hi) {
            std::vector<double> scratch(particles * d);
            for (std::size_t idx = lo; idx < hi; ++idx) {
                const std::size_t j = idx / paths;
                const std::size_t m = idx % paths;
                for (std::size_t k = 0; k < particles; ++k) {
                    const auto yk = prev.y_at(k, j, m);
                    std::copy(yk.begin(), yk.end(), scratch.begin() + k * d);
                }
                for (std::size_t k = 0; k < particles; ++k)
                    drift_against(driver, scratch.data() + k * d, scratch.data(), mu0.weights(), d,
                                  drift.data() + ((k * steps + j) * paths + m) * d);
            }
        });

        SolutionField next = linear_bsde_solve(drift, xi, mu0.weights(), ensemble, config);
        const Residuals res = picard_residuals(next, prev);
        report.residual_y.push_back(res.y);
        report.residual_z.push_back(res.z);
        prev = std::move(next);
        if (res.y < config.tolerance) {
            report.converged = true;
            break;
        }
    }
    return {std::move(prev), std::move(report)};
}

LightSolution solve_light(std::span<const double> u, const SolutionField& heavy,
                          const TerminalField& terminal, const DriverSpec& driver,
                          const BrownianEnsemble& ensemble, const SolverConfig& config) {
    const std::size_t d = ensemble.dim();
    if (u.size() != d) throw std::invalid_argument("solve_light: point dimension mismatch");
    if (heavy.paths != ensemble.paths() || heavy.dim != d || !(heavy.grid == ensemble.grid()))
        throw std::invalid_argument("solve_light: heavy field does not match the ensemble");

    const std::size_t paths = ensemble.paths();
    const std::size_t steps = ensemble.grid().steps();
    const std::size_t nodes = ensemble.grid().nodes();

    std::vector<double> xi(paths * d);
    for (std::size_t m = 0; m < paths; ++m)
        eval_terminal(terminal, u, ensemble, m, {xi.data() + m * d, d});

    std::vector<double> y_prev(nodes * paths * d, 0.0);
    std::vector<double> z_prev(nodes * paths * d * d, 0.0);
    std::vector<double> drift(steps * paths * d);
    const std::vector<double> one_weight{1.0};

    LightSolution out;
    out.nodes = nodes;
    out.paths = paths;
    out.dim = d;
    out.report.tolerance = config.tolerance;

    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        parallel_for(steps * paths, [&](std::size_t lo, std::size_t hi) {
            std::vector<double> positions(heavy.particles * d);
            for (std::size_t idx = lo; idx < hi; ++idx) {
                const std::size_t j = idx / paths;
                const std::size_t m = idx % paths;
                for (std::size_t k = 0; k < heavy.particles; ++k) {
                    const auto yk = heavy.y_at(k, j, m);
                    std::copy(yk.begin(), yk.end(), positions.begin() + k * d);
                }
                drift_against(driver, y_prev.data() + (j * paths + m) * d, positions.data(),
                              heavy.weights, d, drift.data() + (j * paths + m) * d);
            }
        });

        SolutionField sol = linear_bsde_solve(drift, xi, one_weight, ensemble, config);

        // Residuals over the single light particle.
        double res_y = 0.0, res_z = 0.0;
        const double dt = ensemble.grid().dt();
        for (std::size_t j = 0; j < steps; ++j) {
            for (std::size_t m = 0; m < paths; ++m) {
                res_y += sq_dist(sol.y_at(0, j, m), {y_prev.data() + (j * paths + m) * d, d});
                res_z += sq_dist(sol.z_at(0, j, m), {z_prev.data() + (j * paths + m) * d * d, d * d});
            }
        }
        res_y *= dt / ensemble.grid().horizon() / static_cast<double>(paths);
        res_z *= dt / static_cast<double>(paths);
        out.report.residual_y.push_back(res_y);
        out.report.residual_z.push_back(res_z);

        y_prev = std::move(sol.y);
        z_prev = std::move(sol.z);
        if (res_y < config.tolerance) {
            out.report.converged = true;
            break;
        }
    }

    out.y = std::move(y_prev);
    out.z = std::move(z_prev);
    return out;
}

UniquenessReport uniqueness_probe(const DiscreteMeasure& mu0, const TerminalField& terminal,
                                  const DriverSpec& driver, const BrownianEnsemble& ensemble,
                                  const SolverConfig& config) {
    PicardOutcome a = picard_iterate(mu0, terminal, driver, ensemble, config, PicardInit::Zero);
    PicardOutcome b =
        picard_iterate(mu0, terminal, driver, ensemble, config, PicardInit::TerminalPropagated);

    UniquenessReport rep;
    rep.from_zero = a.report;
    rep.from_terminal = b.report;
    rep.conclusive = a.report.converged && b.report.converged;

    const std::size_t paths = ensemble.paths();
    for (std::size_t k = 0; k < a.field.particles; ++k) {
        for (std::size_t j = 0; j < a.field.nodes; ++j) {
            double acc_y = 0.0, acc_z = 0.0;
            for (std::size_t m = 0; m < paths; ++m) {
                acc_y += sq_dist(a.field.y_at(k, j, m), b.field.y_at(k, j, m));
                acc_z += sq_dist(a.field.z_at(k, j, m), b.field.z_at(k, j, m));
            }
            rep.y_rms = std::max(rep.y_rms, std::sqrt(acc_y / static_cast<double>(paths)));
            rep.z_rms = std::max(rep.z_rms, std::sqrt(acc_z / static_cast<double>(paths)));
        }
    }
    return rep;
}

MeasureFlow measure_flow(const SolutionField& field) {
    MeasureFlow flow(field.nodes, field.paths, field.dim, field.weights);
    for (std::size_t j = 0; j < field.nodes; ++j)
        for (std::size_t m = 0; m < field.paths; ++m)
            for (std::size_t k = 0; k < field.particles; ++k) {
                const auto y = field.y_at(k, j, m);
                auto a = flow.atom(j, m, k);
                std::copy(y.begin(), y.end(), a.begin());
            }
    return flow;
}

}  // namespace bsdei
