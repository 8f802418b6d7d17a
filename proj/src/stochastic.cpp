#include "bsdei/stochastic.hpp"

#include <cmath>
#include <stdexcept>

#include "bsdei/parallel.hpp"
#include "bsdei/rng.hpp"

namespace bsdei {

BrownianEnsemble::BrownianEnsemble(const TimeGrid& grid, std::size_t paths, std::size_t dim,
                                   std::uint64_t seed)
    : grid_(grid), paths_(paths), dim_(dim), seed_(seed) {
    if (paths_ == 0) throw std::invalid_argument("BrownianEnsemble: need at least one path");
    if (dim_ == 0) throw std::invalid_argument("BrownianEnsemble: dimension must be >= 1");

    const std::size_t steps = grid_.steps();
    increments_.assign(paths_ * steps * dim_, 0.0);
    values_.assign(paths_ * grid_.nodes() * dim_, 0.0);
    const double root_dt = std::sqrt(grid_.dt());

    parallel_for(paths_, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
            // One private stream per path: path m's draws depend on (seed, m)
            // only, never on the total path count or the execution schedule.
            NormalStream normals(substream_seed(seed_, m));
            double* inc = increments_.data() + m * steps * dim_;
            double* val = values_.data() + m * grid_.nodes() * dim_;
            for (std::size_t c = 0; c < dim_; ++c) val[c] = 0.0;
            for (std::size_t j = 0; j < steps; ++j) {
                for (std::size_t c = 0; c < dim_; ++c) {
                    const double dw = root_dt * normals.next();
                    inc[j * dim_ + c] = dw;
                    val[(j + 1) * dim_ + c] = val[j * dim_ + c] + dw;
                }
            }
        }
    });
}

TerminalField TerminalField::identity() {
    TerminalField f;
    f.family = Family::Identity;
    f.l2 = 1.0;
    return f;
}

TerminalField TerminalField::affine_terminal(double sigma) {
    TerminalField f;
    f.family = Family::AffineTerminal;
    f.sigma = sigma;
    f.l2 = 1.0;  // the noise shift cancels in xi(u1) - xi(u2)
    return f;
}

TerminalField TerminalField::deterministic_map(std::vector<double> coeffs) {
    if (coeffs.empty())
        throw std::invalid_argument("TerminalField: deterministic map needs coefficients");
    TerminalField f;
    f.family = Family::DeterministicMap;
    f.coeffs = std::move(coeffs);
    // Sharp constant on the unit box: sup over |u| <= 1 of |g'(u)|^2.
    double slope = 0.0;
    for (std::size_t r = 1; r < f.coeffs.size(); ++r)
        slope += static_cast<double>(r) * std::abs(f.coeffs[r]);
    f.l2 = slope * slope;
    return f;
}

TerminalField TerminalField::from_name(const std::string& name) {
    if (name == "identity") return identity();
    if (name == "affine-terminal") return affine_terminal();
    if (name == "deterministic-map") return deterministic_map({0.0, 1.0});
    throw std::invalid_argument("TerminalField: unknown family id: " + name);
}

void eval_terminal(const TerminalField& field, std::span<const double> u,
                   const BrownianEnsemble& ensemble, std::size_t m, std::span<double> out) {
    if (u.size() != ensemble.dim() || out.size() != ensemble.dim())
        throw std::invalid_argument("eval_terminal: dimension mismatch");
    if (m >= ensemble.paths()) throw std::invalid_argument("eval_terminal: path index out of range");

    switch (field.family) {
        case TerminalField::Family::Identity: {
            for (std::size_t c = 0; c < u.size(); ++c) out[c] = u[c];
            return;
        }
        case TerminalField::Family::AffineTerminal: {
            const auto bT = ensemble.value(m, ensemble.grid().steps());
            for (std::size_t c = 0; c < u.size(); ++c) out[c] = u[c] + field.sigma * bT[c];
            return;
        }
        case TerminalField::Family::DeterministicMap: {
            for (std::size_t c = 0; c < u.size(); ++c) {
                double acc = 0.0;
                for (std::size_t r = field.coeffs.size(); r-- > 0;) acc = acc * u[c] + field.coeffs[r];
                out[c] = acc;
            }
            return;
        }
    }
    throw std::invalid_argument("eval_terminal: unsupported terminal family");
}

}  // namespace bsdei
