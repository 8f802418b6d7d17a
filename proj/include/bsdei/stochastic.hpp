#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsdei/grid.hpp"
#include "bsdei/measure.hpp"

namespace bsdei {

// M discretized d-dimensional Brownian paths on a shared grid.  Path m draws
// from its own (seed, m)-derived stream, so path m is identical no matter how
// many paths are simulated alongside it or how the work is scheduled.
class BrownianEnsemble {
public:
    BrownianEnsemble(const TimeGrid& grid, std::size_t paths, std::size_t dim, std::uint64_t seed);

    const TimeGrid& grid() const { return grid_; }
    std::size_t paths() const { return paths_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }

    // B(t_j) for path m; j in [0, steps]; B(t_0) = 0.
    std::span<const double> value(std::size_t m, std::size_t j) const {
        return {values_.data() + (m * grid_.nodes() + j) * dim_, dim_};
    }
    // B(t_{j+1}) - B(t_j) for path m; j in [0, steps).
    std::span<const double> increment(std::size_t m, std::size_t j) const {
        return {increments_.data() + (m * grid_.steps() + j) * dim_, dim_};
    }

private:
    TimeGrid grid_;
    std::size_t paths_, dim_;
    std::uint64_t seed_;
    std::vector<double> increments_;  // [m][j][c]
    std::vector<double> values_;     // [m][j][c]
};

// Terminal data xi(u) = g(u, B(T)) for the supported closed families.
struct TerminalField {
    enum class Family {
        Identity,          // xi(u) = u                     (deterministic)
        AffineTerminal,    // xi(u) = u + sigma * B(T)
        DeterministicMap,  // xi(u) = sum_r c_r u^r, applied per coordinate
    };

    Family family = Family::Identity;
    double sigma = 1.0;           // AffineTerminal only
    std::vector<double> coeffs;   // DeterministicMap only, c_0..c_r
    // Declared mean-square Lipschitz constant: E|xi(u1)-xi(u2)|^2 <= l2 |u1-u2|^2
    // on the unit-box domain the configs use.  Defaults are the sharp values.
    double l2 = 1.0;

    bool deterministic() const { return family != Family::AffineTerminal; }

    static TerminalField identity();
    static TerminalField affine_terminal(double sigma = 1.0);
    static TerminalField deterministic_map(std::vector<double> coeffs);
    static TerminalField from_name(const std::string& name);  // throws on unknown id
};

// Evaluates xi(u) on path m of the ensemble.
void eval_terminal(const TerminalField& field, std::span<const double> u,
                   const BrownianEnsemble& ensemble, std::size_t m, std::span<double> out);

}  // namespace bsdei
