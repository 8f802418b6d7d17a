#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "bsdei/types.hpp"

namespace bsdei {

// Finitely supported probability measure: atoms u_k in R^d with strictly
// positive weights p_k summing to one.  Atoms may coincide; they are never
// merged, so a measure keeps the particle identity it was built with.
class DiscreteMeasure {
public:
    DiscreteMeasure(std::vector<Point> atoms, std::vector<double> weights);

    std::size_t size() const { return atoms_.size(); }
    std::size_t dim() const { return dim_; }
    const Point& atom(std::size_t k) const { return atoms_[k]; }
    double weight(std::size_t k) const { return weights_[k]; }
    const std::vector<Point>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<Point> atoms_;
    std::vector<double> weights_;
    std::size_t dim_;
};

// sum_k p_k |u_k|^2
double second_moment(const DiscreteMeasure& mu);

// Image measure under a pointwise map: atoms are mapped, weights carried over
// unchanged.  Throws if the map produces inconsistent dimensions.
DiscreteMeasure pushforward(const DiscreteMeasure& mu, const std::function<Point(const Point&)>& map);

// Continuous reference laws that can be collapsed to discrete measures,
// one independent coordinate law per dimension.
struct MeasureFamily {
    enum class Law { Uniform, Gaussian };
    struct AxisSpec {
        Law law = Law::Uniform;
        // Uniform: support [a, b].  Gaussian: mean a, standard deviation b.
        double a = 0.0;
        double b = 1.0;
    };
    enum class Mode {
        Quantile,  // d = 1 only: atom k at the (k - 1/2)/N quantile, weights 1/N
        Sample,    // N i.i.d. draws, weights 1/N, reproducible from the seed
    };

    std::vector<AxisSpec> axes;
    Mode mode = Mode::Quantile;

    std::size_t dim() const { return axes.size(); }

    static MeasureFamily uniform(double lo, double hi, Mode mode = Mode::Quantile);
    static MeasureFamily gaussian(double mean, double stddev, Mode mode = Mode::Quantile);
};

// Collapses the family to N atoms.  Deterministic given (family, N, seed);
// quantile mode ignores the seed.  Throws for N = 0, for quantile mode in
// d > 1, and for malformed axis parameters.
DiscreteMeasure quantize(const MeasureFamily& family, std::size_t n_atoms, std::uint64_t seed);

// Inverse standard normal CDF (Acklam's rational approximation polished with
// two Halley steps on erfc; accurate to ~1e-15 over (0, 1)).
double normal_quantile(double p);

// Plain-text tabular form: header "w,u_1,..,u_d", one row per atom.
void write_measure(std::ostream& os, const DiscreteMeasure& mu);
DiscreteMeasure read_measure(std::istream& is);

// Time-indexed family of empirical measures sharing one weight vector: one
// N-atom measure per (node, path).  This is the discrete carrier for the
// measure flow t -> law of Y(., t); weights never change along the flow.
class MeasureFlow {
public:
    MeasureFlow(std::size_t nodes, std::size_t paths, std::size_t dim, std::vector<double> weights);

    std::size_t nodes() const { return nodes_; }
    std::size_t paths() const { return paths_; }
    std::size_t atoms() const { return weights_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<double>& weights() const { return weights_; }

    std::span<double> atom(std::size_t node, std::size_t path, std::size_t k);
    std::span<const double> atom(std::size_t node, std::size_t path, std::size_t k) const;

    // All atoms of the (node, path) measure as one contiguous block,
    // atom-major with the coordinate index fastest.
    std::span<const double> block(std::size_t node, std::size_t path) const;

    // Materializes the (node, path) measure as a DiscreteMeasure.
    DiscreteMeasure measure_at(std::size_t node, std::size_t path) const;

private:
    std::size_t index(std::size_t node, std::size_t path, std::size_t k) const;

    std::size_t nodes_, paths_, dim_;
    std::vector<double> weights_;
    std::vector<double> data_;
};

}  // namespace bsdei
