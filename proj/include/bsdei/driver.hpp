#pragma once

#include <span>
#include <string>

#include "bsdei/measure.hpp"

namespace bsdei {

// Interaction kernel h(y, v) from a closed set of families.  The driver of the
// equation is the average of h against a measure, f(y, mu) = int h(y, v) mu(dv),
// so measure dependence is always through this kernel.
struct DriverSpec {
    enum class Family {
        Zero,           // h = 0
        Linear,         // h = alpha y + beta v        (componentwise)
        Attraction,     // h = kappa (v - y)
        BoundedSmooth,  // h = scale tanh(y) tanh(v)   (componentwise)
    };

    Family family = Family::Zero;
    double alpha = 0.0;
    double beta = 0.0;
    double kappa = 0.0;
    double scale = 0.0;
    // Declared joint Lipschitz constant of h; defaults to the sharp value for
    // the family and may be overridden (the verification harness checks the
    // declaration, so a wrong override is detectable).
    double lipschitz = 0.0;

    static DriverSpec zero();
    static DriverSpec linear(double alpha, double beta);
    static DriverSpec attraction(double kappa);
    static DriverSpec bounded_smooth(double scale);
    static DriverSpec from_name(const std::string& name);  // throws on unknown id
};

// h(y, v); y, v, out all of the same dimension.
void eval_h(const DriverSpec& spec, std::span<const double> y, std::span<const double> v,
            std::span<double> out);

// f(y, mu) = sum_k p_k h(y, u_k).
void eval_driver(const DriverSpec& spec, std::span<const double> y, const DiscreteMeasure& mu,
                 std::span<double> out);

// Drift of every heavy particle against the empirical measure of the whole
// system: out[k] = sum_j h(pos_k, pos_j) p_j.  Positions and out are flat
// [k][c] buffers; summation order over j is fixed for reproducibility.
void heavy_drift(const DriverSpec& spec, std::span<const double> positions,
                 std::span<const double> weights, std::size_t dim, std::span<double> out);

}  // namespace bsdei
