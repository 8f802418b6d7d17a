#include "bsdei/measure.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bsdei/rng.hpp"

namespace bsdei {

namespace {
constexpr double kWeightSumTol = 1e-12;

void format_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}
}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Point> atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.empty()) throw std::invalid_argument("DiscreteMeasure: needs at least one atom");
    if (atoms_.size() != weights_.size())
        throw std::invalid_argument("DiscreteMeasure: atom/weight count mismatch");
    dim_ = atoms_.front().size();
    if (dim_ == 0) throw std::invalid_argument("DiscreteMeasure: atoms must have dimension >= 1");
    double total = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        if (atoms_[k].size() != dim_)
            throw std::invalid_argument("DiscreteMeasure: atoms of mixed dimension");
        if (!(weights_[k] > 0.0))
            throw std::invalid_argument("DiscreteMeasure: weights must be strictly positive");
        total += weights_[k];
    }
    if (std::abs(total - 1.0) > kWeightSumTol)
        throw std::invalid_argument("DiscreteMeasure: weights must sum to 1 within 1e-12");
}

double second_moment(const DiscreteMeasure& mu) {
    double s = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) s += mu.weight(k) * sq_norm(mu.atom(k));
    return s;
}

DiscreteMeasure pushforward(const DiscreteMeasure& mu, const std::function<Point(const Point&)>& map) {
    std::vector<Point> atoms;
    atoms.reserve(mu.size());
    std::size_t out_dim = 0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        Point image = map(mu.atom(k));
        if (k == 0) {
            out_dim = image.size();
            if (out_dim == 0) throw std::invalid_argument("pushforward: map produced an empty point");
        } else if (image.size() != out_dim) {
            throw std::invalid_argument("pushforward: map produced points of mixed dimension");
        }
        atoms.push_back(std::move(image));
    }
    return DiscreteMeasure(std::move(atoms), mu.weights());
}

MeasureFamily MeasureFamily::uniform(double lo, double hi, Mode mode) {
    MeasureFamily f;
    f.axes.push_back({Law::Uniform, lo, hi});
    f.mode = mode;
    return f;
}

MeasureFamily MeasureFamily::gaussian(double mean, double stddev, Mode mode) {
    MeasureFamily f;
    f.axes.push_back({Law::Gaussian, mean, stddev});
    f.mode = mode;
    return f;
}

// Acklam's inverse normal CDF, polished with Halley steps on the erfc form.
// Evaluated on the lower half only: the erfc residual cancels catastrophically
// in the upper tail, so p > 1/2 is computed by reflection, which also makes
// the result exactly antisymmetric about p = 1/2.
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
    if (p > 0.5) return -normal_quantile(1.0 - p);

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};

    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Two Halley refinements against the exact CDF.
    for (int it = 0; it < 2; ++it) {
        const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x = x - u / (1.0 + 0.5 * x * u);
    }
    return x;
}

namespace {

double axis_quantile(const MeasureFamily::AxisSpec& axis, double q) {
    switch (axis.law) {
        case MeasureFamily::Law::Uniform:
            return axis.a + (axis.b - axis.a) * q;
        case MeasureFamily::Law::Gaussian:
            return axis.a + axis.b * normal_quantile(q);
    }
    throw std::invalid_argument("quantize: unsupported axis law");
}

void validate_axes(const MeasureFamily& family) {
    if (family.axes.empty()) throw std::invalid_argument("quantize: family has no axes");
    for (const auto& axis : family.axes) {
        if (axis.law == MeasureFamily::Law::Uniform && !(axis.b > axis.a))
            throw std::invalid_argument("quantize: uniform axis needs b > a");
        if (axis.law == MeasureFamily::Law::Gaussian && !(axis.b > 0.0))
            throw std::invalid_argument("quantize: gaussian axis needs positive stddev");
    }
}

}  // namespace

DiscreteMeasure quantize(const MeasureFamily& family, std::size_t n_atoms, std::uint64_t seed) {
    validate_axes(family);
    if (n_atoms == 0) throw std::invalid_argument("quantize: need at least one atom");

    const std::size_t d = family.dim();
    std::vector<Point> atoms;
    atoms.reserve(n_atoms);

    if (family.mode == MeasureFamily::Mode::Quantile) {
        if (d != 1)
            throw std::invalid_argument("quantize: quantile mode is defined for d = 1 only");
        for (std::size_t k = 0; k < n_atoms; ++k) {
            const double q = (static_cast<double>(k) + 0.5) / static_cast<double>(n_atoms);
            atoms.push_back({axis_quantile(family.axes[0], q)});
        }
    } else {
        for (std::size_t k = 0; k < n_atoms; ++k) {
            Xoshiro256pp rng(substream_seed(seed, k));
            NormalStream normals(substream_seed(seed ^ 0x5851F42D4C957F2Dull, k));
            Point u(d);
            for (std::size_t c = 0; c < d; ++c) {
                const auto& axis = family.axes[c];
                u[c] = axis.law == MeasureFamily::Law::Uniform
                           ? axis.a + (axis.b - axis.a) * rng.uniform01()
                           : axis.a + axis.b * normals.next();
            }
            atoms.push_back(std::move(u));
        }
    }

    std::vector<double> weights(n_atoms, 1.0 / static_cast<double>(n_atoms));
    return DiscreteMeasure(std::move(atoms), std::move(weights));
}

void write_measure(std::ostream& os, const DiscreteMeasure& mu) {
    std::string line = "w";
    for (std::size_t c = 1; c <= mu.dim(); ++c) line += ",u_" + std::to_string(c);
    line += "\n";
    for (std::size_t k = 0; k < mu.size(); ++k) {
        format_double(line, mu.weight(k));
        for (double v : mu.atom(k)) {
            line += ',';
            format_double(line, v);
        }
        line += '\n';
    }
    os << line;
}

DiscreteMeasure read_measure(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::invalid_argument("read_measure: empty input");

    std::vector<Point> atoms;
    std::vector<double> weights;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(row, cell, ',')) {
            std::size_t used = 0;
            double v = std::stod(cell, &used);
            if (used == 0) throw std::invalid_argument("read_measure: malformed number: " + cell);
            values.push_back(v);
        }
        if (values.size() < 2) throw std::invalid_argument("read_measure: row needs w plus coordinates");
        weights.push_back(values.front());
        atoms.emplace_back(values.begin() + 1, values.end());
    }
    return DiscreteMeasure(std::move(atoms), std::move(weights));
}

MeasureFlow::MeasureFlow(std::size_t nodes, std::size_t paths, std::size_t dim,
                         std::vector<double> weights)
    : nodes_(nodes), paths_(paths), dim_(dim), weights_(std::move(weights)) {
    if (nodes_ == 0 || paths_ == 0 || dim_ == 0 || weights_.empty())
        throw std::invalid_argument("MeasureFlow: empty extent");
    data_.assign(nodes_ * paths_ * weights_.size() * dim_, 0.0);
}

std::size_t MeasureFlow::index(std::size_t node, std::size_t path, std::size_t k) const {
    return ((node * paths_ + path) * weights_.size() + k) * dim_;
}

std::span<double> MeasureFlow::atom(std::size_t node, std::size_t path, std::size_t k) {
    return {data_.data() + index(node, path, k), dim_};
}

std::span<const double> MeasureFlow::atom(std::size_t node, std::size_t path, std::size_t k) const {
    return {data_.data() + index(node, path, k), dim_};
}

std::span<const double> MeasureFlow::block(std::size_t node, std::size_t path) const {
    return {data_.data() + index(node, path, 0), weights_.size() * dim_};
}

DiscreteMeasure MeasureFlow::measure_at(std::size_t node, std::size_t path) const {
    std::vector<Point> atoms;
    atoms.reserve(weights_.size());
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        auto a = atom(node, path, k);
        atoms.emplace_back(a.begin(), a.end());
    }
    return DiscreteMeasure(std::move(atoms), weights_);
}

}  // namespace bsdei
