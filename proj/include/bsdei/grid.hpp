#pragma once

#include <cstddef>
#include <stdexcept>

namespace bsdei {

// Uniform partition of [0, T] into `steps` intervals (steps + 1 nodes).
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (steps == 0) throw std::invalid_argument("TimeGrid: need at least one step");
    }

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    std::size_t nodes() const { return steps_ + 1; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }
    double node(std::size_t j) const { return horizon_ * static_cast<double>(j) / static_cast<double>(steps_); }

    bool operator==(const TimeGrid& o) const { return horizon_ == o.horizon_ && steps_ == o.steps_; }

private:
    double horizon_;
    std::size_t steps_;
};

}  // namespace bsdei
