#include "bsdei/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bsdei/types.hpp"

namespace bsdei {

double Coupling::marginal_error(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += at(i, j);
        worst = std::max(worst, std::abs(s - mu.weight(i)));
    }
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += at(i, j);
        worst = std::max(worst, std::abs(s - nu.weight(j)));
    }
    return worst;
}

namespace detail {

namespace {

// Transportation simplex over a spanning-tree basis.  The basis always holds
// exactly m + n - 1 cells; its structure is combinatorial, so only the flows
// carry floating-point state.  Dantzig entering with a Bland fallback keeps
// degenerate instances (duplicate atoms, zero costs) from cycling.
class TransportSimplex {
public:
    TransportSimplex(std::span<const double> supply, std::span<const double> demand,
                     const std::vector<double>& cost)
        : m_(supply.size()), n_(demand.size()), cost_(cost) {
        brow_.reserve(m_ + n_ - 1);
        bcol_.reserve(m_ + n_ - 1);
        bflow_.reserve(m_ + n_ - 1);
        adj_.assign(m_ + n_, {});
        northwest_corner(supply, demand);
    }

    double solve(std::vector<double>* plan_out) {
        double max_cost = 0.0;
        for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
        const double tol = 1e-12 * (1.0 + max_cost);

        // Dantzig pivots first; if the pivot count ever looks pathological,
        // restart the pricing with Bland's rule, which cannot cycle.
        const std::size_t dantzig_budget = 64 * (m_ + n_) + 4 * m_ * n_ + 1024;
        const std::size_t hard_budget = 400 * m_ * n_ + 200000;
        bool bland = false;
        std::size_t pivots = 0;
        for (;;) {
            compute_duals();
            std::size_t ei = 0, ej = 0;
            if (!find_entering(tol, bland, ei, ej)) break;
            pivot(ei, ej);
            ++pivots;
            if (!bland && pivots > dantzig_budget) bland = true;
            if (pivots > hard_budget)
                throw std::runtime_error("solve_transport: pivot budget exhausted");
        }

        double value = 0.0;
        for (std::size_t b = 0; b < bflow_.size(); ++b)
            value += std::max(0.0, bflow_[b]) * cost_[brow_[b] * n_ + bcol_[b]];
        if (plan_out) {
            plan_out->assign(m_ * n_, 0.0);
            for (std::size_t b = 0; b < bflow_.size(); ++b)
                (*plan_out)[brow_[b] * n_ + bcol_[b]] = std::max(0.0, bflow_[b]);
        }
        return value;
    }

private:
    void add_basis_cell(std::size_t i, std::size_t j, double flow) {
        const int idx = static_cast<int>(brow_.size());
        brow_.push_back(i);
        bcol_.push_back(j);
        bflow_.push_back(flow);
        adj_[i].push_back(idx);
        adj_[m_ + j].push_back(idx);
    }

    void northwest_corner(std::span<const double> supply, std::span<const double> demand) {
        std::vector<double> a(supply.begin(), supply.end());
        std::vector<double> b(demand.begin(), demand.end());
        std::size_t i = 0, j = 0;
        for (;;) {
            const double q = std::max(0.0, std::min(a[i], b[j]));
            add_basis_cell(i, j, q);
            a[i] -= q;
            b[j] -= q;
            if (i == m_ - 1 && j == n_ - 1) break;
            // Advance exactly one index per cell so the staircase stays a tree.
            if (a[i] <= b[j] && i < m_ - 1)
                ++i;
            else
                ++j;
        }
    }

    void compute_duals() {
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        seen_.assign(m_ + n_, false);
        stack_.clear();
        stack_.push_back(0);
        seen_[0] = true;
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            for (int b : adj_[node]) {
                const std::size_t r = brow_[b];
                const std::size_t cnode = m_ + bcol_[b];
                const double c = cost_[r * n_ + bcol_[b]];
                if (node == r && !seen_[cnode]) {
                    v_[bcol_[b]] = c - u_[r];
                    seen_[cnode] = true;
                    stack_.push_back(cnode);
                } else if (node == cnode && !seen_[r]) {
                    u_[r] = c - v_[bcol_[b]];
                    seen_[r] = true;
                    stack_.push_back(r);
                }
            }
        }
    }

    bool find_entering(double tol, bool bland, std::size_t& ei, std::size_t& ej) const {
        double best = -tol;
        bool found = false;
        for (std::size_t i = 0; i < m_; ++i) {
            const double ui = u_[i];
            for (std::size_t j = 0; j < n_; ++j) {
                const double r = cost_[i * n_ + j] - ui - v_[j];
                if (r < -tol) {
                    if (bland) {  // first eligible in the fixed cell order
                        ei = i;
                        ej = j;
                        return true;
                    }
                    if (r < best) {
                        best = r;
                        ei = i;
                        ej = j;
                        found = true;
                    }
                }
            }
        }
        return found;
    }

    // Tree path from the column node of the entering cell to its row node.
    void find_cycle(std::size_t ei, std::size_t ej) {
        parent_edge_.assign(m_ + n_, -1);
        parent_node_.assign(m_ + n_, std::numeric_limits<std::size_t>::max());
        seen_.assign(m_ + n_, false);
        stack_.clear();
        const std::size_t start = m_ + ej;
        const std::size_t goal = ei;
        stack_.push_back(start);
        seen_[start] = true;
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            if (node == goal) break;
            for (int b : adj_[node]) {
                const std::size_t other = node == brow_[b] ? m_ + bcol_[b] : brow_[b];
                if (!seen_[other]) {
                    seen_[other] = true;
                    parent_edge_[other] = b;
                    parent_node_[other] = node;
                    stack_.push_back(other);
                }
            }
        }
        cycle_.clear();
        for (std::size_t node = goal; node != start; node = parent_node_[node])
            cycle_.push_back(parent_edge_[node]);
        // cycle_ lists basis cells from the row end of the entering cell back
        // to its column end; entering takes +theta, cycle_[0] -theta, and the
        // signs alternate from there.
    }

    void pivot(std::size_t ei, std::size_t ej) {
        find_cycle(ei, ej);

        double theta = std::numeric_limits<double>::infinity();
        int leave_pos = -1;
        std::size_t leave_cell_id = 0;
        for (std::size_t pos = 0; pos < cycle_.size(); pos += 2) {
            const int b = cycle_[pos];
            const double f = bflow_[b];
            const std::size_t cell_id = brow_[b] * n_ + bcol_[b];
            if (f < theta - 1e-18 || (std::abs(f - theta) <= 1e-18 && cell_id < leave_cell_id)) {
                theta = f;
                leave_pos = static_cast<int>(pos);
                leave_cell_id = cell_id;
            }
        }
        theta = std::max(0.0, theta);

        for (std::size_t pos = 0; pos < cycle_.size(); ++pos) {
            const int b = cycle_[pos];
            bflow_[b] += (pos % 2 == 0) ? -theta : theta;
        }

        // Replace the leaving cell with the entering one in its basis slot.
        const int b = cycle_[leave_pos];
        detach(b);
        brow_[b] = ei;
        bcol_[b] = ej;
        bflow_[b] = theta;
        adj_[ei].push_back(b);
        adj_[m_ + ej].push_back(b);
    }

    void detach(int b) {
        auto drop = [&](std::size_t node) {
            auto& lst = adj_[node];
            lst.erase(std::find(lst.begin(), lst.end(), b));
        };
        drop(brow_[b]);
        drop(m_ + bcol_[b]);
    }

    std::size_t m_, n_;
    const std::vector<double>& cost_;
    std::vector<std::size_t> brow_, bcol_;
    std::vector<double> bflow_;
    std::vector<std::vector<int>> adj_;
    std::vector<double> u_, v_;
    std::vector<bool> seen_;
    std::vector<std::size_t> stack_;
    std::vector<int> parent_edge_;
    std::vector<std::size_t> parent_node_;
    std::vector<int> cycle_;
};

}  // namespace

double solve_transport(std::span<const double> supply, std::span<const double> demand,
                       const std::vector<double>& cost, std::vector<double>* plan_out) {
    if (supply.empty() || demand.empty())
        throw std::invalid_argument("solve_transport: empty marginals");
    if (cost.size() != supply.size() * demand.size())
        throw std::invalid_argument("solve_transport: cost matrix extent mismatch");
    TransportSimplex simplex(supply, demand, cost);
    return simplex.solve(plan_out);
}

}  // namespace detail

namespace {

double pair_cost(std::span<const double> u, std::span<const double> v, int p) {
    const double d2 = sq_dist(u, v);
    if (p == 2) return d2;
    const double r = std::sqrt(d2);
    if (p == 0) return r / (1.0 + r);
    if (p == 1) return r;
    return std::pow(r, p);
}

std::vector<double> cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
    std::vector<double> cost(mu.size() * nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j)
            cost[i * nu.size() + j] = pair_cost(mu.atom(i), nu.atom(j), p);
    return cost;
}

void check_pair(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("transport: measures of different dimension");
}

// Fixed orientation so that distance(mu, nu) and distance(nu, mu) execute the
// exact same solve; the metric's symmetry then holds bitwise.
bool canonical_order(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t c = 0; c < a.dim(); ++c) {
            if (a.atom(k)[c] != b.atom(k)[c]) return a.atom(k)[c] < b.atom(k)[c];
        }
        if (a.weight(k) != b.weight(k)) return a.weight(k) < b.weight(k);
    }
    return true;  // equal contents: either order works
}

double optimal_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p,
                    std::vector<double>* plan, bool* transposed_out) {
    check_pair(mu, nu);
    const bool keep = canonical_order(mu, nu);
    const DiscreteMeasure& a = keep ? mu : nu;
    const DiscreteMeasure& b = keep ? nu : mu;
    if (transposed_out) *transposed_out = !keep;
    const auto cost = cost_matrix(a, b, p);
    return detail::solve_transport(a.weights(), b.weights(), cost, plan);
}

}  // namespace

double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
    if (p < 1) throw std::invalid_argument("wasserstein: order must be >= 1");
    const double value = optimal_cost(mu, nu, p, nullptr, nullptr);
    if (p == 1) return value;
    if (p == 2) return std::sqrt(std::max(0.0, value));
    return std::pow(std::max(0.0, value), 1.0 / p);
}

double wasserstein_0(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    return optimal_cost(mu, nu, 0, nullptr, nullptr);
}

Coupling optimal_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
    if (p < 0) throw std::invalid_argument("optimal_coupling: order must be >= 0");
    std::vector<double> plan;
    bool transposed = false;
    const double value = optimal_cost(mu, nu, p, &plan, &transposed);

    Coupling out;
    out.rows = mu.size();
    out.cols = nu.size();
    out.cost = value;
    if (!transposed) {
        out.flow = std::move(plan);
    } else {
        out.flow.assign(out.rows * out.cols, 0.0);
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j) out.flow[i * out.cols + j] = plan[j * out.rows + i];
    }
    return out;
}

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
    check_pair(mu, nu);
    if (mu.dim() != 1) throw std::invalid_argument("wasserstein_1d: measures must be 1-dimensional");
    if (p < 1) throw std::invalid_argument("wasserstein_1d: order must be >= 1");

    auto sorted = [](const DiscreteMeasure& m) {
        std::vector<std::pair<double, double>> xs(m.size());
        for (std::size_t k = 0; k < m.size(); ++k) xs[k] = {m.atom(k)[0], m.weight(k)};
        std::sort(xs.begin(), xs.end());
        return xs;
    };
    const auto a = sorted(mu);
    const auto b = sorted(nu);

    // Integrate |F_a^{-1}(q) - F_b^{-1}(q)|^p over the merged quantile grid.
    double value = 0.0;
    std::size_t ia = 0, ib = 0;
    double ra = a[0].second, rb = b[0].second;  // mass left in the current atoms
    while (ia < a.size() && ib < b.size()) {
        const double step = std::min(ra, rb);
        const double gap = std::abs(a[ia].first - b[ib].first);
        value += step * (p == 2 ? gap * gap : (p == 1 ? gap : std::pow(gap, p)));
        ra -= step;
        rb -= step;
        if (ra <= 1e-15 && ia + 1 < a.size()) ra = a[++ia].second;
        else if (ra <= 1e-15) ++ia;
        if (rb <= 1e-15 && ib + 1 < b.size()) rb = b[++ib].second;
        else if (rb <= 1e-15) ++ib;
    }

    if (p == 1) return value;
    if (p == 2) return std::sqrt(std::max(0.0, value));
    return std::pow(std::max(0.0, value), 1.0 / p);
}

}  // namespace bsdei
