#include "fpfuse/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace fpfuse {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
}

CostMatrix::CostMatrix(std::initializer_list<std::initializer_list<double>> rows)
{
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw std::invalid_argument("ragged cost matrix");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

namespace {

// Square working copy, padded with zero-cost dummy rows/columns.
struct SquareProblem {
    std::size_t n;
    std::vector<double> a;
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// Shortest augmenting path Hungarian method with row/column potentials.
// Returns row -> column; fills the optimal duals.
std::vector<std::size_t> hungarian(const SquareProblem& sq, std::vector<double>& u, std::vector<double>& v)
{
    const std::size_t n = sq.n;
    constexpr double inf = std::numeric_limits<double>::infinity();
    u.assign(n + 1, 0.0);
    v.assign(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = sq(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if (j1 == 0 || !std::isfinite(delta)) {
                throw InfeasibleAssignment("no maximal pairing avoids the forbidden entries");
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

// Rewrites an optimal perfect matching into the lexicographically smallest one
// that uses only zero-reduced-cost edges. Every optimal matching is tight
// against an optimal dual, so this enumerates exactly the optimal set.
void lexicographic_tie_break(const SquareProblem& sq, const std::vector<double>& u,
                             const std::vector<double>& v, double tol, std::size_t rows_to_fix,
                             std::vector<std::size_t>& rc)
{
    const std::size_t n = sq.n;
    auto tight = [&](std::size_t i, std::size_t j) {
        const double c = sq(i, j);
        return std::isfinite(c) && std::abs(c - u[i + 1] - v[j + 1]) <= tol;
    };
    std::vector<std::size_t> cr(n);
    for (std::size_t i = 0; i < n; ++i) cr[rc[i]] = i;

    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> parent_row(n);
    std::vector<char> seen_row(n), seen_col(n);

    for (std::size_t i = 0; i < rows_to_fix; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == rc[i]) break;
            if (!tight(i, j)) continue;
            const std::size_t r0 = cr[j];
            if (r0 < i) continue;

            // Alternating path from r0 to the column i releases, through
            // unfixed rows only and avoiding column j.
            const std::size_t target = rc[i];
            std::fill(seen_row.begin(), seen_row.end(), 0);
            std::fill(seen_col.begin(), seen_col.end(), 0);
            std::deque<std::size_t> queue{r0};
            seen_row[r0] = 1;
            parent_row[r0] = none;
            seen_col[j] = 1;
            std::size_t end_row = none;
            while (!queue.empty() && end_row == none) {
                const std::size_t r = queue.front();
                queue.pop_front();
                for (std::size_t c = 0; c < n; ++c) {
                    if (seen_col[c] || !tight(r, c)) continue;
                    seen_col[c] = 1;
                    if (c == target) {
                        end_row = r;
                        break;
                    }
                    const std::size_t nr = cr[c];
                    if (nr <= i || seen_row[nr]) continue;
                    seen_row[nr] = 1;
                    parent_row[nr] = r;
                    queue.push_back(nr);
                }
            }
            if (end_row == none) continue;

            // Walk back: each row on the path takes the column of its successor.
            std::size_t r = end_row;
            std::size_t take = target;
            while (r != none) {
                const std::size_t prev_col = rc[r];
                rc[r] = take;
                cr[take] = r;
                take = prev_col;
                r = parent_row[r];
            }
            // `take` is now r0's old column, which is j.
            rc[i] = j;
            cr[j] = i;
            break;
        }
    }
}

double sum_in_row_order(const CostMatrix& c, const std::vector<std::size_t>& rc)
{
    double total = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        if (rc[i] < c.cols()) total += c(i, rc[i]);
    }
    return total;
}

}  // namespace

Assignment solve_assignment(const CostMatrix& costs)
{
    const std::size_t n = costs.rows();
    const std::size_t m = costs.cols();
    Assignment out;
    if (n == 0 || m == 0) return out;

    double max_abs = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = costs(i, j);
            if (std::isnan(c) || c == -std::numeric_limits<double>::infinity()) {
                throw std::invalid_argument("cost matrix entries must be finite or +inf");
            }
            if (std::isfinite(c)) max_abs = std::max(max_abs, std::abs(c));
        }
    }

    SquareProblem sq{std::max(n, m), {}};
    sq.a.assign(sq.n * sq.n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) sq.a[i * sq.n + j] = costs(i, j);
    }

    std::vector<double> u, v;
    std::vector<std::size_t> rc = hungarian(sq, u, v);
    const double optimum = sum_in_row_order(costs, rc);

    std::vector<std::size_t> lex = rc;
    lexicographic_tie_break(sq, u, v, 1e-9 * max_abs, n, lex);
    // Guard against a near-tight edge slipping in through the tolerance.
    if (sum_in_row_order(costs, lex) <= optimum) rc = std::move(lex);

    for (std::size_t i = 0; i < n; ++i) {
        if (rc[i] < m) out.pairs.emplace_back(i, rc[i]);
    }
    out.total_cost = sum_in_row_order(costs, rc);
    return out;
}

void CorrespondenceWeights::check() const
{
    if (!(location >= 0 && orientation >= 0 && embedding >= 0)) {
        throw std::invalid_argument("correspondence weights must be nonnegative");
    }
    if (location == 0 && orientation == 0 && embedding == 0) {
        throw std::invalid_argument("correspondence weights must not all be zero");
    }
}

double angular_distance(double a, double b)
{
    const double d = std::fmod(std::abs(a - b), kTwoPi);
    return std::min(d, kTwoPi - d);
}

namespace {

template <typename T, typename U>
double embedding_distance(std::span<const T> a, std::span<const U> b)
{
    if (a.size() != b.size()) throw std::invalid_argument("minutia embedding dimensions differ");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = double(a[k]) - double(b[k]);
        s += d * d;
    }
    return std::sqrt(s);
}

double pose_cost(double xp, double yp, double tp, double xg, double yg, double tg,
                 const CorrespondenceWeights& w)
{
    const double loc = std::hypot(xp - xg, yp - yg);
    const double ori = w.circular_orientation ? angular_distance(tp, tg) : std::abs(tp - tg);
    return w.location * loc + w.orientation * ori;
}

}  // namespace

double minutia_cost(const Minutia& p, const Minutia& g, const CorrespondenceWeights& w)
{
    const double e = embedding_distance(std::span<const float>(p.embedding),
                                        std::span<const float>(g.embedding));
    return pose_cost(p.x, p.y, p.theta, g.x, g.y, g.theta, w) + w.embedding * e;
}

double minutia_cost(std::span<const double> pose_p, std::span<const double> emb_p,
                    std::span<const double> pose_g, std::span<const double> emb_g,
                    const CorrespondenceWeights& w)
{
    if (pose_p.size() != 3 || pose_g.size() != 3) {
        throw std::invalid_argument("minutia pose rows must have 3 entries");
    }
    const double e = embedding_distance(emb_p, emb_g);
    return pose_cost(pose_p[0], pose_p[1], pose_p[2], pose_g[0], pose_g[1], pose_g[2], w) +
           w.embedding * e;
}

CostMatrix correspondence_costs(std::span<const Minutia> pred, std::span<const Minutia> gt,
                                const CorrespondenceWeights& w)
{
    CostMatrix c(pred.size(), gt.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = 0; j < gt.size(); ++j) c(i, j) = minutia_cost(pred[i], gt[j], w);
    }
    return c;
}

Assignment correspond_minutiae(std::span<const Minutia> pred, std::span<const Minutia> gt,
                               const CorrespondenceWeights& w)
{
    if (pred.empty() || gt.empty()) return {};
    return solve_assignment(correspondence_costs(pred, gt, w));
}

}  // namespace fpfuse
