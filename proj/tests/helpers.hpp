#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fpfuse/assignment.hpp"
#include "fpfuse/template_model.hpp"

namespace fpfuse::testing {

inline std::vector<float> unit(std::vector<double> v)
{
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<float> out;
    for (double x : v) out.push_back(static_cast<float>(x / n));
    return out;
}

/// e_k in `dim` dimensions.
inline std::vector<float> basis(std::size_t dim, std::size_t k)
{
    std::vector<float> v(dim, 0.0f);
    v[k] = 1.0f;
    return v;
}

inline std::vector<float> random_unit(std::mt19937_64& rng, std::size_t dim)
{
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) x = n(rng);
    return unit(v);
}

inline Minutia make_minutia(float x, float y, float theta, std::vector<float> emb)
{
    Minutia m;
    m.x = x;
    m.y = y;
    m.theta = theta;
    m.embedding = std::move(emb);
    return m;
}

/// Random valid template with `n` minutiae.
inline Template random_template(std::mt19937_64& rng, std::size_t n, std::uint32_t d_g = 8, std::uint32_t d_m = 4)
{
    std::uniform_real_distribution<double> pos(0.0, 383.0), ang(0.0, 6.28);
    Template t;
    t.global = random_unit(rng, d_g);
    t.minutia_dim = d_m;
    t.source_id = "rand";
    for (std::size_t k = 0; k < n; ++k) {
        t.minutiae.push_back(make_minutia(static_cast<float>(pos(rng)), static_cast<float>(pos(rng)),
                                          static_cast<float>(ang(rng)), random_unit(rng, d_m)));
    }
    return t;
}

/// Exhaustive search over all maximal one-to-one pairings. Rows are visited
/// in order and columns ascending, with "row left out" tried last, so the
/// first optimum found is the lexicographically smallest pair sequence. Sums
/// run in row order.
inline Assignment brute_force_assignment(const CostMatrix& c)
{
    const std::size_t n = c.rows(), m = c.cols();
    const std::size_t target = std::min(n, m);
    Assignment best;
    best.total_cost = std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::size_t, std::size_t>> cur;
    std::vector<bool> used(m, false);
    bool found = false;

    auto rec = [&](auto&& self, std::size_t row, double sum) -> void {
        if (cur.size() == target) {
            if (!found || sum < best.total_cost) {
                best.pairs = cur;
                best.total_cost = sum;
                found = true;
            }
            return;
        }
        if (row == n) return;
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j] || c(row, j) == CostMatrix::forbidden) continue;
            used[j] = true;
            cur.emplace_back(row, j);
            self(self, row + 1, sum + c(row, j));
            cur.pop_back();
            used[j] = false;
        }
        if (n - row - 1 >= target - cur.size()) self(self, row + 1, sum);
    };
    rec(rec, 0, 0.0);
    if (!found) throw InfeasibleAssignment("brute force: no feasible pairing");
    if (target == 0) best.total_cost = 0.0;
    return best;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("fpfuse_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fpfuse::testing
