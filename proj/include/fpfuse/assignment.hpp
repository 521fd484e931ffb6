#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fpfuse/template_model.hpp"

namespace fpfuse {

/// Dense row-major cost matrix. Entries equal to `forbidden` mark pairs that
/// may not be assigned.
class CostMatrix {
public:
    static constexpr double forbidden = std::numeric_limits<double>::infinity();

    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    CostMatrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct Assignment {
    /// Sorted by row.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    double total_cost = 0.0;
};

class InfeasibleAssignment : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact minimum-cost assignment pairing min(rows, cols) rows and columns.
///
/// Among all optimal pairings the lexicographically smallest pair sequence is
/// returned, so results do not depend on incidental solver state. The total
/// is summed over the returned pairs in row order. Throws
/// InfeasibleAssignment when forbidden entries rule out every maximal pairing,
/// and std::invalid_argument on NaN or -inf entries.
Assignment solve_assignment(const CostMatrix& costs);

struct CorrespondenceWeights {
    double location = 1.0;        // per pixel
    double orientation = 57.2958;  // per radian, about 1 per degree
    double embedding = 20.0;
    /// When false the orientation term is the plain |a - b| with no wraparound.
    bool circular_orientation = true;

    void check() const;
};

/// Circular distance between two angles, in [0, pi].
double angular_distance(double a, double b);

/// Weighted sum of positional, orientation and embedding distances.
double minutia_cost(const Minutia& p, const Minutia& g, const CorrespondenceWeights& w);

/// Same cost on raw rows: `pose` is (x, y, theta).
double minutia_cost(std::span<const double> pose_p, std::span<const double> emb_p,
                    std::span<const double> pose_g, std::span<const double> emb_g,
                    const CorrespondenceWeights& w);

CostMatrix correspondence_costs(std::span<const Minutia> pred, std::span<const Minutia> gt,
                                const CorrespondenceWeights& w);

/// Optimal one-to-one correspondence between predicted and reference minutiae
/// (rows are `pred`, columns `gt`).
Assignment correspond_minutiae(std::span<const Minutia> pred, std::span<const Minutia> gt,
                               const CorrespondenceWeights& w);

}  // namespace fpfuse
