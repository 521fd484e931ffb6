#include "fpfuse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fpfuse {

std::uint64_t Protocol::genuine_count() const
{
    return std::uint64_t(subjects) * impressions * (impressions ? impressions - 1 : 0) / 2;
}

std::uint64_t Protocol::impostor_count() const
{
    const std::uint64_t pairs = std::uint64_t(subjects) * (subjects ? subjects - 1 : 0) / 2;
    return impostor_rule == ImpostorRule::first_impression ? pairs
                                                           : pairs * impressions * impressions;
}

PairLists enumerate_pairs(const Protocol& p, const Corpus& corpus)
{
    if (corpus.subjects.size() != p.subjects) {
        throw std::invalid_argument("corpus has " + std::to_string(corpus.subjects.size()) +
                                    " subjects, protocol expects " + std::to_string(p.subjects));
    }
    std::vector<std::uint32_t> ids;
    for (const auto& [id, imps] : corpus.subjects) {
        if (imps.size() != p.impressions) {
            throw std::invalid_argument("ragged corpus: subject " + std::to_string(id) + " has " +
                                        std::to_string(imps.size()) + " impressions, protocol expects " +
                                        std::to_string(p.impressions));
        }
        ids.push_back(id);
    }

    PairLists out;
    out.genuine.reserve(p.genuine_count());
    out.impostor.reserve(p.impostor_count());
    for (std::uint32_t s : ids) {
        for (std::uint32_t i = 0; i < p.impressions; ++i) {
            for (std::uint32_t j = i + 1; j < p.impressions; ++j) out.genuine.push_back({{s, i}, {s, j}});
        }
    }
    for (std::size_t x = 0; x < ids.size(); ++x) {
        for (std::size_t y = x + 1; y < ids.size(); ++y) {
            if (p.impostor_rule == ImpostorRule::first_impression) {
                out.impostor.push_back({{ids[x], 0}, {ids[y], 0}});
                continue;
            }
            for (std::uint32_t i = 0; i < p.impressions; ++i) {
                for (std::uint32_t j = 0; j < p.impressions; ++j) {
                    out.impostor.push_back({{ids[x], i}, {ids[y], j}});
                }
            }
        }
    }
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SortedScores {
    std::vector<double> genuine;
    std::vector<double> impostor;
    std::vector<double> grid;

    SortedScores(std::span<const double> g, std::span<const double> i) : genuine(g.begin(), g.end()),
                                                                         impostor(i.begin(), i.end())
    {
        if (genuine.empty() || impostor.empty()) {
            throw std::invalid_argument("genuine and impostor score lists must be non-empty");
        }
        for (double s : genuine) {
            if (std::isnan(s)) throw std::invalid_argument("scores must not be NaN");
        }
        for (double s : impostor) {
            if (std::isnan(s)) throw std::invalid_argument("scores must not be NaN");
        }
        std::sort(genuine.begin(), genuine.end());
        std::sort(impostor.begin(), impostor.end());
        grid = genuine;
        grid.insert(grid.end(), impostor.begin(), impostor.end());
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        if (grid.back() != kInf) grid.push_back(kInf);
    }

    // Fraction of impostors with score >= thr.
    double far(double thr) const
    {
        const auto it = std::lower_bound(impostor.begin(), impostor.end(), thr);
        return double(impostor.end() - it) / double(impostor.size());
    }

    // Fraction of genuine with score < thr.
    double frr(double thr) const
    {
        const auto it = std::lower_bound(genuine.begin(), genuine.end(), thr);
        return double(it - genuine.begin()) / double(genuine.size());
    }
};

}  // namespace

FrrAtFar frr_at_far(std::span<const double> genuine, std::span<const double> impostor, double far_target)
{
    if (!(far_target >= 0.0 && far_target <= 1.0)) throw std::invalid_argument("far_target must lie in [0, 1]");
    const SortedScores s(genuine, impostor);
    // FAR is non-increasing along the grid, so the first admissible point is the answer.
    const auto it = std::partition_point(s.grid.begin(), s.grid.end(),
                                         [&](double thr) { return s.far(thr) > far_target; });
    const double thr = it == s.grid.end() ? kInf : *it;
    return {s.frr(thr), s.far(thr), thr};
}

std::vector<RocPoint> roc_curve(std::span<const double> genuine, std::span<const double> impostor)
{
    const SortedScores s(genuine, impostor);
    std::vector<RocPoint> out;
    out.reserve(s.grid.size());
    for (double thr : s.grid) out.push_back({thr, s.far(thr), s.frr(thr)});
    return out;
}

double eer(std::span<const RocPoint> roc)
{
    if (roc.empty()) throw std::invalid_argument("empty ROC");
    for (std::size_t k = 0; k < roc.size(); ++k) {
        const double d = roc[k].far - roc[k].frr;
        if (d == 0.0) return roc[k].far;
        if (d < 0.0) {
            if (k == 0) return 0.5 * (roc[0].far + roc[0].frr);
            const double d0 = roc[k - 1].far - roc[k - 1].frr;
            const double alpha = d0 / (d0 - d);
            return roc[k - 1].far + alpha * (roc[k].far - roc[k - 1].far);
        }
    }
    const auto& last = roc.back();
    return 0.5 * (last.far + last.frr);
}

double eer(std::span<const double> genuine, std::span<const double> impostor)
{
    const auto roc = roc_curve(genuine, impostor);
    return eer(roc);
}

MinutiaeQuality minutiae_quality(std::span<const Minutia> pred, std::span<const Minutia> gt,
                                 double dist_threshold_px)
{
    MinutiaeQuality q;
    double err_sum = 0.0;
    if (!pred.empty() && !gt.empty()) {
        CostMatrix c(pred.size(), gt.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            for (std::size_t j = 0; j < gt.size(); ++j) {
                c(i, j) = std::hypot(double(pred[i].x) - gt[j].x, double(pred[i].y) - gt[j].y);
            }
        }
        for (const auto& [i, j] : solve_assignment(c).pairs) {
            if (c(i, j) <= dist_threshold_px) {
                ++q.paired;
                err_sum += c(i, j);
            }
        }
    }
    q.missed = static_cast<std::uint32_t>(gt.size()) - q.paired;
    q.spurious = static_cast<std::uint32_t>(pred.size()) - q.paired;
    if (gt.empty()) {
        q.goodness_index = pred.empty() ? 1.0 : -1.0;
    } else {
        q.goodness_index = (double(q.paired) - double(q.missed) - double(q.spurious)) / double(gt.size());
    }
    q.avg_positional_error_px = q.paired ? err_sum / q.paired : 0.0;
    return q;
}

}  // namespace fpfuse
