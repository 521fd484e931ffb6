#include "fpfuse/matchers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fpfuse/assignment.hpp"

namespace fpfuse {

void LocalMatchConfig::check() const
{
    if (!(emb_sim_floor >= -1.0 && emb_sim_floor <= 1.0)) {
        throw std::invalid_argument("emb_sim_floor must lie in [-1, 1]");
    }
    if (!(geo_tolerance_px >= 0.0)) throw std::invalid_argument("geo_tolerance_px must be >= 0");
    if (!(ori_tolerance_rad >= 0.0)) throw std::invalid_argument("ori_tolerance_rad must be >= 0");
    if (max_minutiae_used && *max_minutiae_used == 0) {
        throw std::invalid_argument("max_minutiae_used must be positive");
    }
    if (alignment_seeds == 0) throw std::invalid_argument("alignment_seeds must be positive");
}

double global_match(const Template& a, const Template& b)
{
    if (a.global.size() != b.global.size()) {
        throw std::invalid_argument("global embedding dimensions differ");
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < a.global.size(); ++k) dot += double(a.global[k]) * double(b.global[k]);
    return std::clamp(dot, 0.0, 1.0);
}

namespace {

struct Candidate {
    std::uint32_t i;
    std::uint32_t j;
    double cosine;
};

double squared_norm(const std::vector<float>& v)
{
    double s = 0.0;
    for (float x : v) s += double(x) * double(x);
    return s;
}

// Survivors of one alignment, paired one-to-one.
LocalMatchResult pair_survivors(const std::vector<Candidate>& survivors)
{
    LocalMatchResult out;
    if (survivors.empty()) return out;

    std::vector<std::uint32_t> rows, cols;
    for (const auto& c : survivors) {
        rows.push_back(c.i);
        cols.push_back(c.j);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

    // Non-survivors cost 1, the same as leaving a row unmatched.
    CostMatrix costs(rows.size(), cols.size(), 1.0);
    std::vector<double> cosine(rows.size() * cols.size(), 0.0);
    std::vector<char> alive(rows.size() * cols.size(), 0);
    for (const auto& c : survivors) {
        const auto r = std::lower_bound(rows.begin(), rows.end(), c.i) - rows.begin();
        const auto k = std::lower_bound(cols.begin(), cols.end(), c.j) - cols.begin();
        costs(r, k) = 1.0 - c.cosine;
        cosine[r * cols.size() + k] = c.cosine;
        alive[r * cols.size() + k] = 1;
    }

    const Assignment a = solve_assignment(costs);
    for (const auto& [r, k] : a.pairs) {
        const std::size_t idx = r * cols.size() + k;
        if (!alive[idx] || cosine[idx] <= 0.0) continue;
        out.matched_pairs.push_back({rows[r], cols[k], cosine[idx]});
        out.score += cosine[idx];
    }
    return out;
}

LocalMatchResult match_directed(const Template& a, const Template& b, const LocalMatchConfig& cfg)
{
    LocalMatchResult result;
    if (a.minutia_dim != b.minutia_dim) throw std::invalid_argument("minutia embedding dimensions differ");

    const std::size_t cap = cfg.max_minutiae_used ? *cfg.max_minutiae_used : SIZE_MAX;
    const std::size_t na = std::min(a.minutiae.size(), cap);
    const std::size_t nb = std::min(b.minutiae.size(), cap);
    if (na == 0 || nb == 0) return result;

    std::vector<double> sq_a(na), sq_b(nb);
    for (std::size_t i = 0; i < na; ++i) sq_a[i] = squared_norm(a.minutiae[i].embedding);
    for (std::size_t j = 0; j < nb; ++j) sq_b[j] = squared_norm(b.minutiae[j].embedding);

    std::vector<Candidate> candidates;
    const std::size_t dim = a.minutia_dim;
    for (std::size_t i = 0; i < na; ++i) {
        const float* ea = a.minutiae[i].embedding.data();
        for (std::size_t j = 0; j < nb; ++j) {
            const float* eb = b.minutiae[j].embedding.data();
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += double(ea[k]) * double(eb[k]);
            ++result.work_units;
            const double denom = std::sqrt(sq_a[i] * sq_b[j]);
            if (denom == 0.0) continue;
            const double cosine = std::clamp(dot / denom, -1.0, 1.0);
            if (cosine >= cfg.emb_sim_floor) {
                candidates.push_back({std::uint32_t(i), std::uint32_t(j), cosine});
            }
        }
    }
    if (candidates.empty()) return result;

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    const std::size_t seeds = std::min<std::size_t>(cfg.alignment_seeds, order.size());
    // Candidates are generated in (i, j) order, so a stable sort breaks ties by index.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return candidates[x].cosine > candidates[y].cosine;
    });

    LocalMatchResult best;
    bool have_best = false;
    std::vector<Candidate> survivors;
    for (std::size_t s = 0; s < seeds; ++s) {
        const Candidate& seed = candidates[order[s]];
        const Minutia& sa = a.minutiae[seed.i];
        const Minutia& sb = b.minutiae[seed.j];
        const double rot = double(sb.theta) - double(sa.theta);
        const double c = std::cos(rot);
        const double sn = std::sin(rot);

        survivors.clear();
        for (const auto& cand : candidates) {
            const Minutia& ma = a.minutiae[cand.i];
            const Minutia& mb = b.minutiae[cand.j];
            const double dx = double(ma.x) - double(sa.x);
            const double dy = double(ma.y) - double(sa.y);
            const double x = double(sb.x) + c * dx - sn * dy;
            const double y = double(sb.y) + sn * dx + c * dy;
            if (std::hypot(x - double(mb.x), y - double(mb.y)) > cfg.geo_tolerance_px) continue;
            if (angular_distance(double(ma.theta) + rot, double(mb.theta)) > cfg.ori_tolerance_rad) continue;
            survivors.push_back(cand);
        }
        LocalMatchResult r = pair_survivors(survivors);
        if (!have_best || r.score > best.score) {
            best = std::move(r);
            have_best = true;
        }
    }
    best.work_units = result.work_units;
    return best;
}

}  // namespace

LocalMatchResult local_match(const Template& a, const Template& b, const LocalMatchConfig& cfg)
{
    cfg.check();
    LocalMatchResult ab = match_directed(a, b, cfg);
    if (!cfg.symmetric) return ab;

    // The score is the mean of both directions; pairs are reported a -> b.
    const LocalMatchResult ba = match_directed(b, a, cfg);
    ab.score = 0.5 * (ab.score + ba.score);
    ab.work_units += ba.work_units;
    return ab;
}

}  // namespace fpfuse
