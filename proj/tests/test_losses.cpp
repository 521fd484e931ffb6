#include <doctest.h>

#include <cmath>
#include <random>

#include "fpfuse/corpus_io.hpp"
#include "fpfuse/losses.hpp"
#include "helpers.hpp"

using namespace fpfuse;
using namespace fpfuse::testing;

namespace {

std::string fixture(const std::string& name)
{
    const auto bytes = read_file(std::filesystem::path(FPFUSE_FIXTURES_DIR) / "losses" / name);
    return {bytes.begin(), bytes.end()};
}

LayerOutput random_layer(std::mt19937_64& rng, std::size_t L, std::size_t d_m)
{
    std::uniform_real_distribution<double> pos(0.0, 384.0), ang(0.0, kTwoPi), e(-1.0, 1.0);
    LayerOutput l;
    l.pose = Matrix(L, 3);
    l.embedding = Matrix(L, d_m);
    for (std::size_t i = 0; i < L; ++i) {
        l.pose(i, 0) = pos(rng);
        l.pose(i, 1) = pos(rng);
        l.pose(i, 2) = ang(rng);
        for (std::size_t k = 0; k < d_m; ++k) l.embedding(i, k) = e(rng);
    }
    return l;
}

LayerOutput permute_rows(const LayerOutput& l, const std::vector<std::size_t>& perm)
{
    LayerOutput out{Matrix(l.pose.rows, 3), Matrix(l.embedding.rows, l.embedding.cols)};
    for (std::size_t i = 0; i < perm.size(); ++i) {
        for (std::size_t k = 0; k < 3; ++k) out.pose(i, k) = l.pose(perm[i], k);
        for (std::size_t k = 0; k < l.embedding.cols; ++k) out.embedding(i, k) = l.embedding(perm[i], k);
    }
    return out;
}

/// Straight-line recomputation: every permutation is tried and the cheapest
/// correspondence wins, then the squared differences are summed directly.
struct OracleTerms {
    double pose = 0.0;
    double emb = 0.0;
};

OracleTerms oracle_layer(const LayerOutput& p, const LayerOutput& g, const CorrespondenceWeights& w)
{
    const std::size_t L = p.pose.rows;
    std::vector<std::size_t> perm(L), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_cost = INFINITY;
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            const std::size_t j = perm[i];
            double e2 = 0.0;
            for (std::size_t k = 0; k < p.embedding.cols; ++k) {
                e2 += (p.embedding(i, k) - g.embedding(j, k)) * (p.embedding(i, k) - g.embedding(j, k));
            }
            c += w.location * std::hypot(p.pose(i, 0) - g.pose(j, 0), p.pose(i, 1) - g.pose(j, 1)) +
                 w.orientation * angular_distance(p.pose(i, 2), g.pose(j, 2)) + w.embedding * std::sqrt(e2);
        }
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    OracleTerms t;
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t j = best[i];
        const double dx = p.pose(i, 0) - g.pose(j, 0), dy = p.pose(i, 1) - g.pose(j, 1);
        const double dt = angular_distance(p.pose(i, 2), g.pose(j, 2));
        t.pose += dx * dx + dy * dy + dt * dt;
        for (std::size_t k = 0; k < p.embedding.cols; ++k) {
            t.emb += (p.embedding(i, k) - g.embedding(j, k)) * (p.embedding(i, k) - g.embedding(j, k));
        }
    }
    t.pose /= double(3 * L);
    t.emb /= double(L * p.embedding.cols);
    return t;
}

}  // namespace

TEST_CASE("mse")
{
    CHECK(mse(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK(mse(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
    CHECK_THROWS_AS(mse(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(mse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("mse gradient against central differences")
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_int_distribution<int> len(1, 20);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = len(rng);
        std::vector<double> a(n), b(n);
        for (auto& x : a) x = u(rng);
        for (auto& x : b) x = u(rng);
        const auto g = mse_gradient(a, b);
        for (int k = 0; k < n; ++k) {
            const double h = 1e-5;
            auto ap = a, am = a;
            ap[k] += h;
            am[k] -= h;
            const double fd = (mse(ap, b) - mse(am, b)) / (2 * h);
            worst = std::max(worst, std::abs(fd - g[k]) / std::max(1e-8, std::abs(g[k])));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("pose mse uses the circular orientation difference")
{
    Matrix p(1, 3), g(1, 3);
    p(0, 2) = 0.1;
    g(0, 2) = kTwoPi - 0.1;
    CHECK(pose_mse(p, g, false) == doctest::Approx(0.04 / 3.0));
    CHECK(pose_mse(p, g, true) == doctest::Approx((kTwoPi - 0.2) * (kTwoPi - 0.2) / 3.0));
}

TEST_CASE("reordering")
{
    std::mt19937_64 rng(12);
    const LayerOutput a = random_layer(rng, 5, 4);
    const CorrespondenceWeights w;

    const Reordering same = reorder_ground_truth(a, a, w);
    CHECK(same.permutation == std::vector<std::size_t>{0, 1, 2, 3, 4});

    const LayerOutput rev = permute_rows(a, {4, 3, 2, 1, 0});
    const Reordering r = reorder_ground_truth(a, rev, w);
    CHECK(r.permutation == std::vector<std::size_t>{4, 3, 2, 1, 0});
    CHECK(pose_mse(a.pose, r.reordered.pose, false) == 0.0);

    CHECK_THROWS_AS(reorder_ground_truth(a, random_layer(rng, 4, 4), w), std::invalid_argument);
}

TEST_CASE("reordering equals the brute-force optimum")
{
    std::mt19937_64 rng(13);
    const CorrespondenceWeights w;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t L = 1 + trial % 5;
        const LayerOutput p = random_layer(rng, L, 3);
        const LayerOutput g = random_layer(rng, L, 3);
        const Reordering r = reorder_ground_truth(p, g, w);
        CostMatrix c(L, L);
        for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t j = 0; j < L; ++j) {
                c(i, j) = minutia_cost(p.pose.row(i), p.embedding.row(i), g.pose.row(j), g.embedding.row(j), w);
            }
        }
        const Assignment want = brute_force_assignment(c);
        for (auto [i, j] : want.pairs) CHECK(r.permutation[i] == j);
    }
}

TEST_CASE("total loss on the handcrafted fixture")
{
    const PredictionRecord pred = parse_prediction(fixture("pred.json"));
    const GroundTruthRecord gt = parse_ground_truth(fixture("gt.json"));
    LossWeights w;
    LossOptions opts;
    parse_loss_weights(fixture("weights.json"), w, opts);
    REQUIRE(pred.intermediates.size() == 5);

    const LossBreakdown b = total_loss(pred, gt, w, opts);
    // Frozen from the independent script next to the fixture.
    CHECK(std::abs(b.global - 0.005624999999999997) <= 1e-9);
    CHECK(std::abs(b.pose - 4.922275183566338) <= 1e-9);
    CHECK(std::abs(b.embedding - 0.002733333333333332) <= 1e-9);
    CHECK(std::abs(b.pose_inter - 76.28537591783169) <= 1e-9);
    CHECK(std::abs(b.embedding_inter - 0.03291666666666666) <= 1e-9);
    CHECK(std::abs(b.total - 21.546864904574424) <= 1e-9);

    // And against the in-process straight-line recomputation.
    const OracleTerms f = oracle_layer(pred.final_layer, gt.minutiae, opts.correspondence);
    double pi = 0.0, ei = 0.0;
    for (const auto& l : pred.intermediates) {
        const OracleTerms t = oracle_layer(l, gt.minutiae, opts.correspondence);
        pi += t.pose;
        ei += t.emb;
    }
    CHECK(std::abs(b.pose - f.pose) <= 1e-9);
    CHECK(std::abs(b.embedding - f.emb) <= 1e-9);
    CHECK(std::abs(b.pose_inter - pi) <= 1e-9);
    CHECK(std::abs(b.embedding_inter - ei) <= 1e-9);
}

TEST_CASE("degenerate weights and exact predictions")
{
    const PredictionRecord pred = parse_prediction(fixture("pred.json"));
    const GroundTruthRecord gt = parse_ground_truth(fixture("gt.json"));

    PredictionRecord exact;
    exact.global = gt.global;
    exact.final_layer = gt.minutiae;
    exact.intermediates.assign(5, gt.minutiae);
    const LossBreakdown z = total_loss(exact, gt, LossWeights{});
    CHECK(z.total == 0.0);
    CHECK(z.pose_inter == 0.0);

    const LossBreakdown all = total_loss(pred, gt, LossWeights{});
    const double parts[] = {all.global, all.pose, all.embedding, all.pose_inter, all.embedding_inter};
    for (int k = 0; k < 5; ++k) {
        LossWeights w{0, 0, 0, 0, 0};
        double* fields[] = {&w.global, &w.pose, &w.embedding, &w.pose_inter, &w.embedding_inter};
        *fields[k] = 1.0;
        CHECK(total_loss(pred, gt, w).total == parts[k]);
    }
    CHECK_THROWS_AS((LossWeights{-1, 1, 1, 1, 1}.check()), std::invalid_argument);
}

TEST_CASE("loss is invariant to ground-truth storage order")
{
    std::mt19937_64 rng(15);
    PredictionRecord pred;
    pred.global = {0.1, 0.2};
    pred.final_layer = random_layer(rng, 5, 3);
    pred.intermediates = {random_layer(rng, 5, 3), random_layer(rng, 5, 3)};
    GroundTruthRecord gt{{0.0, 0.3}, random_layer(rng, 5, 3)};
    GroundTruthRecord shuffled = gt;
    shuffled.minutiae = permute_rows(gt.minutiae, {3, 0, 4, 1, 2});
    CHECK(total_loss(pred, gt, {}).total == doctest::Approx(total_loss(pred, shuffled, {}).total).epsilon(1e-12));
}

TEST_CASE("batch loss is the mean of records")
{
    const PredictionRecord pred = parse_prediction(fixture("pred.json"));
    const GroundTruthRecord gt = parse_ground_truth(fixture("gt.json"));
    std::vector<PredictionRecord> ps(3, pred);
    std::vector<GroundTruthRecord> gs(3, gt);
    ps[1].global[0] += 0.5;
    const LossBreakdown b = batch_total_loss(ps, gs, {});
    const double want =
        (total_loss(ps[0], gt, {}).total + total_loss(ps[1], gt, {}).total + total_loss(ps[2], gt, {}).total) / 3.0;
    CHECK(b.total == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("malformed records")
{
    CHECK_THROWS_AS(parse_prediction(R"({"G": [1], "M_po": [[1, 2]], "M_e": [[1]]})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_prediction(R"({"G": [1], "M_po": [[1, 2, 3]], "M_e": []})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_ground_truth("[1, 2"), std::invalid_argument);
    const PredictionRecord pred = parse_prediction(fixture("pred.json"));
    GroundTruthRecord small = parse_ground_truth(fixture("gt.json"));
    small.global.pop_back();
    CHECK_THROWS_AS(total_loss(pred, small, {}), std::invalid_argument);
}
