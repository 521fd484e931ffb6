#include <doctest.h>

#include <cmath>
#include <random>

#include "fpfuse/matchers.hpp"
#include "helpers.hpp"

using namespace fpfuse;
using namespace fpfuse::testing;

namespace {

/// Rotates every minutia about the origin by `rot` and shifts by (tx, ty).
Template rigid(const Template& t, double rot, double tx, double ty)
{
    Template out = t;
    for (auto& m : out.minutiae) {
        const double x = m.x, y = m.y;
        m.x = static_cast<float>(std::cos(rot) * x - std::sin(rot) * y + tx);
        m.y = static_cast<float>(std::sin(rot) * x + std::cos(rot) * y + ty);
        m.theta = canonical_angle_f(m.theta + rot);
    }
    return out;
}

/// Template whose minutiae sit in the middle of the image, so small rigid
/// motions keep them in bounds.
Template centred(std::mt19937_64& rng, std::size_t n, std::uint32_t d_m = 8)
{
    std::uniform_real_distribution<double> pos(120.0, 260.0), ang(0.0, 6.28);
    Template t;
    t.global = random_unit(rng, 8);
    t.minutia_dim = d_m;
    for (std::size_t k = 0; k < n; ++k) {
        t.minutiae.push_back(make_minutia(static_cast<float>(pos(rng)), static_cast<float>(pos(rng)),
                                          static_cast<float>(ang(rng)), random_unit(rng, d_m)));
    }
    return t;
}

}  // namespace

TEST_CASE("global match")
{
    Template a, b;
    a.global = {0.6f, 0.8f, 0.0f};
    b.global = {0.8f, 0.6f, 0.0f};
    CHECK(global_match(a, b) == doctest::Approx(0.96).epsilon(1e-6));
    CHECK(global_match(a, a) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(global_match(a, b) == global_match(b, a));

    Template c;
    c.global = {0.0f, 0.0f, 1.0f};
    CHECK(global_match(a, c) == 0.0);
    Template d;
    d.global = {-0.6f, -0.8f, 0.0f};
    CHECK(global_match(a, d) == 0.0);

    Template e;
    e.global = {1.0f, 0.0f};
    CHECK_THROWS_AS(global_match(a, e), std::invalid_argument);
}

TEST_CASE("self match recovers every minutia")
{
    std::mt19937_64 rng(1);
    const Template a = random_template(rng, 10);
    const LocalMatchResult r = local_match(a, a);
    CHECK(r.matched_pairs.size() == 10);
    CHECK(r.score == 10.0);
    for (const auto& p : r.matched_pairs) CHECK(p.index_a == p.index_b);

    Template empty = a;
    empty.minutiae.clear();
    CHECK(local_match(empty, a).score == 0.0);
    CHECK(local_match(a, empty).matched_pairs.empty());
    CHECK(local_match(empty, empty).work_units == 0);
}

TEST_CASE("rigid motion is recovered")
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Template a = centred(rng, 6);
        const Template b = rigid(a, 10.0 * kPi / 180.0, 15.0, -7.0);
        const LocalMatchResult r = local_match(a, b);
        CHECK(r.matched_pairs.size() == 6);
        CHECK(r.score == doctest::Approx(6.0).epsilon(1e-6));

        // Oracle: best one-to-one pairing by cosine alone.
        CostMatrix c(6, 6);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 6; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < 8; ++k) dot += double(a.minutiae[i].embedding[k]) * b.minutiae[j].embedding[k];
                c(i, j) = -dot;
            }
        }
        CHECK(r.score == doctest::Approx(-brute_force_assignment(c).total_cost).epsilon(1e-6));
    }
}

TEST_CASE("score and pairs are consistent")
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const Template a = random_template(rng, 1 + trial % 12, 8, 3);
        const Template b = random_template(rng, 1 + (trial * 7) % 12, 8, 3);
        const LocalMatchResult r = local_match(a, b);
        double sum = 0.0;
        std::vector<bool> ua(a.minutiae.size()), ub(b.minutiae.size());
        for (const auto& p : r.matched_pairs) {
            sum += p.cosine;
            CHECK_FALSE(ua[p.index_a]);
            CHECK_FALSE(ub[p.index_b]);
            ua[p.index_a] = ub[p.index_b] = true;
            CHECK(p.cosine >= 0.3);
        }
        CHECK(r.score == doctest::Approx(sum).epsilon(1e-12));
        CHECK(r.score >= 0.0);
        CHECK(r.score <= double(std::min(a.minutiae.size(), b.minutiae.size())) + 1e-9);
    }
}

TEST_CASE("work units")
{
    std::mt19937_64 rng(5);
    const Template a = random_template(rng, 12);
    const Template b = random_template(rng, 12);
    LocalMatchConfig cfg;
    cfg.emb_sim_floor = -1.0;
    CHECK(match_work(local_match(a, b, cfg)) == 144);

    std::uint64_t prev = 0;
    for (std::uint32_t k = 1; k <= 12; ++k) {
        cfg.max_minutiae_used = k;
        const auto w = match_work(local_match(a, b, cfg));
        CHECK(w <= std::uint64_t(k) * k);
        CHECK(w >= prev);
        prev = w;
    }
    cfg.max_minutiae_used = 6;
    CHECK(match_work(local_match(a, b, cfg)) <= 36);
}

TEST_CASE("symmetric mode")
{
    std::mt19937_64 rng(6);
    LocalMatchConfig cfg;
    cfg.symmetric = true;
    cfg.alignment_seeds = 3;
    for (int trial = 0; trial < 20; ++trial) {
        const Template a = centred(rng, 8, 4);
        Template b = rigid(a, 0.2, 5.0, 3.0);
        b.minutiae.resize(5);
        const Template extra = centred(rng, 3, 4);
        b.minutiae.insert(b.minutiae.end(), extra.minutiae.begin(), extra.minutiae.end());
        CHECK(local_match(a, b, cfg).score == doctest::Approx(local_match(b, a, cfg).score).epsilon(1e-9));
    }
}

TEST_CASE("config validation")
{
    LocalMatchConfig c;
    c.emb_sim_floor = 1.5;
    CHECK_THROWS_AS(c.check(), std::invalid_argument);
    c = {};
    c.geo_tolerance_px = -1;
    CHECK_THROWS_AS(c.check(), std::invalid_argument);
    c = {};
    c.max_minutiae_used = 0;
    CHECK_THROWS_AS(c.check(), std::invalid_argument);
}
