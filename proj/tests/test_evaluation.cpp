#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "fpfuse/evaluation.hpp"
#include "helpers.hpp"

using namespace fpfuse;
using namespace fpfuse::testing;

namespace {

Corpus toy_corpus(std::uint32_t s, std::uint32_t i)
{
    Corpus c;
    c.global_dim = 2;
    for (std::uint32_t a = 0; a < s; ++a) {
        for (std::uint32_t b = 0; b < i; ++b) {
            Template t;
            t.global = {1.0f, 0.0f};
            t.minutia_dim = 2;
            c.subjects[a].push_back(t);
        }
    }
    c.minutia_dim = 2;
    return c;
}

double far_at(std::span<const double> imp, double thr)
{
    return double(std::count_if(imp.begin(), imp.end(), [&](double s) { return s >= thr; })) / imp.size();
}

double frr_at(std::span<const double> gen, double thr)
{
    return double(std::count_if(gen.begin(), gen.end(), [&](double s) { return s < thr; })) / gen.size();
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, double shift, bool coarse)
{
    std::normal_distribution<double> d(shift, 1.0);
    std::uniform_int_distribution<int> q(0, 5);
    std::vector<double> v(n);
    for (auto& x : v) x = coarse ? double(q(rng)) + shift : d(rng);
    return v;
}

}  // namespace

TEST_CASE("protocol pair counts")
{
    CHECK(Protocol{100, 8}.genuine_count() == 2800);
    CHECK(Protocol{100, 8}.impostor_count() == 4950);
    CHECK(Protocol{140, 12}.genuine_count() == 9240);
    CHECK(Protocol{140, 12}.impostor_count() == 9730);
    CHECK(Protocol{2, 2}.genuine_count() == 2);
    CHECK(Protocol{2, 2}.impostor_count() == 1);
    CHECK(Protocol{3, 2, ImpostorRule::all_impressions}.impostor_count() == 12);
}

TEST_CASE("enumerated pairs match the closed forms")
{
    for (std::uint32_t s = 1; s <= 10; ++s) {
        for (std::uint32_t i = 1; i <= 10; ++i) {
            for (auto rule : {ImpostorRule::first_impression, ImpostorRule::all_impressions}) {
                const Protocol p{s, i, rule};
                const PairLists l = enumerate_pairs(p, toy_corpus(s, i));
                CHECK(l.genuine.size() == p.genuine_count());
                CHECK(l.impostor.size() == p.impostor_count());
                // No duplicates, no self pairs.
                std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>> seen;
                for (const auto& q : l.genuine) {
                    CHECK(q.a.subject == q.b.subject);
                    CHECK(q.a.impression < q.b.impression);
                    seen.emplace(q.a.subject, q.a.impression, q.b.subject, q.b.impression);
                }
                for (const auto& q : l.impostor) {
                    CHECK(q.a.subject < q.b.subject);
                    seen.emplace(q.a.subject, q.a.impression, q.b.subject, q.b.impression);
                }
                CHECK(seen.size() == l.genuine.size() + l.impostor.size());
            }
        }
    }
    CHECK_THROWS_AS(enumerate_pairs(Protocol{3, 2}, toy_corpus(2, 2)), std::invalid_argument);
    CHECK_THROWS_AS(enumerate_pairs(Protocol{2, 3}, toy_corpus(2, 2)), std::invalid_argument);
}

TEST_CASE("frr at far worked example")
{
    const std::vector<double> gen{0.9, 0.8, 0.3}, imp{0.85, 0.2, 0.1};
    const FrrAtFar r = frr_at_far(gen, imp, 0.0);
    CHECK(r.threshold == 0.9);
    CHECK(r.far == 0.0);
    CHECK(r.frr == doctest::Approx(2.0 / 3.0));

    // One impostor of three may pass: 0.3 is the lowest admissible threshold.
    const FrrAtFar loose = frr_at_far(gen, imp, 0.34);
    CHECK(loose.threshold == 0.3);
    CHECK(loose.far == doctest::Approx(1.0 / 3.0));
    CHECK(loose.frr == 0.0);
    CHECK(frr_at_far(gen, imp, 1.0).frr == 0.0);

    // Everything tied: nothing can be separated, so only +inf meets FAR 0.
    const std::vector<double> tie{0.5, 0.5};
    const FrrAtFar t = frr_at_far(tie, tie, 0.0);
    CHECK(std::isinf(t.threshold));
    CHECK(t.frr == 1.0);

    CHECK_THROWS_AS(frr_at_far({}, imp, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(frr_at_far(gen, std::vector<double>{std::nan("")}, 0.01), std::invalid_argument);
}

TEST_CASE("roc and eer on a small example")
{
    const std::vector<double> gen{0.9, 0.8, 0.3}, imp{0.85, 0.2, 0.1};
    const auto roc = roc_curve(gen, imp);
    REQUIRE(roc.size() == 7);
    CHECK(roc.front().threshold == 0.1);
    CHECK(roc.front().far == 1.0);
    CHECK(roc.front().frr == 0.0);
    CHECK(std::isinf(roc.back().threshold));
    CHECK(roc.back().far == 0.0);
    CHECK(roc.back().frr == 1.0);
    // At 0.3: impostor 0.85 accepted, genuine none rejected.
    CHECK(roc[2].threshold == 0.3);
    CHECK(roc[2].far == doctest::Approx(1.0 / 3.0));
    CHECK(roc[2].frr == 0.0);
    // At 0.8: FAR 1/3 (0.85), FRR 1/3 (0.3) -> crossing exactly.
    CHECK(eer(gen, imp) == doctest::Approx(1.0 / 3.0));

    const std::vector<double> g2{2.0, 3.0}, i2{0.0, 1.0};
    CHECK(eer(g2, i2) == 0.0);
}

TEST_CASE("roc monotonicity and frr at far tightness on random lists")
{
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> len(1, 40);
    std::uniform_real_distribution<double> tgt(0.0, 0.3);
    for (int trial = 0; trial < 1000; ++trial) {
        const bool coarse = trial % 3 == 0;
        const auto gen = random_scores(rng, len(rng), 1.0, coarse);
        const auto imp = random_scores(rng, len(rng), 0.0, coarse);
        const auto roc = roc_curve(gen, imp);
        for (std::size_t k = 1; k < roc.size(); ++k) {
            CHECK(roc[k].threshold > roc[k - 1].threshold);
            CHECK(roc[k].far <= roc[k - 1].far);
            CHECK(roc[k].frr >= roc[k - 1].frr);
        }
        for (const auto& p : roc) {
            CHECK(p.far == far_at(imp, p.threshold));
            CHECK(p.frr == frr_at(gen, p.threshold));
        }

        const double target = tgt(rng);
        const FrrAtFar r = frr_at_far(gen, imp, target);
        CHECK(r.far <= target);
        // Tight: the next lower grid threshold would exceed the target.
        const auto it = std::find_if(roc.begin(), roc.end(), [&](const RocPoint& p) { return p.threshold == r.threshold; });
        REQUIRE(it != roc.end());
        if (it != roc.begin()) CHECK(std::prev(it)->far > target);
        CHECK(r.frr == it->frr);

        const double e = eer(gen, imp);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
    }
}

TEST_CASE("minutiae quality")
{
    std::mt19937_64 rng(3);
    const Template t = random_template(rng, 12);

    const MinutiaeQuality same = minutiae_quality(t.minutiae, t.minutiae);
    CHECK(same.paired == 12);
    CHECK(same.missed == 0);
    CHECK(same.spurious == 0);
    CHECK(same.goodness_index == 1.0);
    CHECK(same.avg_positional_error_px == 0.0);

    const MinutiaeQuality none = minutiae_quality({}, t.minutiae);
    CHECK(none.paired == 0);
    CHECK(none.missed == 12);
    CHECK(none.goodness_index == -1.0);

    std::vector<Minutia> shifted = t.minutiae;
    for (auto& m : shifted) m.x += 3.0f, m.y += 4.0f;
    const MinutiaeQuality off = minutiae_quality(shifted, t.minutiae);
    CHECK(off.goodness_index == 1.0);
    CHECK(off.avg_positional_error_px == doctest::Approx(5.0).epsilon(1e-5));

    // Beyond the threshold a prediction counts as both spurious and missed.
    std::vector<Minutia> one{t.minutiae[0]};
    one[0].x += 30.0f;
    const MinutiaeQuality far = minutiae_quality(one, std::span(t.minutiae).first(1));
    CHECK(far.paired == 0);
    CHECK(far.missed == 1);
    CHECK(far.spurious == 1);
    CHECK(far.goodness_index == -2.0);

    std::vector<Minutia> extra = t.minutiae;
    extra.push_back(make_minutia(1, 1, 0, {1, 0, 0, 0}));
    extra.push_back(make_minutia(2, 380, 0, {1, 0, 0, 0}));
    const MinutiaeQuality sp = minutiae_quality(extra, t.minutiae, 0.5);
    CHECK(sp.paired == 12);
    CHECK(sp.spurious == 2);
    CHECK(sp.goodness_index == doctest::Approx(10.0 / 12.0));

    CHECK(minutiae_quality({}, {}).goodness_index == 1.0);
    CHECK(minutiae_quality(one, {}).goodness_index == -1.0);
}
