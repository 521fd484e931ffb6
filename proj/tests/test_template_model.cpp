#include <doctest.h>

#include <cmath>

#include "fpfuse/corpus_io.hpp"
#include "fpfuse/synth.hpp"
#include "fpfuse/template_model.hpp"
#include "helpers.hpp"

using namespace fpfuse;
using namespace fpfuse::testing;

namespace {

Template small_template()
{
    Template t;
    t.global = unit({1.0, 2.0, 2.0});
    t.minutia_dim = 2;
    t.source_id = "finger-7";
    t.image_size = {300, 400};
    t.minutiae.push_back(make_minutia(10.5f, 20.25f, 1.0f, unit({1.0, 1.0})));
    t.minutiae.push_back(make_minutia(399.0f, 0.0f, 6.0f, unit({0.0, 1.0})));
    return t;
}

bool names(const std::vector<Violation>& v, const std::string& field)
{
    for (const auto& x : v) {
        if (x.field.find(field) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("canonical angles")
{
    CHECK(canonical_angle(7.0) == doctest::Approx(7.0 - kTwoPi).epsilon(1e-12));
    CHECK(canonical_angle(7.0) == doctest::Approx(0.7168).epsilon(1e-4));
    CHECK(canonical_angle(-0.5) == doctest::Approx(kTwoPi - 0.5));
    CHECK(canonical_angle(0.0) == 0.0);
    for (double a : {-20.0, -kTwoPi, 0.3, kTwoPi, 13.0}) {
        const double c = canonical_angle(a);
        CHECK(c >= 0.0);
        CHECK(c < kTwoPi);
        CHECK(canonical_angle(c) == c);
    }
    // Values that would round up to 2*pi in float land on 0.
    const float f = canonical_angle_f(std::nextafter(kTwoPi, 0.0));
    CHECK(double(f) < kTwoPi);
    CHECK(canonical_angle_f(double(f)) == f);
}

TEST_CASE("validate reports each violation class")
{
    Template ok;
    ok.global = unit({1.0, 0.0});
    CHECK(validate(ok).empty());
    CHECK(validate(small_template()).empty());

    Template half = ok;
    half.global = {0.5f, 0.0f};
    const auto v = validate(half);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "global_embedding");
    CHECK(v[0].rule.find("norm") != std::string::npos);

    Template t = small_template();
    t.minutiae[0].theta = 7.0f;
    CHECK(names(validate(t), "theta"));
    canonicalize(t);
    CHECK(validate(t).empty());
    CHECK(t.minutiae[0].theta == doctest::Approx(0.7168).epsilon(1e-4));

    t = small_template();
    t.minutiae[1].x = 400.0f;
    CHECK(names(validate(t), "x"));
    t = small_template();
    t.minutiae[0].y = -1.0f;
    CHECK(names(validate(t), "y"));
    t = small_template();
    t.minutiae[0].embedding = {1.0f, 0.0f, 0.0f};
    CHECK(names(validate(t), "embedding"));
    t = small_template();
    t.minutiae[0].embedding = {0.6f, 0.6f};
    CHECK(names(validate(t), "embedding"));
}

TEST_CASE("canonicalize renormalizes small drift and rejects large drift")
{
    Template t = small_template();
    t.global[0] *= 1.0005f;
    canonicalize(t);
    CHECK(std::abs(l2_norm(t.global) - 1.0) <= 1e-6);

    t = small_template();
    t.global[0] *= 1.5f;
    CHECK_THROWS_AS(canonicalize(t), std::invalid_argument);

    Template once = small_template();
    once.minutiae[1].theta = 20.0f;
    canonicalize(once);
    Template twice = once;
    canonicalize(twice);
    CHECK(once == twice);
}

TEST_CASE("binary round trip is bit exact")
{
    std::mt19937_64 rng(5);
    for (int k = 0; k < 50; ++k) {
        const Template t = random_template(rng, k % 7, 16, 8);
        const auto bytes = write_template(t, TemplateFormat::binary);
        CHECK(read_template(bytes) == t);
    }
    Template empty = small_template();
    empty.minutiae.clear();
    const auto bytes = encode_binary(empty);
    CHECK(bytes.size() == 32 + empty.source_id.size() + 4 * empty.global.size());
    CHECK(decode_binary(bytes) == empty);
}

TEST_CASE("json round trip within tolerance")
{
    const Template t = small_template();
    const auto bytes = write_template(t, TemplateFormat::json);
    const Template back = read_template(bytes);
    REQUIRE(back.minutiae.size() == t.minutiae.size());
    CHECK(back.source_id == t.source_id);
    CHECK(back.image_size == t.image_size);
    for (std::size_t k = 0; k < t.global.size(); ++k) CHECK(std::abs(back.global[k] - t.global[k]) <= 1e-9);
    for (std::size_t i = 0; i < t.minutiae.size(); ++i) {
        CHECK(std::abs(back.minutiae[i].x - t.minutiae[i].x) <= 1e-9);
        CHECK(std::abs(back.minutiae[i].theta - t.minutiae[i].theta) <= 1e-9);
    }
}

TEST_CASE("decode errors carry byte offsets")
{
    const auto good = encode_binary(small_template());

    auto bad_magic = good;
    bad_magic[0] = 'X';
    bad_magic[1] = 0;
    try {
        decode_binary(bad_magic);
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(e.offset() == 0);
    }

    auto bad_version = good;
    bad_version[4] = 9;
    try {
        decode_binary(bad_version);
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(e.offset() == 4);
    }

    const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 3);
    try {
        decode_binary(truncated);
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(e.offset() == 32);
    }

    const std::vector<std::uint8_t> header_only(good.begin(), good.begin() + 10);
    CHECK_THROWS_AS(decode_binary(header_only), DecodeError);

    auto trailing = good;
    trailing.push_back(0);
    try {
        decode_binary(trailing);
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(e.offset() == good.size());
    }

    // Norms far off are rejected on ingest.
    Template off = small_template();
    off.global = {0.5f, 0.0f, 0.0f};
    CHECK_THROWS_AS(read_template(encode_binary(off)), DecodeError);
}

TEST_CASE("corpus directory round trip and pinned checksum")
{
    SynthSpec spec;
    spec.seed = 2024;
    spec.subjects = 25;
    spec.impressions = 4;
    const Corpus c = generate_corpus(spec).corpus;
    REQUIRE(c.template_count() == 100);

    const auto dir = temp_dir("corpus_rt");
    write_corpus(c, dir);
    const Corpus back = read_corpus(dir);
    CHECK(back.subjects == c.subjects);
    CHECK(corpus_checksum(back) == corpus_checksum(c));
    CHECK(hex64(corpus_checksum(c)) == hex64(corpus_checksum(generate_corpus(spec, 3).corpus)));
    CHECK(hex64(corpus_checksum(c)) == "cb29b9d1420f2ee9");

    std::filesystem::remove(template_path(dir, 3, 1));
    CHECK_THROWS(read_corpus(dir));
    std::filesystem::remove_all(dir);
}

TEST_CASE("fnv1a64 reference values")
{
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
    const std::string a = "a";
    CHECK(fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(a.data()), 1)) == 0xaf63dc4c8601ec8cULL);
}
