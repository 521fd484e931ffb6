#include "fpfuse/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <thread>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <json.hpp>

namespace fpfuse {

namespace {

// ---- keyed random streams -------------------------------------------------

std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class Field : std::uint64_t {
    identity_global = 1,
    identity_minutiae,
    collision,
    collision_tilt,
    transform,
    jitter,
    drop,
    spurious,
    confidence,
    global_tilt,
    distortion,
    outlier,
};

constexpr std::uint32_t kNoImpression = 0xffffffffu;

/// SplitMix64 stream whose starting state is a hash of the key. Any stream
/// can be rebuilt on its own, so output never depends on generation order.
class KeyedEngine {
public:
    using result_type = std::uint64_t;

    KeyedEngine(std::uint64_t seed, std::uint32_t subject, std::uint32_t impression, Field field)
    {
        std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
        h = mix64(h ^ (std::uint64_t(subject) << 32 | impression));
        state_ = mix64(h ^ static_cast<std::uint64_t>(field) * 0xd6e8feb86659fd93ULL);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    result_type operator()()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_ = 0;
};

double uniform(KeyedEngine& e, double lo, double hi)
{
    if (!(hi > lo)) return lo;
    return boost::random::uniform_real_distribution<double>(lo, hi)(e);
}

double gauss(KeyedEngine& e, double sigma)
{
    if (sigma == 0.0) return 0.0;
    return boost::random::normal_distribution<double>(0.0, sigma)(e);
}

bool coin(KeyedEngine& e, double p)
{
    return boost::random::bernoulli_distribution<double>(p)(e);
}

std::vector<double> random_unit(KeyedEngine& e, std::size_t dim)
{
    std::vector<double> v(dim);
    double n = 0.0;
    do {
        n = 0.0;
        for (auto& x : v) {
            x = boost::random::normal_distribution<double>(0.0, 1.0)(e);
            n += x * x;
        }
    } while (n == 0.0);
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    return v;
}

std::vector<float> to_float_unit(std::vector<double> v)
{
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<float> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(v[k] / n);
    return out;
}

/// Rotates unit vector `g` by `angle` towards a random orthogonal direction.
std::vector<float> tilt(const std::vector<float>& g, double angle, KeyedEngine& e)
{
    if (angle == 0.0 || g.empty()) return g;
    std::vector<double> u = random_unit(e, g.size());
    double dot = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) dot += u[k] * g[k];
    double n = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        u[k] -= dot * g[k];
        n += u[k] * u[k];
    }
    n = std::sqrt(n);
    std::vector<double> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        out[k] = std::cos(angle) * g[k] + std::sin(angle) * (n > 0.0 ? u[k] / n : 0.0);
    }
    return to_float_unit(std::move(out));
}

// ---- spec plumbing ----------------------------------------------------------

struct DoubleField {
    const char* name;
    double SynthSpec::*ptr;
    enum Kind { probability, nonnegative } kind;
};

struct UintField {
    const char* name;
    std::uint32_t SynthSpec::*ptr;
};

constexpr DoubleField kDoubleFields[] = {
    {"rotation_range_rad", &SynthSpec::rotation_range_rad, DoubleField::nonnegative},
    {"translation_range_px", &SynthSpec::translation_range_px, DoubleField::nonnegative},
    {"position_jitter_px", &SynthSpec::position_jitter_px, DoubleField::nonnegative},
    {"orientation_jitter_rad", &SynthSpec::orientation_jitter_rad, DoubleField::nonnegative},
    {"embedding_jitter", &SynthSpec::embedding_jitter, DoubleField::nonnegative},
    {"drop_probability", &SynthSpec::drop_probability, DoubleField::probability},
    {"spurious_rate", &SynthSpec::spurious_rate, DoubleField::probability},
    {"global_jitter_rad", &SynthSpec::global_jitter_rad, DoubleField::nonnegative},
    {"confidence_jitter", &SynthSpec::confidence_jitter, DoubleField::nonnegative},
    {"global_outlier_rate", &SynthSpec::global_outlier_rate, DoubleField::probability},
    {"global_outlier_min_rad", &SynthSpec::global_outlier_min_rad, DoubleField::nonnegative},
    {"global_outlier_max_rad", &SynthSpec::global_outlier_max_rad, DoubleField::nonnegative},
    {"global_collision_rate", &SynthSpec::global_collision_rate, DoubleField::probability},
    {"collision_jitter_rad", &SynthSpec::collision_jitter_rad, DoubleField::nonnegative},
    {"distortion_rate", &SynthSpec::distortion_rate, DoubleField::probability},
    {"distortion_keep_fraction", &SynthSpec::distortion_keep_fraction, DoubleField::probability},
    {"distortion_position_jitter_px", &SynthSpec::distortion_position_jitter_px, DoubleField::nonnegative},
    {"distortion_orientation_jitter_rad", &SynthSpec::distortion_orientation_jitter_rad,
     DoubleField::nonnegative},
    {"distortion_embedding_jitter", &SynthSpec::distortion_embedding_jitter, DoubleField::nonnegative},
};

constexpr UintField kUintFields[] = {
    {"subjects", &SynthSpec::subjects},
    {"impressions", &SynthSpec::impressions},
    {"global_dim", &SynthSpec::global_dim},
    {"minutia_dim", &SynthSpec::minutia_dim},
    {"minutiae_per_identity", &SynthSpec::minutiae_per_identity},
    {"image_side", &SynthSpec::image_side},
};

}  // namespace

void SynthSpec::check() const
{
    for (const auto& f : kDoubleFields) {
        const double v = this->*f.ptr;
        if (f.kind == DoubleField::probability && !(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(f.name) + " must lie in [0, 1]");
        }
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string(f.name) + " must be finite and nonnegative");
        }
    }
    if (global_outlier_max_rad < global_outlier_min_rad) {
        throw std::invalid_argument("global_outlier_max_rad must not be below global_outlier_min_rad");
    }
    if (global_dim < 2) throw std::invalid_argument("global_dim must be at least 2");
    if (minutia_dim < 2) throw std::invalid_argument("minutia_dim must be at least 2");
    if (image_side == 0) throw std::invalid_argument("image_side must be positive");
}

SynthSpec parse_synth_spec(const std::string& json_text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("synth spec must be a JSON object");

    SynthSpec s;
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") {
            if (!value.is_number_unsigned()) throw std::invalid_argument("seed must be a nonnegative integer");
            s.seed = value.get<std::uint64_t>();
            continue;
        }
        bool known = false;
        for (const auto& f : kDoubleFields) {
            if (key != f.name) continue;
            if (!value.is_number()) throw std::invalid_argument(key + " must be a number");
            s.*f.ptr = value.get<double>();
            known = true;
        }
        for (const auto& f : kUintFields) {
            if (key != f.name) continue;
            if (!value.is_number_unsigned() || value.get<std::uint64_t>() > 0xffffffffULL) {
                throw std::invalid_argument(key + " must be a nonnegative 32-bit integer");
            }
            s.*f.ptr = value.get<std::uint32_t>();
            known = true;
        }
        if (!known) throw std::invalid_argument("unknown synth spec field: " + key);
    }
    s.check();
    return s;
}

std::string to_json(const SynthSpec& spec)
{
    nlohmann::ordered_json j;
    j["seed"] = spec.seed;
    for (const auto& f : kUintFields) j[f.name] = spec.*f.ptr;
    for (const auto& f : kDoubleFields) j[f.name] = spec.*f.ptr;
    return j.dump(2);
}

void apply_seed_override(SynthSpec& spec)
{
    const char* env = std::getenv("FPFUSE_SEED");
    if (env == nullptr || *env == '\0') return;
    const char* last = env + std::char_traits<char>::length(env);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(env, last, v);
    if (ec != std::errc() || ptr != last) {
        throw std::invalid_argument(std::string("FPFUSE_SEED is not an unsigned integer: ") + env);
    }
    spec.seed = v;
}

Identity generate_identity(const SynthSpec& spec, std::uint32_t subject)
{
    Identity id;
    id.subject = subject;

    KeyedEngine g(spec.seed, subject, kNoImpression, Field::identity_global);
    id.global = to_float_unit(random_unit(g, spec.global_dim));

    KeyedEngine m(spec.seed, subject, kNoImpression, Field::identity_minutiae);
    const double side = spec.image_side;
    struct Raw {
        Minutia m;
        double q;
    };
    std::vector<Raw> raw;
    raw.reserve(spec.minutiae_per_identity);
    for (std::uint32_t k = 0; k < spec.minutiae_per_identity; ++k) {
        Raw r;
        r.m.x = static_cast<float>(uniform(m, 0.0, side));
        r.m.y = static_cast<float>(uniform(m, 0.0, side));
        if (r.m.x >= side) r.m.x = std::nextafter(static_cast<float>(side), 0.0f);
        if (r.m.y >= side) r.m.y = std::nextafter(static_cast<float>(side), 0.0f);
        r.m.theta = canonical_angle_f(uniform(m, 0.0, kTwoPi));
        r.m.embedding = to_float_unit(random_unit(m, spec.minutia_dim));
        r.q = gauss(m, 1.0);
        raw.push_back(std::move(r));
    }
    std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.q > b.q; });
    for (auto& r : raw) {
        id.minutiae.push_back(std::move(r.m));
        id.quality.push_back(r.q);
    }
    return id;
}

Template generate_impression(const Identity& id, const SynthSpec& spec, std::uint32_t impression,
                             ImpressionInfo* info)
{
    const std::uint32_t s = id.subject;
    ImpressionInfo local_info;
    ImpressionInfo& inf = info ? *info : local_info;
    inf = {};

    KeyedEngine de(spec.seed, s, impression, Field::distortion);
    inf.distorted = coin(de, spec.distortion_rate);
    KeyedEngine oe(spec.seed, s, impression, Field::outlier);
    inf.global_outlier = !id.collided && coin(oe, spec.global_outlier_rate);

    const double pos_sigma = inf.distorted ? spec.distortion_position_jitter_px : spec.position_jitter_px;
    const double ori_sigma = inf.distorted ? spec.distortion_orientation_jitter_rad : spec.orientation_jitter_rad;
    const double emb_sigma = inf.distorted ? spec.distortion_embedding_jitter : spec.embedding_jitter;

    // Distortion keeps a fixed-size random subset of the identity's minutiae.
    const std::size_t n = id.minutiae.size();
    std::vector<bool> distortion_keep(n, true);
    if (inf.distorted && n > 0) {
        std::vector<std::size_t> order(n);
        for (std::size_t k = 0; k < n; ++k) order[k] = k;
        for (std::size_t k = n - 1; k > 0; --k) {
            const auto r = boost::random::uniform_int_distribution<std::size_t>(0, k)(de);
            std::swap(order[k], order[r]);
        }
        const auto keep = static_cast<std::size_t>(std::floor(spec.distortion_keep_fraction * double(n)));
        for (std::size_t k = keep; k < n; ++k) distortion_keep[order[k]] = false;
    }

    KeyedEngine te(spec.seed, s, impression, Field::transform);
    const double rot = uniform(te, -spec.rotation_range_rad, spec.rotation_range_rad);
    const double tx = uniform(te, -spec.translation_range_px, spec.translation_range_px);
    const double ty = uniform(te, -spec.translation_range_px, spec.translation_range_px);
    const double c = 0.5 * spec.image_side;
    const double cr = std::cos(rot), sr = std::sin(rot);
    const double side = spec.image_side;

    KeyedEngine je(spec.seed, s, impression, Field::jitter);
    KeyedEngine dr(spec.seed, s, impression, Field::drop);
    KeyedEngine ce(spec.seed, s, impression, Field::confidence);

    struct Scored {
        Minutia m;
        double conf;
    };
    std::vector<Scored> out;
    for (std::size_t k = 0; k < n; ++k) {
        const Minutia& src = id.minutiae[k];
        // Every minutia consumes the same draws so streams stay aligned.
        const bool dropped = coin(dr, spec.drop_probability);
        const double jx = gauss(je, pos_sigma), jy = gauss(je, pos_sigma), jt = gauss(je, ori_sigma);
        std::vector<double> emb(src.embedding.begin(), src.embedding.end());
        if (emb_sigma > 0.0) {
            for (auto& v : emb) v += gauss(je, emb_sigma);
        }
        const double conf = id.quality[k] + gauss(ce, spec.confidence_jitter);
        if (dropped || !distortion_keep[k]) continue;

        const double dx = double(src.x) - c, dy = double(src.y) - c;
        const double x = c + cr * dx - sr * dy + tx + jx;
        const double y = c + sr * dx + cr * dy + ty + jy;
        const auto fx = static_cast<float>(x), fy = static_cast<float>(y);
        if (!(fx >= 0.0f && double(fx) < side && fy >= 0.0f && double(fy) < side)) continue;

        Scored sc;
        sc.m.x = fx;
        sc.m.y = fy;
        sc.m.theta = (rot == 0.0 && jt == 0.0) ? src.theta : canonical_angle_f(double(src.theta) + rot + jt);
        sc.m.embedding = emb_sigma > 0.0 ? to_float_unit(std::move(emb)) : src.embedding;
        sc.conf = conf;
        out.push_back(std::move(sc));
        ++inf.kept_identity_minutiae;
    }

    KeyedEngine sp(spec.seed, s, impression, Field::spurious);
    for (std::size_t k = 0; k < n; ++k) {
        if (!coin(sp, spec.spurious_rate)) continue;
        Scored sc;
        sc.m.x = static_cast<float>(uniform(sp, 0.0, side));
        sc.m.y = static_cast<float>(uniform(sp, 0.0, side));
        if (double(sc.m.x) >= side) sc.m.x = std::nextafter(static_cast<float>(side), 0.0f);
        if (double(sc.m.y) >= side) sc.m.y = std::nextafter(static_cast<float>(side), 0.0f);
        sc.m.theta = canonical_angle_f(uniform(sp, 0.0, kTwoPi));
        sc.m.embedding = to_float_unit(random_unit(sp, spec.minutia_dim));
        sc.conf = -1.0 + gauss(sp, 0.5);
        out.push_back(std::move(sc));
    }
    std::stable_sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) { return a.conf > b.conf; });

    Template t;
    t.minutia_dim = spec.minutia_dim;
    t.image_size = {spec.image_side, spec.image_side};
    t.source_id = "s" + std::to_string(s) + "_i" + std::to_string(impression);
    for (auto& sc : out) t.minutiae.push_back(std::move(sc.m));

    KeyedEngine ge(spec.seed, s, impression, Field::global_tilt);
    const double angle = inf.global_outlier ? uniform(ge, spec.global_outlier_min_rad, spec.global_outlier_max_rad)
                                            : uniform(ge, 0.0, spec.global_jitter_rad);
    t.global = tilt(id.global, angle, ge);
    return t;
}

std::string to_json(const InjectionManifest& m)
{
    nlohmann::ordered_json j;
    j["collision_similarity_floor"] = m.collision_similarity_floor;
    j["distortion_min_loss"] = m.distortion_min_loss;
    j["collided_pairs"] = nlohmann::ordered_json::array();
    for (const auto& [a, b] : m.collided_pairs) j["collided_pairs"].push_back({a, b});
    j["distorted"] = nlohmann::ordered_json::array();
    for (const auto& d : m.distorted) {
        j["distorted"].push_back(
            {{"subject", d.subject}, {"impression", d.impression}, {"lost_fraction", d.lost_fraction}});
    }
    j["global_outliers"] = nlohmann::ordered_json::array();
    for (const auto& [s, i] : m.global_outliers) {
        j["global_outliers"].push_back({{"subject", s}, {"impression", i}});
    }
    return j.dump(2);
}

SynthOutput generate_corpus(const SynthSpec& spec, unsigned jobs)
{
    spec.check();
    const std::uint32_t S = spec.subjects;

    // Collision roots are resolved in subject order; each subject may copy the
    // global direction of an earlier one (and with it that one's cluster).
    std::vector<std::uint32_t> root(S);
    for (std::uint32_t s = 0; s < S; ++s) {
        root[s] = s;
        KeyedEngine e(spec.seed, s, kNoImpression, Field::collision);
        const bool hit = coin(e, spec.global_collision_rate);
        if (hit && s > 0) {
            const auto partner = boost::random::uniform_int_distribution<std::uint32_t>(0, s - 1)(e);
            root[s] = root[partner];
        }
    }

    std::vector<std::vector<Template>> templates(S);
    std::vector<std::vector<ImpressionInfo>> infos(S);
    auto work = [&](std::uint32_t s) {
        Identity id = generate_identity(spec, s);
        if (root[s] != s) {
            const Identity r = generate_identity(spec, root[s]);
            KeyedEngine e(spec.seed, s, kNoImpression, Field::collision_tilt);
            id.global = tilt(r.global, spec.collision_jitter_rad, e);
        }
        // Members of a collision cluster, the root included, keep clean globals.
        id.collided = root[s] != s || std::find(root.begin() + s + 1, root.end(), s) != root.end();
        templates[s].resize(spec.impressions);
        infos[s].resize(spec.impressions);
        for (std::uint32_t k = 0; k < spec.impressions; ++k) {
            templates[s][k] = generate_impression(id, spec, k, &infos[s][k]);
        }
    };

    const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, S));
    if (n_threads == 1) {
        for (std::uint32_t s = 0; s < S; ++s) work(s);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::uint32_t s = t; s < S; s += n_threads) work(s);
            });
        }
        for (auto& th : pool) th.join();
    }

    SynthOutput out;
    out.corpus.global_dim = spec.global_dim;
    out.corpus.minutia_dim = spec.minutia_dim;
    for (std::uint32_t s = 0; s < S; ++s) out.corpus.subjects[s] = std::move(templates[s]);

    auto& m = out.manifest;
    m.distortion_min_loss = 1.0 - spec.distortion_keep_fraction;
    for (std::uint32_t a = 0; a < S; ++a) {
        for (std::uint32_t b = a + 1; b < S; ++b) {
            if (root[a] == root[b]) m.collided_pairs.emplace_back(a, b);
        }
    }
    for (std::uint32_t s = 0; s < S; ++s) {
        for (std::uint32_t k = 0; k < spec.impressions; ++k) {
            const auto& inf = infos[s][k];
            if (inf.distorted) {
                const double n = spec.minutiae_per_identity;
                const double lost = n > 0 ? 1.0 - inf.kept_identity_minutiae / n : 0.0;
                m.distorted.push_back({s, k, lost});
            }
            if (inf.global_outlier) m.global_outliers.emplace_back(s, k);
        }
    }
    return out;
}

}  // namespace fpfuse
