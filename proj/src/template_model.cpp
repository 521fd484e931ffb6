#include "fpfuse/template_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <iomanip>

#include <json.hpp>

namespace fpfuse {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'T', '1'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderSize = 32;
constexpr double kUnitTolerance = 1e-6;

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }

    void u8(std::uint8_t v) { out_.push_back(v); }

    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    std::size_t offset() const { return pos_; }

    void need(std::size_t n, const char* what)
    {
        if (in_.size() - pos_ < n) {
            throw DecodeError(std::string("truncated input while reading ") + what, pos_);
        }
    }

    std::uint8_t u8(const char* what)
    {
        need(1, what);
        return in_[pos_++];
    }

    std::uint32_t u32(const char* what)
    {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    std::string str(std::size_t n, const char* what)
    {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

bool finite(float v) { return std::isfinite(v); }

std::string fmt_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(9) << v;
    return os.str();
}

}  // namespace

DecodeError::DecodeError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset)
{
}

double canonical_angle(double theta)
{
    double r = std::fmod(theta, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

float canonical_angle_f(double theta)
{
    auto f = static_cast<float>(canonical_angle(theta));
    // Values just below 2*pi can round up to it in single precision.
    if (static_cast<double>(f) >= kTwoPi) f = 0.0f;
    return f;
}

double l2_norm(std::span<const float> v)
{
    double s = 0.0;
    for (float x : v) s += double(x) * double(x);
    return std::sqrt(s);
}

void normalize(std::vector<float>& v)
{
    const double n = l2_norm(v);
    if (n == 0.0) return;
    for (auto& x : v) x = static_cast<float>(double(x) / n);
}

std::vector<Violation> validate(const Template& t)
{
    std::vector<Violation> out;
    auto add = [&](std::string field, std::string rule) {
        out.push_back({std::move(field), std::move(rule)});
    };

    if (t.global.empty()) {
        add("global_embedding", "must not be empty");
    } else if (!std::all_of(t.global.begin(), t.global.end(), finite)) {
        add("global_embedding", "entries must be finite");
    } else {
        const double n = l2_norm(t.global);
        if (std::abs(n - 1.0) > kUnitTolerance) {
            add("global_embedding", "norm must be 1 within 1e-6 (got " + fmt_double(n) + ")");
        }
    }
    if (t.image_size.height == 0 || t.image_size.width == 0) {
        add("image_size", "height and width must be positive");
    }

    for (std::size_t i = 0; i < t.minutiae.size(); ++i) {
        const Minutia& m = t.minutiae[i];
        const std::string p = "minutiae[" + std::to_string(i) + "]";
        if (!finite(m.x) || m.x < 0.0f || m.x >= float(t.image_size.width)) {
            add(p + ".x", "must be finite and within [0, width)");
        }
        if (!finite(m.y) || m.y < 0.0f || m.y >= float(t.image_size.height)) {
            add(p + ".y", "must be finite and within [0, height)");
        }
        if (!finite(m.theta) || m.theta < 0.0f || double(m.theta) >= kTwoPi) {
            add(p + ".theta", "must be canonical in [0, 2pi) (got " + fmt_double(m.theta) + ")");
        }
        if (m.embedding.size() != t.minutia_dim) {
            add(p + ".embedding", "length must equal minutia_dim " + std::to_string(t.minutia_dim));
        } else if (!std::all_of(m.embedding.begin(), m.embedding.end(), finite)) {
            add(p + ".embedding", "entries must be finite");
        } else {
            const double n = l2_norm(m.embedding);
            if (std::abs(n - 1.0) > kUnitTolerance) {
                add(p + ".embedding", "norm must be 1 within 1e-6 (got " + fmt_double(n) + ")");
            }
        }
    }
    return out;
}

void canonicalize(Template& t, double renorm_tolerance)
{
    auto fix = [&](std::vector<float>& v, const std::string& field) {
        const double n = l2_norm(v);
        const double dev = std::abs(n - 1.0);
        if (dev <= kUnitTolerance) return;
        if (dev > renorm_tolerance || !std::isfinite(n)) {
            throw std::invalid_argument(field + ": norm " + fmt_double(n) +
                                        " deviates from 1 beyond the renormalization tolerance");
        }
        normalize(v);
    };
    fix(t.global, "global_embedding");
    for (std::size_t i = 0; i < t.minutiae.size(); ++i) {
        Minutia& m = t.minutiae[i];
        if (std::isfinite(m.theta)) m.theta = canonical_angle_f(m.theta);
        fix(m.embedding, "minutiae[" + std::to_string(i) + "].embedding");
    }
}

// Layout (little-endian):
//   0  "FPT1"            8  d_g u32          20 height u32
//   4  version u8        12 d_m u32          24 width u32
//   5  reserved u8[3]    16 count u32        28 source_id length u32
//   32 source_id bytes, global f32[d_g], then per minutia x y theta f32 + f32[d_m]
std::vector<std::uint8_t> encode_binary(const Template& t)
{
    for (const auto& m : t.minutiae) {
        if (m.embedding.size() != t.minutia_dim) {
            throw std::invalid_argument("minutia embedding length differs from minutia_dim");
        }
    }
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u8(kVersion);
    w.u8(0);
    w.u8(0);
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(t.global.size()));
    w.u32(t.minutia_dim);
    w.u32(static_cast<std::uint32_t>(t.minutiae.size()));
    w.u32(t.image_size.height);
    w.u32(t.image_size.width);
    w.u32(static_cast<std::uint32_t>(t.source_id.size()));
    w.bytes(t.source_id.data(), t.source_id.size());
    for (float g : t.global) w.f32(g);
    for (const auto& m : t.minutiae) {
        w.f32(m.x);
        w.f32(m.y);
        w.f32(m.theta);
        for (float e : m.embedding) w.f32(e);
    }
    return w.take();
}

Template decode_binary(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DecodeError("bad magic, expected FPT1", 0);
    r.str(4, "magic");
    const std::size_t version_at = r.offset();
    const std::uint8_t version = r.u8("version");
    if (version != kVersion) {
        throw DecodeError("unsupported version " + std::to_string(version), version_at);
    }
    r.str(3, "reserved");

    Template t;
    const std::uint32_t dg = r.u32("d_g");
    t.minutia_dim = r.u32("d_m");
    const std::uint32_t count = r.u32("minutiae count");
    t.image_size.height = r.u32("height");
    t.image_size.width = r.u32("width");
    const std::uint32_t id_len = r.u32("source_id length");

    // Reject counts the payload cannot possibly hold before allocating.
    const std::size_t payload = bytes.size() - r.offset();
    const std::uint64_t need = std::uint64_t(id_len) + 4ull * dg +
                               std::uint64_t(count) * (12ull + 4ull * t.minutia_dim);
    if (need > payload) {
        throw DecodeError("truncated input: header declares " + std::to_string(need) +
                              " payload bytes, " + std::to_string(payload) + " present",
                          r.offset());
    }
    t.source_id = r.str(id_len, "source_id");
    t.global.resize(dg);
    for (auto& g : t.global) g = r.f32("global embedding");
    t.minutiae.resize(count);
    for (auto& m : t.minutiae) {
        m.x = r.f32("minutia x");
        m.y = r.f32("minutia y");
        m.theta = r.f32("minutia theta");
        m.embedding.resize(t.minutia_dim);
        for (auto& e : m.embedding) e = r.f32("minutia embedding");
    }
    if (r.offset() != bytes.size()) throw DecodeError("trailing bytes after template", r.offset());
    return t;
}

std::string encode_json(const Template& t)
{
    nlohmann::json j;
    j["global"] = t.global;
    j["d_m"] = t.minutia_dim;
    auto& ms = j["minutiae"] = nlohmann::json::array();
    for (const auto& m : t.minutiae) {
        ms.push_back({{"x", m.x}, {"y", m.y}, {"theta", m.theta}, {"emb", m.embedding}});
    }
    j["image_size"] = {t.image_size.height, t.image_size.width};
    j["source_id"] = t.source_id;
    return j.dump();
}

Template decode_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DecodeError(std::string("invalid JSON: ") + e.what(), e.byte);
    }
    try {
        Template t;
        t.global = j.at("global").get<std::vector<float>>();
        for (const auto& m : j.at("minutiae")) {
            Minutia mm;
            mm.x = m.at("x").get<float>();
            mm.y = m.at("y").get<float>();
            mm.theta = m.at("theta").get<float>();
            mm.embedding = m.at("emb").get<std::vector<float>>();
            t.minutiae.push_back(std::move(mm));
        }
        if (j.contains("d_m")) {
            t.minutia_dim = j["d_m"].get<std::uint32_t>();
        } else if (!t.minutiae.empty()) {
            t.minutia_dim = static_cast<std::uint32_t>(t.minutiae.front().embedding.size());
        }
        const auto& sz = j.at("image_size");
        t.image_size.height = sz.at(0).get<std::uint32_t>();
        t.image_size.width = sz.at(1).get<std::uint32_t>();
        t.source_id = j.value("source_id", std::string());
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(std::string("malformed template JSON: ") + e.what(), 0);
    }
}

std::vector<std::uint8_t> write_template(const Template& t, TemplateFormat format)
{
    if (format == TemplateFormat::binary) return encode_binary(t);
    const std::string s = encode_json(t);
    return {s.begin(), s.end()};
}

Template read_template(std::span<const std::uint8_t> bytes)
{
    Template t;
    const bool binary = bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0;
    const bool json_like = !bytes.empty() && (bytes[0] == '{' || std::isspace(bytes[0]));
    if (binary || !json_like) {
        t = decode_binary(bytes);
    } else {
        t = decode_json(std::string(bytes.begin(), bytes.end()));
    }
    try {
        canonicalize(t);
    } catch (const std::invalid_argument& e) {
        throw DecodeError(e.what(), 0);
    }
    return t;
}

std::size_t Corpus::template_count() const
{
    std::size_t n = 0;
    for (const auto& [id, imps] : subjects) n += imps.size();
    return n;
}

const Template& Corpus::at(std::uint32_t subject, std::uint32_t impression) const
{
    return subjects.at(subject).at(impression);
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t state)
{
    for (std::uint8_t b : bytes) {
        state ^= b;
        state *= 0x100000001b3ULL;
    }
    return state;
}

std::uint64_t corpus_checksum(const Corpus& corpus)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [id, imps] : corpus.subjects) {
        for (const auto& t : imps) h = fnv1a64(encode_binary(t), h);
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace fpfuse
