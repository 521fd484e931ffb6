#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpfuse {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Default representation sizes of the feature extractor this engine consumes.
inline constexpr std::uint32_t kDefaultGlobalDim = 192;
inline constexpr std::uint32_t kDefaultMinutiaDim = 64;
inline constexpr std::uint32_t kDefaultMinutiaeCount = 50;
inline constexpr std::uint32_t kDefaultImageSide = 384;

/// Thrown by template decoders. `offset()` is the byte offset in the input
/// at which decoding failed.
class DecodeError : public std::runtime_error {
public:
    DecodeError(const std::string& what, std::size_t offset);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Maps any finite angle into [0, 2*pi).
double canonical_angle(double theta);

/// Float variant used for stored orientations. Guarantees the result, widened
/// to double, is still strictly below 2*pi.
float canonical_angle_f(double theta);

struct Minutia {
    float x = 0.0f;
    float y = 0.0f;
    float theta = 0.0f;
    std::vector<float> embedding;

    bool operator==(const Minutia&) const = default;
};

struct ImageSize {
    std::uint32_t height = kDefaultImageSide;
    std::uint32_t width = kDefaultImageSide;

    bool operator==(const ImageSize&) const = default;
};

/// One fingerprint impression: a unit global embedding plus a minutiae set.
/// Templates are plain values; once built they are only read.
struct Template {
    std::vector<float> global;
    std::uint32_t minutia_dim = kDefaultMinutiaDim;
    std::vector<Minutia> minutiae;
    ImageSize image_size;
    std::string source_id;

    std::size_t global_dim() const noexcept { return global.size(); }
    bool operator==(const Template&) const = default;
};

struct Violation {
    std::string field;
    std::string rule;
};

/// Checks every template invariant. An empty result means the template is
/// valid; violations are reported as data.
std::vector<Violation> validate(const Template& t);

/// Brings orientations into [0, 2*pi) and fixes embedding norms that drifted
/// by at most `renorm_tolerance`. Larger drift throws std::invalid_argument.
void canonicalize(Template& t, double renorm_tolerance = 1e-3);

double l2_norm(std::span<const float> v);

/// Renormalizes `v` in place to unit length. Zero vectors are left alone.
void normalize(std::vector<float>& v);

enum class TemplateFormat { binary, json };

std::vector<std::uint8_t> write_template(const Template& t, TemplateFormat format);

/// Decodes either format (binary is recognized by its magic). The result is
/// canonicalized on ingest.
Template read_template(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_binary(const Template& t);
Template decode_binary(std::span<const std::uint8_t> bytes);
std::string encode_json(const Template& t);
Template decode_json(const std::string& text);

/// Subjects keyed by id, impressions in a fixed order.
struct Corpus {
    std::map<std::uint32_t, std::vector<Template>> subjects;
    std::uint32_t global_dim = kDefaultGlobalDim;
    std::uint32_t minutia_dim = kDefaultMinutiaDim;

    std::size_t template_count() const;
    const Template& at(std::uint32_t subject, std::uint32_t impression) const;
};

/// FNV-1a 64 over a byte range, chainable through `state`.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);

/// Hash of the concatenated binary encodings in subject/impression order.
std::uint64_t corpus_checksum(const Corpus& corpus);

std::string hex64(std::uint64_t v);

}  // namespace fpfuse
