#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpfuse/template_model.hpp"

namespace fpfuse {

/// Parameters of the seeded synthetic corpus generator.
struct SynthSpec {
    std::uint64_t seed = 0;
    std::uint32_t subjects = 100;
    std::uint32_t impressions = 8;
    std::uint32_t global_dim = kDefaultGlobalDim;
    std::uint32_t minutia_dim = kDefaultMinutiaDim;
    std::uint32_t minutiae_per_identity = kDefaultMinutiaeCount;
    std::uint32_t image_side = kDefaultImageSide;

    // Impression noise.
    double rotation_range_rad = 0.3;   // uniform in [-r, r] about the image centre
    double translation_range_px = 20.0;
    double position_jitter_px = 2.5;
    double orientation_jitter_rad = 0.04;
    double embedding_jitter = 0.05;    // per-component sigma before renormalization
    double drop_probability = 0.1;
    double spurious_rate = 0.1;        // chance per identity minutia of one extra spurious point
    double global_jitter_rad = 0.2;    // global direction is tilted by U[0, this]
    double confidence_jitter = 1.0;    // reorders minutiae between impressions

    // Occasional impressions whose global embedding is badly off (poor quality
    // print); tilt angle is drawn from [min, max].
    double global_outlier_rate = 0.0;
    double global_outlier_min_rad = 1.35;
    double global_outlier_max_rad = 1.57;

    // Failure injection.
    double global_collision_rate = 0.0;
    double collision_jitter_rad = 0.05;
    double distortion_rate = 0.0;
    double distortion_keep_fraction = 0.1;
    double distortion_position_jitter_px = 15.0;
    double distortion_orientation_jitter_rad = 0.5;
    double distortion_embedding_jitter = 0.3;

    /// Throws std::invalid_argument naming the first offending field.
    void check() const;
};

/// Unknown keys and bad values are rejected with the field name in the message.
SynthSpec parse_synth_spec(const std::string& json_text);
std::string to_json(const SynthSpec& spec);

/// Replaces spec.seed with FPFUSE_SEED when that variable is set.
void apply_seed_override(SynthSpec& spec);

/// Latent finger. Minutiae are stored in decreasing quality order.
struct Identity {
    std::uint32_t subject = 0;
    std::vector<float> global;
    std::vector<Minutia> minutiae;
    std::vector<double> quality;
    /// Set for subjects whose global direction was copied from another one;
    /// such subjects never get global outliers.
    bool collided = false;
};

Identity generate_identity(const SynthSpec& spec, std::uint32_t subject);

struct ImpressionInfo {
    bool distorted = false;
    bool global_outlier = false;
    std::uint32_t kept_identity_minutiae = 0;
};

/// Deterministic per (seed, subject, impression). Minutiae come out sorted by
/// a per-impression confidence, so the first k are the most reliable ones.
Template generate_impression(const Identity& id, const SynthSpec& spec, std::uint32_t impression,
                             ImpressionInfo* info = nullptr);

struct DistortedImpression {
    std::uint32_t subject = 0;
    std::uint32_t impression = 0;
    double lost_fraction = 0.0;
};

struct InjectionManifest {
    /// Impostor subject pairs (a < b) sharing a near-identical global direction.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> collided_pairs;
    std::vector<DistortedImpression> distorted;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> global_outliers;  // (subject, impression)
    /// First impressions of collided subjects match above this.
    double collision_similarity_floor = 0.9;
    /// Every distorted impression lost at least this fraction of its minutiae.
    double distortion_min_loss = 0.0;

    bool empty() const { return collided_pairs.empty() && distorted.empty() && global_outliers.empty(); }
};

std::string to_json(const InjectionManifest& m);

struct SynthOutput {
    Corpus corpus;
    InjectionManifest manifest;
};

/// Generates S x I impressions. `jobs` threads split the subjects; output does
/// not depend on it.
SynthOutput generate_corpus(const SynthSpec& spec, unsigned jobs = 1);

}  // namespace fpfuse
