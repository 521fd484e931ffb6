#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fpfuse/template_model.hpp"

namespace fpfuse {

struct LocalMatchConfig {
    double emb_sim_floor = 0.3;
    double geo_tolerance_px = 20.0;
    double ori_tolerance_rad = 0.35;
    /// First-k minutiae of each template take part; nullopt means all.
    std::optional<std::uint32_t> max_minutiae_used;
    /// Number of highest-similarity candidate pairs tried as alignment seeds.
    std::uint32_t alignment_seeds = 1;
    /// Average match(a, b) and match(b, a).
    bool symmetric = false;

    void check() const;
};

struct MatchedPair {
    std::uint32_t index_a = 0;
    std::uint32_t index_b = 0;
    double cosine = 0.0;
};

struct LocalMatchResult {
    double score = 0.0;
    std::vector<MatchedPair> matched_pairs;
    std::uint64_t work_units = 0;
};

/// Clamped dot product of the two global embeddings, in [0, 1].
double global_match(const Template& a, const Template& b);

/// Minutiae matcher. Candidate pairs are those whose embedding cosine reaches
/// the floor; a rigid alignment seeded by the most similar candidate keeps the
/// geometrically consistent ones, and an optimal one-to-one pairing over those
/// gives the score as the sum of matched cosines.
LocalMatchResult local_match(const Template& a, const Template& b, const LocalMatchConfig& cfg = {});

/// Number of embedding comparisons the match performed.
inline std::uint64_t match_work(const LocalMatchResult& r) { return r.work_units; }

}  // namespace fpfuse
