#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fpfuse/assignment.hpp"
#include "fpfuse/template_model.hpp"

namespace fpfuse {

enum class ImpostorRule {
    /// One canonical (first) impression per subject, every subject pair once.
    first_impression,
    /// Every impression of one subject against every impression of another.
    all_impressions,
};

struct Protocol {
    std::uint32_t subjects = 0;
    std::uint32_t impressions = 0;
    ImpostorRule impostor_rule = ImpostorRule::first_impression;

    std::uint64_t genuine_count() const;
    std::uint64_t impostor_count() const;
};

struct TemplateRef {
    std::uint32_t subject = 0;
    std::uint32_t impression = 0;
    bool operator==(const TemplateRef&) const = default;
};

struct PairRef {
    TemplateRef a;
    TemplateRef b;
    bool operator==(const PairRef&) const = default;
};

struct PairLists {
    std::vector<PairRef> genuine;
    std::vector<PairRef> impostor;
};

/// Genuine pairs: all impression pairs within a subject. Impostor pairs per
/// the protocol's rule. Order is subject-major, then impression-lexicographic.
/// Throws std::invalid_argument when the corpus does not have exactly
/// S subjects with I impressions each.
PairLists enumerate_pairs(const Protocol& p, const Corpus& corpus);

struct FrrAtFar {
    double frr = 0.0;
    double far = 0.0;
    double threshold = 0.0;  // +inf when nothing can be accepted
};

/// Decision rule: score >= threshold means genuine. The threshold is the
/// smallest value on the grid of distinct observed scores plus +inf whose FAR
/// does not exceed `far_target`.
FrrAtFar frr_at_far(std::span<const double> genuine, std::span<const double> impostor, double far_target);

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0;
    double frr = 0.0;
};

/// One point per grid threshold, ascending; the last point is at +inf.
std::vector<RocPoint> roc_curve(std::span<const double> genuine, std::span<const double> impostor);

/// Equal error rate, interpolated linearly between the two grid points where
/// FAR - FRR changes sign.
double eer(std::span<const double> genuine, std::span<const double> impostor);
double eer(std::span<const RocPoint> roc);

struct MinutiaeQuality {
    std::uint32_t paired = 0;
    std::uint32_t missed = 0;
    std::uint32_t spurious = 0;
    double goodness_index = 0.0;
    double avg_positional_error_px = 0.0;
};

/// Pairs predictions to reference minutiae by location-only optimal
/// correspondence; pairs further apart than `dist_threshold_px` do not count.
/// Goodness index is (paired - missed - spurious) / |gt|.
MinutiaeQuality minutiae_quality(std::span<const Minutia> pred, std::span<const Minutia> gt,
                                 double dist_threshold_px = 20.0);

}  // namespace fpfuse
