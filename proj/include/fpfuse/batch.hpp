#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fpfuse/evaluation.hpp"
#include "fpfuse/pipeline_config.hpp"
#include "fpfuse/score_pipeline.hpp"

namespace fpfuse {

/// Runs f(0..n-1) on up to `jobs` threads. Each index is handled exactly
/// once; the exception thrown for the lowest index is rethrown.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& f);

/// FAR targets every report carries.
inline constexpr std::array<double, 2> kFarTargets = {0.001, 0.01};

/// Raw channel scores of one pair, local always computed.
struct PairScore {
    double s_g = 0.0;
    double s_l = 0.0;
    std::uint64_t work_units = 0;
};

struct ScoredPairs {
    std::vector<PairScore> genuine;
    std::vector<PairScore> impostor;
};

ScoredPairs score_all(const Corpus& corpus, const PairLists& pairs, const LocalMatchConfig& local, unsigned jobs);

/// Fits whichever normalizations `cfg` left unparameterized, using the local
/// (resp. global) channel of labelled scores.
void fit_missing_norms(LoadedPipelineConfig& cfg, const ScoredPairs& labelled);

struct EvalRun {
    std::vector<MatchResult> genuine;
    std::vector<MatchResult> impostor;
};

/// Gated inference over every pair; local matching runs only where the gate
/// lets it through.
EvalRun run_pipeline(const Corpus& corpus, const PairLists& pairs, const PipelineConfig& cfg, unsigned jobs);

/// Same decisions from precomputed channel scores.
EvalRun apply_pipeline(const ScoredPairs& scores, const PipelineConfig& cfg);

std::vector<double> final_scores(const std::vector<MatchResult>& results);

struct GateStats {
    std::uint64_t confident_genuine = 0;
    std::uint64_t confident_impostor = 0;
    std::uint64_t local_evaluated = 0;
};

struct EvalReport {
    std::uint64_t genuine_count = 0;
    std::uint64_t impostor_count = 0;
    std::array<FrrAtFar, kFarTargets.size()> frr_at_far{};
    double eer = 0.0;
    std::vector<RocPoint> roc;
    std::optional<MinutiaeQuality> minutiae_quality;
    GateStats gate_stats;
    std::uint64_t work_units_total = 0;
};

EvalReport make_report(const EvalRun& run);

/// Summed over all templates of two corpora with identical layout; the goodness
/// index and positional error are computed from the totals.
MinutiaeQuality corpus_minutiae_quality(const Corpus& pred, const Corpus& gt, double dist_threshold_px = 20.0);

/// +inf thresholds are written as null.
std::string to_json(const EvalReport& r);
std::string roc_csv(const std::vector<RocPoint>& roc);
std::string scores_csv(const PairLists& pairs, const EvalRun& run);

struct GatePoint {
    double theta_t = 0.75;
    double theta_f = 0.15;
    /// Disabled gate: every pair is fused with its local score.
    static GatePoint disabled() { return {2.0, -1.0}; }
    bool is_disabled() const { return theta_t > 1.0 && theta_f < 0.0; }
    double gap() const;  // +inf when disabled
};

struct BenchRow {
    GatePoint gate;
    GateStats stats;
    std::uint64_t work_units = 0;
    std::array<FrrAtFar, kFarTargets.size()> frr_at_far{};
};

/// One row per gate, sorted by gap, widest (disabled) first.
std::vector<BenchRow> bench_gates(const ScoredPairs& scores, const PipelineConfig& base,
                                  const std::vector<GatePoint>& grid);

struct SweepRow {
    std::uint32_t max_minutiae = 0;
    std::uint64_t work_units = 0;  // local matching on every pair
    std::array<FrrAtFar, kFarTargets.size()> fused{};
    std::array<FrrAtFar, kFarTargets.size()> local_only{};
    std::array<FrrAtFar, kFarTargets.size()> global_only{};
};

/// Re-scores the corpus with each first-k minutiae budget. When the local
/// normalization needs fitting it is refitted per budget, on `holdout` when
/// given and on the corpus itself otherwise.
std::vector<SweepRow> bench_minutiae(const Corpus& corpus, const PairLists& pairs, const LoadedPipelineConfig& base,
                                     const std::vector<std::uint32_t>& budgets, unsigned jobs,
                                     const Corpus* holdout = nullptr, const PairLists* holdout_pairs = nullptr);

std::string to_json(const std::vector<BenchRow>& gates, const std::vector<SweepRow>& sweep);

}  // namespace fpfuse
