#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "fpfuse/matchers.hpp"

namespace fpfuse {

struct DoubleSigmoidParams {
    double t = 0.0;
    double r1 = 1.0;
    double r2 = 1.0;

    void check() const;
};

/// Two-piece logistic map centred on `t`: 1 / (1 + exp(-2 (s - t) / r)),
/// with r = r1 below t and r2 from t upwards.
double double_sigmoid(double s, const DoubleSigmoidParams& p);

double minmax_norm(double s, double observed_min, double observed_max);
double zscore_norm(double s, double mean, double stddev);
double tanh_norm(double s, double mean, double stddev);

/// t is the midpoint of the two class means; each width is the distance from
/// t to the corresponding mean, floored at `eps`.
DoubleSigmoidParams fit_double_sigmoid(std::span<const double> genuine, std::span<const double> impostor,
                                       double eps = 1e-6);

enum class NormKind { identity, double_sigmoid, minmax, zscore, tanh };

std::string to_string(NormKind k);
NormKind parse_norm_kind(const std::string& s);

/// A score normalization with its parameters. For minmax (lo, hi) are the
/// observed range; for zscore and tanh they are (mean, stddev).
struct Normalizer {
    NormKind kind = NormKind::identity;
    DoubleSigmoidParams sigmoid;
    double lo = 0.0;
    double hi = 1.0;

    double operator()(double s) const;
    /// True when every output lies in [0, 1].
    bool bounded() const noexcept { return kind != NormKind::zscore; }

    static Normalizer identity() { return {}; }
    static Normalizer double_sigmoid(DoubleSigmoidParams p) { return {NormKind::double_sigmoid, p, 0.0, 1.0}; }
    static Normalizer minmax(double lo, double hi) { return {NormKind::minmax, {}, lo, hi}; }
    static Normalizer zscore(double mean, double sd) { return {NormKind::zscore, {}, mean, sd}; }
    static Normalizer tanh(double mean, double sd) { return {NormKind::tanh, {}, mean, sd}; }

    /// Fits this kind's parameters to labelled scores.
    static Normalizer fit(NormKind kind, std::span<const double> genuine, std::span<const double> impostor);
};

enum class FusionRule { mean, max };

std::string to_string(FusionRule r);
FusionRule parse_fusion_rule(const std::string& s);

double fuse(double a, double b, FusionRule rule);

struct ThresholdConfig {
    double theta_t = 0.75;
    double theta_f = 0.15;

    void check() const;
    /// Gate that always runs local matching.
    static ThresholdConfig disabled() { return {2.0, -1.0}; }
};

enum class Gate { confident_genuine, confident_impostor, local_evaluated };

std::string to_string(Gate g);

struct MatchResult {
    double s_g_raw = 0.0;
    std::optional<double> s_l_raw;
    double s_g_norm = 0.0;
    double s_l_effective = 0.0;
    double s_final = 0.0;
    Gate gate = Gate::local_evaluated;
    std::uint64_t work_units = 0;
};

struct PipelineConfig {
    ThresholdConfig thresholds;
    Normalizer norm_global;
    Normalizer norm_local;
    FusionRule fusion = FusionRule::mean;
    LocalMatchConfig local;
    /// Local channel values substituted when the gate skips local matching.
    double confident_genuine_local = 1.0;
    double confident_impostor_local = 0.0;

    void check() const;
};

/// Thresholding gate and fusion on an already computed global score. `local`
/// is invoked only when the gate lets the pair through.
MatchResult gate_and_fuse(double s_g_raw, const PipelineConfig& cfg,
                          const std::function<LocalMatchResult()>& local);

/// Full gated inference for one template pair.
MatchResult infer_pair(const Template& a, const Template& b, const PipelineConfig& cfg);

}  // namespace fpfuse
