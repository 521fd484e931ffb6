#include "fpfuse/score_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fpfuse {

void DoubleSigmoidParams::check() const
{
    if (!std::isfinite(t)) throw std::invalid_argument("double sigmoid t must be finite");
    if (!(r1 > 0.0) || !(r2 > 0.0) || !std::isfinite(r1) || !std::isfinite(r2)) {
        throw std::invalid_argument("double sigmoid widths r1, r2 must be positive");
    }
}

double double_sigmoid(double s, const DoubleSigmoidParams& p)
{
    if (!std::isfinite(s)) throw std::invalid_argument("score must be finite");
    const double r = s < p.t ? p.r1 : p.r2;
    return 1.0 / (1.0 + std::exp(-2.0 * (s - p.t) / r));
}

double minmax_norm(double s, double observed_min, double observed_max)
{
    if (!(observed_max > observed_min)) throw std::invalid_argument("minmax needs max > min");
    return std::clamp((s - observed_min) / (observed_max - observed_min), 0.0, 1.0);
}

double zscore_norm(double s, double mean, double stddev)
{
    if (!(stddev > 0.0)) throw std::invalid_argument("zscore needs stddev > 0");
    return (s - mean) / stddev;
}

double tanh_norm(double s, double mean, double stddev)
{
    if (!(stddev > 0.0)) throw std::invalid_argument("tanh normalization needs stddev > 0");
    return 0.5 * (std::tanh(0.01 * (s - mean) / stddev) + 1.0);
}

namespace {

double mean_of(std::span<const double> v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

}  // namespace

DoubleSigmoidParams fit_double_sigmoid(std::span<const double> genuine, std::span<const double> impostor,
                                       double eps)
{
    if (genuine.empty() || impostor.empty()) {
        throw std::invalid_argument("fit_double_sigmoid needs genuine and impostor scores");
    }
    const double mg = mean_of(genuine);
    const double mi = mean_of(impostor);
    DoubleSigmoidParams p;
    p.t = 0.5 * (mg + mi);
    p.r1 = std::max(eps, p.t - mi);
    p.r2 = std::max(eps, mg - p.t);
    return p;
}

std::string to_string(NormKind k)
{
    switch (k) {
    case NormKind::identity: return "identity";
    case NormKind::double_sigmoid: return "double_sigmoid";
    case NormKind::minmax: return "minmax";
    case NormKind::zscore: return "zscore";
    case NormKind::tanh: return "tanh";
    }
    return "?";
}

NormKind parse_norm_kind(const std::string& s)
{
    for (auto k : {NormKind::identity, NormKind::double_sigmoid, NormKind::minmax, NormKind::zscore,
                   NormKind::tanh}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown normalization kind: " + s);
}

double Normalizer::operator()(double s) const
{
    switch (kind) {
    case NormKind::identity: return s;
    case NormKind::double_sigmoid: return fpfuse::double_sigmoid(s, sigmoid);
    case NormKind::minmax: return minmax_norm(s, lo, hi);
    case NormKind::zscore: return zscore_norm(s, lo, hi);
    case NormKind::tanh: return tanh_norm(s, lo, hi);
    }
    return s;
}

Normalizer Normalizer::fit(NormKind kind, std::span<const double> genuine, std::span<const double> impostor)
{
    if (genuine.empty() || impostor.empty()) {
        throw std::invalid_argument("normalization fit needs genuine and impostor scores");
    }
    std::vector<double> all(genuine.begin(), genuine.end());
    all.insert(all.end(), impostor.begin(), impostor.end());
    switch (kind) {
    case NormKind::identity: return identity();
    case NormKind::double_sigmoid: return double_sigmoid(fit_double_sigmoid(genuine, impostor));
    case NormKind::minmax: {
        const auto [lo, hi] = std::minmax_element(all.begin(), all.end());
        return minmax(*lo, *hi > *lo ? *hi : *lo + 1.0);
    }
    case NormKind::zscore:
    case NormKind::tanh: {
        const double m = mean_of(all);
        double ss = 0.0;
        for (double x : all) ss += (x - m) * (x - m);
        const double sd = std::max(1e-12, std::sqrt(ss / double(all.size())));
        return kind == NormKind::zscore ? zscore(m, sd) : tanh(m, sd);
    }
    }
    return identity();
}

std::string to_string(FusionRule r) { return r == FusionRule::mean ? "mean" : "max"; }

FusionRule parse_fusion_rule(const std::string& s)
{
    if (s == "mean") return FusionRule::mean;
    if (s == "max") return FusionRule::max;
    throw std::invalid_argument("unknown fusion rule: " + s);
}

double fuse(double a, double b, FusionRule rule)
{
    if (!(a >= 0.0 && a <= 1.0) || !(b >= 0.0 && b <= 1.0)) {
        throw std::invalid_argument("fusion inputs must lie in [0, 1]");
    }
    return rule == FusionRule::mean ? 0.5 * (a + b) : std::max(a, b);
}

void ThresholdConfig::check() const
{
    if (std::isnan(theta_t) || std::isnan(theta_f)) throw std::invalid_argument("thresholds must not be NaN");
    if (theta_f > theta_t) throw std::invalid_argument("theta_f must not exceed theta_t");
}

std::string to_string(Gate g)
{
    switch (g) {
    case Gate::confident_genuine: return "confident_genuine";
    case Gate::confident_impostor: return "confident_impostor";
    case Gate::local_evaluated: return "local_evaluated";
    }
    return "?";
}

void PipelineConfig::check() const
{
    thresholds.check();
    local.check();
    if (!norm_global.bounded() || !norm_local.bounded()) {
        throw std::invalid_argument("zscore output is unbounded and cannot feed fusion");
    }
    if (norm_local.kind == NormKind::double_sigmoid) norm_local.sigmoid.check();
    if (norm_global.kind == NormKind::double_sigmoid) norm_global.sigmoid.check();
    for (double v : {confident_genuine_local, confident_impostor_local}) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("gate constants must lie in [0, 1]");
    }
}

MatchResult gate_and_fuse(double s_g_raw, const PipelineConfig& cfg,
                          const std::function<LocalMatchResult()>& local)
{
    MatchResult r;
    r.s_g_raw = s_g_raw;
    if (s_g_raw > cfg.thresholds.theta_t) {
        r.gate = Gate::confident_genuine;
        r.s_l_effective = cfg.confident_genuine_local;
    } else if (s_g_raw < cfg.thresholds.theta_f) {
        r.gate = Gate::confident_impostor;
        r.s_l_effective = cfg.confident_impostor_local;
    } else {
        r.gate = Gate::local_evaluated;
        const LocalMatchResult l = local();
        r.s_l_raw = l.score;
        r.s_l_effective = cfg.norm_local(l.score);
        r.work_units = l.work_units;
    }
    r.s_g_norm = cfg.norm_global(s_g_raw);
    r.s_final = fuse(r.s_g_norm, r.s_l_effective, cfg.fusion);
    return r;
}

MatchResult infer_pair(const Template& a, const Template& b, const PipelineConfig& cfg)
{
    return gate_and_fuse(global_match(a, b), cfg, [&] { return local_match(a, b, cfg.local); });
}

}  // namespace fpfuse
