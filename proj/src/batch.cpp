#include "fpfuse/batch.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fpfuse/matchers.hpp"

namespace fpfuse {

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& f)
{
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (i < failed_index) {
                        failed_index = i;
                        failure = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

const Template& lookup(const Corpus& c, const TemplateRef& r) { return c.at(r.subject, r.impression); }

std::vector<PairScore> score_list(const Corpus& corpus, const std::vector<PairRef>& pairs,
                                  const LocalMatchConfig& local, unsigned jobs)
{
    std::vector<PairScore> out(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const Template& a = lookup(corpus, pairs[i].a);
        const Template& b = lookup(corpus, pairs[i].b);
        const LocalMatchResult l = local_match(a, b, local);
        out[i] = {global_match(a, b), l.score, l.work_units};
    });
    return out;
}

std::vector<double> channel(const std::vector<PairScore>& v, double PairScore::*field)
{
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& p : v) out.push_back(p.*field);
    return out;
}

std::array<FrrAtFar, kFarTargets.size()> frr_rows(const std::vector<double>& gen, const std::vector<double>& imp)
{
    std::array<FrrAtFar, kFarTargets.size()> out{};
    for (std::size_t k = 0; k < kFarTargets.size(); ++k) out[k] = frr_at_far(gen, imp, kFarTargets[k]);
    return out;
}

void count_gate(GateStats& s, Gate g)
{
    switch (g) {
    case Gate::confident_genuine: ++s.confident_genuine; break;
    case Gate::confident_impostor: ++s.confident_impostor; break;
    case Gate::local_evaluated: ++s.local_evaluated; break;
    }
}

using nlohmann::ordered_json;

ordered_json finite_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string target_key(double t)
{
    std::ostringstream os;
    os << t;
    return os.str();
}

ordered_json frr_json(const std::array<FrrAtFar, kFarTargets.size()>& rows)
{
    ordered_json j = ordered_json::object();
    for (std::size_t k = 0; k < kFarTargets.size(); ++k) {
        j[target_key(kFarTargets[k])] = {
            {"frr", rows[k].frr}, {"far", rows[k].far}, {"threshold", finite_or_null(rows[k].threshold)}};
    }
    return j;
}

ordered_json gate_json(const GateStats& s)
{
    return {{"confident_genuine", s.confident_genuine},
            {"confident_impostor", s.confident_impostor},
            {"local_evaluated", s.local_evaluated}};
}

}  // namespace

ScoredPairs score_all(const Corpus& corpus, const PairLists& pairs, const LocalMatchConfig& local, unsigned jobs)
{
    local.check();
    return {score_list(corpus, pairs.genuine, local, jobs), score_list(corpus, pairs.impostor, local, jobs)};
}

void fit_missing_norms(LoadedPipelineConfig& cfg, const ScoredPairs& labelled)
{
    if (cfg.local_norm_needs_fit) {
        const auto g = channel(labelled.genuine, &PairScore::s_l);
        const auto i = channel(labelled.impostor, &PairScore::s_l);
        cfg.config.norm_local = Normalizer::fit(cfg.config.norm_local.kind, g, i);
        cfg.local_norm_needs_fit = false;
    }
    if (cfg.global_norm_needs_fit) {
        const auto g = channel(labelled.genuine, &PairScore::s_g);
        const auto i = channel(labelled.impostor, &PairScore::s_g);
        cfg.config.norm_global = Normalizer::fit(cfg.config.norm_global.kind, g, i);
        cfg.global_norm_needs_fit = false;
    }
}

EvalRun run_pipeline(const Corpus& corpus, const PairLists& pairs, const PipelineConfig& cfg, unsigned jobs)
{
    cfg.check();
    auto run = [&](const std::vector<PairRef>& list) {
        std::vector<MatchResult> out(list.size());
        parallel_for(list.size(), jobs, [&](std::size_t i) {
            out[i] = infer_pair(lookup(corpus, list[i].a), lookup(corpus, list[i].b), cfg);
        });
        return out;
    };
    return {run(pairs.genuine), run(pairs.impostor)};
}

EvalRun apply_pipeline(const ScoredPairs& scores, const PipelineConfig& cfg)
{
    cfg.check();
    auto run = [&](const std::vector<PairScore>& list) {
        std::vector<MatchResult> out;
        out.reserve(list.size());
        for (const auto& p : list) {
            out.push_back(gate_and_fuse(p.s_g, cfg, [&] { return LocalMatchResult{p.s_l, {}, p.work_units}; }));
        }
        return out;
    };
    return {run(scores.genuine), run(scores.impostor)};
}

std::vector<double> final_scores(const std::vector<MatchResult>& results)
{
    std::vector<double> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(r.s_final);
    return out;
}

EvalReport make_report(const EvalRun& run)
{
    EvalReport r;
    r.genuine_count = run.genuine.size();
    r.impostor_count = run.impostor.size();
    const auto gen = final_scores(run.genuine);
    const auto imp = final_scores(run.impostor);
    r.frr_at_far = frr_rows(gen, imp);
    r.roc = roc_curve(gen, imp);
    r.eer = eer(r.roc);
    for (const auto* list : {&run.genuine, &run.impostor}) {
        for (const auto& m : *list) {
            count_gate(r.gate_stats, m.gate);
            r.work_units_total += m.work_units;
        }
    }
    return r;
}

MinutiaeQuality corpus_minutiae_quality(const Corpus& pred, const Corpus& gt, double dist_threshold_px)
{
    if (pred.subjects.size() != gt.subjects.size()) {
        throw std::invalid_argument("prediction and reference corpora have different subject counts");
    }
    MinutiaeQuality total;
    std::uint64_t gt_count = 0;
    double err_sum = 0.0;
    for (const auto& [s, imps] : gt.subjects) {
        const auto it = pred.subjects.find(s);
        if (it == pred.subjects.end() || it->second.size() != imps.size()) {
            throw std::invalid_argument("prediction corpus does not mirror subject " + std::to_string(s));
        }
        for (std::size_t k = 0; k < imps.size(); ++k) {
            const MinutiaeQuality q = minutiae_quality(it->second[k].minutiae, imps[k].minutiae, dist_threshold_px);
            total.paired += q.paired;
            total.missed += q.missed;
            total.spurious += q.spurious;
            err_sum += q.avg_positional_error_px * q.paired;
            gt_count += imps[k].minutiae.size();
        }
    }
    if (gt_count == 0) {
        total.goodness_index = total.spurious == 0 ? 1.0 : -1.0;
    } else {
        total.goodness_index =
            (double(total.paired) - double(total.missed) - double(total.spurious)) / double(gt_count);
    }
    total.avg_positional_error_px = total.paired ? err_sum / total.paired : 0.0;
    return total;
}

std::string to_json(const EvalReport& r)
{
    ordered_json j;
    j["counts"] = {{"genuine", r.genuine_count}, {"impostor", r.impostor_count}};
    j["frr_at_far"] = frr_json(r.frr_at_far);
    j["eer"] = r.eer;
    ordered_json roc = ordered_json::array();
    for (const auto& p : r.roc) roc.push_back({{"thr", finite_or_null(p.threshold)}, {"far", p.far}, {"frr", p.frr}});
    j["roc"] = std::move(roc);
    if (r.minutiae_quality) {
        const auto& q = *r.minutiae_quality;
        j["minutiae_quality"] = {{"paired", q.paired},
                                 {"missed", q.missed},
                                 {"spurious", q.spurious},
                                 {"goodness_index", q.goodness_index},
                                 {"avg_positional_error_px", q.avg_positional_error_px}};
    } else {
        j["minutiae_quality"] = nullptr;
    }
    j["gate_stats"] = gate_json(r.gate_stats);
    j["work_units_total"] = r.work_units_total;
    return j.dump(2) + "\n";
}

std::string roc_csv(const std::vector<RocPoint>& roc)
{
    std::ostringstream os;
    os.precision(17);
    os << "threshold,far,frr\n";
    for (const auto& p : roc) {
        if (std::isfinite(p.threshold)) {
            os << p.threshold;
        } else {
            os << "inf";
        }
        os << ',' << p.far << ',' << p.frr << '\n';
    }
    return os.str();
}

std::string scores_csv(const PairLists& pairs, const EvalRun& run)
{
    std::ostringstream os;
    os.precision(17);
    os << "label,subject_a,impression_a,subject_b,impression_b,s_g_raw,s_l_raw,s_final,gate\n";
    auto emit = [&](const char* label, const std::vector<PairRef>& refs, const std::vector<MatchResult>& res) {
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const auto& p = refs[i];
            const auto& m = res[i];
            os << label << ',' << p.a.subject << ',' << p.a.impression << ',' << p.b.subject << ','
               << p.b.impression << ',' << m.s_g_raw << ',';
            if (m.s_l_raw) os << *m.s_l_raw;
            os << ',' << m.s_final << ',' << to_string(m.gate) << '\n';
        }
    };
    emit("genuine", pairs.genuine, run.genuine);
    emit("impostor", pairs.impostor, run.impostor);
    return os.str();
}

double GatePoint::gap() const
{
    return is_disabled() ? std::numeric_limits<double>::infinity() : theta_t - theta_f;
}

std::vector<BenchRow> bench_gates(const ScoredPairs& scores, const PipelineConfig& base,
                                  const std::vector<GatePoint>& grid)
{
    if (grid.empty()) throw std::invalid_argument("empty threshold grid");
    std::vector<BenchRow> rows;
    for (const auto& g : grid) {
        PipelineConfig cfg = base;
        cfg.thresholds = {g.theta_t, g.theta_f};
        const EvalRun run = apply_pipeline(scores, cfg);
        const EvalReport rep = make_report(run);
        rows.push_back({g, rep.gate_stats, rep.work_units_total, rep.frr_at_far});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const BenchRow& a, const BenchRow& b) { return a.gate.gap() > b.gate.gap(); });
    return rows;
}

std::vector<SweepRow> bench_minutiae(const Corpus& corpus, const PairLists& pairs, const LoadedPipelineConfig& base,
                                     const std::vector<std::uint32_t>& budgets, unsigned jobs,
                                     const Corpus* holdout, const PairLists* holdout_pairs)
{
    std::vector<SweepRow> rows;
    for (std::uint32_t k : budgets) {
        LoadedPipelineConfig cfg = base;
        cfg.config.local.max_minutiae_used = k;
        const ScoredPairs scores = score_all(corpus, pairs, cfg.config.local, jobs);
        if (cfg.local_norm_needs_fit || cfg.global_norm_needs_fit) {
            if (holdout && holdout_pairs) {
                fit_missing_norms(cfg, score_all(*holdout, *holdout_pairs, cfg.config.local, jobs));
            } else {
                fit_missing_norms(cfg, scores);
            }
        }
        SweepRow row;
        row.max_minutiae = k;
        const EvalRun run = apply_pipeline(scores, cfg.config);
        row.fused = frr_rows(final_scores(run.genuine), final_scores(run.impostor));
        row.local_only = frr_rows(channel(scores.genuine, &PairScore::s_l), channel(scores.impostor, &PairScore::s_l));
        row.global_only =
            frr_rows(channel(scores.genuine, &PairScore::s_g), channel(scores.impostor, &PairScore::s_g));
        for (const auto* list : {&scores.genuine, &scores.impostor}) {
            for (const auto& p : *list) row.work_units += p.work_units;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string to_json(const std::vector<BenchRow>& gates, const std::vector<SweepRow>& sweep)
{
    ordered_json j;
    ordered_json g = ordered_json::array();
    for (const auto& r : gates) {
        ordered_json row;
        row["disabled"] = r.gate.is_disabled();
        row["theta_t"] = r.gate.theta_t;
        row["theta_f"] = r.gate.theta_f;
        row["gap"] = finite_or_null(r.gate.gap());
        row["gate_stats"] = gate_json(r.stats);
        row["work_units"] = r.work_units;
        row["frr_at_far"] = frr_json(r.frr_at_far);
        g.push_back(std::move(row));
    }
    j["gates"] = std::move(g);
    ordered_json s = ordered_json::array();
    for (const auto& r : sweep) {
        s.push_back({{"max_minutiae", r.max_minutiae},
                     {"work_units", r.work_units},
                     {"fused", frr_json(r.fused)},
                     {"local_only", frr_json(r.local_only)},
                     {"global_only", frr_json(r.global_only)}});
    }
    j["minutiae_sweep"] = std::move(s);
    return j.dump(2) + "\n";
}

}  // namespace fpfuse
