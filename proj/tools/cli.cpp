#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpfuse/batch.hpp"
#include "fpfuse/corpus_io.hpp"
#include "fpfuse/losses.hpp"
#include "fpfuse/pipeline_config.hpp"
#include "fpfuse/synth.hpp"

namespace fpfuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_text(const fs::path& p)
{
    const auto bytes = read_file(p);
    return {bytes.begin(), bytes.end()};
}

std::uint32_t parse_u32(const std::string& s, const std::string& what)
{
    std::uint32_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad " + what + ": '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const std::string& what)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw std::invalid_argument("bad " + what + ": '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

/// "SxI", e.g. "100x8".
Protocol parse_protocol(const std::string& s, const std::string& impostors)
{
    const auto x = s.find_first_of("xX");
    if (x == std::string::npos) throw std::invalid_argument("protocol must look like SxI, got '" + s + "'");
    Protocol p;
    p.subjects = parse_u32(s.substr(0, x), "protocol subjects");
    p.impressions = parse_u32(s.substr(x + 1), "protocol impressions");
    if (impostors == "first") {
        p.impostor_rule = ImpostorRule::first_impression;
    } else if (impostors == "all") {
        p.impostor_rule = ImpostorRule::all_impressions;
    } else {
        throw std::invalid_argument("--impostors must be 'first' or 'all'");
    }
    return p;
}

Protocol infer_protocol(const Corpus& c, const std::string& impostors)
{
    const std::uint32_t imps = c.subjects.empty() ? 0 : static_cast<std::uint32_t>(c.subjects.begin()->second.size());
    return parse_protocol(std::to_string(c.subjects.size()) + "x" + std::to_string(imps), impostors);
}

LoadedPipelineConfig load_config(const std::string& path)
{
    return path.empty() ? default_pipeline_config() : parse_pipeline_config(read_text(path));
}

/// Fits missing normalizations on the holdout corpus when given, else on the
/// evaluated pairs themselves. Returns the corpus scores when it had to
/// compute them.
std::optional<ScoredPairs> resolve_norms(LoadedPipelineConfig& cfg, const Corpus& corpus, const PairLists& pairs,
                                         const std::string& holdout, const std::string& impostors, unsigned jobs)
{
    if (!cfg.local_norm_needs_fit && !cfg.global_norm_needs_fit) return std::nullopt;
    if (!holdout.empty()) {
        const Corpus h = read_corpus(holdout);
        const PairLists hp = enumerate_pairs(infer_protocol(h, impostors), h);
        fit_missing_norms(cfg, score_all(h, hp, cfg.config.local, jobs));
        return std::nullopt;
    }
    ScoredPairs scores = score_all(corpus, pairs, cfg.config.local, jobs);
    fit_missing_norms(cfg, scores);
    return scores;
}

std::vector<GatePoint> parse_grid(const std::string& s)
{
    std::vector<GatePoint> grid;
    for (const auto& tok : split(s, ',')) {
        if (tok == "off" || tok == "disabled") {
            grid.push_back(GatePoint::disabled());
            continue;
        }
        const auto colon = tok.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("grid entries are theta_t:theta_f or 'off'");
        GatePoint g{parse_double(tok.substr(0, colon), "theta_t"), parse_double(tok.substr(colon + 1), "theta_f")};
        ThresholdConfig{g.theta_t, g.theta_f}.check();
        grid.push_back(g);
    }
    if (grid.empty()) throw std::invalid_argument("empty threshold grid");
    return grid;
}

std::string pct(double v)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << 100.0 * v;
    return os.str();
}

std::string pretty_bench(const std::vector<BenchRow>& gates, const std::vector<SweepRow>& sweep)
{
    std::ostringstream os;
    if (!gates.empty()) {
        os << std::left << std::setw(10) << "theta_t" << std::setw(10) << "theta_f" << std::setw(16)
           << "local_evaluated" << std::setw(14) << "work_units" << std::setw(14) << "FRR@0.1%" << "FRR@1%\n";
        for (const auto& r : gates) {
            std::ostringstream tt, tf;
            if (r.gate.is_disabled()) {
                tt << "off";
                tf << "off";
            } else {
                tt << r.gate.theta_t;
                tf << r.gate.theta_f;
            }
            os << std::setw(10) << tt.str() << std::setw(10) << tf.str() << std::setw(16) << r.stats.local_evaluated
               << std::setw(14) << r.work_units << std::setw(14) << pct(r.frr_at_far[0].frr) << pct(r.frr_at_far[1].frr)
               << '\n';
        }
    }
    if (!sweep.empty()) {
        if (!gates.empty()) os << '\n';
        os << std::left << std::setw(14) << "max_minutiae" << std::setw(14) << "work_units" << std::setw(16)
           << "fused FRR@1%" << std::setw(16) << "local FRR@1%" << "global FRR@1%\n";
        for (const auto& r : sweep) {
            os << std::setw(14) << r.max_minutiae << std::setw(14) << r.work_units << std::setw(16)
               << pct(r.fused[1].frr) << std::setw(16) << pct(r.local_only[1].frr) << pct(r.global_only[1].frr)
               << '\n';
        }
    }
    return os.str();
}

// ---- commands -----------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string out;
    unsigned jobs = 1;
};

int cmd_synth(const SynthArgs& a, std::ostream& out)
{
    SynthSpec spec = a.spec.empty() ? SynthSpec{} : parse_synth_spec(read_text(a.spec));
    apply_seed_override(spec);
    spec.check();
    const SynthOutput s = generate_corpus(spec, a.jobs);
    write_corpus(s.corpus, a.out);
    write_file(fs::path(a.out) / "manifest.json", to_json(s.manifest) + "\n");
    write_file(fs::path(a.out) / "synth_spec.json", to_json(spec) + "\n");
    ordered_json j = {{"checksum", hex64(corpus_checksum(s.corpus))},
                      {"templates", s.corpus.template_count()},
                      {"seed", spec.seed}};
    out << j.dump() << '\n';
    return kExitOk;
}

struct MatchArgs {
    std::string a;
    std::string b;
    std::string config;
};

int cmd_match(const MatchArgs& m, std::ostream& out)
{
    const Template a = load_template(m.a);
    const Template b = load_template(m.b);
    const LoadedPipelineConfig cfg = load_config(m.config);
    if (cfg.global_norm_needs_fit) throw std::invalid_argument("norm_global needs params for a single match");
    const MatchResult r = gate_and_fuse(global_match(a, b), cfg.config, [&] {
        if (cfg.local_norm_needs_fit) {
            throw std::invalid_argument("local matching needed but the local normalization has no params; "
                                        "give them in --config");
        }
        return local_match(a, b, cfg.config.local);
    });
    ordered_json j = {{"gate", to_string(r.gate)},
                      {"s_g_raw", r.s_g_raw},
                      {"s_g_norm", r.s_g_norm},
                      {"s_l_raw", r.s_l_raw ? json(*r.s_l_raw) : json(nullptr)},
                      {"s_l_effective", r.s_l_effective},
                      {"s_final", r.s_final},
                      {"work_units", r.work_units}};
    out << j.dump() << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string corpus;
    std::string protocol;
    std::string impostors = "first";
    std::string config;
    std::string out;
    std::string roc_csv;
    std::string scores_csv;
    std::string holdout;
    std::string minutiae_gt;
    unsigned jobs = 1;
};

int cmd_eval(const EvalArgs& e, std::ostream& out)
{
    const Corpus corpus = read_corpus(e.corpus);
    const Protocol protocol = parse_protocol(e.protocol, e.impostors);
    const PairLists pairs = enumerate_pairs(protocol, corpus);
    LoadedPipelineConfig cfg = load_config(e.config);
    const auto scores = resolve_norms(cfg, corpus, pairs, e.holdout, e.impostors, e.jobs);
    const EvalRun run = scores ? apply_pipeline(*scores, cfg.config) : run_pipeline(corpus, pairs, cfg.config, e.jobs);

    EvalReport report = make_report(run);
    if (!e.minutiae_gt.empty()) report.minutiae_quality = corpus_minutiae_quality(corpus, read_corpus(e.minutiae_gt));
    const std::string text = to_json(report);

    std::string roc_path = e.roc_csv;
    if (roc_path.empty() && !e.out.empty()) roc_path = fs::path(e.out).replace_extension(".roc.csv").string();
    if (!roc_path.empty()) write_file(roc_path, roc_csv(report.roc));
    if (!e.scores_csv.empty()) write_file(e.scores_csv, scores_csv(pairs, run));
    if (!e.out.empty()) {
        write_file(fs::path(e.out), text);
    } else {
        out << text;
    }
    return kExitOk;
}

struct BenchArgs {
    std::string corpus;
    std::string protocol;
    std::string impostors = "first";
    std::string grid;
    std::string sweep;
    std::string config;
    std::string holdout;
    std::string out;
    unsigned jobs = 1;
    bool pretty = false;
};

int cmd_bench(const BenchArgs& b, std::ostream& out, bool grid_given)
{
    if (!grid_given && b.sweep.empty()) throw std::invalid_argument("bench needs --grid and/or --sweep-minutiae");
    const std::vector<GatePoint> grid = grid_given ? parse_grid(b.grid) : std::vector<GatePoint>{};
    std::vector<std::uint32_t> budgets;
    for (const auto& tok : split(b.sweep, ',')) budgets.push_back(parse_u32(tok, "minutiae budget"));

    const Corpus corpus = read_corpus(b.corpus);
    const Protocol protocol = b.protocol.empty() ? infer_protocol(corpus, b.impostors)
                                                 : parse_protocol(b.protocol, b.impostors);
    const PairLists pairs = enumerate_pairs(protocol, corpus);
    const LoadedPipelineConfig base = load_config(b.config);

    std::vector<BenchRow> rows;
    if (!grid.empty()) {
        LoadedPipelineConfig cfg = base;
        auto scores = resolve_norms(cfg, corpus, pairs, b.holdout, b.impostors, b.jobs);
        if (!scores) scores = score_all(corpus, pairs, cfg.config.local, b.jobs);
        rows = bench_gates(*scores, cfg.config, grid);
    }
    std::vector<SweepRow> sweep;
    if (!budgets.empty()) {
        std::optional<Corpus> hc;
        std::optional<PairLists> hp;
        if (!b.holdout.empty()) {
            hc = read_corpus(b.holdout);
            hp = enumerate_pairs(infer_protocol(*hc, b.impostors), *hc);
        }
        sweep = bench_minutiae(corpus, pairs, base, budgets, b.jobs, hc ? &*hc : nullptr, hp ? &*hp : nullptr);
    }

    const std::string text = b.pretty ? pretty_bench(rows, sweep) : to_json(rows, sweep);
    if (!b.out.empty()) {
        write_file(fs::path(b.out), text);
    } else {
        out << text;
    }
    return kExitOk;
}

struct LossesArgs {
    std::string pred;
    std::string gt;
    std::string weights;
};

int cmd_losses(const LossesArgs& l, std::ostream& out)
{
    LossWeights w;
    LossOptions opts;
    if (!l.weights.empty()) parse_loss_weights(read_text(l.weights), w, opts);

    const std::string pred_text = read_text(l.pred);
    const std::string gt_text = read_text(l.gt);
    json pj, gj;
    try {
        pj = json::parse(pred_text);
        gj = json::parse(gt_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
    }
    LossBreakdown b;
    if (pj.is_array() || gj.is_array()) {
        if (!pj.is_array() || !gj.is_array()) throw std::invalid_argument("pred and gt must both be batches");
        std::vector<PredictionRecord> preds;
        std::vector<GroundTruthRecord> gts;
        for (const auto& r : pj) preds.push_back(parse_prediction(r.dump()));
        for (const auto& r : gj) gts.push_back(parse_ground_truth(r.dump()));
        b = batch_total_loss(preds, gts, w, opts);
    } else {
        b = total_loss(parse_prediction(pred_text), parse_ground_truth(gt_text), w, opts);
    }
    out << to_json(b) << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Fingerprint template matching and score fusion"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
    synth->add_option("--spec", sa.spec, "Synth spec JSON (defaults apply when omitted)");
    synth->add_option("--out", sa.out, "Output corpus directory")->required();
    synth->add_option("--jobs", sa.jobs, "Worker threads")->check(CLI::PositiveNumber);

    MatchArgs ma;
    auto* match = app.add_subcommand("match", "Score one template pair");
    match->add_option("--a", ma.a, "First template")->required();
    match->add_option("--b", ma.b, "Second template")->required();
    match->add_option("--config", ma.config, "Pipeline config JSON");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Evaluate a corpus under a pair protocol");
    eval->add_option("--corpus", ea.corpus, "Corpus directory")->required();
    eval->add_option("--protocol", ea.protocol, "SxI, e.g. 100x8")->required();
    eval->add_option("--impostors", ea.impostors, "first | all");
    eval->add_option("--config", ea.config, "Pipeline config JSON");
    eval->add_option("--out", ea.out, "Report path (stdout when omitted)");
    eval->add_option("--roc-csv", ea.roc_csv, "ROC CSV path");
    eval->add_option("--scores-csv", ea.scores_csv, "Raw per-pair scores CSV path");
    eval->add_option("--holdout", ea.holdout, "Corpus used to fit missing normalization params");
    eval->add_option("--minutiae-gt", ea.minutiae_gt, "Reference corpus for minutiae quality");
    eval->add_option("--jobs", ea.jobs, "Worker threads")->check(CLI::PositiveNumber);

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Threshold grid and minutiae budget sweeps");
    bench->add_option("--corpus", ba.corpus, "Corpus directory")->required();
    bench->add_option("--protocol", ba.protocol, "SxI (inferred from the corpus when omitted)");
    bench->add_option("--impostors", ba.impostors, "first | all");
    auto* grid_opt = bench->add_option("--grid", ba.grid, "theta_t:theta_f list, 'off' for the disabled gate");
    bench->add_option("--sweep-minutiae", ba.sweep, "Comma separated minutiae budgets, e.g. 50,30,10");
    bench->add_option("--config", ba.config, "Pipeline config JSON");
    bench->add_option("--holdout", ba.holdout, "Corpus used to fit missing normalization params");
    bench->add_option("--out", ba.out, "Output path (stdout when omitted)");
    bench->add_option("--jobs", ba.jobs, "Worker threads")->check(CLI::PositiveNumber);
    bench->add_flag("--pretty", ba.pretty, "Human readable table instead of JSON");

    LossesArgs la;
    auto* losses = app.add_subcommand("losses", "Training loss breakdown for a prediction");
    losses->add_option("--pred", la.pred, "Prediction record JSON (object or array)")->required();
    losses->add_option("--gt", la.gt, "Ground truth record JSON (object or array)")->required();
    losses->add_option("--weights", la.weights, "Loss weights JSON");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (synth->parsed()) return cmd_synth(sa, out);
        if (match->parsed()) return cmd_match(ma, out);
        if (eval->parsed()) return cmd_eval(ea, out);
        if (bench->parsed()) return cmd_bench(ba, out, grid_opt->count() > 0);
        if (losses->parsed()) return cmd_losses(la, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

}  // namespace fpfuse::cli
