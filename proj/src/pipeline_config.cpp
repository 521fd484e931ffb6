#include "fpfuse/pipeline_config.hpp"

#include <stdexcept>

#include <json.hpp>

namespace fpfuse {

namespace {

using nlohmann::json;

// Returns true when parameters were present.
bool read_norm(const json& j, Normalizer& n)
{
    if (j.is_string()) {
        n.kind = parse_norm_kind(j.get<std::string>());
        return n.kind == NormKind::identity;
    }
    n.kind = parse_norm_kind(j.at("kind").get<std::string>());
    if (n.kind == NormKind::identity) return true;
    if (!j.contains("params") || j["params"].is_null()) return false;
    const json& p = j["params"];
    switch (n.kind) {
    case NormKind::double_sigmoid:
        n.sigmoid = {p.at("t").get<double>(), p.at("r1").get<double>(), p.at("r2").get<double>()};
        break;
    case NormKind::minmax:
        n.lo = p.at("min").get<double>();
        n.hi = p.at("max").get<double>();
        break;
    case NormKind::zscore:
    case NormKind::tanh:
        n.lo = p.at("mean").get<double>();
        n.hi = p.at("std").get<double>();
        break;
    case NormKind::identity: break;
    }
    return true;
}

json write_norm(const Normalizer& n)
{
    json j = {{"kind", to_string(n.kind)}};
    switch (n.kind) {
    case NormKind::identity: break;
    case NormKind::double_sigmoid:
        j["params"] = {{"t", n.sigmoid.t}, {"r1", n.sigmoid.r1}, {"r2", n.sigmoid.r2}};
        break;
    case NormKind::minmax: j["params"] = {{"min", n.lo}, {"max", n.hi}}; break;
    case NormKind::zscore:
    case NormKind::tanh: j["params"] = {{"mean", n.lo}, {"std", n.hi}}; break;
    }
    return j;
}

}  // namespace

LoadedPipelineConfig default_pipeline_config()
{
    LoadedPipelineConfig c;
    c.config.norm_local.kind = NormKind::double_sigmoid;
    c.local_norm_needs_fit = true;
    return c;
}

LoadedPipelineConfig parse_pipeline_config(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("pipeline config must be a JSON object");

    LoadedPipelineConfig out = default_pipeline_config();
    PipelineConfig& c = out.config;
    try {
        c.thresholds.theta_t = j.value("theta_t", c.thresholds.theta_t);
        c.thresholds.theta_f = j.value("theta_f", c.thresholds.theta_f);
        if (j.contains("fusion")) c.fusion = parse_fusion_rule(j["fusion"].get<std::string>());
        if (j.contains("norm")) out.local_norm_needs_fit = !read_norm(j["norm"], c.norm_local);
        if (j.contains("norm_global")) out.global_norm_needs_fit = !read_norm(j["norm_global"], c.norm_global);
        c.confident_genuine_local = j.value("confident_genuine_local", c.confident_genuine_local);
        c.confident_impostor_local = j.value("confident_impostor_local", c.confident_impostor_local);
        if (j.contains("local")) {
            const json& l = j["local"];
            c.local.emb_sim_floor = l.value("emb_sim_floor", c.local.emb_sim_floor);
            c.local.geo_tolerance_px = l.value("geo_tolerance_px", c.local.geo_tolerance_px);
            c.local.ori_tolerance_rad = l.value("ori_tolerance_rad", c.local.ori_tolerance_rad);
            if (l.contains("max_minutiae") && !l["max_minutiae"].is_null()) {
                c.local.max_minutiae_used = l["max_minutiae"].get<std::uint32_t>();
            }
            c.local.alignment_seeds = l.value("alignment_seeds", c.local.alignment_seeds);
            c.local.symmetric = l.value("symmetric", c.local.symmetric);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed pipeline config: ") + e.what());
    }

    c.thresholds.check();
    c.local.check();
    if (!c.norm_global.bounded() || !c.norm_local.bounded()) {
        throw std::invalid_argument("zscore output is unbounded and cannot feed fusion");
    }
    if (!out.local_norm_needs_fit && c.norm_local.kind == NormKind::double_sigmoid) c.norm_local.sigmoid.check();
    if (!out.global_norm_needs_fit && c.norm_global.kind == NormKind::double_sigmoid) c.norm_global.sigmoid.check();
    return out;
}

std::string to_json(const PipelineConfig& cfg)
{
    json local = {{"emb_sim_floor", cfg.local.emb_sim_floor},
                  {"geo_tolerance_px", cfg.local.geo_tolerance_px},
                  {"ori_tolerance_rad", cfg.local.ori_tolerance_rad},
                  {"alignment_seeds", cfg.local.alignment_seeds},
                  {"symmetric", cfg.local.symmetric}};
    local["max_minutiae"] = cfg.local.max_minutiae_used ? json(*cfg.local.max_minutiae_used) : json(nullptr);
    json j = {{"theta_t", cfg.thresholds.theta_t},
              {"theta_f", cfg.thresholds.theta_f},
              {"fusion", to_string(cfg.fusion)},
              {"norm", write_norm(cfg.norm_local)},
              {"norm_global", write_norm(cfg.norm_global)},
              {"local", local},
              {"confident_genuine_local", cfg.confident_genuine_local},
              {"confident_impostor_local", cfg.confident_impostor_local}};
    return j.dump(2);
}

}  // namespace fpfuse
