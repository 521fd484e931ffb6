#pragma once

#include <string>

#include "fpfuse/score_pipeline.hpp"

namespace fpfuse {

/// A pipeline config as read from disk. A normalization given by kind only
/// (no "params") has to be fitted on labelled scores before use.
struct LoadedPipelineConfig {
    PipelineConfig config;
    bool local_norm_needs_fit = false;
    bool global_norm_needs_fit = false;
};

/// The configuration used when no file is given: gate (0.75, 0.15), identity
/// on the global channel, a double sigmoid on the local channel still to be
/// fitted, mean fusion.
LoadedPipelineConfig default_pipeline_config();

/// Format:
///   {"theta_t": 0.75, "theta_f": 0.15, "fusion": "mean",
///    "norm": {"kind": "double_sigmoid", "params": {"t": .., "r1": .., "r2": ..}},
///    "norm_global": {"kind": "identity"},
///    "local": {"emb_sim_floor": .., "geo_tolerance_px": .., "ori_tolerance_rad": ..,
///              "max_minutiae": .., "alignment_seeds": .., "symmetric": ..},
///    "confident_genuine_local": 1.0, "confident_impostor_local": 0.0}
/// Every key is optional; missing keys keep their defaults. minmax params are
/// {"min", "max"}; zscore and tanh take {"mean", "std"}.
LoadedPipelineConfig parse_pipeline_config(const std::string& json_text);

std::string to_json(const PipelineConfig& cfg);

}  // namespace fpfuse
