#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fpfuse/assignment.hpp"

namespace fpfuse {

/// Row-major dense matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    bool operator==(const Matrix&) const = default;
};

/// Minutiae head outputs of one decoder layer: pose rows are (x, y, theta).
struct LayerOutput {
    Matrix pose;
    Matrix embedding;
};

struct PredictionRecord {
    std::vector<double> global;
    LayerOutput final_layer;
    std::vector<LayerOutput> intermediates;
};

struct GroundTruthRecord {
    std::vector<double> global;
    LayerOutput minutiae;
};

struct LossWeights {
    double global = 1.0;
    double pose = 1.0;
    double embedding = 1.0;
    double pose_inter = 1.0;
    double embedding_inter = 1.0;

    void check() const;
};

struct LossOptions {
    CorrespondenceWeights correspondence;
    /// Plain squared orientation difference instead of the circular distance.
    bool strict_mse = false;
};

struct LossBreakdown {
    double global = 0.0;
    double pose = 0.0;
    double embedding = 0.0;
    double pose_inter = 0.0;
    double embedding_inter = 0.0;
    double total = 0.0;
};

double mse(std::span<const double> a, std::span<const double> b);

/// d mse(a, b) / d a.
std::vector<double> mse_gradient(std::span<const double> a, std::span<const double> b);

/// MSE over pose rows; the orientation column uses the circular difference
/// unless `strict` is set.
double pose_mse(const Matrix& pred, const Matrix& gt, bool strict);

struct Reordering {
    /// Row i of the reordered ground truth is original row permutation[i].
    std::vector<std::size_t> permutation;
    LayerOutput reordered;
};

Reordering reorder_ground_truth(const LayerOutput& pred, const LayerOutput& gt, const CorrespondenceWeights& w);

/// Weighted training objective. Each intermediate layer is reordered against
/// the ground truth with its own optimal correspondence.
LossBreakdown total_loss(const PredictionRecord& pred, const GroundTruthRecord& gt, const LossWeights& w,
                         const LossOptions& opts = {});

/// Mean breakdown over many records, summed in a fixed pairwise tree.
LossBreakdown batch_total_loss(std::span<const PredictionRecord> preds, std::span<const GroundTruthRecord> gts,
                               const LossWeights& w, const LossOptions& opts = {});

PredictionRecord parse_prediction(const std::string& json_text);
GroundTruthRecord parse_ground_truth(const std::string& json_text);

/// Parses {"lambda_g", "lambda_po", "lambda_e", "lambda_po_inter", "lambda_e_inter"}
/// plus an optional "correspondence": {"w_loc", "w_ori", "w_emb"} block.
void parse_loss_weights(const std::string& json_text, LossWeights& w, LossOptions& opts);

std::string to_json(const LossBreakdown& b);

}  // namespace fpfuse
