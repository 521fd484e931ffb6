#include "fpfuse/losses.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace fpfuse {

void LossWeights::check() const
{
    for (double v : {global, pose, embedding, pose_inter, embedding_inter}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be nonnegative");
    }
}

double mse(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw std::invalid_argument("mse: length mismatch");
    if (a.empty()) throw std::invalid_argument("mse: empty input");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s / double(a.size());
}

std::vector<double> mse_gradient(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mse_gradient: bad lengths");
    std::vector<double> g(a.size());
    const double scale = 2.0 / double(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) g[k] = scale * (a[k] - b[k]);
    return g;
}

double pose_mse(const Matrix& pred, const Matrix& gt, bool strict)
{
    if (pred.rows != gt.rows || pred.cols != 3 || gt.cols != 3) {
        throw std::invalid_argument("pose matrices must both be L x 3");
    }
    if (strict) return mse(pred.data, gt.data);
    if (pred.rows == 0) throw std::invalid_argument("mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.rows; ++i) {
        const double dx = pred(i, 0) - gt(i, 0);
        const double dy = pred(i, 1) - gt(i, 1);
        const double dt = angular_distance(pred(i, 2), gt(i, 2));
        s += dx * dx + dy * dy + dt * dt;
    }
    return s / double(pred.data.size());
}

namespace {

void check_layer(const LayerOutput& l, const char* what)
{
    if (l.pose.cols != 3) throw std::invalid_argument(std::string(what) + ": pose rows need 3 columns");
    if (l.pose.rows != l.embedding.rows) {
        throw std::invalid_argument(std::string(what) + ": pose and embedding row counts differ");
    }
}

void check_same_shape(const LayerOutput& pred, const LayerOutput& gt)
{
    if (pred.pose.rows != gt.pose.rows || pred.embedding.cols != gt.embedding.cols) {
        throw std::invalid_argument("prediction and ground truth shapes differ");
    }
}

}  // namespace

Reordering reorder_ground_truth(const LayerOutput& pred, const LayerOutput& gt, const CorrespondenceWeights& w)
{
    check_layer(pred, "prediction");
    check_layer(gt, "ground truth");
    check_same_shape(pred, gt);
    w.check();

    const std::size_t n = pred.pose.rows;
    CostMatrix costs(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            costs(i, j) = minutia_cost(pred.pose.row(i), pred.embedding.row(i), gt.pose.row(j),
                                       gt.embedding.row(j), w);
        }
    }
    const Assignment a = solve_assignment(costs);

    Reordering out;
    out.permutation.assign(n, 0);
    out.reordered.pose = Matrix(n, 3);
    out.reordered.embedding = Matrix(n, gt.embedding.cols);
    for (const auto& [i, j] : a.pairs) {
        out.permutation[i] = j;
        std::copy_n(gt.pose.row(j).begin(), 3, out.reordered.pose.row(i).begin());
        std::copy_n(gt.embedding.row(j).begin(), gt.embedding.cols, out.reordered.embedding.row(i).begin());
    }
    return out;
}

LossBreakdown total_loss(const PredictionRecord& pred, const GroundTruthRecord& gt, const LossWeights& w,
                         const LossOptions& opts)
{
    w.check();
    if (pred.global.size() != gt.global.size()) throw std::invalid_argument("global embedding lengths differ");

    LossBreakdown b;
    b.global = mse(pred.global, gt.global);

    auto layer_terms = [&](const LayerOutput& layer, double& pose_term, double& emb_term) {
        const Reordering r = reorder_ground_truth(layer, gt.minutiae, opts.correspondence);
        pose_term = pose_mse(layer.pose, r.reordered.pose, opts.strict_mse);
        emb_term = mse(layer.embedding.data, r.reordered.embedding.data);
    };
    layer_terms(pred.final_layer, b.pose, b.embedding);
    for (const auto& layer : pred.intermediates) {
        double p = 0.0, e = 0.0;
        layer_terms(layer, p, e);
        b.pose_inter += p;
        b.embedding_inter += e;
    }
    b.total = w.global * b.global + w.pose * b.pose + w.embedding * b.embedding + w.pose_inter * b.pose_inter +
              w.embedding_inter * b.embedding_inter;
    return b;
}

namespace {

LossBreakdown add(const LossBreakdown& x, const LossBreakdown& y)
{
    return {x.global + y.global,         x.pose + y.pose,
            x.embedding + y.embedding,   x.pose_inter + y.pose_inter,
            x.embedding_inter + y.embedding_inter, x.total + y.total};
}

LossBreakdown tree_sum(std::span<const LossBreakdown> v)
{
    if (v.size() == 1) return v[0];
    const std::size_t half = v.size() / 2;
    return add(tree_sum(v.first(half)), tree_sum(v.subspan(half)));
}

}  // namespace

LossBreakdown batch_total_loss(std::span<const PredictionRecord> preds, std::span<const GroundTruthRecord> gts,
                               const LossWeights& w, const LossOptions& opts)
{
    if (preds.size() != gts.size()) throw std::invalid_argument("batch sizes differ");
    if (preds.empty()) return {};
    std::vector<LossBreakdown> parts;
    parts.reserve(preds.size());
    for (std::size_t k = 0; k < preds.size(); ++k) parts.push_back(total_loss(preds[k], gts[k], w, opts));
    LossBreakdown s = tree_sum(parts);
    const double n = double(preds.size());
    return {s.global / n, s.pose / n, s.embedding / n, s.pose_inter / n, s.embedding_inter / n, s.total / n};
}

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& j, const char* what)
{
    Matrix m;
    m.rows = j.size();
    for (const auto& row : j) {
        const auto r = row.get<std::vector<double>>();
        if (m.data.empty()) m.cols = r.size();
        if (r.size() != m.cols) throw std::invalid_argument(std::string(what) + ": ragged rows");
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

LayerOutput layer_from_json(const json& j)
{
    LayerOutput l;
    l.pose = matrix_from_json(j.at("M_po"), "M_po");
    l.embedding = matrix_from_json(j.at("M_e"), "M_e");
    if (l.pose.rows == 0) l.pose.cols = 3;
    check_layer(l, "layer");
    return l;
}

json parse(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace

PredictionRecord parse_prediction(const std::string& json_text)
{
    const json j = parse(json_text);
    try {
        PredictionRecord p;
        p.global = j.at("G").get<std::vector<double>>();
        p.final_layer = layer_from_json(j);
        if (j.contains("intermediates")) {
            for (const auto& layer : j["intermediates"]) p.intermediates.push_back(layer_from_json(layer));
        }
        return p;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed prediction record: ") + e.what());
    }
}

GroundTruthRecord parse_ground_truth(const std::string& json_text)
{
    const json j = parse(json_text);
    try {
        GroundTruthRecord g;
        g.global = j.at("G").get<std::vector<double>>();
        g.minutiae = layer_from_json(j);
        return g;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed ground truth record: ") + e.what());
    }
}

void parse_loss_weights(const std::string& json_text, LossWeights& w, LossOptions& opts)
{
    const json j = parse(json_text);
    try {
        w.global = j.value("lambda_g", w.global);
        w.pose = j.value("lambda_po", w.pose);
        w.embedding = j.value("lambda_e", w.embedding);
        w.pose_inter = j.value("lambda_po_inter", w.pose_inter);
        w.embedding_inter = j.value("lambda_e_inter", w.embedding_inter);
        opts.strict_mse = j.value("strict_mse", opts.strict_mse);
        if (j.contains("correspondence")) {
            const auto& c = j["correspondence"];
            opts.correspondence.location = c.value("w_loc", opts.correspondence.location);
            opts.correspondence.orientation = c.value("w_ori", opts.correspondence.orientation);
            opts.correspondence.embedding = c.value("w_emb", opts.correspondence.embedding);
            opts.correspondence.circular_orientation =
                c.value("circular_orientation", opts.correspondence.circular_orientation);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed loss weights: ") + e.what());
    }
    w.check();
}

std::string to_json(const LossBreakdown& b)
{
    json j = {{"L_g", b.global},           {"L_po", b.pose},
              {"L_e", b.embedding},        {"L_po_inter", b.pose_inter},
              {"L_e_inter", b.embedding_inter}, {"L_tot", b.total}};
    return j.dump();
}

}  // namespace fpfuse
