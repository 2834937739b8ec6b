// SPDX-License-Identifier: Apache-2.0
#include "bfwloc/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bfwloc/parallel.hpp"
#include "bfwloc/random.hpp"

namespace bfwloc {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols) : data_(rows * cols, 0.0), rows_(rows), cols_(cols) {}

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows)
{
    FeatureMatrix m;
    for (const auto& r : rows)
        m.append_row(r);
    return m;
}

void FeatureMatrix::append_row(std::span<const double> values)
{
    if (rows_ == 0 && cols_ == 0)
        cols_ = values.size();
    if (values.size() != cols_)
        throw ValidationError("feature dimension mismatch: expected " + std::to_string(cols_) + ", got " +
                              std::to_string(values.size()));
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void ForestParams::validate(std::size_t feature_dim) const
{
    if (n_trees < 1)
        throw ValidationError("forest.n_trees must be >= 1");
    if (max_features < 1 || static_cast<std::size_t>(max_features) > feature_dim)
        throw ValidationError("forest.max_features must lie in [1, feature dimension " + std::to_string(feature_dim) +
                              "]");
    if (min_samples_split < 2)
        throw ValidationError("forest.min_samples_split must be >= 2");
    if (min_samples_leaf < 1)
        throw ValidationError("forest.min_samples_leaf must be >= 1");
    if (max_depth && *max_depth < 1)
        throw ValidationError("forest.max_depth must be >= 1 when set");
}

std::span<const double> DecisionTree::leaf(std::span<const double> x, std::size_t width) const
{
    int node = 0;
    while (feature[static_cast<std::size_t>(node)] >= 0) {
        const auto n = static_cast<std::size_t>(node);
        node = x[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n];
    }
    return {values.data() + payload[static_cast<std::size_t>(node)], width};
}

namespace {

// Improvements must beat the incumbent by this much to replace it, so that
// mathematically tied splits resolve to the first one scanned regardless of
// rounding.
constexpr double kTieTolerance = 1e-9;

// Training view shared by both tree kinds. For the classifier `klass` holds
// class indices; for the regressor `tx`/`ty` hold the targets.
struct TrainingData
{
    const FeatureMatrix* x = nullptr;
    std::vector<std::size_t> rows;  // canonical order -> row of x
    std::vector<int> klass;
    std::vector<double> tx, ty;
    int n_classes = 0;
    bool regression = false;
};

class TreeBuilder
{
  public:
    TreeBuilder(const TrainingData& data, const ForestParams& params, Rng& rng)
        : data_(data), params_(params), rng_(rng), dim_(data.x->cols())
    {
    }

    DecisionTree build()
    {
        const std::size_t n = data_.rows.size();
        std::vector<std::size_t> samples(n);
        for (std::size_t k = 0; k < n; ++k)
            samples[k] = draw_index(rng_, n);
        features_.resize(dim_);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        grow(samples, 0);
        return std::move(tree_);
    }

  private:
    double value(std::size_t sample, std::size_t f) const { return (*data_.x)(data_.rows[sample], f); }

    bool is_pure(const std::vector<std::size_t>& s) const
    {
        for (std::size_t k = 1; k < s.size(); ++k) {
            if (data_.regression) {
                if (data_.tx[s[k]] != data_.tx[s[0]] || data_.ty[s[k]] != data_.ty[s[0]])
                    return false;
            } else if (data_.klass[s[k]] != data_.klass[s[0]]) {
                return false;
            }
        }
        return true;
    }

    int make_leaf(const std::vector<std::size_t>& s)
    {
        const int node = new_node();
        tree_.payload[static_cast<std::size_t>(node)] = static_cast<int>(tree_.values.size());
        if (data_.regression) {
            double sx = 0.0, sy = 0.0;
            for (std::size_t i : s) {
                sx += data_.tx[i];
                sy += data_.ty[i];
            }
            tree_.values.push_back(sx / static_cast<double>(s.size()));
            tree_.values.push_back(sy / static_cast<double>(s.size()));
        } else {
            std::vector<double> counts(static_cast<std::size_t>(data_.n_classes), 0.0);
            for (std::size_t i : s)
                counts[static_cast<std::size_t>(data_.klass[i])] += 1.0;
            tree_.values.insert(tree_.values.end(), counts.begin(), counts.end());
        }
        return node;
    }

    int new_node()
    {
        tree_.feature.push_back(-1);
        tree_.threshold.push_back(0.0);
        tree_.left.push_back(-1);
        tree_.right.push_back(-1);
        tree_.payload.push_back(-1);
        return static_cast<int>(tree_.feature.size()) - 1;
    }

    struct Split
    {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double score = 0.0;
    };

    // Scans all thresholds of feature f. Returns false if f is constant.
    bool scan_feature(const std::vector<std::size_t>& s, std::size_t f, Split& best)
    {
        const std::size_t n = s.size();
        order_.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            order_[k] = {value(s[k], f), s[k]};
        std::stable_sort(order_.begin(), order_.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        if (order_.front().first == order_.back().first)
            return false;

        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        if (data_.regression) {
            // Targets are centred on the node mean so the score is the
            // reduction in squared error and stays well conditioned.
            double mx = 0.0, my = 0.0;
            for (const auto& [v, i] : order_) {
                mx += data_.tx[i];
                my += data_.ty[i];
            }
            mx /= static_cast<double>(n);
            my /= static_cast<double>(n);
            double tot_x = 0.0, tot_y = 0.0;
            for (const auto& [v, i] : order_) {
                tot_x += data_.tx[i] - mx;
                tot_y += data_.ty[i] - my;
            }
            double lx = 0.0, ly = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                lx += data_.tx[order_[k].second] - mx;
                ly += data_.ty[order_[k].second] - my;
                const std::size_t nl = k + 1;
                const std::size_t nr = n - nl;
                if (order_[k].first == order_[k + 1].first || nl < min_leaf || nr < min_leaf)
                    continue;
                const double rx = tot_x - lx;
                const double ry = tot_y - ly;
                const double score = (lx * lx + ly * ly) / static_cast<double>(nl) +
                                     (rx * rx + ry * ry) / static_cast<double>(nr);
                consider(best, f, k, score);
            }
        } else {
            const auto c = static_cast<std::size_t>(data_.n_classes);
            left_counts_.assign(c, 0);
            right_counts_.assign(c, 0);
            for (const auto& [v, i] : order_)
                ++right_counts_[static_cast<std::size_t>(data_.klass[i])];
            for (std::size_t k = 0; k + 1 < n; ++k) {
                const auto cls = static_cast<std::size_t>(data_.klass[order_[k].second]);
                ++left_counts_[cls];
                --right_counts_[cls];
                const std::size_t nl = k + 1;
                const std::size_t nr = n - nl;
                if (order_[k].first == order_[k + 1].first || nl < min_leaf || nr < min_leaf)
                    continue;
                double sl = 0.0, sr = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    sl += static_cast<double>(left_counts_[j]) * static_cast<double>(left_counts_[j]);
                    sr += static_cast<double>(right_counts_[j]) * static_cast<double>(right_counts_[j]);
                }
                // n - score is the size-weighted Gini impurity of the children.
                const double score = sl / static_cast<double>(nl) + sr / static_cast<double>(nr);
                consider(best, f, k, score);
            }
        }
        return true;
    }

    void consider(Split& best, std::size_t f, std::size_t k, double score)
    {
        if (best.found && score <= best.score + kTieTolerance * std::max(1.0, std::abs(best.score)))
            return;
        const double lo = order_[k].first;
        const double hi = order_[k + 1].first;
        double t = 0.5 * (lo + hi);
        if (!(t < hi))
            t = lo;
        best = {true, f, t, score};
    }

    int grow(const std::vector<std::size_t>& s, int depth)
    {
        const bool depth_limited = params_.max_depth && depth >= *params_.max_depth;
        if (s.size() < static_cast<std::size_t>(params_.min_samples_split) || depth_limited || is_pure(s))
            return make_leaf(s);

        // Features are drawn without replacement by a partial Fisher-Yates
        // pass over a permutation that persists across the nodes of a tree.
        // Constant features do not count against max_features, so the search
        // goes on until a usable feature is seen or every feature was tried.
        Split best;
        int usable = 0;
        for (std::size_t j = 0; j < dim_ && usable < params_.max_features; ++j) {
            const std::size_t pick = j + draw_index(rng_, dim_ - j);
            std::swap(features_[j], features_[pick]);
            if (scan_feature(s, features_[j], best))
                ++usable;
        }
        if (!best.found)
            return make_leaf(s);

        std::vector<std::size_t> ls, rs;
        for (std::size_t i : s)
            (value(i, best.feature) <= best.threshold ? ls : rs).push_back(i);

        const int node = new_node();
        tree_.feature[static_cast<std::size_t>(node)] = static_cast<int>(best.feature);
        tree_.threshold[static_cast<std::size_t>(node)] = best.threshold;
        const int l = grow(ls, depth + 1);
        const int r = grow(rs, depth + 1);
        tree_.left[static_cast<std::size_t>(node)] = l;
        tree_.right[static_cast<std::size_t>(node)] = r;
        return node;
    }

    const TrainingData& data_;
    const ForestParams& params_;
    Rng& rng_;
    std::size_t dim_;
    DecisionTree tree_;
    std::vector<std::pair<double, std::size_t>> order_;
    std::vector<long> left_counts_, right_counts_;
    std::vector<std::size_t> features_;
};

std::vector<std::size_t> canonical_rows(std::size_t n, std::span<const std::uint64_t> ids)
{
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (!ids.empty()) {
        if (ids.size() != n)
            throw ValidationError("sample id count does not match sample count");
        std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    }
    return rows;
}

std::vector<DecisionTree> grow_forest(const TrainingData& data, const ForestParams& params)
{
    std::vector<DecisionTree> trees(static_cast<std::size_t>(params.n_trees));
    parallel_for(trees.size(), params.jobs, [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, t));
        trees[t] = TreeBuilder(data, params, rng).build();
    });
    return trees;
}

void check_dim(const ForestModel& model, std::span<const double> x)
{
    if (x.size() != model.feature_dim)
        throw ValidationError("feature dimension mismatch: model expects " + std::to_string(model.feature_dim) +
                              ", got " + std::to_string(x.size()));
}

} // namespace

ForestModel train_classifier(const FeatureMatrix& x, std::span<const int> labels, const ForestParams& params,
                             std::span<const std::uint64_t> sample_ids)
{
    if (x.rows() == 0)
        throw ValidationError("train_classifier: no samples");
    if (labels.size() != x.rows())
        throw ValidationError("train_classifier: label count does not match sample count");
    params.validate(x.cols());

    ForestModel model;
    model.kind = ForestKind::classifier;
    model.params = params;
    model.feature_dim = x.cols();
    model.classes.assign(labels.begin(), labels.end());
    std::sort(model.classes.begin(), model.classes.end());
    model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
    if (model.classes.size() < 2)
        throw ValidationError("train_classifier: need at least 2 distinct labels");

    TrainingData data;
    data.x = &x;
    data.rows = canonical_rows(x.rows(), sample_ids);
    data.n_classes = static_cast<int>(model.classes.size());
    for (std::size_t r : data.rows) {
        const auto it = std::lower_bound(model.classes.begin(), model.classes.end(), labels[r]);
        data.klass.push_back(static_cast<int>(it - model.classes.begin()));
    }
    model.trees = grow_forest(data, params);
    return model;
}

ForestModel train_regressor(const FeatureMatrix& x, std::span<const Point> targets, const ForestParams& params,
                            std::span<const std::uint64_t> sample_ids)
{
    if (x.rows() == 0)
        throw ValidationError("train_regressor: no samples");
    if (targets.size() != x.rows())
        throw ValidationError("train_regressor: target count does not match sample count");
    params.validate(x.cols());

    ForestModel model;
    model.kind = ForestKind::regressor;
    model.params = params;
    model.feature_dim = x.cols();

    TrainingData data;
    data.x = &x;
    data.regression = true;
    data.rows = canonical_rows(x.rows(), sample_ids);
    for (std::size_t r : data.rows) {
        data.tx.push_back(targets[r].x);
        data.ty.push_back(targets[r].y);
    }
    model.trees = grow_forest(data, params);
    return model;
}

ClassPrediction predict_class(const ForestModel& model, std::span<const double> x)
{
    if (model.kind != ForestKind::classifier)
        throw std::logic_error("predict_class called on a regression forest");
    check_dim(model, x);
    const std::size_t c = model.classes.size();
    std::vector<double> votes(c, 0.0);
    for (const DecisionTree& tree : model.trees) {
        const auto counts = tree.leaf(x, c);
        // First maximum wins, i.e. the smaller label.
        const auto best = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        votes[best] += 1.0;
    }
    const auto winner = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    ClassPrediction out;
    out.label = model.classes[winner];
    out.vote_fractions.resize(c);
    for (std::size_t k = 0; k < c; ++k)
        out.vote_fractions[k] = votes[k] / static_cast<double>(model.trees.size());
    return out;
}

Point predict_point(const ForestModel& model, std::span<const double> x)
{
    if (model.kind != ForestKind::regressor)
        throw std::logic_error("predict_point called on a classification forest");
    check_dim(model, x);
    double sx = 0.0, sy = 0.0;
    for (const DecisionTree& tree : model.trees) {
        const auto v = tree.leaf(x, 2);
        sx += v[0];
        sy += v[1];
    }
    const auto n = static_cast<double>(model.trees.size());
    return {sx / n, sy / n};
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kForestFormatVersion = 1;

} // namespace

nlohmann::json forest_to_json(const ForestModel& model)
{
    nlohmann::json doc;
    doc["format"] = "bfwloc-forest";
    doc["version"] = kForestFormatVersion;
    doc["kind"] = model.kind == ForestKind::classifier ? "classifier" : "regressor";
    doc["feature_dim"] = model.feature_dim;
    doc["classes"] = model.classes;
    doc["multi_output"] = model.kind == ForestKind::regressor;
    const ForestParams& p = model.params;
    doc["params"] = {{"n_trees", p.n_trees},
                     {"max_features", p.max_features},
                     {"min_samples_split", p.min_samples_split},
                     {"min_samples_leaf", p.min_samples_leaf},
                     {"max_depth", p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr)},
                     {"seed", p.seed}};
    nlohmann::json trees = nlohmann::json::array();
    for (const DecisionTree& t : model.trees)
        trees.push_back({{"feature", t.feature},
                         {"threshold", t.threshold},
                         {"left", t.left},
                         {"right", t.right},
                         {"payload", t.payload},
                         {"values", t.values}});
    doc["trees"] = std::move(trees);
    return doc;
}

ForestModel forest_from_json(const nlohmann::json& doc)
{
    try {
        if (doc.at("format") != "bfwloc-forest" || doc.at("version").get<int>() != kForestFormatVersion)
            throw ValidationError("forest: unsupported model format or version");
        ForestModel m;
        const std::string kind = doc.at("kind");
        if (kind != "classifier" && kind != "regressor")
            throw ValidationError("forest: unknown kind '" + kind + "'");
        m.kind = kind == "classifier" ? ForestKind::classifier : ForestKind::regressor;
        m.feature_dim = doc.at("feature_dim").get<std::size_t>();
        m.classes = doc.at("classes").get<std::vector<int>>();
        const auto& p = doc.at("params");
        m.params.n_trees = p.at("n_trees");
        m.params.max_features = p.at("max_features");
        m.params.min_samples_split = p.at("min_samples_split");
        m.params.min_samples_leaf = p.at("min_samples_leaf");
        if (!p.at("max_depth").is_null())
            m.params.max_depth = p.at("max_depth").get<int>();
        m.params.seed = p.at("seed").get<std::uint64_t>();
        const std::size_t width = m.payload_width();
        for (const auto& t : doc.at("trees")) {
            DecisionTree tree;
            tree.feature = t.at("feature").get<std::vector<int>>();
            tree.threshold = t.at("threshold").get<std::vector<double>>();
            tree.left = t.at("left").get<std::vector<int>>();
            tree.right = t.at("right").get<std::vector<int>>();
            tree.payload = t.at("payload").get<std::vector<int>>();
            tree.values = t.at("values").get<std::vector<double>>();
            const std::size_t n = tree.feature.size();
            if (n == 0 || tree.threshold.size() != n || tree.left.size() != n || tree.right.size() != n ||
                tree.payload.size() != n)
                throw ValidationError("forest: inconsistent tree arrays");
            for (std::size_t k = 0; k < n; ++k) {
                if (tree.feature[k] >= 0) {
                    if (static_cast<std::size_t>(tree.feature[k]) >= m.feature_dim || tree.left[k] <= 0 ||
                        tree.right[k] <= 0 || static_cast<std::size_t>(tree.left[k]) >= n ||
                        static_cast<std::size_t>(tree.right[k]) >= n)
                        throw ValidationError("forest: invalid internal node");
                } else if (tree.payload[k] < 0 || static_cast<std::size_t>(tree.payload[k]) + width > tree.values.size()) {
                    throw ValidationError("forest: invalid leaf payload");
                }
            }
            m.trees.push_back(std::move(tree));
        }
        if (m.trees.empty())
            throw ValidationError("forest: no trees");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("forest: malformed model: ") + e.what());
    }
}

} // namespace bfwloc
