// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bfwloc/geometry.hpp"

namespace bfwloc {

// Dense row-major sample matrix.
class FeatureMatrix
{
  public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols);
    static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    void append_row(std::span<const double> values);

  private:
    std::vector<double> data_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

// Defaults follow the common library defaults: 100 trees, one feature
// examined per split, internal nodes need 2 samples, leaves need 1.
struct ForestParams
{
    int n_trees = 100;
    int max_features = 1;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    std::optional<int> max_depth;
    std::uint64_t seed = 0;
    unsigned jobs = 1;  // not part of the model; results do not depend on it

    void validate(std::size_t feature_dim) const;
};

enum class ForestKind
{
    classifier,
    regressor,
};

// Flat binary tree. Internal nodes send x[feature] <= threshold left. Leaf
// payloads are class counts (classifier) or the mean (x, y) (regressor).
struct DecisionTree
{
    std::vector<int> feature;  // -1 marks a leaf
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<int> payload;  // leaf: offset into values, internal: -1
    std::vector<double> values;

    std::size_t node_count() const { return feature.size(); }
    // Payload of the leaf reached by x.
    std::span<const double> leaf(std::span<const double> x, std::size_t width) const;
};

struct ForestModel
{
    ForestKind kind = ForestKind::classifier;
    ForestParams params;
    std::size_t feature_dim = 0;
    std::vector<int> classes;  // ascending; classifier only
    std::vector<DecisionTree> trees;

    std::size_t payload_width() const { return kind == ForestKind::classifier ? classes.size() : 2; }
};

// Gini-impurity trees over bootstrap resamples. Tree t draws from its own
// stream seeded with derive_seed(params.seed, t). When `sample_ids` is given
// the samples are first put in ascending-id order, so the model does not
// depend on the order in which they were supplied.
ForestModel train_classifier(const FeatureMatrix& x, std::span<const int> labels, const ForestParams& params,
                             std::span<const std::uint64_t> sample_ids = {});

// Multi-output regression trees that minimise the summed per-axis squared
// error of the 2-D targets.
ForestModel train_regressor(const FeatureMatrix& x, std::span<const Point> targets, const ForestParams& params,
                            std::span<const std::uint64_t> sample_ids = {});

struct ClassPrediction
{
    int label = 0;
    std::vector<double> vote_fractions;  // aligned with model.classes
};

// Majority vote of per-tree decisions; ties go to the smaller label.
ClassPrediction predict_class(const ForestModel& model, std::span<const double> x);

// Per-axis mean of the tree outputs.
Point predict_point(const ForestModel& model, std::span<const double> x);

// Versioned structured-text form; doubles round-trip exactly.
nlohmann::json forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const nlohmann::json& doc);

} // namespace bfwloc
