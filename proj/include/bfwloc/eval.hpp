// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bfwloc/localizer.hpp"
#include "bfwloc/placement.hpp"

namespace bfwloc {

// Any model that maps a feature to an area and a point.
using Predictor = std::function<Estimate(const FeatureVector&)>;

struct CdfPoint
{
    double epsilon = 0.0;
    double probability = 0.0;
};

struct EvalReport
{
    int area_count = 0;
    // P_r per label (index r - 1); empty when the test set has no sample of r.
    std::vector<std::optional<double>> per_area_detection;
    double average_detection = 0.0;  // unweighted mean of the present P_r
    std::vector<std::vector<long>> confusion;  // [true - 1][estimated - 1]
    std::vector<double> error_distances;
    std::vector<Point> error_vectors;  // truth - estimate
    std::vector<int> true_labels;
    double mean_error = 0.0;
    std::vector<CdfPoint> cdf;  // right-continuous, at sorted unique errors
    std::vector<std::string> warnings;

    double accuracy() const;  // trace / total of the confusion matrix
};

EvalReport evaluate(const Predictor& model, const LabeledDataset& test);
EvalReport evaluate(const LocalizerModel& model, const LabeledDataset& test);

std::vector<CdfPoint> empirical_cdf(std::vector<double> values);

struct HistogramBin
{
    double lo = 0.0;
    double hi = 0.0;
    double mass = 0.0;
};

// Error dispersion statistics for one axis. Theta is the mean squared
// deviation of the errors from their mean; it is computed for every group
// and its spread across groups is Val(Theta).
struct ErrorStats
{
    char axis = 'x';
    double mean = 0.0;
    double variance = 0.0;
    double theta = 0.0;  // over all errors
    std::vector<double> group_theta;
    double theta_mean = 0.0;
    double theta_variance = 0.0;  // Val(Theta), population variance over groups
    std::vector<HistogramBin> histogram;  // of group_theta, masses sum to 1
    double fitted_mean = 0.0;  // moment-fitted normal for group_theta
    double fitted_variance = 0.0;
};

struct Grouping
{
    enum class Kind
    {
        per_area,
        chunks,
    };
    Kind kind = Kind::per_area;
    std::size_t chunk_size = 0;  // chunks: consecutive errors per group

    static Grouping per_area() { return {}; }
    static Grouping chunks(std::size_t size) { return {Kind::chunks, size}; }
};

// One ErrorStats per axis (x, then y).
std::vector<ErrorStats> error_statistics(const EvalReport& report, const Grouping& grouping = Grouping::per_area(),
                                         int bins = 0);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// 1-based ranks picked by a selector: "all", or a comma list of "top:K",
// "bottom:K", "stride:S", "count:N" (N evenly spaced ranks), "rank:R".
std::vector<std::size_t> select_ranks(const std::string& selector, std::size_t total);

struct SweepRow
{
    std::size_t rank = 0;
    MetricResult metric;
    double pe = 0.0;
    double mean_error = 0.0;
};

struct SweepSettings
{
    FeatureSettings features;
    ForestParams forest;
    std::string ranks = "all";
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    // When set, evaluate against this partition instead of the layout grid.
    std::optional<AreaGrid> partition;
};

// For every selected pattern: build train/test datasets, train, evaluate.
// Rows come back ordered by rank. Noise streams depend on the seed and the
// trajectory only, so all patterns see the same target motion and noise.
std::vector<SweepRow> placement_sweep(const RoomLayout& layout, const std::vector<MetricResult>& ranking,
                                      const Scenario& train, const Scenario& test, const SweepSettings& settings);

struct SweepSummary
{
    double spearman_neg_s_pe = 0.0;
    double top_decile_pe = 0.0;
    double bottom_decile_pe = 0.0;
    double top_decile_error = 0.0;
    double bottom_decile_error = 0.0;
};

// Deciles are taken over the sweep rows in rank order (at least one row each).
SweepSummary summarize_sweep(const std::vector<SweepRow>& rows);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_cdf_csv(std::ostream& out, const std::vector<CdfPoint>& cdf);
void write_confusion_csv(std::ostream& out, const EvalReport& report);
void write_report_csv(std::ostream& out, const EvalReport& report);

} // namespace bfwloc
