// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bfwloc/channel.hpp"
#include "bfwloc/feedback.hpp"
#include "bfwloc/forest.hpp"
#include "bfwloc/geometry.hpp"
#include "bfwloc/placement.hpp"

namespace bfwloc {

// Target path recorded while the target stays inside one area.
struct Trajectory
{
    int area_label = 0;
    std::vector<Point> points;
};

struct Scenario
{
    ChannelParams params;
    std::vector<Trajectory> trajectories;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& scenario);

ChannelParams parse_channel_params(const nlohmann::json& obj);
nlohmann::json channel_params_to_json(const ChannelParams& params);

// Walks with a slowly turning heading, mirrored at the edges of each area.
struct WalkOptions
{
    int points_per_area = 40;
    double step = 0.05;  // m per move
    double turn = 0.3;   // heading change std per move, rad
    int dwell = 1;       // snapshots taken at each position before moving
    int walks_per_area = 1;
};

Scenario generate_scenario(const RoomLayout& layout, const ChannelParams& params, const WalkOptions& options,
                           std::uint64_t seed);

struct FeatureSettings
{
    int window = 4;  // U
    int phi_bits = kDefaultPhiBits;
    int psi_bits = kDefaultPsiBits;
};

// Labeled samples. Each sample's position is the target position at the last
// snapshot of its window.
struct LabeledDataset
{
    std::vector<FeatureVector> samples;
    AreaGrid partition;
    int window = 1;
    std::string position_rule = "window_end";

    // Sample count per label, index label - 1.
    std::vector<std::size_t> per_area_counts() const;
    std::size_t feature_dim() const { return samples.empty() ? 0 : samples.front().values.size(); }
};

// Quantized BFW feature of every complete U-window of every trajectory.
// Trajectory t uses the noise stream derive_seed(seed, t).
LabeledDataset build_dataset(const RoomLayout& layout, const PlacementPattern& pattern, const Scenario& scenario,
                             const FeatureSettings& features, std::uint64_t seed, unsigned jobs = 1);

// Same samples labeled against another partition by window-end position.
LabeledDataset relabel(const LabeledDataset& data, const AreaGrid& partition);

struct TrainingStats
{
    double classifier_seconds = 0.0;
    double regression_seconds = 0.0;
};

// One area classifier plus one regressor per area label. With a single
// label the classifier is replaced by a constant and the lone regressor is
// a conventional global regression model.
struct LocalizerModel
{
    std::optional<ForestModel> classifier;
    int constant_label = 0;
    std::map<int, ForestModel> regressors;
    int area_count = 0;  // R
    int window = 1;      // U
    std::size_t feature_dim = 0;
    ForestParams params;
    TrainingStats stats;  // not serialized

    std::vector<int> labels() const;
};

// Regressor for label r is seeded with derive_seed(params.seed, r) and sees
// only samples labeled r; the classifier uses derive_seed(params.seed, 0).
LocalizerModel train_localizer(const LabeledDataset& data, const ForestParams& params);

struct Estimate
{
    int area = 0;
    Point point;
    std::vector<double> vote_fractions;
};

Estimate localize(const LocalizerModel& model, const FeatureVector& feature);

nlohmann::json localizer_to_json(const LocalizerModel& model);
LocalizerModel localizer_from_json(const nlohmann::json& doc);

} // namespace bfwloc
