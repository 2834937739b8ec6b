// SPDX-License-Identifier: Apache-2.0
#include "bfwloc/localizer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "bfwloc/parallel.hpp"
#include "bfwloc/random.hpp"

namespace bfwloc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario documents

ChannelParams parse_channel_params(const json& obj)
{
    ChannelParams p;
    if (obj.is_null())
        return p;
    if (!obj.is_object())
        throw ValidationError("params: expected an object");
    auto num = [&](const char* key, double& field) {
        if (obj.contains(key)) {
            if (!obj[key].is_number())
                throw ValidationError(std::string("params.") + key + ": expected a number");
            field = obj[key].get<double>();
        }
    };
    auto integer = [&](const char* key, int& field) {
        if (obj.contains(key)) {
            if (!obj[key].is_number_integer())
                throw ValidationError(std::string("params.") + key + ": expected an integer");
            field = obj[key].get<int>();
        }
    };
    num("center_frequency", p.center_frequency);
    num("bandwidth", p.bandwidth);
    integer("subcarriers", p.subcarriers);
    integer("sta_antennas", p.sta_antennas);
    integer("reflection_order", p.reflection_order);
    num("wall_reflection_loss", p.wall_reflection_loss);
    num("target_scatter_gain", p.target_scatter_gain);
    num("target_block_radius", p.target_block_radius);
    num("target_block_loss", p.target_block_loss);
    num("noise_std", p.noise_std);
    p.validate();
    return p;
}

json channel_params_to_json(const ChannelParams& p)
{
    return {{"center_frequency", p.center_frequency},
            {"bandwidth", p.bandwidth},
            {"subcarriers", p.subcarriers},
            {"sta_antennas", p.sta_antennas},
            {"reflection_order", p.reflection_order},
            {"wall_reflection_loss", p.wall_reflection_loss},
            {"target_scatter_gain", p.target_scatter_gain},
            {"target_block_radius", p.target_block_radius},
            {"target_block_loss", p.target_block_loss},
            {"noise_std", p.noise_std}};
}

Scenario parse_scenario(const json& doc)
{
    if (!doc.is_object())
        throw ValidationError("scenario: top level must be an object");
    Scenario s;
    s.params = parse_channel_params(doc.contains("params") ? doc["params"] : json());
    if (!doc.contains("trajectories") || !doc["trajectories"].is_array())
        throw ValidationError("scenario.trajectories: missing or not an array");
    for (const json& t : doc["trajectories"]) {
        Trajectory traj;
        if (!t.contains("area_label") || !t["area_label"].is_number_integer())
            throw ValidationError("scenario.trajectories[].area_label: missing or not an integer");
        traj.area_label = t["area_label"].get<int>();
        if (!t.contains("points") || !t["points"].is_array())
            throw ValidationError("scenario.trajectories[].points: missing or not an array");
        for (const json& p : t["points"]) {
            if (!p.contains("x") || !p.contains("y") || !p["x"].is_number() || !p["y"].is_number())
                throw ValidationError("scenario.trajectories[].points[]: expected {x, y}");
            traj.points.push_back({p["x"].get<double>(), p["y"].get<double>()});
        }
        s.trajectories.push_back(std::move(traj));
    }
    return s;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("scenario: cannot open " + path);
    try {
        return parse_scenario(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("scenario: malformed JSON: ") + e.what());
    }
}

json scenario_to_json(const Scenario& scenario)
{
    json trajectories = json::array();
    for (const Trajectory& t : scenario.trajectories) {
        json points = json::array();
        for (const Point& p : t.points)
            points.push_back({{"x", p.x}, {"y", p.y}});
        trajectories.push_back({{"area_label", t.area_label}, {"points", std::move(points)}});
    }
    return {{"params", channel_params_to_json(scenario.params)}, {"trajectories", std::move(trajectories)}};
}

Scenario generate_scenario(const RoomLayout& layout, const ChannelParams& params, const WalkOptions& options,
                           std::uint64_t seed)
{
    if (options.points_per_area < 1 || options.walks_per_area < 1 || !(options.step >= 0.0) || !(options.turn >= 0.0) ||
        options.dwell < 1)
        throw ValidationError("scenario generator: invalid walk options");
    Scenario s;
    s.params = params;
    for (const Area& area : layout.areas.areas()) {
        for (int w = 0; w < options.walks_per_area; ++w) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(area.label) * 1024 + static_cast<std::uint64_t>(w)));
            const Rect& r = area.rect;
            Trajectory t;
            t.area_label = area.label;
            Point p{r.x0 + draw_unit(rng) * (r.x1 - r.x0), r.y0 + draw_unit(rng) * (r.y1 - r.y0)};
            double heading = 2.0 * std::numbers::pi * draw_unit(rng);
            for (int k = 0; k < options.points_per_area; ++k) {
                t.points.push_back(p);
                if ((k + 1) % options.dwell != 0)
                    continue;
                heading += options.turn * draw_normal(rng);
                p.x += options.step * std::cos(heading);
                p.y += options.step * std::sin(heading);
                // Mirror at the area edges.
                if (p.x < r.x0 || p.x > r.x1) {
                    p.x = p.x < r.x0 ? 2 * r.x0 - p.x : 2 * r.x1 - p.x;
                    heading = std::numbers::pi - heading;
                }
                if (p.y < r.y0 || p.y > r.y1) {
                    p.y = p.y < r.y0 ? 2 * r.y0 - p.y : 2 * r.y1 - p.y;
                    heading = -heading;
                }
                p.x = std::clamp(p.x, r.x0, r.x1);
                p.y = std::clamp(p.y, r.y0, r.y1);
            }
            s.trajectories.push_back(std::move(t));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<std::size_t> LabeledDataset::per_area_counts() const
{
    std::vector<std::size_t> counts(partition.size(), 0);
    for (const FeatureVector& f : samples)
        if (f.label && *f.label >= 1 && static_cast<std::size_t>(*f.label) <= counts.size())
            ++counts[static_cast<std::size_t>(*f.label - 1)];
    return counts;
}

LabeledDataset build_dataset(const RoomLayout& layout, const PlacementPattern& pattern, const Scenario& scenario,
                             const FeatureSettings& features, std::uint64_t seed, unsigned jobs)
{
    if (features.window < 1)
        throw ValidationError("features.window (U) must be >= 1");
    for (std::size_t t = 0; t < scenario.trajectories.size(); ++t) {
        const Trajectory& traj = scenario.trajectories[t];
        const std::string where = "trajectory " + std::to_string(t) + " (area " + std::to_string(traj.area_label) + ")";
        if (traj.area_label < 1 || static_cast<std::size_t>(traj.area_label) > layout.areas.size())
            throw ValidationError(where + ": unknown area label");
        if (static_cast<int>(traj.points.size()) < features.window)
            throw ValidationError(where + ": shorter than the window length U=" + std::to_string(features.window));
        const Rect& rect = layout.areas.at(traj.area_label).rect;
        for (const Point& p : traj.points)
            if (!rect.contains(p, kGeomEps))
                throw ValidationError(where + ": point outside the labeled area");
    }

    std::vector<std::vector<FeatureVector>> per_trajectory(scenario.trajectories.size());
    parallel_for(scenario.trajectories.size(), jobs, [&](std::size_t t) {
        const Trajectory& traj = scenario.trajectories[t];
        const std::vector<ChannelMatrix> channels =
            snapshot_sequence(layout, pattern, traj.points, scenario.params, derive_seed(seed, t));
        std::vector<BfwMatrix> bfw;
        bfw.reserve(channels.size());
        for (const ChannelMatrix& h : channels)
            bfw.push_back(reconstruct_bfw(compress_bfw(compute_bfw(h), features.phi_bits, features.psi_bits)));
        for (long p = features.window; p <= static_cast<long>(bfw.size()); ++p) {
            FeatureVector f = concatenate(bfw, p, features.window);
            f.label = traj.area_label;
            f.position = traj.points[static_cast<std::size_t>(p - 1)];
            per_trajectory[t].push_back(std::move(f));
        }
    });

    LabeledDataset data;
    data.partition = layout.areas;
    data.window = features.window;
    for (auto& list : per_trajectory)
        for (auto& f : list)
            data.samples.push_back(std::move(f));
    return data;
}

LabeledDataset relabel(const LabeledDataset& data, const AreaGrid& partition)
{
    LabeledDataset out;
    out.partition = partition;
    out.window = data.window;
    out.position_rule = data.position_rule;
    out.samples = data.samples;
    for (FeatureVector& f : out.samples) {
        if (!f.position)
            throw ValidationError("relabel: sample without position");
        const auto label = partition.locate(*f.position);
        if (!label)
            throw ValidationError("relabel: sample position outside the partition");
        f.label = *label;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Localizer

std::vector<int> LocalizerModel::labels() const
{
    std::vector<int> out;
    for (const auto& [label, model] : regressors)
        out.push_back(label);
    return out;
}

LocalizerModel train_localizer(const LabeledDataset& data, const ForestParams& params)
{
    if (data.samples.empty())
        throw ValidationError("train_localizer: empty dataset");
    const std::size_t dim = data.feature_dim();
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const FeatureVector& f = data.samples[i];
        if (!f.label || !f.position)
            throw ValidationError("train_localizer: unlabeled sample " + std::to_string(i));
        if (*f.label < 1 || static_cast<std::size_t>(*f.label) > data.partition.size())
            throw ValidationError("train_localizer: label " + std::to_string(*f.label) + " not in the partition");
        if (f.values.size() != dim)
            throw ValidationError("train_localizer: inconsistent feature dimension");
        by_label[*f.label].push_back(i);
    }
    for (const auto& [label, idx] : by_label)
        if (idx.size() < static_cast<std::size_t>(params.min_samples_split))
            throw ValidationError("train_localizer: area " + std::to_string(label) + " has only " +
                                  std::to_string(idx.size()) + " samples (need >= min_samples_split)");

    LocalizerModel model;
    model.area_count = static_cast<int>(data.partition.size());
    model.window = data.window;
    model.feature_dim = dim;
    model.params = params;

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    if (by_label.size() >= 2) {
        FeatureMatrix x;
        std::vector<int> labels;
        for (const FeatureVector& f : data.samples) {
            x.append_row(f.values);
            labels.push_back(*f.label);
        }
        ForestParams cp = params;
        cp.seed = derive_seed(params.seed, 0);
        model.classifier = train_classifier(x, labels, cp);
    } else {
        model.constant_label = by_label.begin()->first;
    }
    const auto t1 = clock::now();

    std::vector<int> keys;
    for (const auto& [label, idx] : by_label)
        keys.push_back(label);
    std::vector<ForestModel> regs(keys.size());
    // Areas are trained in parallel; each tree set is single-threaded so the
    // worker count is bounded by params.jobs.
    parallel_for(keys.size(), params.jobs, [&](std::size_t k) {
        const int label = keys[k];
        FeatureMatrix x;
        std::vector<Point> targets;
        for (std::size_t i : by_label.at(label)) {
            x.append_row(data.samples[i].values);
            targets.push_back(*data.samples[i].position);
        }
        ForestParams rp = params;
        rp.seed = derive_seed(params.seed, static_cast<std::uint64_t>(label));
        rp.jobs = 1;
        regs[k] = train_regressor(x, targets, rp);
    });
    for (std::size_t k = 0; k < keys.size(); ++k)
        model.regressors.emplace(keys[k], std::move(regs[k]));
    const auto t2 = clock::now();

    model.stats.classifier_seconds = std::chrono::duration<double>(t1 - t0).count();
    model.stats.regression_seconds = std::chrono::duration<double>(t2 - t1).count();
    return model;
}

Estimate localize(const LocalizerModel& model, const FeatureVector& feature)
{
    if (feature.values.size() != model.feature_dim)
        throw ValidationError("localize: feature dimension mismatch (model " + std::to_string(model.feature_dim) +
                              ", got " + std::to_string(feature.values.size()) + ")");
    Estimate e;
    if (model.classifier) {
        ClassPrediction c = predict_class(*model.classifier, feature.values);
        e.area = c.label;
        e.vote_fractions = std::move(c.vote_fractions);
    } else {
        e.area = model.constant_label;
        e.vote_fractions = {1.0};
    }
    const auto it = model.regressors.find(e.area);
    if (it == model.regressors.end())
        throw std::logic_error("localize: no regressor for area " + std::to_string(e.area));
    e.point = predict_point(it->second, feature.values);
    return e;
}

namespace {

constexpr int kLocalizerFormatVersion = 1;

json params_to_json(const ForestParams& p)
{
    return {{"n_trees", p.n_trees},
            {"max_features", p.max_features},
            {"min_samples_split", p.min_samples_split},
            {"min_samples_leaf", p.min_samples_leaf},
            {"max_depth", p.max_depth ? json(*p.max_depth) : json(nullptr)},
            {"seed", p.seed}};
}

} // namespace

json localizer_to_json(const LocalizerModel& model)
{
    json doc;
    doc["format"] = "bfwloc-localizer";
    doc["version"] = kLocalizerFormatVersion;
    doc["area_count"] = model.area_count;
    doc["window"] = model.window;
    doc["feature_dim"] = model.feature_dim;
    doc["position_rule"] = "window_end";
    doc["regression"] = "multi_output";
    doc["params"] = params_to_json(model.params);
    doc["constant_label"] = model.constant_label;
    doc["classifier"] = model.classifier ? forest_to_json(*model.classifier) : json(nullptr);
    json regs = json::array();
    for (const auto& [label, forest] : model.regressors)
        regs.push_back({{"label", label}, {"model", forest_to_json(forest)}});
    doc["regressors"] = std::move(regs);
    return doc;
}

LocalizerModel localizer_from_json(const json& doc)
{
    try {
        if (doc.at("format") != "bfwloc-localizer" || doc.at("version").get<int>() != kLocalizerFormatVersion)
            throw ValidationError("localizer: unsupported model format or version");
        LocalizerModel m;
        m.area_count = doc.at("area_count");
        m.window = doc.at("window");
        m.feature_dim = doc.at("feature_dim");
        const json& p = doc.at("params");
        m.params.n_trees = p.at("n_trees");
        m.params.max_features = p.at("max_features");
        m.params.min_samples_split = p.at("min_samples_split");
        m.params.min_samples_leaf = p.at("min_samples_leaf");
        if (!p.at("max_depth").is_null())
            m.params.max_depth = p.at("max_depth").get<int>();
        m.params.seed = p.at("seed").get<std::uint64_t>();
        m.constant_label = doc.at("constant_label");
        if (!doc.at("classifier").is_null())
            m.classifier = forest_from_json(doc.at("classifier"));
        for (const json& r : doc.at("regressors"))
            m.regressors.emplace(r.at("label").get<int>(), forest_from_json(r.at("model")));
        if (m.regressors.empty())
            throw ValidationError("localizer: no regressors");
        if (m.classifier) {
            for (int c : m.classifier->classes)
                if (!m.regressors.contains(c))
                    throw ValidationError("localizer: classifier label " + std::to_string(c) + " has no regressor");
        } else if (!m.regressors.contains(m.constant_label)) {
            throw ValidationError("localizer: constant label has no regressor");
        }
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("localizer: malformed model: ") + e.what());
    }
}

} // namespace bfwloc
