// SPDX-License-Identifier: Apache-2.0
// bfwloc: placement optimization, training, evaluation and sweeps.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bfwloc/csv.hpp"
#include "bfwloc/eval.hpp"
#include "bfwloc/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bfwloc;

namespace {

constexpr const char* kToolVersion = "1.0.0";

enum ExitCode
{
    kOk = 0,
    kConfigError = 2,
    kRuntimeError = 3,
};

struct ConfigError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Seed streams split off the master seed.
constexpr std::uint64_t kTrainWalkStream = 101;
constexpr std::uint64_t kTestWalkStream = 102;
constexpr std::uint64_t kForestStream = 3;

json default_config()
{
    return json::parse(R"({
      "layout": null,
      "scenario": {
        "train": null,
        "test": null,
        "channel": {},
        "walk": {"points_per_area": 80, "step": 0.1, "turn": 0.3, "dwell": 1, "walks_per_area": 1}
      },
      "placement": {"selected": 4, "max_order": 1, "weights": [1.0], "mode": "subtract", "ids": null},
      "features": {"window": 4, "phi_bits": 7, "psi_bits": 5},
      "forest": {"n_trees": 100, "max_features": 1, "min_samples_split": 2, "min_samples_leaf": 1, "max_depth": null},
      "eval": {"partition": null, "grouping": "per_area", "ranks": "all"},
      "seed": 1,
      "jobs": 1,
      "out": "out"
    })");
}

// Deep merge of `patch` into `base`; objects merge, everything else replaces.
void merge(json& base, const json& patch)
{
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
            merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

void set_path(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;  // bare strings
    }
    json* node = &doc;
    std::stringstream ss(path);
    std::string key;
    std::vector<std::string> keys;
    while (std::getline(ss, key, '.'))
        keys.push_back(key);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        if (!node->contains(keys[i]) || !(*node)[keys[i]].is_object())
            (*node)[keys[i]] = json::object();
        node = &(*node)[keys[i]];
    }
    (*node)[keys.back()] = value;
}

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

template<typename T>
T get(const json& obj, const char* key, const std::string& where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": missing or wrong type");
    }
}

struct Experiment
{
    json config;  // effective config
    fs::path base_dir;
    RoomLayout layout;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    fs::path out;
    std::string config_hash;

    OptimizeOptions placement;
    std::optional<std::vector<int>> ids;
    FeatureSettings features;
    ForestParams forest;
    ChannelParams channel;
    WalkOptions walk;
    std::optional<AreaGrid> partition;
    Grouping grouping;
    std::string ranks;

    fs::path resolve(const std::string& p) const
    {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }

    std::string header() const
    {
        return std::string("# bfwloc ") + kToolVersion + " config=" + config_hash + " seed=" + std::to_string(seed);
    }

    json meta() const { return {{"tool", "bfwloc"}, {"version", kToolVersion}, {"config_hash", config_hash}, {"seed", seed}}; }
};

Experiment load_experiment(const std::string& config_path, const std::vector<std::string>& sets,
                           std::optional<std::uint64_t> seed, std::optional<unsigned> jobs,
                           std::optional<std::string> out)
{
    Experiment e;
    e.config = default_config();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in)
            throw ConfigError("cannot open config " + config_path);
        json user;
        try {
            user = json::parse(in);
        } catch (const json::parse_error& err) {
            throw ConfigError(std::string("malformed config: ") + err.what());
        }
        merge(e.config, user);
        e.base_dir = fs::path(config_path).parent_path();
    } else {
        e.base_dir = fs::current_path();
    }
    for (const std::string& s : sets)
        set_path(e.config, s);
    if (seed)
        e.config["seed"] = *seed;
    if (jobs)
        e.config["jobs"] = *jobs;
    if (out)
        e.config["out"] = *out;

    const json& c = e.config;
    try {
        if (!c.at("layout").is_string())
            throw ConfigError("layout: a layout file path is required");
        e.layout = load_layout(e.resolve(c["layout"].get<std::string>()).string());

        e.seed = get<std::uint64_t>(c, "seed", "config");
        const int j = get<int>(c, "jobs", "config");
        if (j < 1)
            throw ConfigError("jobs must be >= 1");
        e.jobs = static_cast<unsigned>(j);
        e.out = e.resolve(get<std::string>(c, "out", "config"));

        const json& pl = c.at("placement");
        e.placement.selected = get<int>(pl, "selected", "placement");
        e.placement.max_order = get<int>(pl, "max_order", "placement");
        if (e.placement.max_order < 0)
            throw ConfigError("placement.max_order must be >= 0");
        std::vector<double> w = pl.contains("weights") && !pl["weights"].is_null()
                                    ? get<std::vector<double>>(pl, "weights", "placement")
                                    : std::vector<double>{};
        if (w.size() > static_cast<std::size_t>(e.placement.max_order))
            w.resize(static_cast<std::size_t>(e.placement.max_order));
        while (w.size() < static_cast<std::size_t>(e.placement.max_order))
            w.push_back(w.empty() ? 1.0 : w.back());
        e.placement.weights = ReflectionWeights(w);
        e.placement.mode = parse_sign_mode(get<std::string>(pl, "mode", "placement"));
        e.placement.jobs = e.jobs;
        if (pl.contains("ids") && !pl["ids"].is_null()) {
            if (pl["ids"].is_string())
                e.ids = parse_ids(pl["ids"].get<std::string>());
            else
                e.ids = get<std::vector<int>>(pl, "ids", "placement");
        }

        const json& f = c.at("features");
        e.features.window = get<int>(f, "window", "features");
        e.features.phi_bits = get<int>(f, "phi_bits", "features");
        e.features.psi_bits = get<int>(f, "psi_bits", "features");
        if (e.features.window < 1)
            throw ConfigError("features.window must be >= 1");

        const json& fo = c.at("forest");
        e.forest.n_trees = get<int>(fo, "n_trees", "forest");
        e.forest.max_features = get<int>(fo, "max_features", "forest");
        e.forest.min_samples_split = get<int>(fo, "min_samples_split", "forest");
        e.forest.min_samples_leaf = get<int>(fo, "min_samples_leaf", "forest");
        if (fo.contains("max_depth") && !fo["max_depth"].is_null())
            e.forest.max_depth = get<int>(fo, "max_depth", "forest");
        e.forest.seed = derive_seed(e.seed, kForestStream);
        e.forest.jobs = e.jobs;

        const json& sc = c.at("scenario");
        e.channel = parse_channel_params(sc.contains("channel") ? sc["channel"] : json());
        e.channel.validate();
        const json& wk = sc.at("walk");
        e.walk.points_per_area = get<int>(wk, "points_per_area", "scenario.walk");
        e.walk.step = get<double>(wk, "step", "scenario.walk");
        e.walk.turn = get<double>(wk, "turn", "scenario.walk");
        e.walk.dwell = get<int>(wk, "dwell", "scenario.walk");
        e.walk.walks_per_area = get<int>(wk, "walks_per_area", "scenario.walk");

        const json& ev = c.at("eval");
        if (ev.contains("partition") && !ev["partition"].is_null()) {
            const json& p = ev["partition"];
            e.partition = AreaGrid::regular(e.layout.areas.bounds(), get<int>(p, "rows", "eval.partition"),
                                            get<int>(p, "cols", "eval.partition"));
        }
        const std::string grouping = get<std::string>(ev, "grouping", "eval");
        if (grouping == "per_area")
            e.grouping = Grouping::per_area();
        else if (grouping.rfind("chunks:", 0) == 0)
            e.grouping = Grouping::chunks(std::stoul(grouping.substr(7)));
        else
            throw ConfigError("eval.grouping: expected per_area or chunks:N");
        e.ranks = get<std::string>(ev, "ranks", "eval");
    } catch (const json::exception& err) {
        throw ConfigError(std::string("config: ") + err.what());
    }

    // The hash covers everything that can change results: the effective
    // config with the layout and scenario files inlined. jobs and out are
    // excluded since they do not affect any artifact.
    json canonical = e.config;
    canonical.erase("jobs");
    canonical.erase("out");
    canonical["layout"] = json::parse(layout_to_json(e.layout));
    for (const char* key : {"train", "test"}) {
        const json& v = e.config["scenario"][key];
        if (v.is_string())
            canonical["scenario"][key] = scenario_to_json(load_scenario(e.resolve(v.get<std::string>()).string()));
    }
    e.config_hash = hex(fnv1a(canonical.dump()));
    return e;
}

Scenario scenario_for(const Experiment& e, const char* key, std::uint64_t stream)
{
    const json& v = e.config["scenario"][key];
    if (v.is_string())
        return load_scenario(e.resolve(v.get<std::string>()).string());
    return generate_scenario(e.layout, e.channel, e.walk, derive_seed(e.seed, stream));
}

void ensure_out(const Experiment& e)
{
    std::error_code ec;
    fs::create_directories(e.out, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory " + e.out.string() + ": " + ec.message());
}

template<typename Writer>
void write_csv(const Experiment& e, const std::string& name, Writer&& writer)
{
    const fs::path path = e.out / name;
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << e.header() << '\n';
    writer(out);
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
    std::clog << "wrote " << path.string() << '\n';
}

void write_json(const Experiment& e, const std::string& name, const json& doc)
{
    const fs::path path = e.out / name;
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(1) << '\n';
    std::clog << "wrote " << path.string() << '\n';
}

std::vector<MetricResult> ranking_for(const Experiment& e)
{
    return optimize(e.layout, e.placement);
}

PlacementPattern chosen_pattern(const Experiment& e)
{
    if (e.ids)
        return make_pattern(static_cast<int>(e.layout.candidates.size()), *e.ids);
    const auto ranking = ranking_for(e);
    if (ranking.empty() || !ranking.front().feasible)
        throw std::runtime_error("no feasible placement pattern");
    return ranking.front().pattern;
}

LabeledDataset dataset(const Experiment& e, const PlacementPattern& pattern, const Scenario& s,
                       const FeatureSettings& features, std::uint64_t stream)
{
    LabeledDataset d = build_dataset(e.layout, pattern, s, features, derive_seed(e.seed, stream), e.jobs);
    return e.partition ? relabel(d, *e.partition) : d;
}

void write_report_files(const Experiment& e, const EvalReport& rep)
{
    for (const std::string& w : rep.warnings)
        std::clog << "warning: " << w << '\n';
    write_csv(e, "report.csv", [&](std::ostream& o) { write_report_csv(o, rep); });
    write_csv(e, "cdf.csv", [&](std::ostream& o) { write_cdf_csv(o, rep.cdf); });
    write_csv(e, "confusion.csv", [&](std::ostream& o) { write_confusion_csv(o, rep); });
    write_csv(e, "errors.csv", [&](std::ostream& o) {
        o << "i,true_area,error_x,error_y,error\n";
        for (std::size_t i = 0; i < rep.error_distances.size(); ++i)
            o << i << ',' << rep.true_labels[i] << ',' << format_double(rep.error_vectors[i].x) << ','
              << format_double(rep.error_vectors[i].y) << ',' << format_double(rep.error_distances[i]) << '\n';
    });
    bool grouped = true;
    std::vector<ErrorStats> stats;
    try {
        stats = error_statistics(rep, e.grouping);
    } catch (const ValidationError& err) {
        std::clog << "warning: error statistics skipped: " << err.what() << '\n';
        grouped = false;
    }
    if (grouped)
        write_csv(e, "error_stats.csv", [&](std::ostream& o) {
            o << "axis,mean,variance,theta,theta_mean,theta_variance,fitted_mean,fitted_variance,groups\n";
            for (const ErrorStats& s : stats)
                o << s.axis << ',' << format_double(s.mean) << ',' << format_double(s.variance) << ','
                  << format_double(s.theta) << ',' << format_double(s.theta_mean) << ','
                  << format_double(s.theta_variance) << ',' << format_double(s.fitted_mean) << ','
                  << format_double(s.fitted_variance) << ',' << s.group_theta.size() << '\n';
        });
    std::cout << "P_e " << format_double(rep.average_detection) << "  mean error " << format_double(rep.mean_error)
              << " m  (" << rep.error_distances.size() << " test samples)\n";
}

int cmd_optimize(const Experiment& e)
{
    ensure_out(e);
    const auto ranking = ranking_for(e);
    write_csv(e, "ranking.csv", [&](std::ostream& o) { write_ranking_csv(o, ranking); });
    std::cout << "rank  b     ids          s1    s2        s\n";
    for (std::size_t r = 0; r < std::min<std::size_t>(10, ranking.size()); ++r) {
        const MetricResult& m = ranking[r];
        std::printf("%-5zu %-5llu %-12s %-5ld %-9s %s\n", r + 1, static_cast<unsigned long long>(m.pattern.index),
                    format_ids(m.pattern.ids).c_str(), m.s1, format_double(m.s2).c_str(),
                    format_double(m.s).c_str());
    }
    return kOk;
}

int cmd_run(const Experiment& e)
{
    ensure_out(e);
    const PlacementPattern pattern = chosen_pattern(e);
    std::clog << "pattern " << format_ids(pattern.ids) << " (b=" << pattern.index << ")\n";
    const Scenario train = scenario_for(e, "train", kTrainWalkStream);
    const Scenario test = scenario_for(e, "test", kTestWalkStream);
    const LabeledDataset tr = dataset(e, pattern, train, e.features, 1);
    const LabeledDataset te = dataset(e, pattern, test, e.features, 2);
    const LocalizerModel model = train_localizer(tr, e.forest);
    std::clog << "training: classifier " << model.stats.classifier_seconds << " s, regression "
              << model.stats.regression_seconds << " s\n";
    write_json(e, "model.json",
               {{"meta", e.meta()},
                {"pattern", pattern.ids},
                {"features", {{"window", e.features.window}, {"phi_bits", e.features.phi_bits}, {"psi_bits", e.features.psi_bits}}},
                {"partition", e.partition ? json({{"rows", e.config["eval"]["partition"]["rows"]},
                                                  {"cols", e.config["eval"]["partition"]["cols"]}})
                                          : json(nullptr)},
                {"localizer", localizer_to_json(model)}});
    write_report_files(e, evaluate(model, te));
    return kOk;
}

int cmd_eval(const Experiment& e, const std::string& model_path, const std::string& test_path)
{
    ensure_out(e);
    std::ifstream in(model_path);
    if (!in)
        throw ConfigError("cannot open model " + model_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ConfigError(std::string("malformed model file: ") + err.what());
    }
    const LocalizerModel model = localizer_from_json(doc.at("localizer"));
    const PlacementPattern pattern =
        make_pattern(static_cast<int>(e.layout.candidates.size()), doc.at("pattern").get<std::vector<int>>());
    FeatureSettings features;
    features.window = doc.at("features").at("window");
    features.phi_bits = doc.at("features").at("phi_bits");
    features.psi_bits = doc.at("features").at("psi_bits");
    Experiment local = e;
    if (doc.contains("partition") && !doc["partition"].is_null())
        local.partition = AreaGrid::regular(e.layout.areas.bounds(), doc["partition"]["rows"], doc["partition"]["cols"]);
    else
        local.partition.reset();
    const Scenario test = test_path.empty() ? scenario_for(e, "test", kTestWalkStream) : load_scenario(test_path);
    const LabeledDataset te = dataset(local, pattern, test, features, 2);
    write_report_files(local, evaluate(model, te));
    return kOk;
}

int cmd_sweep(const Experiment& e)
{
    ensure_out(e);
    const auto ranking = ranking_for(e);
    SweepSettings s;
    s.features = e.features;
    s.forest = e.forest;
    s.ranks = e.ranks;
    s.seed = e.seed;
    s.jobs = e.jobs;
    s.partition = e.partition;
    const Scenario train = scenario_for(e, "train", kTrainWalkStream);
    const Scenario test = scenario_for(e, "test", kTestWalkStream);
    const auto rows = placement_sweep(e.layout, ranking, train, test, s);
    write_csv(e, "sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, rows); });
    const SweepSummary sum = summarize_sweep(rows);
    write_csv(e, "sweep_summary.csv", [&](std::ostream& o) {
        o << "statistic,value\n";
        o << "patterns," << rows.size() << '\n';
        o << "spearman_neg_s_pe," << format_double(sum.spearman_neg_s_pe) << '\n';
        o << "top_decile_pe," << format_double(sum.top_decile_pe) << '\n';
        o << "bottom_decile_pe," << format_double(sum.bottom_decile_pe) << '\n';
        o << "top_decile_mean_err," << format_double(sum.top_decile_error) << '\n';
        o << "bottom_decile_mean_err," << format_double(sum.bottom_decile_error) << '\n';
    });
    std::cout << rows.size() << " patterns, Spearman(-s, P_e) " << format_double(sum.spearman_neg_s_pe)
              << ", top decile P_e " << format_double(sum.top_decile_pe) << ", bottom decile P_e "
              << format_double(sum.bottom_decile_pe) << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Antenna placement and BFW-based device-free localization"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> out;
    std::string ids, ranks, model_path, test_path;
    std::optional<int> window, max_order;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "experiment config (JSON)");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--set", sets, "override a config key, e.g. features.window=1");
        sub->add_option("--max-order", max_order, "maximum reflection order");
    };
    CLI::App* opt = app.add_subcommand("optimize", "rank all antenna placement patterns");
    common(opt);
    CLI::App* run = app.add_subcommand("run", "build datasets, train and evaluate one pattern");
    common(run);
    run->add_option("--ids", ids, "candidate ids, e.g. 1-5-9-12 (default: best ranked)");
    run->add_option("--window", window, "concatenated snapshots U");
    CLI::App* sweep = app.add_subcommand("sweep", "train and evaluate ranked patterns");
    common(sweep);
    sweep->add_option("--ranks", ranks, "rank selector: all, top:K, bottom:K, stride:S, count:N, rank:R");
    sweep->add_option("--window", window, "concatenated snapshots U");
    CLI::App* ev = app.add_subcommand("eval", "score a saved model on a test scenario");
    common(ev);
    ev->add_option("--model", model_path, "model.json written by run")->required();
    ev->add_option("--test", test_path, "test scenario file (default: from config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    if (!ids.empty())
        sets.push_back("placement.ids=\"" + ids + "\"");
    if (!ranks.empty())
        sets.push_back("eval.ranks=\"" + ranks + "\"");
    if (window)
        sets.push_back("features.window=" + std::to_string(*window));
    if (max_order)
        sets.push_back("placement.max_order=" + std::to_string(*max_order));

    Experiment e;
    try {
        e = load_experiment(config_path, sets, seed, jobs, out);
    } catch (const std::exception& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return kConfigError;
    }

    const auto t0 = std::chrono::steady_clock::now();
    int code = kOk;
    std::string stage;
    try {
        if (opt->parsed()) {
            stage = "optimize";
            code = cmd_optimize(e);
        } else if (run->parsed()) {
            stage = "run";
            code = cmd_run(e);
        } else if (sweep->parsed()) {
            stage = "sweep";
            code = cmd_sweep(e);
        } else if (ev->parsed()) {
            stage = "eval";
            code = cmd_eval(e, model_path, test_path);
        }
    } catch (const ConfigError& err) {
        std::cerr << stage << ": config error: " << err.what() << '\n';
        return kConfigError;
    } catch (const ValidationError& err) {
        std::cerr << stage << ": invalid input: " << err.what() << '\n';
        return kConfigError;
    } catch (const std::exception& err) {
        std::cerr << stage << ": error: " << err.what() << '\n';
        return kRuntimeError;
    }
    std::clog << stage << " finished in " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
              << " s\n";
    return code;
}
