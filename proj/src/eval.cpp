// SPDX-License-Identifier: Apache-2.0
#include "bfwloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bfwloc/csv.hpp"
#include "bfwloc/parallel.hpp"
#include "bfwloc/random.hpp"

namespace bfwloc {

double EvalReport::accuracy() const
{
    long trace = 0, total = 0;
    for (std::size_t r = 0; r < confusion.size(); ++r)
        for (std::size_t c = 0; c < confusion[r].size(); ++c) {
            total += confusion[r][c];
            if (r == c)
                trace += confusion[r][c];
        }
    return total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    std::vector<CdfPoint> cdf;
    const auto n = static_cast<double>(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k + 1 < values.size() && values[k + 1] == values[k])
            continue;
        cdf.push_back({values[k], static_cast<double>(k + 1) / n});
    }
    return cdf;
}

EvalReport evaluate(const Predictor& model, const LabeledDataset& test)
{
    if (test.samples.empty())
        throw ValidationError("evaluate: empty test set");
    const int r_count = static_cast<int>(test.partition.size());
    EvalReport rep;
    rep.area_count = r_count;
    rep.confusion.assign(static_cast<std::size_t>(r_count), std::vector<long>(static_cast<std::size_t>(r_count), 0));

    for (const FeatureVector& f : test.samples) {
        if (!f.label || !f.position)
            throw ValidationError("evaluate: test sample without label or position");
        if (*f.label < 1 || *f.label > r_count)
            throw ValidationError("evaluate: test label " + std::to_string(*f.label) + " not in the partition");
        const Estimate e = model(f);
        if (e.area < 1 || e.area > r_count)
            throw ValidationError("evaluate: model returned area " + std::to_string(e.area) + " outside 1.." +
                                  std::to_string(r_count));
        ++rep.confusion[static_cast<std::size_t>(*f.label - 1)][static_cast<std::size_t>(e.area - 1)];
        const Point err = *f.position - e.point;
        rep.error_vectors.push_back(err);
        rep.error_distances.push_back(std::hypot(err.x, err.y));
        rep.true_labels.push_back(*f.label);
    }

    rep.per_area_detection.resize(static_cast<std::size_t>(r_count));
    double sum = 0.0;
    int present = 0;
    for (int r = 0; r < r_count; ++r) {
        const auto& row = rep.confusion[static_cast<std::size_t>(r)];
        const long n = std::accumulate(row.begin(), row.end(), 0L);
        if (n == 0) {
            rep.warnings.push_back("area " + std::to_string(r + 1) + " has no test samples; excluded from P_e");
            continue;
        }
        const double pr = static_cast<double>(row[static_cast<std::size_t>(r)]) / static_cast<double>(n);
        rep.per_area_detection[static_cast<std::size_t>(r)] = pr;
        sum += pr;
        ++present;
    }
    rep.average_detection = present > 0 ? sum / present : 0.0;
    rep.mean_error = std::accumulate(rep.error_distances.begin(), rep.error_distances.end(), 0.0) /
                     static_cast<double>(rep.error_distances.size());
    rep.cdf = empirical_cdf(rep.error_distances);
    return rep;
}

EvalReport evaluate(const LocalizerModel& model, const LabeledDataset& test)
{
    return evaluate([&](const FeatureVector& f) { return localize(model, f); }, test);
}

// ---------------------------------------------------------------------------

namespace {

struct Moments
{
    double mean = 0.0;
    double variance = 0.0;  // population
};

Moments moments(const std::vector<double>& v)
{
    Moments m;
    if (v.empty())
        return m;
    // Constant input is special-cased so the mean is exact and the variance 0.
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
        m.mean = v.front();
        return m;
    }
    for (double x : v)
        m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v)
        m.variance += (x - m.mean) * (x - m.mean);
    m.variance /= static_cast<double>(v.size());
    return m;
}

std::vector<HistogramBin> normalized_histogram(const std::vector<double>& v, int bins)
{
    if (v.empty())
        return {};
    if (bins <= 0)
        bins = static_cast<int>(std::ceil(std::log2(static_cast<double>(v.size())))) + 1;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / bins;
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b)
        out[static_cast<std::size_t>(b)] = {lo + b * width, b + 1 == bins ? hi : lo + (b + 1) * width, 0.0};
    for (double x : v) {
        auto b = static_cast<int>((x - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        out[static_cast<std::size_t>(b)].mass += 1.0;
    }
    for (auto& bin : out)
        bin.mass /= static_cast<double>(v.size());
    return out;
}

} // namespace

std::vector<ErrorStats> error_statistics(const EvalReport& report, const Grouping& grouping, int bins)
{
    const std::size_t n = report.error_vectors.size();
    std::vector<std::vector<std::size_t>> groups;
    if (grouping.kind == Grouping::Kind::per_area) {
        if (report.true_labels.size() != n)
            throw ValidationError("error_statistics: one true label per error is required");
        std::vector<std::vector<std::size_t>> by_area(static_cast<std::size_t>(std::max(report.area_count, 0)));
        for (std::size_t i = 0; i < n; ++i)
            if (report.true_labels[i] < 1 || report.true_labels[i] > report.area_count)
                throw ValidationError("error_statistics: true label " + std::to_string(report.true_labels[i]) +
                                      " outside 1.." + std::to_string(report.area_count));
        for (std::size_t i = 0; i < n; ++i)
            by_area[static_cast<std::size_t>(report.true_labels[i] - 1)].push_back(i);
        for (auto& g : by_area)
            if (!g.empty())
                groups.push_back(std::move(g));
    } else {
        if (grouping.chunk_size < 2)
            throw ValidationError("error_statistics: chunk size must be >= 2");
        for (std::size_t start = 0; start + grouping.chunk_size <= n; start += grouping.chunk_size) {
            std::vector<std::size_t> g(grouping.chunk_size);
            std::iota(g.begin(), g.end(), start);
            groups.push_back(std::move(g));
        }
    }
    if (groups.empty())
        throw ValidationError("error_statistics: no groups");
    for (const auto& g : groups)
        if (g.size() < 2)
            throw ValidationError("error_statistics: every group needs at least 2 errors");

    std::vector<ErrorStats> out;
    for (char axis : {'x', 'y'}) {
        auto component = [&](std::size_t i) {
            return axis == 'x' ? report.error_vectors[i].x : report.error_vectors[i].y;
        };
        ErrorStats st;
        st.axis = axis;
        std::vector<double> all(n);
        for (std::size_t i = 0; i < n; ++i)
            all[i] = component(i);
        const Moments m = moments(all);
        st.mean = m.mean;
        st.variance = m.variance;
        st.theta = m.variance;
        for (const auto& g : groups) {
            std::vector<double> vals;
            for (std::size_t i : g)
                vals.push_back(component(i));
            st.group_theta.push_back(moments(vals).variance);
        }
        const Moments tm = moments(st.group_theta);
        st.theta_mean = tm.mean;
        st.theta_variance = tm.variance;
        st.fitted_mean = tm.mean;
        st.fitted_variance = tm.variance;
        st.histogram = normalized_histogram(st.group_theta, bins);
        out.push_back(std::move(st));
    }
    return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw ValidationError("spearman: need two equal-length series of at least 2 values");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const Moments ma = moments(ra);
    const Moments mb = moments(rb);
    if (ma.variance == 0.0 || mb.variance == 0.0)
        return 0.0;
    double cov = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i)
        cov += (ra[i] - ma.mean) * (rb[i] - mb.mean);
    cov /= static_cast<double>(ra.size());
    return cov / std::sqrt(ma.variance * mb.variance);
}

std::vector<std::size_t> select_ranks(const std::string& selector, std::size_t total)
{
    std::vector<std::size_t> out;
    if (selector.empty() || selector == "all") {
        out.resize(total);
        std::iota(out.begin(), out.end(), std::size_t{1});
        return out;
    }
    std::stringstream ss(selector);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ValidationError("ranks: expected kind:value, got '" + item + "'");
        const std::string kind = item.substr(0, colon);
        std::size_t value = 0;
        try {
            value = static_cast<std::size_t>(std::stoul(item.substr(colon + 1)));
        } catch (const std::exception&) {
            throw ValidationError("ranks: bad number in '" + item + "'");
        }
        if (kind == "top") {
            for (std::size_t r = 1; r <= std::min(value, total); ++r)
                out.push_back(r);
        } else if (kind == "bottom") {
            for (std::size_t r = total - std::min(value, total) + 1; r <= total; ++r)
                out.push_back(r);
        } else if (kind == "stride") {
            if (value == 0)
                throw ValidationError("ranks: stride must be >= 1");
            for (std::size_t r = 1; r <= total; r += value)
                out.push_back(r);
        } else if (kind == "count") {
            const std::size_t n = std::min(value, total);
            for (std::size_t k = 0; k < n; ++k)
                out.push_back(n == 1 ? 1 : 1 + (k * (total - 1)) / (n - 1));
        } else if (kind == "rank") {
            if (value < 1 || value > total)
                throw ValidationError("ranks: rank " + std::to_string(value) + " out of range");
            out.push_back(value);
        } else {
            throw ValidationError("ranks: unknown selector '" + kind + "'");
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<SweepRow> placement_sweep(const RoomLayout& layout, const std::vector<MetricResult>& ranking,
                                      const Scenario& train, const Scenario& test, const SweepSettings& settings)
{
    const std::vector<std::size_t> ranks = select_ranks(settings.ranks, ranking.size());
    const std::uint64_t train_seed = derive_seed(settings.seed, 1);
    const std::uint64_t test_seed = derive_seed(settings.seed, 2);
    std::vector<SweepRow> rows(ranks.size());
    parallel_for(ranks.size(), settings.jobs, [&](std::size_t k) {
        const MetricResult& m = ranking[ranks[k] - 1];
        LabeledDataset tr = build_dataset(layout, m.pattern, train, settings.features, train_seed);
        LabeledDataset te = build_dataset(layout, m.pattern, test, settings.features, test_seed);
        if (settings.partition) {
            tr = relabel(tr, *settings.partition);
            te = relabel(te, *settings.partition);
        }
        ForestParams fp = settings.forest;
        fp.jobs = 1;
        const LocalizerModel model = train_localizer(tr, fp);
        const EvalReport rep = evaluate(model, te);
        rows[k] = {ranks[k], m, rep.average_detection, rep.mean_error};
    });
    return rows;
}

SweepSummary summarize_sweep(const std::vector<SweepRow>& rows)
{
    SweepSummary s;
    if (rows.empty())
        return s;
    std::vector<double> neg_s, pe;
    for (const SweepRow& r : rows) {
        neg_s.push_back(-r.metric.s);
        pe.push_back(r.pe);
    }
    s.spearman_neg_s_pe = rows.size() >= 2 ? spearman(neg_s, pe) : 0.0;
    const std::size_t decile = std::max<std::size_t>(1, rows.size() / 10);
    for (std::size_t k = 0; k < decile; ++k) {
        s.top_decile_pe += rows[k].pe;
        s.top_decile_error += rows[k].mean_error;
        s.bottom_decile_pe += rows[rows.size() - 1 - k].pe;
        s.bottom_decile_error += rows[rows.size() - 1 - k].mean_error;
    }
    const auto d = static_cast<double>(decile);
    s.top_decile_pe /= d;
    s.top_decile_error /= d;
    s.bottom_decile_pe /= d;
    s.bottom_decile_error /= d;
    return s;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows)
{
    out << "rank,b,ids,s1,s2,s,Pe,mean_err\n";
    for (const SweepRow& r : rows)
        out << r.rank << ',' << r.metric.pattern.index << ',' << format_ids(r.metric.pattern.ids) << ','
            << r.metric.s1 << ',' << format_double(r.metric.s2) << ',' << format_double(r.metric.s) << ','
            << format_double(r.pe) << ',' << format_double(r.mean_error) << '\n';
}

void write_cdf_csv(std::ostream& out, const std::vector<CdfPoint>& cdf)
{
    out << "epsilon,cum_prob\n";
    for (const CdfPoint& p : cdf)
        out << format_double(p.epsilon) << ',' << format_double(p.probability) << '\n';
}

void write_confusion_csv(std::ostream& out, const EvalReport& report)
{
    out << "true\\estimated";
    for (int c = 1; c <= report.area_count; ++c)
        out << ',' << c;
    out << '\n';
    for (int r = 1; r <= report.area_count; ++r) {
        out << r;
        for (long v : report.confusion[static_cast<std::size_t>(r - 1)])
            out << ',' << v;
        out << '\n';
    }
}

void write_report_csv(std::ostream& out, const EvalReport& report)
{
    out << "area,P_r,test_count\n";
    for (int r = 1; r <= report.area_count; ++r) {
        const auto& row = report.confusion[static_cast<std::size_t>(r - 1)];
        const long n = std::accumulate(row.begin(), row.end(), 0L);
        const auto& pr = report.per_area_detection[static_cast<std::size_t>(r - 1)];
        out << r << ',' << (pr ? format_double(*pr) : std::string("NA")) << ',' << n << '\n';
    }
    out << "Pe," << format_double(report.average_detection) << ",\n";
    out << "mean_err," << format_double(report.mean_error) << ",\n";
}

} // namespace bfwloc
