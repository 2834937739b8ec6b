// SPDX-License-Identifier: Apache-2.0
#include "bfwloc/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "bfwloc/csv.hpp"
#include "bfwloc/parallel.hpp"

namespace bfwloc {

std::string format_ids(const std::vector<int>& ids)
{
    std::string out;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (k)
            out += '-';
        out += std::to_string(ids[k]);
    }
    return out;
}

std::vector<int> parse_ids(const std::string& text)
{
    std::string cleaned = text;
    std::replace_if(cleaned.begin(), cleaned.end(), [](char c) { return c == '-' || c == ','; }, ' ');
    std::istringstream in(cleaned);
    std::vector<int> ids;
    int v = 0;
    while (in >> v)
        ids.push_back(v);
    if (!in.eof())
        throw ValidationError("pattern ids: cannot parse '" + text + "'");
    return ids;
}

ReflectionWeights::ReflectionWeights(std::vector<double> weights) : weights_(std::move(weights))
{
    for (double w : weights_)
        if (!(w > 0.0 && w <= 1.0))
            throw ValidationError("reflection weights must lie in (0, 1]");
}

ReflectionWeights ReflectionWeights::uniform(int max_order, double value)
{
    return ReflectionWeights(std::vector<double>(static_cast<std::size_t>(std::max(0, max_order)), value));
}

double ReflectionWeights::operator[](int order) const
{
    if (order == 0)
        return 1.0;
    return weights_.at(static_cast<std::size_t>(order - 1));
}

SignMode parse_sign_mode(const std::string& text)
{
    if (text == "subtract")
        return SignMode::subtract;
    if (text == "add")
        return SignMode::add;
    throw ValidationError("sign mode must be 'subtract' or 'add', got '" + text + "'");
}

const char* to_string(SignMode mode)
{
    return mode == SignMode::add ? "add" : "subtract";
}

CrossingTensor beam_crossings(const RoomLayout& layout, const PlacementPattern& pattern, int max_order)
{
    if (max_order < 0)
        throw std::invalid_argument("beam_crossings: max_order must be >= 0");
    CrossingTensor tensor(max_order, static_cast<int>(layout.areas.size()));
    tensor.pattern_ids = pattern.ids;
    const std::vector<MirrorImage> images = mirror_images(layout, layout.sta, max_order);
    for (int id : pattern.ids) {
        if (id < 1 || id > static_cast<int>(layout.candidates.size()))
            throw ValidationError("pattern references unknown candidate id " + std::to_string(id));
        const Point antenna = layout.candidate(id).position;
        for (const MirrorImage& image : images) {
            const std::vector<int> counts = segment_area_crossings(antenna, image.point, layout);
            for (std::size_t r = 0; r < counts.size(); ++r)
                tensor.at(image.order, static_cast<int>(r) + 1) += counts[r];
        }
    }
    return tensor;
}

long metric_s1(const CrossingTensor& c)
{
    long s1 = 0;
    for (int r = 1; r <= c.area_count; ++r)
        s1 += c.at(0, r) > 0 ? 1 : 0;
    return s1;
}

double metric_s2(const CrossingTensor& c, const ReflectionWeights& w, SignMode mode)
{
    if (w.max_order() > c.max_order)
        throw std::invalid_argument("metric_s2: weights cover more orders than the crossing tensor");
    const double sign = mode == SignMode::add ? 1.0 : -1.0;
    double s2 = static_cast<double>(c.order_total(0));
    for (int order = 1; order <= w.max_order(); ++order)
        s2 += sign * w[order] * static_cast<double>(c.order_total(order));
    return s2;
}

MetricResult score_pattern(const CrossingTensor& c, const PlacementPattern& pattern, const ReflectionWeights& w,
                           SignMode mode)
{
    MetricResult m;
    m.pattern = pattern;
    m.s1 = metric_s1(c);
    m.s2 = metric_s2(c, w, mode);
    m.s = static_cast<double>(m.s1) * m.s2;
    m.feasible = m.s1 > 0;
    return m;
}

std::uint64_t binomial(int n, int k)
{
    if (k < 0 || n < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (int i = 1; i <= k; ++i) {
        // result * (n - k + i) / i stays integral at every step.
        const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
        const std::uint64_t g = std::gcd(result, static_cast<std::uint64_t>(i));
        const std::uint64_t r = result / g;
        const std::uint64_t den = static_cast<std::uint64_t>(i) / g;
        if (r > std::numeric_limits<std::uint64_t>::max() / num)
            throw std::overflow_error("binomial coefficient overflows 64 bits");
        result = r * num / den;
    }
    return result;
}

PlacementEnumerator::PlacementEnumerator(int candidate_count, int selected)
    : n_(candidate_count), k_(selected), size_(0)
{
    if (selected < 1 || selected > candidate_count)
        throw ValidationError("placement: need 1 <= M <= candidate count (M=" + std::to_string(selected) +
                              ", candidates=" + std::to_string(candidate_count) + ")");
    size_ = binomial(n_, k_);
}

std::optional<PlacementPattern> PlacementEnumerator::next()
{
    if (emitted_ == size_)
        return std::nullopt;
    if (current_.empty()) {
        current_.resize(static_cast<std::size_t>(k_));
        for (int i = 0; i < k_; ++i)
            current_[static_cast<std::size_t>(i)] = i + 1;
    } else {
        int i = k_ - 1;
        while (current_[static_cast<std::size_t>(i)] == n_ - k_ + i + 1)
            --i;
        ++current_[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k_; ++j)
            current_[static_cast<std::size_t>(j)] = current_[static_cast<std::size_t>(j - 1)] + 1;
    }
    return PlacementPattern{current_, emitted_++};
}

std::vector<PlacementPattern> enumerate_placements(int candidate_count, int selected)
{
    PlacementEnumerator e(candidate_count, selected);
    std::vector<PlacementPattern> out;
    out.reserve(static_cast<std::size_t>(e.size()));
    while (auto p = e.next())
        out.push_back(std::move(*p));
    return out;
}

PlacementPattern make_pattern(int candidate_count, std::vector<int> ids)
{
    std::sort(ids.begin(), ids.end());
    const int k = static_cast<int>(ids.size());
    if (k < 1 || k > candidate_count)
        throw ValidationError("pattern: need between 1 and " + std::to_string(candidate_count) + " ids");
    for (int i = 0; i < k; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 1 || id > candidate_count)
            throw ValidationError("pattern: unknown candidate id " + std::to_string(id));
        if (i > 0 && id == ids[static_cast<std::size_t>(i - 1)])
            throw ValidationError("pattern: duplicate candidate id " + std::to_string(id));
    }
    // Lexicographic rank: count the combinations that precede `ids`.
    std::uint64_t index = 0;
    int prev = 0;
    for (int i = 0; i < k; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        for (int v = prev + 1; v < id; ++v)
            index += binomial(candidate_count - v, k - i - 1);
        prev = id;
    }
    return {std::move(ids), index};
}

std::vector<MetricResult> optimize(const RoomLayout& layout, const OptimizeOptions& options)
{
    if (options.max_order < 0)
        throw ValidationError("placement: max reflection order must be >= 0");
    if (options.weights.max_order() > options.max_order)
        throw ValidationError("placement: more reflection weights than the maximum reflection order");
    const std::vector<PlacementPattern> patterns =
        enumerate_placements(static_cast<int>(layout.candidates.size()), options.selected);

    std::vector<MetricResult> results(patterns.size());
    parallel_for(patterns.size(), options.jobs, [&](std::size_t b) {
        const CrossingTensor c = beam_crossings(layout, patterns[b], options.max_order);
        results[b] = score_pattern(c, patterns[b], options.weights, options.mode);
    });

    std::sort(results.begin(), results.end(), [](const MetricResult& a, const MetricResult& b) {
        if (a.feasible != b.feasible)
            return a.feasible;
        if (a.feasible) {
            if (a.s != b.s)
                return a.s < b.s;
            if (a.s1 != b.s1)
                return a.s1 < b.s1;
        }
        return a.pattern.ids < b.pattern.ids;
    });
    return results;
}

void write_ranking_csv(std::ostream& out, const std::vector<MetricResult>& ranking)
{
    out << "rank,b,ids,s1,s2,s,feasible\n";
    for (std::size_t k = 0; k < ranking.size(); ++k) {
        const MetricResult& m = ranking[k];
        out << k + 1 << ',' << m.pattern.index << ',' << format_ids(m.pattern.ids) << ',' << m.s1 << ','
            << format_double(m.s2) << ',' << format_double(m.s) << ',' << (m.feasible ? 1 : 0) << '\n';
    }
}

} // namespace bfwloc
