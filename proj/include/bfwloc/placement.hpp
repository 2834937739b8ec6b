// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bfwloc/geometry.hpp"

namespace bfwloc {

// A choice of M candidate positions. `ids` is strictly increasing; `index`
// is the rank of the combination in lexicographic enumeration order.
struct PlacementPattern
{
    std::vector<int> ids;
    std::uint64_t index = 0;

    friend bool operator==(const PlacementPattern&, const PlacementPattern&) = default;
};

std::string format_ids(const std::vector<int>& ids);  // "1-5-9-12"
std::vector<int> parse_ids(const std::string& text);  // accepts '-', ',' or ' ' separators

// Attenuation factors r_1..r_Xi applied to reflected crossings. r_0 = 1 is
// implicit.
class ReflectionWeights
{
  public:
    ReflectionWeights() = default;
    explicit ReflectionWeights(std::vector<double> weights);
    static ReflectionWeights uniform(int max_order, double value = 1.0);

    int max_order() const { return static_cast<int>(weights_.size()); }
    double operator[](int order) const;  // order in 1..max_order
    const std::vector<double>& values() const { return weights_; }

  private:
    std::vector<double> weights_;
};

// How the reflected term enters S2. `subtract` is the closed-form objective;
// `add` reproduces the worked example where all crossings are summed.
enum class SignMode
{
    subtract,
    add,
};

SignMode parse_sign_mode(const std::string& text);
const char* to_string(SignMode mode);

struct MetricResult
{
    PlacementPattern pattern;
    long s1 = 0;
    double s2 = 0.0;
    double s = 0.0;
    bool feasible = false;
};

// Crossing counts of beams traced from each selected antenna to every STA
// image of order <= max_order.
CrossingTensor beam_crossings(const RoomLayout& layout, const PlacementPattern& pattern, int max_order);

long metric_s1(const CrossingTensor& c);
double metric_s2(const CrossingTensor& c, const ReflectionWeights& w, SignMode mode = SignMode::subtract);
MetricResult score_pattern(const CrossingTensor& c, const PlacementPattern& pattern, const ReflectionWeights& w,
                           SignMode mode);

// n choose k as an exact integer; throws std::overflow_error past 2^64.
std::uint64_t binomial(int n, int k);

// Lexicographic stream of all k-subsets of {1..n}.
class PlacementEnumerator
{
  public:
    PlacementEnumerator(int candidate_count, int selected);

    std::uint64_t size() const { return size_; }
    std::optional<PlacementPattern> next();

  private:
    int n_;
    int k_;
    std::uint64_t size_;
    std::uint64_t emitted_ = 0;
    std::vector<int> current_;
};

std::vector<PlacementPattern> enumerate_placements(int candidate_count, int selected);

// Pattern with the given ids and its lexicographic index among C(n, k).
PlacementPattern make_pattern(int candidate_count, std::vector<int> ids);

struct OptimizeOptions
{
    int selected = 4;
    int max_order = 0;
    ReflectionWeights weights;
    SignMode mode = SignMode::subtract;
    unsigned jobs = 1;
};

// Exhaustive search. Feasible patterns (s1 > 0) come first, ascending by s,
// then by s1, then by ids; infeasible patterns follow in id order.
std::vector<MetricResult> optimize(const RoomLayout& layout, const OptimizeOptions& options);

// Columns: rank,b,ids,s1,s2,s,feasible
void write_ranking_csv(std::ostream& out, const std::vector<MetricResult>& ranking);

} // namespace bfwloc
