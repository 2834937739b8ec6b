// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "bfwloc/placement.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace bfwloc;

namespace {

RoomLayout walkthrough_layout() { return load_layout(std::string(BFWLOC_SOURCE_DIR) + "/tests/data/walkthrough_layout.json"); }

RoomLayout default_layout() { return load_layout(std::string(BFWLOC_SOURCE_DIR) + "/configs/default_layout.json"); }

CrossingTensor tensor(int max_order, std::vector<std::vector<long>> rows)
{
    CrossingTensor c(max_order, static_cast<int>(rows.front().size()));
    for (int o = 0; o <= max_order; ++o)
        for (std::size_t r = 0; r < rows[static_cast<std::size_t>(o)].size(); ++r)
            c.at(o, static_cast<int>(r) + 1) = rows[static_cast<std::size_t>(o)][r];
    return c;
}

} // namespace

TEST_CASE("four-area walkthrough counts and both sign conventions")
{
    const RoomLayout l = walkthrough_layout();
    const CrossingTensor c = beam_crossings(l, make_pattern(1, {1}), 2);
    CHECK(c.order_total(0) == 1);
    CHECK(c.order_total(1) == 3);
    CHECK(c.order_total(2) == 1);
    // Direct beam through d; first-order through d, b, a; second-order through a.
    CHECK(c.at(0, 4) == 1);
    CHECK(c.at(1, 1) == 1);
    CHECK(c.at(1, 2) == 1);
    CHECK(c.at(1, 4) == 1);
    CHECK(c.at(2, 1) == 1);
    const auto w = ReflectionWeights::uniform(2, 1.0);
    CHECK(metric_s2(c, w, SignMode::add) == 5.0);
    CHECK(metric_s2(c, w, SignMode::subtract) == -3.0);
}

TEST_CASE("s1 counts areas crossed by direct beams")
{
    CHECK(metric_s1(tensor(0, {{3, 0, 1, 0}})) == 2);
    CHECK(metric_s1(tensor(0, {{0, 0, 0, 0}})) == 0);
    CHECK(metric_s1(tensor(1, {{0, 0}, {4, 4}})) == 0);
}

TEST_CASE("s2 with no reflections is the direct total in either mode")
{
    const CrossingTensor c = tensor(0, {{3, 0, 1, 2}});
    const ReflectionWeights none;
    CHECK(metric_s2(c, none, SignMode::add) == 6.0);
    CHECK(metric_s2(c, none, SignMode::subtract) == 6.0);
}

TEST_CASE("scaling the weights rescales only the reflected term")
{
    const CrossingTensor c = tensor(2, {{2, 1}, {3, 0}, {1, 1}});
    const ReflectionWeights w({0.5, 0.25});
    const ReflectionWeights w2({0.25, 0.125});
    const double direct = 3.0;
    const double refl = 0.5 * 3 + 0.25 * 2;
    CHECK(metric_s2(c, w) == doctest::Approx(direct - refl));
    CHECK(metric_s2(c, w2) == doctest::Approx(direct - 0.5 * refl));
    CHECK(metric_s2(c, w2, SignMode::add) == doctest::Approx(direct + 0.5 * refl));
}

TEST_CASE("weights must be in (0, 1]")
{
    CHECK_THROWS_AS(ReflectionWeights({1.5}), ValidationError);
    CHECK_THROWS_AS(ReflectionWeights({0.0}), ValidationError);
    CHECK(ReflectionWeights::uniform(3, 0.5)[3] == 0.5);
}

TEST_CASE("binomial against factorials")
{
    Rng rng(9);
    for (int t = 0; t < 10; ++t) {
        const int n = 1 + static_cast<int>(draw_index(rng, 30));
        const int k = static_cast<int>(draw_index(rng, static_cast<std::size_t>(n) + 1));
        const auto expect = oracle::factorial(n) / (oracle::factorial(k) * oracle::factorial(n - k));
        CHECK(binomial(n, k) == static_cast<std::uint64_t>(expect));
    }
    CHECK(binomial(12, 4) == 495);
    CHECK_THROWS_AS(binomial(200, 100), std::overflow_error);
}

TEST_CASE("enumeration is lexicographic and complete")
{
    const auto all = enumerate_placements(12, 4);
    CHECK(all.size() == 495);
    for (std::size_t b = 0; b < all.size(); ++b)
        CHECK(all[b].index == b);
    CHECK(std::is_sorted(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.ids < b.ids; }));

    const auto five = enumerate_placements(5, 2);
    CHECK(five.size() == 10);
    CHECK(five.front().ids == std::vector<int>{1, 2});
    CHECK(five.back().ids == std::vector<int>{4, 5});

    const auto one = enumerate_placements(4, 4);
    REQUIRE(one.size() == 1);
    CHECK(one.front().ids == std::vector<int>{1, 2, 3, 4});
    CHECK_THROWS_AS(enumerate_placements(3, 4), ValidationError);
}

TEST_CASE("make_pattern recovers the enumeration index")
{
    const auto all = enumerate_placements(7, 3);
    for (const auto& p : all)
        CHECK(make_pattern(7, p.ids) == p);
    CHECK_THROWS_AS(make_pattern(7, {3, 3, 4}), ValidationError);
}

TEST_CASE("pattern id text")
{
    CHECK(format_ids({1, 5, 9, 12}) == "1-5-9-12");
    CHECK(parse_ids("1-5-9-12") == std::vector<int>{1, 5, 9, 12});
    CHECK(parse_ids("2, 3 7") == std::vector<int>{2, 3, 7});
}

TEST_CASE("antenna at the station crosses nothing")
{
    RoomLayout l = walkthrough_layout();
    l.candidates.front().position = l.sta;
    const CrossingTensor c = beam_crossings(l, make_pattern(1, {1}), 0);
    CHECK(c.order_total(0) == 0);
}

TEST_CASE("direct crossings on a 3x3 grid match the sampling oracle")
{
    Rng rng(31);
    for (int t = 0; t < 10; ++t) {
        nlohmann::json doc;
        doc["room"] = {{"width", 3.0}, {"depth", 3.0}};
        for (int c = 1; c <= 3; ++c)
            doc["candidates"].push_back({{"id", c}, {"x", 3.0 * draw_unit(rng)}, {"y", 3.0 * draw_unit(rng)}});
        doc["sta"] = {{"x", 3.0 * draw_unit(rng)}, {"y", 3.0 * draw_unit(rng)}};
        doc["areas"]["grid"] = {{"x0", 0}, {"y0", 0}, {"x1", 3}, {"y1", 3}, {"rows", 3}, {"cols", 3}};
        const RoomLayout l = parse_layout(doc.dump());
        const CrossingTensor c = beam_crossings(l, make_pattern(3, {1, 2, 3}), 0);
        std::vector<long> expect(9, 0);
        for (const auto& cand : l.candidates) {
            const auto s = oracle::sampled_crossings(cand.position, l.sta, l, 100000);
            for (std::size_t r = 0; r < 9; ++r)
                expect[r] += s[r];
        }
        for (int r = 1; r <= 9; ++r)
            CHECK(c.at(0, r) == expect[static_cast<std::size_t>(r - 1)]);
    }
}

TEST_CASE("direct crossings are bounded by M times R")
{
    const RoomLayout l = default_layout();
    for (const auto& p : enumerate_placements(12, 4)) {
        const CrossingTensor c = beam_crossings(l, p, 0);
        CHECK(c.order_total(0) <= 4 * 32);
        CHECK(metric_s1(c) <= 32);
    }
}

TEST_CASE("optimize ranks feasible patterns by s and is consistent")
{
    const RoomLayout l = default_layout();
    OptimizeOptions o;
    o.max_order = 0;
    const auto ranking = optimize(l, o);
    REQUIRE(ranking.size() == 495);

    std::set<std::uint64_t> seen;
    double best = 0.0;
    bool have = false;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const auto& m = ranking[i];
        CHECK(seen.insert(m.pattern.index).second);
        const CrossingTensor c = beam_crossings(l, m.pattern, 0);
        CHECK(m.s1 == metric_s1(c));
        CHECK(m.s2 == metric_s2(c, o.weights));
        CHECK(m.feasible == (m.s1 > 0));
        if (m.feasible)
            CHECK(m.s == static_cast<double>(m.s1) * m.s2);
        if (m.feasible && (!have || m.s < best)) {
            best = m.s;
            have = true;
        }
        if (i > 0 && ranking[i - 1].feasible && m.feasible) {
            const auto& a = ranking[i - 1];
            CHECK((a.s < m.s || (a.s == m.s && (a.s1 < m.s1 || (a.s1 == m.s1 && a.pattern.ids < m.pattern.ids)))));
        }
        if (i > 0 && !ranking[i - 1].feasible)
            CHECK(!m.feasible);
    }
    CHECK(ranking.front().s == best);
}

TEST_CASE("optimize with every candidate selected returns one pattern")
{
    OptimizeOptions o;
    o.selected = 12;
    CHECK(optimize(default_layout(), o).size() == 1);
    o.selected = 13;
    CHECK_THROWS_AS(optimize(default_layout(), o), ValidationError);
}

TEST_CASE("infeasible patterns still get a total ranking")
{
    // Areas in a corner that no direct beam reaches.
    const RoomLayout l = parse_layout(R"({"room":{"width":4,"depth":4},
        "candidates":[{"id":1,"x":0,"y":4},{"id":2,"x":1,"y":4},{"id":3,"x":2,"y":4}],"sta":{"x":3,"y":4},
        "areas":{"grid":{"x0":0,"y0":0,"x1":1,"y1":1,"rows":1,"cols":2}}})");
    OptimizeOptions o;
    o.selected = 2;
    const auto r = optimize(l, o);
    CHECK(r.size() == 3);
    for (const auto& m : r)
        CHECK(!m.feasible);
    CHECK(r[0].pattern.ids < r[1].pattern.ids);
    CHECK(r[1].pattern.ids < r[2].pattern.ids);
}

TEST_CASE("reflections change the default ranking")
{
    const RoomLayout l = default_layout();
    OptimizeOptions a;
    OptimizeOptions b;
    b.max_order = 1;
    b.weights = ReflectionWeights::uniform(1, 1.0);
    CHECK(optimize(l, a).front().pattern.ids != optimize(l, b).front().pattern.ids);
}

TEST_CASE("optimize does not depend on the job count")
{
    const RoomLayout l = default_layout();
    OptimizeOptions o;
    o.max_order = 1;
    o.weights = ReflectionWeights::uniform(1, 1.0);
    const auto a = optimize(l, o);
    o.jobs = 4;
    const auto b = optimize(l, o);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].pattern == b[i].pattern);
}

TEST_CASE("unused extra candidates keep the relative order")
{
    RoomLayout l = default_layout();
    l.candidates.resize(8);
    RoomLayout wider = l;
    wider.candidates.push_back({9, {0.0, 0.0}});
    OptimizeOptions o;
    o.max_order = 1;
    o.weights = ReflectionWeights::uniform(1, 1.0);
    const auto a = optimize(l, o);
    std::vector<std::vector<int>> kept;
    for (const auto& m : optimize(wider, o))
        if (std::find(m.pattern.ids.begin(), m.pattern.ids.end(), 9) == m.pattern.ids.end())
            kept.push_back(m.pattern.ids);
    REQUIRE(kept.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(kept[i] == a[i].pattern.ids);
}

TEST_CASE("ranking csv")
{
    OptimizeOptions o;
    o.selected = 11;
    std::ostringstream out;
    write_ranking_csv(out, optimize(default_layout(), o));
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "rank,b,ids,s1,s2,s,feasible");
    int rows = 0;
    while (std::getline(in, line))
        ++rows;
    CHECK(rows == 12);
}
