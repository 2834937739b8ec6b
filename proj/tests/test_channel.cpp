// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <complex>
#include <numbers>

#include "bfwloc/channel.hpp"
#include "helpers.hpp"

using namespace bfwloc;

namespace {

RoomLayout two_antenna_room()
{
    return parse_layout(R"({"room":{"width":6,"depth":4},
        "candidates":[{"id":1,"x":0.5,"y":1.0},{"id":2,"x":0.5,"y":3.0},{"id":3,"x":5.5,"y":0.5}],
        "sta":{"x":5.0,"y":2.0},"areas":{"grid":{"x0":1,"y0":0.5,"x1":5,"y1":3.5,"rows":2,"cols":4}}})");
}

ChannelParams los_only()
{
    ChannelParams p;
    p.reflection_order = 0;
    p.noise_std = 0.0;
    p.sta_antennas = 1;
    return p;
}

} // namespace

TEST_CASE("single line-of-sight path is analytic")
{
    const RoomLayout l = two_antenna_room();
    const ChannelParams p = los_only();
    const ChannelMatrix h = synthesize_channel(l, make_pattern(3, {1}), std::nullopt, p, 1);
    REQUIRE(h.subcarriers() == 52);
    const double d = distance(l.candidate(1).position, l.sta);
    for (int k = 0; k < h.subcarriers(); ++k) {
        const double f = p.center_frequency - 0.5 * p.bandwidth + (k + 0.5) * p.bandwidth / 52.0;
        const std::complex<double> expect = std::polar(1.0 / d, -2.0 * std::numbers::pi * f * d / kSpeedOfLight);
        const std::complex<double> got = h.per_subcarrier[static_cast<std::size_t>(k)](0, 0);
        CHECK(std::abs(got - expect) <= 1e-12 * std::abs(expect));
    }
}

TEST_CASE("a target on the line of sight attenuates it on every subcarrier")
{
    const RoomLayout l = two_antenna_room();
    ChannelParams p = los_only();
    p.target_scatter_gain = 0.0;
    const PlacementPattern pat = make_pattern(3, {1});
    const ChannelMatrix clear = synthesize_channel(l, pat, std::nullopt, p, 1);
    const Point mid = 0.5 * (l.candidate(1).position + l.sta);
    const ChannelMatrix blocked = synthesize_channel(l, pat, mid, p, 1);
    for (int k = 0; k < 52; ++k) {
        const auto a = clear.per_subcarrier[static_cast<std::size_t>(k)](0, 0);
        const auto b = blocked.per_subcarrier[static_cast<std::size_t>(k)](0, 0);
        CHECK(std::abs(b - p.target_block_loss * a) < 1e-12);
    }
}

TEST_CASE("a target never strengthens the line of sight term")
{
    const RoomLayout l = two_antenna_room();
    ChannelParams p = los_only();
    p.target_scatter_gain = 0.0;
    const PlacementPattern pat = make_pattern(3, {1, 2});
    const ChannelMatrix clear = synthesize_channel(l, pat, std::nullopt, p, 1);
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const Point target{6.0 * draw_unit(rng), 4.0 * draw_unit(rng)};
        const ChannelMatrix h = synthesize_channel(l, pat, target, p, 1);
        for (int k = 0; k < 52; ++k)
            for (int m = 0; m < 2; ++m)
                CHECK(std::abs(h.per_subcarrier[static_cast<std::size_t>(k)](0, m)) <=
                      std::abs(clear.per_subcarrier[static_cast<std::size_t>(k)](0, m)) + 1e-15);
    }
}

TEST_CASE("channel is deterministic in its seed")
{
    const RoomLayout l = two_antenna_room();
    const ChannelParams p;
    const PlacementPattern pat = make_pattern(3, {1, 3});
    const ChannelMatrix a = synthesize_channel(l, pat, Point{2.0, 2.0}, p, 42);
    const ChannelMatrix b = synthesize_channel(l, pat, Point{2.0, 2.0}, p, 42);
    const ChannelMatrix c = synthesize_channel(l, pat, Point{2.0, 2.0}, p, 43);
    for (int k = 0; k < 52; ++k) {
        CHECK(a.per_subcarrier[static_cast<std::size_t>(k)] == b.per_subcarrier[static_cast<std::size_t>(k)]);
        CHECK(a.per_subcarrier[static_cast<std::size_t>(k)] != c.per_subcarrier[static_cast<std::size_t>(k)]);
    }
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 2);
}

TEST_CASE("permuting the antennas permutes the columns")
{
    const RoomLayout l = two_antenna_room();
    ChannelParams p;
    p.noise_std = 0.0;
    const Point target{3.0, 2.5};
    PlacementPattern fwd = make_pattern(3, {1, 2, 3});
    PlacementPattern rev = fwd;
    rev.ids = {3, 1, 2};
    const ChannelMatrix a = synthesize_channel(l, fwd, target, p, 7);
    const ChannelMatrix b = synthesize_channel(l, rev, target, p, 7);
    for (int k = 0; k < 52; ++k) {
        const auto& ha = a.per_subcarrier[static_cast<std::size_t>(k)];
        const auto& hb = b.per_subcarrier[static_cast<std::size_t>(k)];
        CHECK(hb.col(0) == ha.col(2));
        CHECK(hb.col(1) == ha.col(0));
        CHECK(hb.col(2) == ha.col(1));
    }
}

TEST_CASE("moving the target across a beam changes the channel beyond the noise floor")
{
    const RoomLayout l = two_antenna_room();
    const ChannelParams p;
    const PlacementPattern pat = make_pattern(3, {1, 2});
    // One point on the antenna-1 line of sight, one far from every direct beam.
    const Point on_beam = 0.5 * (l.candidate(1).position + l.sta);
    const Point off_beam{1.5, 0.2};
    const ChannelMatrix a = synthesize_channel(l, pat, on_beam, p, 1);
    const ChannelMatrix b = synthesize_channel(l, pat, off_beam, p, 1);
    // Expected Frobenius norm of the noise alone over all elements.
    const double noise_floor = p.noise_std * std::sqrt(52.0 * 2 * 2);
    CHECK(std::abs(a.frobenius_norm() - b.frobenius_norm()) > 3.0 * noise_floor);
}

TEST_CASE("snapshot sequences")
{
    const RoomLayout l = two_antenna_room();
    ChannelParams p;
    const PlacementPattern pat = make_pattern(3, {1, 2});
    const auto one = snapshot_sequence(l, pat, {Point{2.0, 2.0}}, p, 9);
    REQUIRE(one.size() == 1);
    const ChannelMatrix direct = synthesize_channel(l, pat, Point{2.0, 2.0}, p, 9);
    for (int k = 0; k < 52; ++k)
        CHECK(one[0].per_subcarrier[static_cast<std::size_t>(k)] == direct.per_subcarrier[static_cast<std::size_t>(k)]);

    p.noise_std = 0.0;
    const std::vector<Point> still(5, Point{3.0, 1.0});
    const auto seq = snapshot_sequence(l, pat, still, p, 9);
    for (const auto& h : seq)
        for (int k = 0; k < 52; ++k)
            CHECK(h.per_subcarrier[static_cast<std::size_t>(k)] == seq[0].per_subcarrier[static_cast<std::size_t>(k)]);

    p.noise_std = 0.01;
    const std::vector<Point> walk{{2.0, 2.0}, {2.1, 2.0}, {2.2, 2.1}, {2.3, 2.2}};
    const auto serial = snapshot_sequence(l, pat, walk, p, 9, 1);
    const auto threaded = snapshot_sequence(l, pat, walk, p, 9, 3);
    for (std::size_t i = 0; i < walk.size(); ++i)
        for (int k = 0; k < 52; ++k)
            CHECK(serial[i].per_subcarrier[static_cast<std::size_t>(k)] == threaded[i].per_subcarrier[static_cast<std::size_t>(k)]);

    CHECK_THROWS_AS(snapshot_sequence(l, pat, {}, p, 9), ValidationError);
    CHECK_THROWS_AS(snapshot_sequence(l, pat, {Point{7.0, 1.0}}, p, 9), ValidationError);
}

TEST_CASE("station array is half a wavelength wide")
{
    const RoomLayout l = two_antenna_room();
    const ChannelParams p;
    const auto sta = sta_antenna_positions(l, p);
    REQUIRE(sta.size() == 2);
    CHECK(sta[1].x - sta[0].x == doctest::Approx(0.5 * p.wavelength()));
    CHECK(0.5 * (sta[0].x + sta[1].x) == doctest::Approx(l.sta.x));
}

TEST_CASE("channel parameter validation")
{
    ChannelParams p;
    p.target_block_loss = 1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.wall_reflection_loss = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.subcarriers = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}
