// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "bfwloc/geometry.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace bfwloc;

namespace {

RoomLayout unit_grid(int rows, int cols, double w = 2.0, double d = 2.0)
{
    nlohmann::json doc;
    doc["room"] = {{"width", w}, {"depth", d}};
    doc["candidates"] = {{{"id", 1}, {"x", 0.0}, {"y", 0.0}}};
    doc["sta"] = {{"x", w}, {"y", d}};
    doc["areas"]["grid"] = {{"x0", 0.0}, {"y0", 0.0}, {"x1", w}, {"y1", d}, {"rows", rows}, {"cols", cols}};
    return parse_layout(doc.dump());
}

std::vector<int> crossings(const RoomLayout& l, Point a, Point b) { return segment_area_crossings(a, b, l); }

} // namespace

TEST_CASE("default layout parses with twelve candidates and 32 areas")
{
    const RoomLayout l = load_layout(std::string(BFWLOC_SOURCE_DIR) + "/configs/default_layout.json");
    CHECK(l.candidates.size() == 12);
    CHECK(l.areas.size() == 32);
    CHECK(l.width == 8.0);
    CHECK(l.depth == 8.0);
}

TEST_CASE("minimal layout is valid")
{
    const RoomLayout l = parse_layout(R"({"room":{"width":1,"depth":1},"candidates":[{"id":1,"x":0,"y":0.5}],
        "sta":{"x":1,"y":0.5},"areas":{"rects":[{"label":1,"x0":0,"y0":0,"x1":1,"y1":1}]}})");
    CHECK(l.areas.size() == 1);
    CHECK(l.candidates.size() == 1);
}

TEST_CASE("layout validation names the offending field")
{
    const std::string dup = R"({"room":{"width":2,"depth":2},"candidates":[{"id":1,"x":0,"y":0}],"sta":{"x":1,"y":1},
        "areas":{"rects":[{"label":3,"x0":0,"y0":0,"x1":1,"y1":1},{"label":3,"x0":1,"y0":0,"x1":2,"y1":1}]}})";
    CHECK_THROWS_AS(parse_layout(dup), ValidationError);
    try {
        parse_layout(dup);
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("label") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_layout(R"({"room":{"width":2,"depth":2},"candidates":[{"id":1,"x":3,"y":0}],"sta":{"x":1,"y":1},
        "areas":{"grid":{"x0":0,"y0":0,"x1":2,"y1":2,"rows":1,"cols":1}}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_layout(R"({"room":{"width":2},"candidates":[],"sta":{"x":1,"y":1}})"), ValidationError);
    CHECK_THROWS_AS(parse_layout("not json"), ValidationError);
}

TEST_CASE("layout json round trip")
{
    Rng rng(5);
    const RoomLayout a = testing::random_layout(rng, 1.5, -2.0);
    const RoomLayout b = parse_layout(layout_to_json(a));
    CHECK(b.origin == a.origin);
    CHECK(b.width == a.width);
    CHECK(b.areas.size() == a.areas.size());
    CHECK(b.sta == a.sta);
    for (std::size_t i = 0; i < a.candidates.size(); ++i)
        CHECK(b.candidates[i].position == a.candidates[i].position);
}

TEST_CASE("mirror image counts")
{
    const RoomLayout l = unit_grid(2, 2, 3.0, 2.0);
    const Point src{0.7, 1.3};
    CHECK(mirror_images(l, src, 0).size() == 1);
    CHECK(mirror_images(l, src, 1).size() == 5);
    CHECK(mirror_images(l, src, 2).size() == 13);
    CHECK(mirror_images(l, src, 3).size() == 25);

    const auto zero = mirror_images(l, src, 0).front();
    CHECK(zero.order == 0);
    CHECK(zero.point == src);
    CHECK(zero.fold.is_identity());
}

TEST_CASE("mirror images agree with wall-by-wall reflection")
{
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const RoomLayout l = testing::random_layout(rng, trial % 2 ? 0.0 : -1.25, 0.5);
        const Point src = l.sta;
        for (int order = 0; order <= 3; ++order) {
            const auto ref = oracle::reflected_images(l, src, order);
            const auto got = mirror_images(l, src, order);
            REQUIRE(got.size() == ref.size());
            for (const auto& m : got) {
                const auto key = std::make_pair(std::llround(m.point.x * 1e6), std::llround(m.point.y * 1e6));
                REQUIRE(ref.count(key) == 1);
                CHECK(ref.at(key) == m.order);
                const Point back = m.fold.apply(m.point);
                CHECK(std::abs(back.x - src.x) < 1e-9);
                CHECK(std::abs(back.y - src.y) < 1e-9);
            }
        }
    }
}

TEST_CASE("source on a wall yields no duplicate images")
{
    const RoomLayout l = unit_grid(1, 1, 2.0, 2.0);
    const auto imgs = mirror_images(l, {0.0, 1.0}, 2);
    std::set<std::pair<long long, long long>> seen;
    for (const auto& m : imgs)
        CHECK(seen.emplace(std::llround(m.point.x * 1e9), std::llround(m.point.y * 1e9)).second);
    CHECK(imgs.size() < 13);
}

TEST_CASE("segment inside one area counts once")
{
    const RoomLayout l = unit_grid(2, 2);
    CHECK(crossings(l, {0.2, 0.2}, {0.8, 0.6}) == std::vector<int>{1, 0, 0, 0});
}

TEST_CASE("segment on a shared edge counts nothing")
{
    const RoomLayout l = unit_grid(2, 2);
    CHECK(crossings(l, {1.0, 0.1}, {1.0, 0.9}) == std::vector<int>{0, 0, 0, 0});
    CHECK(crossings(l, {0.0, 1.0}, {2.0, 1.0}) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("diagonal of a 2x2 grid touches off-diagonal cells only at the corner")
{
    const RoomLayout l = unit_grid(2, 2);
    CHECK(crossings(l, {0.0, 0.0}, {2.0, 2.0}) == std::vector<int>{1, 0, 0, 1});
}

TEST_CASE("zero-length segment crosses nothing")
{
    const RoomLayout l = unit_grid(2, 2);
    CHECK(crossings(l, {0.5, 0.5}, {0.5, 0.5}) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("a segment through two mirrored copies of the room counts each copy")
{
    const RoomLayout l = unit_grid(1, 1, 2.0, 2.0);
    // From inside the room to inside the right-hand mirror copy.
    CHECK(crossings(l, {1.0, 1.0}, {3.0, 1.0}) == std::vector<int>{2});
    CHECK(crossings(l, {1.0, 1.0}, {5.0, 1.0}) == std::vector<int>{3});
}

TEST_CASE("crossings match the sampling oracle on random layouts")
{
    Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        const RoomLayout l = testing::random_layout(rng);
        for (const auto& c : l.candidates) {
            for (const auto& img : mirror_images(l, l.sta, 2)) {
                const double len = distance(c.position, img.point);
                const long samples = std::max(10000L, static_cast<long>(20000.0 * len));
                CHECK(segment_area_crossings(c.position, img.point, l) ==
                      oracle::sampled_crossings(c.position, img.point, l, samples));
            }
        }
    }
}

TEST_CASE("crossings are translation invariant")
{
    Rng a(77), b(77);
    for (int trial = 0; trial < 10; ++trial) {
        const RoomLayout l0 = testing::random_layout(a);
        const RoomLayout l1 = testing::random_layout(b, 3.7, -1.3);
        const Point shift{3.7, -1.3};
        for (std::size_t k = 0; k < l0.candidates.size(); ++k) {
            const auto i0 = mirror_images(l0, l0.sta, 2);
            const auto i1 = mirror_images(l1, l1.sta, 2);
            REQUIRE(i0.size() == i1.size());
            for (std::size_t m = 0; m < i0.size(); ++m)
                CHECK(segment_area_crossings(l0.candidates[k].position, i0[m].point, l0) ==
                      segment_area_crossings(l1.candidates[k].position, i1[m].point, l1));
        }
        CHECK(l1.sta == l0.sta + shift);
    }
}

TEST_CASE("folded pieces stay in the room and break on walls")
{
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const RoomLayout l = testing::random_layout(rng);
        const Rect room = l.room_rect();
        for (const auto& img : mirror_images(l, l.sta, 2)) {
            const auto pieces = fold_segment(l.candidates.front().position, img.point, l);
            REQUIRE(!pieces.empty());
            for (std::size_t k = 0; k < pieces.size(); ++k) {
                CHECK(room.contains(pieces[k].a, 1e-9));
                CHECK(room.contains(pieces[k].b, 1e-9));
                if (k + 1 < pieces.size()) {
                    const Point v = pieces[k].b;
                    const bool on_wall = std::abs(v.x - room.x0) < 1e-9 || std::abs(v.x - room.x1) < 1e-9 ||
                                         std::abs(v.y - room.y0) < 1e-9 || std::abs(v.y - room.y1) < 1e-9;
                    CHECK(on_wall);
                }
            }
        }
    }
}

TEST_CASE("area locate resolves shared edges to the smaller label")
{
    const AreaGrid g = AreaGrid::regular({0, 0, 2, 2}, 2, 2);
    CHECK(g.locate({0.5, 0.5}) == 1);
    CHECK(g.locate({1.0, 0.5}) == 1);
    CHECK(g.locate({1.5, 1.5}) == 4);
    CHECK(!g.locate({2.5, 0.5}).has_value());
    CHECK(g.at(3).rect.y0 == 1.0);
}

TEST_CASE("interior overlap length")
{
    const Rect r{0, 0, 1, 1};
    CHECK(interior_overlap_length({-1, 0.5}, {2, 0.5}, r) == doctest::Approx(1.0));
    CHECK(interior_overlap_length({0, 0}, {0, 1}, r) == 0.0);
    CHECK(interior_overlap_length({1, 1}, {2, 2}, r) == 0.0);
}
