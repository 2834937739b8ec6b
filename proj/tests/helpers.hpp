// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "bfwloc/geometry.hpp"
#include "bfwloc/random.hpp"

namespace testing {

inline double round_to(double v, double step) { return std::round(v / step) * step; }

// Random layout on a 0.25 m lattice: room up to 5 m, one to three
// candidates, an up to 4x4 area grid somewhere inside.
inline bfwloc::RoomLayout random_layout(bfwloc::Rng& rng, double ox = 0.0, double oy = 0.0)
{
    using bfwloc::draw_index;
    const double w = 1.0 + 0.25 * static_cast<double>(draw_index(rng, 17));
    const double d = 1.0 + 0.25 * static_cast<double>(draw_index(rng, 17));
    auto coord = [&](double extent) { return 0.25 * static_cast<double>(draw_index(rng, static_cast<std::size_t>(extent / 0.25) + 1)); };
    double gx0 = coord(w), gx1 = coord(w), gy0 = coord(d), gy1 = coord(d);
    if (gx0 > gx1)
        std::swap(gx0, gx1);
    if (gy0 > gy1)
        std::swap(gy0, gy1);
    if (gx1 - gx0 < 0.25)
        gx0 = 0.0, gx1 = w;
    if (gy1 - gy0 < 0.25)
        gy0 = 0.0, gy1 = d;
    const int rows = 1 + static_cast<int>(draw_index(rng, 4));
    const int cols = 1 + static_cast<int>(draw_index(rng, 4));
    nlohmann::json doc;
    doc["room"] = {{"width", w}, {"depth", d}, {"x0", ox}, {"y0", oy}};
    const int cands = 1 + static_cast<int>(draw_index(rng, 3));
    for (int c = 1; c <= cands; ++c)
        doc["candidates"].push_back({{"id", c}, {"x", ox + w * bfwloc::draw_unit(rng)}, {"y", oy + d * bfwloc::draw_unit(rng)}});
    doc["sta"] = {{"x", ox + w * bfwloc::draw_unit(rng)}, {"y", oy + d * bfwloc::draw_unit(rng)}};
    doc["areas"]["grid"] = {{"x0", ox + gx0}, {"y0", oy + gy0}, {"x1", ox + gx1}, {"y1", oy + gy1}, {"rows", rows}, {"cols", cols}};
    return bfwloc::parse_layout(doc.dump());
}

inline std::string read_text(const std::string& path)
{
    std::string out;
    if (FILE* f = std::fopen(path.c_str(), "rb")) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0)
            out.append(buf, n);
        std::fclose(f);
    }
    return out;
}

} // namespace testing
