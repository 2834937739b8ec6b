// SPDX-License-Identifier: Apache-2.0
#include "bfwloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace bfwloc {

using nlohmann::json;

double distance(Point a, Point b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double point_segment_distance(Point p, Point a, Point b)
{
    const Point d = b - a;
    const double len2 = d.x * d.x + d.y * d.y;
    if (len2 == 0.0)
        return distance(p, a);
    const double t = std::clamp(((p.x - a.x) * d.x + (p.y - a.y) * d.y) / len2, 0.0, 1.0);
    return distance(p, a + t * d);
}

double interior_overlap_length(Point a, Point b, const Rect& r)
{
    // Liang-Barsky clip against the closed rectangle. A segment parallel to an
    // axis must lie strictly between the two bounding lines of that axis,
    // otherwise it runs along an edge and has no interior overlap.
    double t_lo = 0.0;
    double t_hi = 1.0;
    const double d[2] = {b.x - a.x, b.y - a.y};
    const double p0[2] = {a.x, a.y};
    const double lo[2] = {r.x0, r.y0};
    const double hi[2] = {r.x1, r.y1};
    for (int k = 0; k < 2; ++k) {
        if (d[k] == 0.0) {
            if (!(p0[k] > lo[k] + kGeomEps && p0[k] < hi[k] - kGeomEps))
                return 0.0;
            continue;
        }
        double t0 = (lo[k] - p0[k]) / d[k];
        double t1 = (hi[k] - p0[k]) / d[k];
        if (t0 > t1)
            std::swap(t0, t1);
        t_lo = std::max(t_lo, t0);
        t_hi = std::min(t_hi, t1);
        if (t_lo >= t_hi)
            return 0.0;
    }
    const double len = (t_hi - t_lo) * std::hypot(d[0], d[1]);
    return len > kGeomEps ? len : 0.0;
}

// ---------------------------------------------------------------------------
// AreaGrid

AreaGrid::AreaGrid(std::vector<Area> areas) : areas_(std::move(areas))
{
    std::sort(areas_.begin(), areas_.end(), [](const Area& a, const Area& b) { return a.label < b.label; });
    for (std::size_t k = 0; k < areas_.size(); ++k) {
        const Area& a = areas_[k];
        if (k > 0 && a.label == areas_[k - 1].label)
            throw ValidationError("areas: duplicate label " + std::to_string(a.label));
        if (a.label != static_cast<int>(k) + 1)
            throw ValidationError("areas: labels must be contiguous from 1, missing label " + std::to_string(k + 1));
        if (!(a.rect.x1 > a.rect.x0) || !(a.rect.y1 > a.rect.y0))
            throw ValidationError("areas: rectangle of label " + std::to_string(a.label) + " is empty or inverted");
    }
    for (std::size_t p = 0; p < areas_.size(); ++p) {
        for (std::size_t q = p + 1; q < areas_.size(); ++q) {
            const Rect& u = areas_[p].rect;
            const Rect& v = areas_[q].rect;
            const double ox = std::min(u.x1, v.x1) - std::max(u.x0, v.x0);
            const double oy = std::min(u.y1, v.y1) - std::max(u.y0, v.y0);
            if (ox > kGeomEps && oy > kGeomEps)
                throw ValidationError("areas: labels " + std::to_string(areas_[p].label) + " and " +
                                      std::to_string(areas_[q].label) + " overlap");
        }
    }
}

AreaGrid AreaGrid::regular(const Rect& bounds, int rows, int cols)
{
    if (rows < 1 || cols < 1)
        throw ValidationError("areas.grid: rows and cols must be >= 1");
    if (!(bounds.x1 > bounds.x0) || !(bounds.y1 > bounds.y0))
        throw ValidationError("areas.grid: empty bounds");
    std::vector<Area> areas;
    areas.reserve(static_cast<std::size_t>(rows) * cols);
    const double w = (bounds.x1 - bounds.x0) / cols;
    const double h = (bounds.y1 - bounds.y0) / rows;
    for (int row = 0; row < rows; ++row) {
        for (int col = 0; col < cols; ++col) {
            // Outer edges are taken from the bounds so the grid tiles exactly.
            const double x0 = bounds.x0 + col * w;
            const double x1 = col + 1 == cols ? bounds.x1 : bounds.x0 + (col + 1) * w;
            const double y0 = bounds.y0 + row * h;
            const double y1 = row + 1 == rows ? bounds.y1 : bounds.y0 + (row + 1) * h;
            areas.push_back({row * cols + col + 1, {x0, y0, x1, y1}});
        }
    }
    return AreaGrid(std::move(areas));
}

const Area& AreaGrid::at(int label) const
{
    if (label < 1 || label > static_cast<int>(areas_.size()))
        throw std::out_of_range("unknown area label " + std::to_string(label));
    return areas_[static_cast<std::size_t>(label - 1)];
}

Rect AreaGrid::bounds() const
{
    if (areas_.empty())
        return {};
    Rect b = areas_.front().rect;
    for (const Area& a : areas_) {
        b.x0 = std::min(b.x0, a.rect.x0);
        b.y0 = std::min(b.y0, a.rect.y0);
        b.x1 = std::max(b.x1, a.rect.x1);
        b.y1 = std::max(b.y1, a.rect.y1);
    }
    return b;
}

std::optional<int> AreaGrid::locate(Point p) const
{
    for (const Area& a : areas_)
        if (a.rect.contains(p, kGeomEps))
            return a.label;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// RoomLayout

const Candidate& RoomLayout::candidate(int id) const
{
    if (id < 1 || id > static_cast<int>(candidates.size()))
        throw std::out_of_range("unknown candidate id " + std::to_string(id));
    return candidates[static_cast<std::size_t>(id - 1)];
}

void RoomLayout::validate() const
{
    if (!(width > 0.0) || !std::isfinite(width))
        throw ValidationError("room.width must be a positive number");
    if (!(depth > 0.0) || !std::isfinite(depth))
        throw ValidationError("room.depth must be a positive number");
    const Rect room = room_rect();
    if (candidates.empty())
        throw ValidationError("candidates: at least one candidate is required");
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const Candidate& c = candidates[k];
        if (c.id != static_cast<int>(k) + 1)
            throw ValidationError("candidates: ids must be unique and contiguous from 1 (offending id " +
                                  std::to_string(c.id) + ")");
        if (!room.contains(c.position, kGeomEps))
            throw ValidationError("candidates[" + std::to_string(c.id) + "]: position outside the room");
    }
    if (!room.contains(sta, kGeomEps))
        throw ValidationError("sta: position outside the room");
    if (areas.size() == 0)
        throw ValidationError("areas: at least one area is required");
    for (const Area& a : areas.areas())
        if (!room.contains({a.rect.x0, a.rect.y0}, kGeomEps) || !room.contains({a.rect.x1, a.rect.y1}, kGeomEps))
            throw ValidationError("areas: label " + std::to_string(a.label) + " extends outside the room");
}

namespace {

double number_field(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        throw ValidationError(where + "." + key + ": missing");
    const json& v = obj.at(key);
    if (!v.is_number())
        throw ValidationError(where + "." + key + ": expected a number");
    return v.get<double>();
}

int int_field(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        throw ValidationError(where + "." + key + ": missing");
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ValidationError(where + "." + key + ": expected an integer");
    return v.get<int>();
}

} // namespace

RoomLayout parse_layout(std::string_view json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("layout: malformed JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ValidationError("layout: top level must be an object");

    RoomLayout layout;
    if (!doc.contains("room"))
        throw ValidationError("room: missing");
    const json& room = doc["room"];
    layout.width = number_field(room, "width", "room");
    layout.depth = number_field(room, "depth", "room");
    if (room.contains("x0"))
        layout.origin.x = number_field(room, "x0", "room");
    if (room.contains("y0"))
        layout.origin.y = number_field(room, "y0", "room");

    if (!doc.contains("candidates") || !doc["candidates"].is_array())
        throw ValidationError("candidates: missing or not an array");
    std::set<int> seen;
    for (const json& c : doc["candidates"]) {
        Candidate cand;
        cand.id = int_field(c, "id", "candidates[]");
        const std::string where = "candidates[" + std::to_string(cand.id) + "]";
        cand.position = {number_field(c, "x", where), number_field(c, "y", where)};
        if (!seen.insert(cand.id).second)
            throw ValidationError("candidates: duplicate id " + std::to_string(cand.id));
        layout.candidates.push_back(cand);
    }
    std::sort(layout.candidates.begin(), layout.candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.id < b.id; });

    if (!doc.contains("sta"))
        throw ValidationError("sta: missing");
    layout.sta = {number_field(doc["sta"], "x", "sta"), number_field(doc["sta"], "y", "sta")};

    if (!doc.contains("areas") || !doc["areas"].is_object())
        throw ValidationError("areas: missing or not an object");
    const json& areas = doc["areas"];
    if (areas.contains("grid") == areas.contains("rects"))
        throw ValidationError("areas: exactly one of 'grid' or 'rects' is required");
    if (areas.contains("grid")) {
        const json& g = areas["grid"];
        const Rect bounds{number_field(g, "x0", "areas.grid"), number_field(g, "y0", "areas.grid"),
                          number_field(g, "x1", "areas.grid"), number_field(g, "y1", "areas.grid")};
        layout.areas = AreaGrid::regular(bounds, int_field(g, "rows", "areas.grid"), int_field(g, "cols", "areas.grid"));
    } else {
        if (!areas["rects"].is_array())
            throw ValidationError("areas.rects: expected an array");
        std::vector<Area> rects;
        for (const json& r : areas["rects"]) {
            Area a;
            a.label = int_field(r, "label", "areas.rects[]");
            const std::string where = "areas.rects[" + std::to_string(a.label) + "]";
            a.rect = {number_field(r, "x0", where), number_field(r, "y0", where), number_field(r, "x1", where),
                      number_field(r, "y1", where)};
            rects.push_back(a);
        }
        layout.areas = AreaGrid(std::move(rects));
    }
    layout.validate();
    return layout;
}

RoomLayout load_layout(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("layout: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_layout(ss.str());
}

std::string layout_to_json(const RoomLayout& layout)
{
    json doc;
    doc["room"] = {{"width", layout.width}, {"depth", layout.depth}};
    if (layout.origin.x != 0.0 || layout.origin.y != 0.0) {
        doc["room"]["x0"] = layout.origin.x;
        doc["room"]["y0"] = layout.origin.y;
    }
    doc["candidates"] = json::array();
    for (const Candidate& c : layout.candidates)
        doc["candidates"].push_back({{"id", c.id}, {"x", c.position.x}, {"y", c.position.y}});
    doc["sta"] = {{"x", layout.sta.x}, {"y", layout.sta.y}};
    json rects = json::array();
    for (const Area& a : layout.areas.areas())
        rects.push_back({{"label", a.label}, {"x0", a.rect.x0}, {"y0", a.rect.y0}, {"x1", a.rect.x1}, {"y1", a.rect.y1}});
    doc["areas"] = {{"rects", rects}};
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Image method

namespace {

// Fold of one axis: tiled coordinate X in cell `i` of size `len` starting at
// `o` maps to o + (X - o - i*len) for even i and o + ((i+1)*len - (X - o)) for
// odd i.
void axis_fold(long i, double len, double o, double& s, double& t)
{
    if (i % 2 == 0) {
        s = 1.0;
        t = -static_cast<double>(i) * len;
    } else {
        s = -1.0;
        t = static_cast<double>(i + 1) * len + 2.0 * o;
    }
}

} // namespace

Fold cell_fold(const RoomLayout& layout, Cell cell)
{
    Fold f;
    axis_fold(cell.i, layout.width, layout.origin.x, f.sx, f.tx);
    axis_fold(cell.j, layout.depth, layout.origin.y, f.sy, f.ty);
    return f;
}

Cell cell_of(const RoomLayout& layout, Point tiled)
{
    return {static_cast<long>(std::floor((tiled.x - layout.origin.x) / layout.width)),
            static_cast<long>(std::floor((tiled.y - layout.origin.y) / layout.depth))};
}

std::vector<MirrorImage> mirror_images(const RoomLayout& layout, Point source, int max_order)
{
    if (max_order < 0)
        throw std::invalid_argument("mirror_images: max_order must be >= 0");
    std::vector<MirrorImage> out;
    for (int order = 0; order <= max_order; ++order) {
        for (long i = -order; i <= order; ++i) {
            const long rest = order - (i < 0 ? -i : i);
            const long js[2] = {-rest, rest};
            for (int k = 0; k < (rest == 0 ? 1 : 2); ++k) {
                const Cell cell{i, js[k]};
                const Fold f = cell_fold(layout, cell);
                // The fold is an involution per axis, so it also maps the
                // source into the cell.
                const Point img{(source.x - f.tx) * f.sx, (source.y - f.ty) * f.sy};
                const bool duplicate = std::any_of(out.begin(), out.end(), [&](const MirrorImage& m) {
                    return std::abs(m.point.x - img.x) <= kGeomEps && std::abs(m.point.y - img.y) <= kGeomEps;
                });
                if (!duplicate)
                    out.push_back({order, cell, img, f});
            }
        }
    }
    return out;
}

std::vector<FoldedPiece> fold_segment(Point from, Point to, const RoomLayout& layout)
{
    const Point d = to - from;
    std::vector<double> cuts{0.0, 1.0};
    const double lo[2] = {layout.origin.x, layout.origin.y};
    const double len[2] = {layout.width, layout.depth};
    const double a[2] = {from.x, from.y};
    const double b[2] = {to.x, to.y};
    const double dd[2] = {d.x, d.y};
    for (int k = 0; k < 2; ++k) {
        if (dd[k] == 0.0)
            continue;
        const double c0 = (std::min(a[k], b[k]) - lo[k]) / len[k];
        const double c1 = (std::max(a[k], b[k]) - lo[k]) / len[k];
        for (double w = std::ceil(c0); w <= std::floor(c1); w += 1.0) {
            const double t = (lo[k] + w * len[k] - a[k]) / dd[k];
            if (t > 0.0 && t < 1.0)
                cuts.push_back(t);
        }
    }
    std::sort(cuts.begin(), cuts.end());

    std::vector<FoldedPiece> pieces;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double t0 = cuts[k];
        const double t1 = cuts[k + 1];
        if (t1 - t0 <= 0.0)
            continue;
        const Point p0 = from + t0 * d;
        const Point p1 = from + t1 * d;
        const Cell cell = cell_of(layout, from + (0.5 * (t0 + t1)) * d);
        const Fold f = cell_fold(layout, cell);
        pieces.push_back({cell, f.apply(p0), f.apply(p1)});
    }
    if (pieces.empty()) {
        // Zero-length segment.
        const Cell cell = cell_of(layout, from);
        const Fold f = cell_fold(layout, cell);
        pieces.push_back({cell, f.apply(from), f.apply(from)});
    }
    return pieces;
}

std::vector<int> segment_area_crossings(Point from, Point to, const RoomLayout& layout)
{
    std::vector<int> counts(layout.areas.size(), 0);
    for (const FoldedPiece& piece : fold_segment(from, to, layout))
        for (const Area& area : layout.areas.areas())
            if (interior_overlap_length(piece.a, piece.b, area.rect) > 0.0)
                ++counts[static_cast<std::size_t>(area.label - 1)];
    return counts;
}

// ---------------------------------------------------------------------------

CrossingTensor::CrossingTensor(int max_order, int area_count)
    : max_order(max_order), area_count(area_count),
      counts(static_cast<std::size_t>(max_order + 1) * static_cast<std::size_t>(area_count), 0)
{
}

std::size_t CrossingTensor::index(int order, int label) const
{
    if (order < 0 || order > max_order || label < 1 || label > area_count)
        throw std::out_of_range("CrossingTensor index out of range");
    return static_cast<std::size_t>(order) * static_cast<std::size_t>(area_count) + static_cast<std::size_t>(label - 1);
}

long CrossingTensor::order_total(int order) const
{
    long total = 0;
    for (int r = 1; r <= area_count; ++r)
        total += at(order, r);
    return total;
}

} // namespace bfwloc
