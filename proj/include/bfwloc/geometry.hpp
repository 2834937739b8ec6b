// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bfwloc {

// Raised for malformed or inconsistent input documents. The message names
// the offending field.
class ValidationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Length below which a segment/rectangle overlap is treated as a touch.
inline constexpr double kGeomEps = 1e-9;

struct Point
{
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
double distance(Point a, Point b);

// Distance from p to the closed segment [a, b].
double point_segment_distance(Point p, Point a, Point b);

struct Rect
{
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(Point p, double tol = 0.0) const
    {
        return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
    }
    Point center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

// Length of the part of segment [a, b] that runs through the open interior of
// `r`. Segments lying on an edge or touching a corner give 0.
double interior_overlap_length(Point a, Point b, const Rect& r);

struct Area
{
    int label = 0;
    Rect rect;
};

// Labeled, interior-disjoint axis-aligned rectangles. Labels are 1..R and the
// areas are stored sorted by label, so areas()[r - 1].label == r.
class AreaGrid
{
  public:
    AreaGrid() = default;
    explicit AreaGrid(std::vector<Area> areas);

    // rows x cols cells over `bounds`; row 0 is at bounds.y0, labels are
    // assigned row-major starting at 1.
    static AreaGrid regular(const Rect& bounds, int rows, int cols);

    std::size_t size() const { return areas_.size(); }
    const std::vector<Area>& areas() const { return areas_; }
    const Area& at(int label) const;
    Rect bounds() const;

    // Label of the area containing p (closed rectangles); points on a shared
    // edge resolve to the smallest label.
    std::optional<int> locate(Point p) const;

  private:
    std::vector<Area> areas_;
};

struct Candidate
{
    int id = 0;
    Point position;
};

struct RoomLayout
{
    Point origin;  // lower-left corner of the room
    double width = 0.0;
    double depth = 0.0;
    std::vector<Candidate> candidates;  // ids 1..count, stored in id order
    Point sta;
    AreaGrid areas;

    Rect room_rect() const { return {origin.x, origin.y, origin.x + width, origin.y + depth}; }
    const Candidate& candidate(int id) const;

    // Throws ValidationError if any invariant is violated.
    void validate() const;
};

RoomLayout parse_layout(std::string_view json_text);
RoomLayout load_layout(const std::string& path);
std::string layout_to_json(const RoomLayout& layout);

// Affine map from one cell of the unfolded (tiled) plane back to the room:
// room = (sx * X + tx, sy * Y + ty) with sx, sy in {+1, -1}.
struct Fold
{
    double sx = 1.0, tx = 0.0, sy = 1.0, ty = 0.0;

    Point apply(Point p) const { return {sx * p.x + tx, sy * p.y + ty}; }
    bool is_identity() const { return sx == 1.0 && sy == 1.0 && tx == 0.0 && ty == 0.0; }
};

// Index of a mirrored copy of the room in the tiled plane. Cell (0, 0) is the
// actual room; the reflection order of cell (i, j) is |i| + |j|.
struct Cell
{
    long i = 0;
    long j = 0;

    int order() const { return static_cast<int>((i < 0 ? -i : i) + (j < 0 ? -j : j)); }
    friend bool operator==(const Cell&, const Cell&) = default;
};

Fold cell_fold(const RoomLayout& layout, Cell cell);
Cell cell_of(const RoomLayout& layout, Point tiled);

struct MirrorImage
{
    int order = 0;
    Cell cell;
    Point point;  // position in the tiled plane
    Fold fold;    // maps `point` back to the source
};

// All images of `source` with reflection order <= max_order, ordered by
// (order, i, j). Images that coincide with a lower-order image (a source on a
// wall) are dropped.
std::vector<MirrorImage> mirror_images(const RoomLayout& layout, Point source, int max_order);

// For each area label r (index r - 1), the number of mirrored copies of area r
// whose open interior the tiled-plane segment [from, to] crosses with
// positive length. Each mirrored cell contributes at most 1 per area.
std::vector<int> segment_area_crossings(Point from, Point to, const RoomLayout& layout);

// A tiled-plane segment split at the cell walls it crosses, with every piece
// folded back into the room. Consecutive pieces share their endpoints.
struct FoldedPiece
{
    Cell cell;
    Point a;
    Point b;
};
std::vector<FoldedPiece> fold_segment(Point from, Point to, const RoomLayout& layout);

// Crossing counts c[order][label - 1] for one placement.
struct CrossingTensor
{
    int max_order = 0;
    int area_count = 0;
    std::vector<int> pattern_ids;
    std::vector<long> counts;  // row-major [order][label - 1]

    CrossingTensor() = default;
    CrossingTensor(int max_order, int area_count);

    long& at(int order, int label) { return counts[index(order, label)]; }
    long at(int order, int label) const { return counts[index(order, label)]; }
    long order_total(int order) const;

  private:
    std::size_t index(int order, int label) const;
};

} // namespace bfwloc
