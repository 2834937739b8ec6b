// SPDX-License-Identifier: Apache-2.0
#include "bfwloc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "bfwloc/parallel.hpp"
#include "bfwloc/random.hpp"

namespace bfwloc {

namespace {

// Scatter legs shorter than this are clamped; a target standing on an
// antenna would otherwise produce an unbounded gain.
constexpr double kMinScatterLeg = 0.1;

struct Path
{
    double amplitude;
    double delay;
};

bool passes_near(const RoomLayout& layout, Point from, Point to, Point target, double radius)
{
    for (const FoldedPiece& piece : fold_segment(from, to, layout))
        if (point_segment_distance(target, piece.a, piece.b) < radius)
            return true;
    return false;
}

ChannelMatrix synthesize_with_stream(const RoomLayout& layout, const PlacementPattern& pattern,
                                     std::optional<Point> target, const ChannelParams& params,
                                     std::uint64_t stream_seed)
{
    const std::vector<Point> sta = sta_antenna_positions(layout, params);
    const auto n_rx = static_cast<Eigen::Index>(sta.size());
    const auto n_tx = static_cast<Eigen::Index>(pattern.ids.size());

    // Gather every path for every antenna pair once; evaluating the
    // subcarriers is then a sum of phasors.
    std::vector<std::vector<Path>> paths(static_cast<std::size_t>(n_rx * n_tx));
    for (Eigen::Index n = 0; n < n_rx; ++n) {
        const std::vector<MirrorImage> images = mirror_images(layout, sta[static_cast<std::size_t>(n)],
                                                              params.reflection_order);
        for (Eigen::Index m = 0; m < n_tx; ++m) {
            const Point antenna = layout.candidate(pattern.ids[static_cast<std::size_t>(m)]).position;
            auto& list = paths[static_cast<std::size_t>(n * n_tx + m)];
            for (const MirrorImage& image : images) {
                const double d = distance(antenna, image.point);
                if (d <= 0.0)
                    continue;
                double a = std::pow(params.wall_reflection_loss, image.order) / d;
                if (target && passes_near(layout, antenna, image.point, *target, params.target_block_radius))
                    a *= params.target_block_loss;
                list.push_back({a, d / kSpeedOfLight});
            }
            if (target) {
                const double d1 = std::max(distance(antenna, *target), kMinScatterLeg);
                const double d2 = std::max(distance(*target, sta[static_cast<std::size_t>(n)]), kMinScatterLeg);
                list.push_back({params.target_scatter_gain / (d1 * d2), (d1 + d2) / kSpeedOfLight});
            }
        }
    }

    Rng rng(stream_seed);
    const double sigma = params.noise_std / std::numbers::sqrt2;
    ChannelMatrix h;
    h.per_subcarrier.reserve(static_cast<std::size_t>(params.subcarriers));
    for (int k = 0; k < params.subcarriers; ++k) {
        const double f = params.subcarrier_frequency(k);
        Eigen::MatrixXcd hk(n_rx, n_tx);
        for (Eigen::Index n = 0; n < n_rx; ++n) {
            for (Eigen::Index m = 0; m < n_tx; ++m) {
                std::complex<double> acc{0.0, 0.0};
                for (const Path& p : paths[static_cast<std::size_t>(n * n_tx + m)])
                    acc += std::polar(p.amplitude, -2.0 * std::numbers::pi * f * p.delay);
                hk(n, m) = acc;
            }
        }
        if (params.noise_std > 0.0) {
            // Noise is drawn in a fixed (k, n, m) order.
            for (Eigen::Index n = 0; n < n_rx; ++n)
                for (Eigen::Index m = 0; m < n_tx; ++m) {
                    const double re = draw_normal(rng);
                    const double im = draw_normal(rng);
                    hk(n, m) += std::complex<double>(sigma * re, sigma * im);
                }
        }
        h.per_subcarrier.push_back(std::move(hk));
    }
    return h;
}

} // namespace

double ChannelParams::subcarrier_frequency(int k) const
{
    return center_frequency - 0.5 * bandwidth + (static_cast<double>(k) + 0.5) * bandwidth / subcarriers;
}

void ChannelParams::validate() const
{
    if (!(center_frequency > 0.0))
        throw ValidationError("params.center_frequency must be positive");
    if (!(bandwidth > 0.0))
        throw ValidationError("params.bandwidth must be positive");
    if (subcarriers < 1)
        throw ValidationError("params.subcarriers must be >= 1");
    if (sta_antennas < 1)
        throw ValidationError("params.sta_antennas must be >= 1");
    if (reflection_order < 0)
        throw ValidationError("params.reflection_order must be >= 0");
    if (!(wall_reflection_loss > 0.0 && wall_reflection_loss <= 1.0))
        throw ValidationError("params.wall_reflection_loss must lie in (0, 1]");
    if (!(target_block_loss >= 0.0 && target_block_loss < 1.0))
        throw ValidationError("params.target_block_loss must lie in [0, 1)");
    if (!(target_block_radius >= 0.0))
        throw ValidationError("params.target_block_radius must be >= 0");
    if (!(target_scatter_gain >= 0.0))
        throw ValidationError("params.target_scatter_gain must be >= 0");
    if (!(noise_std >= 0.0))
        throw ValidationError("params.noise_std must be >= 0");
}

double ChannelMatrix::frobenius_norm() const
{
    double sum = 0.0;
    for (const auto& hk : per_subcarrier)
        sum += hk.squaredNorm();
    return std::sqrt(sum);
}

std::vector<Point> sta_antenna_positions(const RoomLayout& layout, const ChannelParams& params)
{
    const double spacing = 0.5 * params.wavelength();
    const double first = -0.5 * spacing * (params.sta_antennas - 1);
    std::vector<Point> out;
    for (int n = 0; n < params.sta_antennas; ++n) {
        Point p{layout.sta.x + first + n * spacing, layout.sta.y};
        const Rect room = layout.room_rect();
        p.x = std::clamp(p.x, room.x0, room.x1);
        out.push_back(p);
    }
    return out;
}

ChannelMatrix synthesize_channel(const RoomLayout& layout, const PlacementPattern& pattern,
                                 std::optional<Point> target, const ChannelParams& params, std::uint64_t seed)
{
    params.validate();
    if (target && !layout.room_rect().contains(*target, kGeomEps))
        throw ValidationError("target position outside the room");
    return synthesize_with_stream(layout, pattern, target, params, derive_seed(seed, 0));
}

std::vector<ChannelMatrix> snapshot_sequence(const RoomLayout& layout, const PlacementPattern& pattern,
                                             const std::vector<Point>& trajectory, const ChannelParams& params,
                                             std::uint64_t seed, unsigned jobs)
{
    params.validate();
    if (trajectory.empty())
        throw ValidationError("trajectory must not be empty");
    for (const Point& p : trajectory)
        if (!layout.room_rect().contains(p, kGeomEps))
            throw ValidationError("trajectory point outside the room");
    std::vector<ChannelMatrix> out(trajectory.size());
    parallel_for(trajectory.size(), jobs, [&](std::size_t p) {
        out[p] = synthesize_with_stream(layout, pattern, trajectory[p], params, derive_seed(seed, p));
    });
    return out;
}

} // namespace bfwloc
