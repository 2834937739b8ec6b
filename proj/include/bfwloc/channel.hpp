// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bfwloc/geometry.hpp"
#include "bfwloc/placement.hpp"

namespace bfwloc {

inline constexpr double kSpeedOfLight = 299792458.0;

// Synthetic propagation parameters. RF constants default to a 20 MHz,
// 52-tone channel at 5.18 GHz; the target interaction constants are model
// knobs, not measured quantities.
struct ChannelParams
{
    double center_frequency = 5.18e9;  // Hz
    double bandwidth = 20e6;           // Hz
    int subcarriers = 52;
    int sta_antennas = 2;
    int reflection_order = 2;
    double wall_reflection_loss = 0.6;  // amplitude per bounce, (0, 1]
    double target_scatter_gain = 0.3;
    double target_block_radius = 0.3;  // m
    double target_block_loss = 0.5;    // amplitude factor, [0, 1)
    double noise_std = 0.005;          // per complex element

    double wavelength() const { return kSpeedOfLight / center_frequency; }
    // Frequency of subcarrier k, 0-based.
    double subcarrier_frequency(int k) const;
    void validate() const;
};

// Per-subcarrier N x M complex matrices (rows: STA antennas, columns: AP
// antennas in pattern order).
struct ChannelMatrix
{
    std::vector<Eigen::MatrixXcd> per_subcarrier;

    int subcarriers() const { return static_cast<int>(per_subcarrier.size()); }
    Eigen::Index rows() const { return per_subcarrier.empty() ? 0 : per_subcarrier.front().rows(); }
    Eigen::Index cols() const { return per_subcarrier.empty() ? 0 : per_subcarrier.front().cols(); }
    double frobenius_norm() const;
};

// STA array: sta_antennas elements spaced half a wavelength along x,
// centred on the STA position.
std::vector<Point> sta_antenna_positions(const RoomLayout& layout, const ChannelParams& params);

ChannelMatrix synthesize_channel(const RoomLayout& layout, const PlacementPattern& pattern,
                                 std::optional<Point> target, const ChannelParams& params, std::uint64_t seed);

// One channel per trajectory point; snapshot p draws its noise from its own
// stream derived from (seed, p), so element 0 equals synthesize_channel(seed).
std::vector<ChannelMatrix> snapshot_sequence(const RoomLayout& layout, const PlacementPattern& pattern,
                                             const std::vector<Point>& trajectory, const ChannelParams& params,
                                             std::uint64_t seed, unsigned jobs = 1);

} // namespace bfwloc
