// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfwloc/channel.hpp"
#include "bfwloc/geometry.hpp"

namespace bfwloc {

class NumericalError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Beamforming weights: per subcarrier the first S = min(M, N) right singular
// vectors of H_k, an M x S matrix with orthonormal columns.
struct BfwMatrix
{
    std::vector<Eigen::MatrixXcd> per_subcarrier;

    int subcarriers() const { return static_cast<int>(per_subcarrier.size()); }
    Eigen::Index rows() const { return per_subcarrier.empty() ? 0 : per_subcarrier.front().rows(); }
    Eigen::Index cols() const { return per_subcarrier.empty() ? 0 : per_subcarrier.front().cols(); }
};

// Scales every column by a unit phase so its last element is real and
// non-negative.
void normalize_column_phases(Eigen::MatrixXcd& v);

BfwMatrix compute_bfw(const ChannelMatrix& h);

// Continuous Givens angles of one M x S matrix, in feedback order: for each
// column i, phi(i..M-2, i) then psi(i+1..M-1, i).
struct GivensAngles
{
    std::vector<double> phi;  // [0, 2*pi)
    std::vector<double> psi;  // [0, pi/2]
};

int givens_angle_count(int rows, int cols);  // number of phi (== number of psi)
GivensAngles givens_decompose(const Eigen::MatrixXcd& v);
Eigen::MatrixXcd givens_compose(int rows, int cols, const GivensAngles& angles);

// Uniform angle quantizers (802.11ac compressed beamforming grids).
std::uint32_t quantize_phi(double phi, int bits);
std::uint32_t quantize_psi(double psi, int bits);
double dequantize_phi(std::uint32_t code, int bits);
double dequantize_psi(std::uint32_t code, int bits);

struct CompressedBfw
{
    int rows = 0;  // M
    int cols = 0;  // S
    int phi_bits = 7;
    int psi_bits = 5;
    std::vector<std::vector<std::uint32_t>> phi;  // [subcarrier][angle]
    std::vector<std::vector<std::uint32_t>> psi;

    friend bool operator==(const CompressedBfw&, const CompressedBfw&) = default;
};

inline constexpr int kDefaultPhiBits = 7;
inline constexpr int kDefaultPsiBits = 5;

CompressedBfw compress_bfw(const BfwMatrix& v, int phi_bits = kDefaultPhiBits, int psi_bits = kDefaultPsiBits);
BfwMatrix reconstruct_bfw(const CompressedBfw& c);

// Flattened U-snapshot window ending at time instance p (1-based).
struct FeatureVector
{
    std::vector<double> values;
    long p = 0;
    std::optional<int> label;
    std::optional<Point> position;
};

// Layout: time (oldest first), then subcarrier, then column, then row; real
// part before imaginary part. Requires p >= U and sequence.size() >= p.
FeatureVector concatenate(std::span<const BfwMatrix> sequence, long p, int window);

// Inverse of the concatenate layout.
std::vector<BfwMatrix> unflatten(const FeatureVector& feature, int rows, int cols, int subcarriers, int window);

inline std::size_t feature_length(int rows, int cols, int subcarriers, int window)
{
    return 2u * static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) *
           static_cast<std::size_t>(subcarriers) * static_cast<std::size_t>(window);
}

// Dataset files: one record per feature, `p, area_label, x, y, values...`.
// Unlabeled fields are written as 0 / NaN.
void write_features_csv(std::ostream& out, const std::vector<FeatureVector>& features);
std::vector<FeatureVector> read_features_csv(std::istream& in);

// Packed little-endian binary: 16-byte header (magic "BFWD", uint32 version,
// uint64 doubles per record) followed by records of float64.
void write_features_binary(std::ostream& out, const std::vector<FeatureVector>& features);
std::vector<FeatureVector> read_features_binary(std::istream& in);

} // namespace bfwloc
