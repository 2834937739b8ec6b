// SPDX-License-Identifier: Apache-2.0
#include "bfwloc/feedback.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/SVD>

#include "bfwloc/csv.hpp"

namespace bfwloc {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Singular values closer than this (relative) are treated as tied.
constexpr double kTieTolerance = 1e-12;
constexpr double kOrthonormalTolerance = 1e-6;

bool lexicographically_greater(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b)
{
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i).real() != b(i).real())
            return a(i).real() > b(i).real();
        if (a(i).imag() != b(i).imag())
            return a(i).imag() > b(i).imag();
    }
    return false;
}

double wrap_two_pi(double a)
{
    a = std::fmod(a, kTwoPi);
    if (a < 0.0)
        a += kTwoPi;
    return a >= kTwoPi ? 0.0 : a;
}

} // namespace

void normalize_column_phases(Eigen::MatrixXcd& v)
{
    const Eigen::Index last = v.rows() - 1;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const cd e = v(last, c);
        const double mag = std::abs(e);
        if (mag > 0.0)
            v.col(c) *= std::conj(e) / mag;
        v(last, c) = cd(std::abs(v(last, c)), 0.0);
    }
}

BfwMatrix compute_bfw(const ChannelMatrix& h)
{
    BfwMatrix out;
    out.per_subcarrier.reserve(h.per_subcarrier.size());
    for (std::size_t k = 0; k < h.per_subcarrier.size(); ++k) {
        const Eigen::MatrixXcd& hk = h.per_subcarrier[k];
        if (!hk.allFinite())
            throw NumericalError("compute_bfw: non-finite channel at subcarrier " + std::to_string(k));
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(hk, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.info() != Eigen::Success)
            throw NumericalError("compute_bfw: SVD did not converge at subcarrier " + std::to_string(k));

        const Eigen::Index m = hk.cols();
        const Eigen::Index s = std::min(hk.rows(), hk.cols());
        Eigen::MatrixXcd v = svd.matrixV();
        normalize_column_phases(v);

        // Order by descending singular value; tied values by the
        // lexicographically larger normalized column.
        const Eigen::VectorXd& sv = svd.singularValues();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i)
            order[static_cast<std::size_t>(i)] = i;
        auto sigma = [&](Eigen::Index i) { return i < sv.size() ? sv(i) : 0.0; };
        const double scale = std::max(sigma(0), std::numeric_limits<double>::min());
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            const double diff = sigma(a) - sigma(b);
            if (std::abs(diff) > kTieTolerance * scale)
                return diff > 0.0;
            return lexicographically_greater(v.col(a), v.col(b));
        });

        Eigen::MatrixXcd vk(m, s);
        for (Eigen::Index c = 0; c < s; ++c)
            vk.col(c) = v.col(order[static_cast<std::size_t>(c)]);
        out.per_subcarrier.push_back(std::move(vk));
    }
    return out;
}

int givens_angle_count(int rows, int cols)
{
    int count = 0;
    for (int i = 0; i < std::min(cols, rows - 1); ++i)
        count += rows - 1 - i;
    return count;
}

GivensAngles givens_decompose(const Eigen::MatrixXcd& v)
{
    const Eigen::Index m = v.rows();
    const Eigen::Index s = v.cols();
    Eigen::MatrixXcd omega = v;
    normalize_column_phases(omega);

    GivensAngles out;
    for (Eigen::Index i = 0; i < std::min(s, m - 1); ++i) {
        for (Eigen::Index k = i; k < m - 1; ++k) {
            const double phi = wrap_two_pi(std::arg(omega(k, i)));
            out.phi.push_back(phi);
            omega.row(k) *= std::polar(1.0, -phi);
        }
        for (Eigen::Index l = i + 1; l < m; ++l) {
            const double a = omega(i, i).real();
            const double b = omega(l, i).real();
            const double psi = std::clamp(std::atan2(b, a), 0.0, std::numbers::pi / 2);
            out.psi.push_back(psi);
            const double c = std::cos(psi);
            const double sn = std::sin(psi);
            const Eigen::RowVectorXcd ri = omega.row(i);
            const Eigen::RowVectorXcd rl = omega.row(l);
            omega.row(i) = c * ri + sn * rl;
            omega.row(l) = -sn * ri + c * rl;
        }
    }
    return out;
}

Eigen::MatrixXcd givens_compose(int rows, int cols, const GivensAngles& angles)
{
    const int expected = givens_angle_count(rows, cols);
    if (static_cast<int>(angles.phi.size()) != expected || static_cast<int>(angles.psi.size()) != expected)
        throw ValidationError("givens_compose: expected " + std::to_string(expected) + " phi and psi angles");

    Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(rows, cols);
    // Undo the decomposition steps in reverse order.
    int phi_end = expected;
    int psi_end = expected;
    for (int i = std::min(cols, rows - 1) - 1; i >= 0; --i) {
        const int n = rows - 1 - i;
        for (int l = rows - 1; l > i; --l) {
            const double psi = angles.psi[static_cast<std::size_t>(psi_end - n + (l - i - 1))];
            const double c = std::cos(psi);
            const double sn = std::sin(psi);
            const Eigen::RowVectorXcd ri = x.row(i);
            const Eigen::RowVectorXcd rl = x.row(l);
            x.row(i) = c * ri - sn * rl;
            x.row(l) = sn * ri + c * rl;
        }
        for (int k = i; k < rows - 1; ++k)
            x.row(k) *= std::polar(1.0, angles.phi[static_cast<std::size_t>(phi_end - n + (k - i))]);
        phi_end -= n;
        psi_end -= n;
    }
    return x;
}

std::uint32_t quantize_phi(double phi, int bits)
{
    const std::uint32_t levels = 1u << bits;
    const double step = kTwoPi / levels;
    const auto t = static_cast<std::uint32_t>(std::floor(wrap_two_pi(phi) / step));
    return std::min(t, levels - 1);
}

std::uint32_t quantize_psi(double psi, int bits)
{
    const std::uint32_t levels = 1u << bits;
    const double step = std::numbers::pi / (2.0 * levels);
    const double t = std::floor(std::clamp(psi, 0.0, std::numbers::pi / 2) / step);
    return std::min(static_cast<std::uint32_t>(t), levels - 1);
}

double dequantize_phi(std::uint32_t code, int bits)
{
    // pi * t / 2^(b-1) + pi / 2^b
    return std::numbers::pi * code / std::ldexp(1.0, bits - 1) + std::numbers::pi / std::ldexp(1.0, bits);
}

double dequantize_psi(std::uint32_t code, int bits)
{
    // pi * t / 2^(b+1) + pi / 2^(b+2)
    return std::numbers::pi * code / std::ldexp(1.0, bits + 1) + std::numbers::pi / std::ldexp(1.0, bits + 2);
}

CompressedBfw compress_bfw(const BfwMatrix& v, int phi_bits, int psi_bits)
{
    if (phi_bits < 1 || phi_bits > 16 || psi_bits < 1 || psi_bits > 16)
        throw ValidationError("compress_bfw: bit widths must lie in [1, 16]");
    CompressedBfw out;
    out.rows = static_cast<int>(v.rows());
    out.cols = static_cast<int>(v.cols());
    out.phi_bits = phi_bits;
    out.psi_bits = psi_bits;
    for (std::size_t k = 0; k < v.per_subcarrier.size(); ++k) {
        const Eigen::MatrixXcd& vk = v.per_subcarrier[k];
        const Eigen::MatrixXcd gram = vk.adjoint() * vk;
        if ((gram - Eigen::MatrixXcd::Identity(vk.cols(), vk.cols())).norm() > kOrthonormalTolerance)
            throw NumericalError("compress_bfw: columns not orthonormal at subcarrier " + std::to_string(k));
        const GivensAngles a = givens_decompose(vk);
        std::vector<std::uint32_t> phi, psi;
        phi.reserve(a.phi.size());
        psi.reserve(a.psi.size());
        for (double x : a.phi)
            phi.push_back(quantize_phi(x, phi_bits));
        for (double x : a.psi)
            psi.push_back(quantize_psi(x, psi_bits));
        out.phi.push_back(std::move(phi));
        out.psi.push_back(std::move(psi));
    }
    return out;
}

BfwMatrix reconstruct_bfw(const CompressedBfw& c)
{
    if (c.rows < 1 || c.cols < 1 || c.cols > c.rows)
        throw ValidationError("reconstruct_bfw: invalid matrix shape");
    if (c.phi.size() != c.psi.size())
        throw ValidationError("reconstruct_bfw: phi/psi subcarrier counts differ");
    const int expected = givens_angle_count(c.rows, c.cols);
    BfwMatrix out;
    out.per_subcarrier.reserve(c.phi.size());
    for (std::size_t k = 0; k < c.phi.size(); ++k) {
        if (static_cast<int>(c.phi[k].size()) != expected || static_cast<int>(c.psi[k].size()) != expected)
            throw ValidationError("reconstruct_bfw: wrong angle count at subcarrier " + std::to_string(k));
        GivensAngles a;
        for (std::uint32_t code : c.phi[k]) {
            if (code >= (1u << c.phi_bits))
                throw ValidationError("reconstruct_bfw: phi codeword out of range at subcarrier " + std::to_string(k));
            a.phi.push_back(dequantize_phi(code, c.phi_bits));
        }
        for (std::uint32_t code : c.psi[k]) {
            if (code >= (1u << c.psi_bits))
                throw ValidationError("reconstruct_bfw: psi codeword out of range at subcarrier " + std::to_string(k));
            a.psi.push_back(dequantize_psi(code, c.psi_bits));
        }
        out.per_subcarrier.push_back(givens_compose(c.rows, c.cols, a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Concatenation

FeatureVector concatenate(std::span<const BfwMatrix> sequence, long p, int window)
{
    if (window < 1)
        throw ValidationError("concatenate: window length U must be >= 1");
    if (p < window)
        throw ValidationError("concatenate: insufficient history (p=" + std::to_string(p) +
                              " < U=" + std::to_string(window) + ")");
    if (static_cast<long>(sequence.size()) < p)
        throw ValidationError("concatenate: sequence holds fewer than p entries");

    const BfwMatrix& ref = sequence[static_cast<std::size_t>(p - window)];
    FeatureVector f;
    f.p = p;
    f.values.reserve(feature_length(static_cast<int>(ref.rows()), static_cast<int>(ref.cols()), ref.subcarriers(),
                                     window));
    for (long t = p - window; t < p; ++t) {
        const BfwMatrix& snap = sequence[static_cast<std::size_t>(t)];
        if (snap.subcarriers() != ref.subcarriers() || snap.rows() != ref.rows() || snap.cols() != ref.cols())
            throw ValidationError("concatenate: snapshots have inconsistent shapes");
        for (const Eigen::MatrixXcd& vk : snap.per_subcarrier)
            for (Eigen::Index c = 0; c < vk.cols(); ++c)
                for (Eigen::Index r = 0; r < vk.rows(); ++r) {
                    f.values.push_back(vk(r, c).real());
                    f.values.push_back(vk(r, c).imag());
                }
    }
    return f;
}

std::vector<BfwMatrix> unflatten(const FeatureVector& feature, int rows, int cols, int subcarriers, int window)
{
    if (feature.values.size() != feature_length(rows, cols, subcarriers, window))
        throw ValidationError("unflatten: feature length does not match the given shape");
    std::vector<BfwMatrix> out(static_cast<std::size_t>(window));
    std::size_t idx = 0;
    for (auto& snap : out) {
        for (int k = 0; k < subcarriers; ++k) {
            Eigen::MatrixXcd vk(rows, cols);
            for (int c = 0; c < cols; ++c)
                for (int r = 0; r < rows; ++r) {
                    vk(r, c) = cd(feature.values[idx], feature.values[idx + 1]);
                    idx += 2;
                }
            snap.per_subcarrier.push_back(std::move(vk));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset files

namespace {

constexpr char kMagic[4] = {'B', 'F', 'W', 'D'};
constexpr std::uint32_t kBinaryVersion = 1;
constexpr std::size_t kMetaFields = 4;

template <typename T>
T to_little_endian(T v)
{
    if constexpr (std::endian::native == std::endian::little)
        return v;
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

template <typename T>
void put(std::ostream& out, T v)
{
    v = to_little_endian(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in)
        throw ValidationError("dataset: truncated binary file");
    return to_little_endian(v);
}

std::size_t common_length(const std::vector<FeatureVector>& features)
{
    if (features.empty())
        return 0;
    const std::size_t n = features.front().values.size();
    for (const FeatureVector& f : features)
        if (f.values.size() != n)
            throw ValidationError("dataset: features have different lengths");
    return n;
}

FeatureVector from_record(const std::vector<double>& rec)
{
    FeatureVector f;
    f.p = static_cast<long>(rec[0]);
    if (rec[1] != 0.0)
        f.label = static_cast<int>(rec[1]);
    if (!std::isnan(rec[2]) && !std::isnan(rec[3]))
        f.position = Point{rec[2], rec[3]};
    f.values.assign(rec.begin() + kMetaFields, rec.end());
    return f;
}

} // namespace

void write_features_csv(std::ostream& out, const std::vector<FeatureVector>& features)
{
    const std::size_t n = common_length(features);
    out << "p,area_label,x,y";
    for (std::size_t i = 0; i < n; ++i)
        out << ",f" << i;
    out << '\n';
    for (const FeatureVector& f : features) {
        out << f.p << ',' << f.label.value_or(0) << ',';
        if (f.position)
            out << format_double(f.position->x) << ',' << format_double(f.position->y);
        else
            out << "nan,nan";
        for (double v : f.values)
            out << ',' << format_double(v);
        out << '\n';
    }
}

std::vector<FeatureVector> read_features_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        return {};
    std::vector<FeatureVector> out;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<double> rec;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                rec.push_back(cell == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cell));
            } catch (const std::exception&) {
                throw ValidationError("dataset: cannot parse value '" + cell + "'");
            }
        }
        if (rec.size() < kMetaFields)
            throw ValidationError("dataset: record with fewer than 4 fields");
        if (width == 0)
            width = rec.size();
        else if (rec.size() != width)
            throw ValidationError("dataset: records have different lengths");
        out.push_back(from_record(rec));
    }
    return out;
}

void write_features_binary(std::ostream& out, const std::vector<FeatureVector>& features)
{
    const std::size_t n = common_length(features);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kBinaryVersion);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(n + kMetaFields));
    for (const FeatureVector& f : features) {
        put<double>(out, static_cast<double>(f.p));
        put<double>(out, static_cast<double>(f.label.value_or(0)));
        put<double>(out, f.position ? f.position->x : std::numeric_limits<double>::quiet_NaN());
        put<double>(out, f.position ? f.position->y : std::numeric_limits<double>::quiet_NaN());
        for (double v : f.values)
            put<double>(out, v);
    }
}

std::vector<FeatureVector> read_features_binary(std::istream& in)
{
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError("dataset: bad magic in binary file");
    if (get<std::uint32_t>(in) != kBinaryVersion)
        throw ValidationError("dataset: unsupported binary version");
    const auto record_length = get<std::uint64_t>(in);
    if (record_length < kMetaFields)
        throw ValidationError("dataset: record length smaller than the metadata block");
    std::vector<FeatureVector> out;
    std::vector<double> rec(static_cast<std::size_t>(record_length));
    while (in.peek() != std::char_traits<char>::eof()) {
        for (double& v : rec)
            v = get<double>(in);
        out.push_back(from_record(rec));
    }
    return out;
}

} // namespace bfwloc
