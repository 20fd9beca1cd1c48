#include "fal/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fal {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("Matrix: rows and cols must be >= 1");
    if (!std::isfinite(fill)) throw std::invalid_argument("Matrix: non-finite fill value");
}

Matrix Matrix::from_columns(const std::vector<Vector>& columns) {
    if (columns.empty()) throw std::invalid_argument("Matrix::from_columns: no columns");
    Matrix m(columns.front().size(), columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].size() != m.rows_)
            throw std::invalid_argument("Matrix::from_columns: ragged columns");
        if (!fal::all_finite(columns[j]))
            throw std::invalid_argument("Matrix::from_columns: non-finite entry");
        std::copy(columns[j].begin(), columns[j].end(), m.col(j).begin());
    }
    return m;
}

static void require_same_shape(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("Matrix: shape mismatch");
}

Matrix& Matrix::operator+=(const Matrix& other) { return add_scaled(other, 1.0); }
Matrix& Matrix::operator-=(const Matrix& other) { return add_scaled(other, -1.0); }

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix& Matrix::add_scaled(const Matrix& other, double s) {
    require_same_shape(*this, other);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * other.data_[k];
    return *this;
}

bool Matrix::all_finite() const { return fal::all_finite(data_); }

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator*(double s, Matrix m) { return m *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double distance2(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("distance2: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double norm_2_1(const Matrix& m) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += norm2(m.col(j));
    return s;
}

double norm_2_inf(const Matrix& m) {
    double best = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) best = std::max(best, norm2(m.col(j)));
    return best;
}

double frobenius(const Matrix& m) { return norm2(m.data()); }

// ---------------------------------------------------------------------------
// RngStream

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ 0x243F6A8885A308D3ULL;
    std::uint64_t h = splitmix64(x);
    x = h ^ b;
    return splitmix64(x);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    std::uint64_t x = mix(seed, stream);
    for (auto& s : s_) s = splitmix64(x);
}

RngStream RngStream::derive(std::uint64_t tag) const { return RngStream(seed_, mix(stream_, tag)); }

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double RngStream::normal() {
    // Box-Muller; u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
    // Rejection keeps the result unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

Vector sample_gaussian(RngStream& rng, std::size_t n, double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("sample_gaussian: variance must be > 0");
    const double sd = std::sqrt(variance);
    Vector out(n);
    for (double& v : out) v = sd * rng.normal();
    return out;
}

Vector sample_uniform_sym(RngStream& rng, std::size_t n, double half_width) {
    if (!(half_width > 0.0)) throw std::invalid_argument("sample_uniform_sym: half_width must be > 0");
    Vector out(n);
    for (double& v : out) v = rng.uniform(-half_width, half_width);
    return out;
}

}  // namespace fal
