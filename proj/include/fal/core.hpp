#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fal {

using Vector = std::vector<double>;

/// Dense d x m matrix stored column-major. Column r is the weight vector of
/// hidden neuron r, so column norms are neuron norms.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix from_columns(const std::vector<Vector>& columns);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

    std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
    std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    /// this += s * other
    Matrix& add_scaled(const Matrix& other, double s);

    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix lhs, const Matrix& rhs);
Matrix operator*(double s, Matrix m);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double distance2(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

/// Sum of column l2 norms.
double norm_2_1(const Matrix& m);
/// Largest column l2 norm.
double norm_2_inf(const Matrix& m);
double frobenius(const Matrix& m);

/// Deterministic random stream keyed by (seed, stream id).
///
/// The state is derived by SplitMix64 mixing of both keys and then driven by
/// xoshiro256**. Every distribution below is implemented here rather than via
/// <random> distributions, whose output is implementation-defined, so that the
/// same keys give the same samples with any standard library.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Independent child stream; the parent is not advanced.
    RngStream derive(std::uint64_t tag) const;
    RngStream derive(std::uint64_t a, std::uint64_t b) const { return derive(a).derive(b); }
    RngStream derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return derive(a).derive(b).derive(c);
    }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t s_[4];
};

/// n i.i.d. N(0, variance) draws.
Vector sample_gaussian(RngStream& rng, std::size_t n, double variance);
/// n i.i.d. Uniform[-half_width, half_width] draws.
Vector sample_uniform_sym(RngStream& rng, std::size_t n, double half_width);

}  // namespace fal
