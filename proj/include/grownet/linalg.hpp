#pragma once

// Dense row-major matrices, a cyclic Jacobi symmetric eigensolver and a
// seeded random stream. Everything else in grownet is built on these.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace grownet {

/// Raised when a computation meets NaN/Inf input or produces it.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double> column(std::size_t c) const;

    Matrix transposed() const;
    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// y = A x
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Eigenpairs of a symmetric matrix. Eigenvalues are non-increasing and
/// column i of `vectors` is the unit eigenvector for `values[i]`.
struct EigenDecomposition {
    std::vector<double> values;
    Matrix vectors;

    std::vector<double> vector(std::size_t i) const { return vectors.column(i); }
};

/// Cyclic Jacobi rotations until the off-diagonal mass is at rounding level.
/// Ties in the final ordering keep the original diagonal index order.
///
/// Throws std::invalid_argument for non-square or asymmetric input (relative
/// asymmetry above 1e-12) and NumericError for non-finite entries.
EigenDecomposition jacobi_eigh(const Matrix& a);

/// Deterministic random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; uniform and normal variates are derived
/// here (53-bit mantissa fill, Box-Muller) rather than through the
/// implementation-defined <random> distributions, so the emitted doubles are
/// identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    /// Independent child stream; the same (seed, stream) pair always yields
    /// the same child.
    Rng fork(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Unit vector with i.i.d. normal components.
std::vector<double> random_unit_vector(Rng& rng, std::size_t n);

}  // namespace grownet
