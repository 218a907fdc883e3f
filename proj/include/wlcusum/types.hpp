#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wlcusum {

// Error categories. The CLI maps UsageError to exit code 2, everything else to 1.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};
struct NotReadyError : std::logic_error {
    using std::logic_error::logic_error;
};
struct InfeasibleWindowError : std::domain_error {
    using std::domain_error::domain_error;
};

namespace detail {

// Thin owning wrapper around a real vector, tagged so observations and
// parameters cannot be swapped by accident.
template <class Tag>
class RealVector {
public:
    RealVector() = default;
    explicit RealVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
    explicit RealVector(std::vector<double> v) : values_(std::move(v)) {}
    RealVector(std::initializer_list<double> init) : values_(init) {}
    explicit RealVector(std::span<const double> s) : values_(s.begin(), s.end()) {}

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    std::span<const double> view() const noexcept { return values_; }
    std::span<double> view() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const RealVector&, const RealVector&) = default;

private:
    std::vector<double> values_;
};

}  // namespace detail

using Observation = detail::RealVector<struct ObservationTag>;
using ParameterVector = detail::RealVector<struct ParameterTag>;

// Dense row-major square matrix; dimensions here are tiny (K <= ~10).
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    static Matrix identity(std::size_t n, double scale = 1.0) {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
        return m;
    }
    static Matrix diagonal(std::initializer_list<double> d) {
        Matrix m(d.size());
        std::size_t i = 0;
        for (double v : d) { m(i, i) = v; ++i; }
        return m;
    }

    std::size_t dim() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

    bool is_symmetric(double tol = 1e-12) const {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
        return true;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

// trace(A * B)
inline double trace_of_product(const Matrix& a, const Matrix& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("trace_of_product: dimension mismatch");
    double t = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t k = 0; k < a.dim(); ++k) t += a(i, k) * b(k, i);
    return t;
}

}  // namespace wlcusum
