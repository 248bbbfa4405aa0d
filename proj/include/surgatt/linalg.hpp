#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace surgatt {

using Vec = std::vector<double>;

/// Row-major dense matrix, rows x cols.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// y = M x
inline Vec matvec(const Matrix& m, std::span<const double> x)
{
    assert(x.size() == m.cols);
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* a = m.data.data() + r * m.cols;
        double s = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) s += a[c] * x[c];
        y[r] = s;
    }
    return y;
}

/// out += M^T g
inline void matvec_t_acc(const Matrix& m, std::span<const double> g, std::span<double> out)
{
    assert(g.size() == m.rows && out.size() == m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* a = m.data.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) out[c] += a[c] * gr;
    }
}

/// M += g x^T
inline void outer_acc(Matrix& m, std::span<const double> g, std::span<const double> x)
{
    assert(g.size() == m.rows && x.size() == m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* a = m.data.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) a[c] += gr * x[c];
    }
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void axpy(double a, std::span<const double> x, std::span<double> y)
{
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill.
inline void init_uniform_fan_in(std::span<double> v, std::size_t fan_in, std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(double(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
}

inline void init_uniform_fan_in(Matrix& m, std::mt19937_64& rng)
{
    init_uniform_fan_in(m.data, m.cols, rng);
}

}  // namespace surgatt
