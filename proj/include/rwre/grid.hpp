#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "rwre/errors.hpp"

namespace rwre {

// Spatial dimension cap. The walk lives on time levels with a nu-dimensional
// spatial part; exact DP supports are O(n^nu), so nu beyond 3 is not useful.
inline constexpr int kMaxDim = 3;

// Integer lattice vector in E-coordinates (the nu spatial components).
// The deterministic time component is carried separately as a level index.
struct IVec {
    int nu = 1;
    std::array<std::int64_t, kMaxDim> c{};

    IVec() = default;
    explicit IVec(int dim) : nu(dim) { c.fill(0); }
    IVec(int dim, std::initializer_list<std::int64_t> xs) : nu(dim) {
        c.fill(0);
        int i = 0;
        for (auto x : xs) c[static_cast<std::size_t>(i++)] = x;
    }

    std::int64_t& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    std::int64_t operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    friend IVec operator+(const IVec& a, const IVec& b) {
        IVec r(a.nu);
        for (int i = 0; i < a.nu; ++i) r[i] = a[i] + b[i];
        return r;
    }
    friend IVec operator-(const IVec& a, const IVec& b) {
        IVec r(a.nu);
        for (int i = 0; i < a.nu; ++i) r[i] = a[i] - b[i];
        return r;
    }
    friend IVec operator*(std::int64_t s, const IVec& a) {
        IVec r(a.nu);
        for (int i = 0; i < a.nu; ++i) r[i] = s * a[i];
        return r;
    }
    IVec& operator+=(const IVec& b) {
        for (int i = 0; i < nu; ++i) c[static_cast<std::size_t>(i)] += b[i];
        return *this;
    }
    friend bool operator==(const IVec& a, const IVec& b) {
        if (a.nu != b.nu) return false;
        for (int i = 0; i < a.nu; ++i)
            if (a[i] != b[i]) return false;
        return true;
    }
    // Lexicographic order; this is the canonical site ordering used to fix
    // floating-point summation order in every DP.
    friend bool operator<(const IVec& a, const IVec& b) {
        for (int i = 0; i < a.nu; ++i) {
            if (a[i] != b[i]) return a[i] < b[i];
        }
        return false;
    }

    double norm2() const {
        double s = 0;
        for (int i = 0; i < nu; ++i) s += double(c[static_cast<std::size_t>(i)]) * double(c[static_cast<std::size_t>(i)]);
        return s;
    }

    std::string str() const {
        std::string s = "(";
        for (int i = 0; i < nu; ++i) {
            if (i) s += ",";
            s += std::to_string(c[static_cast<std::size_t>(i)]);
        }
        return s + ")";
    }
};

// Real nu-vector (E-part of drifts, correctors, scaled positions).
struct RVec {
    int nu = 1;
    std::array<double, kMaxDim> c{};

    RVec() = default;
    explicit RVec(int dim) : nu(dim) { c.fill(0.0); }
    RVec(int dim, std::initializer_list<double> xs) : nu(dim) {
        c.fill(0.0);
        int i = 0;
        for (auto x : xs) c[static_cast<std::size_t>(i++)] = x;
    }
    static RVec from(const IVec& v) {
        RVec r(v.nu);
        for (int i = 0; i < v.nu; ++i) r[i] = double(v[i]);
        return r;
    }

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    friend RVec operator+(const RVec& a, const RVec& b) {
        RVec r(a.nu);
        for (int i = 0; i < a.nu; ++i) r[i] = a[i] + b[i];
        return r;
    }
    friend RVec operator-(const RVec& a, const RVec& b) {
        RVec r(a.nu);
        for (int i = 0; i < a.nu; ++i) r[i] = a[i] - b[i];
        return r;
    }
    friend RVec operator*(double s, const RVec& a) {
        RVec r(a.nu);
        for (int i = 0; i < a.nu; ++i) r[i] = s * a[i];
        return r;
    }
    RVec& operator+=(const RVec& b) {
        for (int i = 0; i < nu; ++i) c[static_cast<std::size_t>(i)] += b[i];
        return *this;
    }
    RVec& operator-=(const RVec& b) {
        for (int i = 0; i < nu; ++i) c[static_cast<std::size_t>(i)] -= b[i];
        return *this;
    }

    double dot(const RVec& b) const {
        double s = 0;
        for (int i = 0; i < nu; ++i) s += c[static_cast<std::size_t>(i)] * b[i];
        return s;
    }
    double norm_sq() const { return dot(*this); }
    double norm() const { return std::sqrt(norm_sq()); }
};

// Small dense symmetric-ish nu x nu matrix.
struct Mat {
    int nu = 1;
    std::array<double, kMaxDim * kMaxDim> m{};

    Mat() = default;
    explicit Mat(int dim) : nu(dim) { m.fill(0.0); }
    static Mat identity(int dim) {
        Mat r(dim);
        for (int i = 0; i < dim; ++i) r(i, i) = 1.0;
        return r;
    }
    static Mat diag(int dim, double v) {
        Mat r(dim);
        for (int i = 0; i < dim; ++i) r(i, i) = v;
        return r;
    }
    static Mat outer(const RVec& a, const RVec& b) {
        Mat r(a.nu);
        for (int i = 0; i < a.nu; ++i)
            for (int j = 0; j < a.nu; ++j) r(i, j) = a[i] * b[j];
        return r;
    }

    double& operator()(int i, int j) { return m[static_cast<std::size_t>(i * kMaxDim + j)]; }
    double operator()(int i, int j) const { return m[static_cast<std::size_t>(i * kMaxDim + j)]; }

    friend Mat operator+(const Mat& a, const Mat& b) {
        Mat r(a.nu);
        for (int i = 0; i < a.nu; ++i)
            for (int j = 0; j < a.nu; ++j) r(i, j) = a(i, j) + b(i, j);
        return r;
    }
    friend Mat operator-(const Mat& a, const Mat& b) {
        Mat r(a.nu);
        for (int i = 0; i < a.nu; ++i)
            for (int j = 0; j < a.nu; ++j) r(i, j) = a(i, j) - b(i, j);
        return r;
    }
    friend Mat operator*(double s, const Mat& a) {
        Mat r(a.nu);
        for (int i = 0; i < a.nu; ++i)
            for (int j = 0; j < a.nu; ++j) r(i, j) = s * a(i, j);
        return r;
    }
    Mat& operator+=(const Mat& b) {
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nu; ++j) (*this)(i, j) += b(i, j);
        return *this;
    }

    double frobenius() const {
        double s = 0;
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nu; ++j) s += (*this)(i, j) * (*this)(i, j);
        return std::sqrt(s);
    }
    double quad(const RVec& v) const {  // v^T M v
        double s = 0;
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nu; ++j) s += v[i] * (*this)(i, j) * v[j];
        return s;
    }
    double max_abs() const {
        double s = 0;
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nu; ++j) s = std::max(s, std::abs((*this)(i, j)));
        return s;
    }
};

// Packed lattice key: lexicographic order on coordinates == integer order on
// the packed value. 21 bits per coordinate, biased; DP supports stay far
// inside +/- 2^20.
inline constexpr std::int64_t kPackBias = std::int64_t(1) << 20;

inline std::int64_t pack_site(const IVec& v) {
    std::int64_t key = 0;
    for (int i = 0; i < v.nu; ++i) {
        std::int64_t x = v[i] + kPackBias;
        if (x < 0 || x >= (std::int64_t(1) << 21))
            throw ResourceError("lattice site out of packable range: " + v.str());
        key = (key << 21) | x;
    }
    return key;
}

inline IVec unpack_site(std::int64_t key, int nu) {
    IVec v(nu);
    for (int i = nu - 1; i >= 0; --i) {
        v[i] = (key & ((std::int64_t(1) << 21) - 1)) - kPackBias;
        key >>= 21;
    }
    return v;
}

}  // namespace rwre
