#ifndef COARSEBOX_RING_HPP
#define COARSEBOX_RING_HPP

#include <cstdint>
#include <vector>

#include "coarsebox/common.hpp"

namespace coarsebox {

/// Coefficient ring: the integers (modulus 0) or integers mod m (m >= 2).
struct Ring {
    std::int64_t modulus = 0;

    bool operator==(const Ring&) const = default;

    std::int64_t reduce(std::int64_t v) const {
        if (modulus == 0) return v;
        std::int64_t r = v % modulus;
        return r < 0 ? r + modulus : r;
    }
};

inline Ring ring_Z() { return Ring{0}; }
inline Ring ring_Zmod(std::int64_t m) {
    require(m >= 2, "modular ring needs modulus >= 2");
    return Ring{m};
}

/// A free module of finite rank over a fixed ring.
struct CoefObject {
    Ring ring;
    int rank = 0;

    bool operator==(const CoefObject&) const = default;
};

/// Dense rows x cols matrix over a Ring; entries canonical (reduced mod m).
/// Represents a homomorphism from a rank-`cols` to a rank-`rows` free module.
struct Mat {
    int rows = 0;
    int cols = 0;
    Ring ring;
    std::vector<std::int64_t> a;  // row-major

    Mat() = default;
    Mat(int r, int c, Ring rg) : rows(r), cols(c), ring(rg), a(static_cast<size_t>(r) * c, 0) {}

    std::int64_t& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    std::int64_t at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    void canonicalize() {
        for (auto& v : a) v = ring.reduce(v);
    }

    bool is_zero() const {
        for (auto v : a)
            if (v != 0) return false;
        return true;
    }

    static Mat identity(int n, Ring rg) {
        Mat m(n, n, rg);
        for (int i = 0; i < n; ++i) m.at(i, i) = rg.reduce(1);
        return m;
    }

    static Mat from_rows(Ring rg, std::vector<std::vector<std::int64_t>> rows_in) {
        require(!rows_in.empty(), "matrix needs at least one row");
        Mat m(static_cast<int>(rows_in.size()), static_cast<int>(rows_in[0].size()), rg);
        for (int i = 0; i < m.rows; ++i) {
            require(static_cast<int>(rows_in[i].size()) == m.cols, "ragged matrix rows");
            for (int j = 0; j < m.cols; ++j) m.at(i, j) = rg.reduce(rows_in[i][j]);
        }
        return m;
    }

    bool operator==(const Mat& o) const {
        return rows == o.rows && cols == o.cols && ring == o.ring && a == o.a;
    }
};

inline Mat operator+(const Mat& x, const Mat& y) {
    require(x.rows == y.rows && x.cols == y.cols && x.ring == y.ring,
            "matrix addition shape/ring mismatch");
    Mat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = r.ring.reduce(r.a[i] + y.a[i]);
    return r;
}

inline Mat operator-(const Mat& x, const Mat& y) {
    require(x.rows == y.rows && x.cols == y.cols && x.ring == y.ring,
            "matrix subtraction shape/ring mismatch");
    Mat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = r.ring.reduce(r.a[i] - y.a[i]);
    return r;
}

inline Mat operator*(const Mat& x, const Mat& y) {
    require(x.cols == y.rows && x.ring == y.ring, "matrix product shape/ring mismatch");
    Mat r(x.rows, y.cols, x.ring);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            std::int64_t v = x.at(i, k);
            if (v == 0) continue;
            for (int j = 0; j < y.cols; ++j)
                r.at(i, j) = r.ring.reduce(r.at(i, j) + v * y.at(k, j));
        }
    return r;
}

}  // namespace coarsebox

#endif
