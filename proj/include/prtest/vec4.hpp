// Fixed-size 4-vector / 4x4-matrix arithmetic for the parameter space.

#pragma once

#include <array>
#include <cmath>

namespace prtest {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

inline Vec4 operator+(const Vec4& a, const Vec4& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

inline Vec4 operator-(const Vec4& a, const Vec4& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}

inline Vec4 operator*(double s, const Vec4& a) {
    return {s * a[0], s * a[1], s * a[2], s * a[3]};
}

inline Vec4& operator+=(Vec4& a, const Vec4& b) {
    for (int i = 0; i < 4; ++i) a[i] += b[i];
    return a;
}

inline double dot(const Vec4& a, const Vec4& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

inline double norm(const Vec4& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec4& a) {
    return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]) &&
           std::isfinite(a[3]);
}

inline Mat4 identity4() {
    Mat4 m{};
    for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
    return m;
}

inline Vec4 matvec(const Mat4& m, const Vec4& v) {
    Vec4 r{};
    for (int i = 0; i < 4; ++i) r[i] = dot(m[i], v);
    return r;
}

// r += s * a b^T
inline void add_outer(Mat4& r, double s, const Vec4& a, const Vec4& b) {
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) r[i][j] += s * a[i] * b[j];
}

}  // namespace prtest
