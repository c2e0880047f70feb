#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

namespace stircp {

inline constexpr int kMaxDim = 8;

// Integer lattice site. Coordinates beyond the working dimension stay zero,
// so norms and comparisons can run over the full array.
struct Point {
    std::array<std::int32_t, kMaxDim> c{};

    constexpr std::int32_t& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    constexpr std::int32_t operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    friend constexpr bool operator==(const Point&, const Point&) = default;
    friend constexpr auto operator<=>(const Point&, const Point&) = default;

    template <typename H>
    friend H AbslHashValue(H h, const Point& p) {
        return H::combine_contiguous(std::move(h), p.c.data(), p.c.size());
    }
};

constexpr Point operator+(Point a, const Point& b) {
    for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
    return a;
}

constexpr Point operator-(Point a, const Point& b) {
    for (int i = 0; i < kMaxDim; ++i) a[i] -= b[i];
    return a;
}

constexpr Point operator-(Point a) {
    for (int i = 0; i < kMaxDim; ++i) a[i] = -a[i];
    return a;
}

constexpr Point unit_vector(int axis, int sign = 1) {
    Point p;
    p[axis] = sign;
    return p;
}

std::int64_t l1_norm(const Point& p);
std::int64_t squared_norm(const Point& p);

// Sorted absolute coordinates, largest first. Walk transition probabilities
// from the origin only depend on this representative.
Point canonical(const Point& p, int d);

// Unit-step direction index in [0, 2d): axis = dir / 2, sign = dir % 2 ? -1 : +1.
Point direction(int dir);

std::string to_string(const Point& p, int d);

// Parses "1,0,-2" (spaces allowed). Throws ValidationError on bad input or
// a coordinate count different from d.
Point parse_point(std::string_view text, int d);

// Throws ValidationError unless lo <= d <= kMaxDim.
void check_dimension(int d, int lo = 1);

}  // namespace stircp
