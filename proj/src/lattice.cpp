#include "stircp/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <vector>

#include "stircp/errors.hpp"

namespace stircp {

std::int64_t l1_norm(const Point& p) {
    std::int64_t s = 0;
    for (int i = 0; i < kMaxDim; ++i) s += std::abs(static_cast<std::int64_t>(p[i]));
    return s;
}

std::int64_t squared_norm(const Point& p) {
    std::int64_t s = 0;
    for (int i = 0; i < kMaxDim; ++i) s += static_cast<std::int64_t>(p[i]) * p[i];
    return s;
}

Point canonical(const Point& p, int d) {
    Point q;
    for (int i = 0; i < d; ++i) q[i] = std::abs(p[i]);
    std::sort(q.c.begin(), q.c.begin() + d, std::greater<>());
    return q;
}

Point direction(int dir) {
    return unit_vector(dir / 2, (dir % 2) ? -1 : 1);
}

std::string to_string(const Point& p, int d) {
    std::string s = "(";
    for (int i = 0; i < d; ++i) {
        if (i) s += ',';
        s += std::to_string(p[i]);
    }
    return s + ")";
}

Point parse_point(std::string_view text, int d) {
    check_dimension(d);
    Point p;
    int n = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view tok = text.substr(pos, end - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
        std::int32_t v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
            throw ValidationError("bad lattice point '" + std::string(text) + "'");
        if (n >= d)
            throw ValidationError("point '" + std::string(text) + "' has more than " +
                                  std::to_string(d) + " coordinates");
        p[n++] = v;
        pos = end + 1;
    }
    if (n != d)
        throw ValidationError("point '" + std::string(text) + "' has " + std::to_string(n) +
                              " coordinates, expected " + std::to_string(d));
    return p;
}

void check_dimension(int d, int lo) {
    if (d < lo || d > kMaxDim)
        throw ValidationError("dimension " + std::to_string(d) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(kMaxDim) + "]");
}

}  // namespace stircp
