#include "stircp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "stircp/errors.hpp"

namespace stircp {

namespace {

std::uint64_t binom_u64(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
        if (r > std::numeric_limits<std::uint64_t>::max())
            throw ResourceError("binomial coefficient overflow");
    }
    return static_cast<std::uint64_t>(r);
}

// Count of shell points with exactly k nonzero coordinates.
std::uint64_t shell_part(int d, int ell, int k) {
    unsigned __int128 v = binom_u64(d, k);
    v *= binom_u64(ell - 1, k - 1);
    v <<= k;
    if (v > std::numeric_limits<std::uint64_t>::max())
        throw ResourceError("shell size overflow for d=" + std::to_string(d) +
                            ", ell=" + std::to_string(ell));
    return static_cast<std::uint64_t>(v);
}

void enumerate(int d, int axis, int remaining, Point& cur, std::vector<Point>& out) {
    if (axis == d - 1) {
        if (remaining == 0) {
            cur[axis] = 0;
            out.push_back(cur);
        } else {
            cur[axis] = -remaining;
            out.push_back(cur);
            cur[axis] = remaining;
            out.push_back(cur);
        }
        cur[axis] = 0;
        return;
    }
    for (int v = -remaining; v <= remaining; ++v) {
        cur[axis] = v;
        enumerate(d, axis + 1, remaining - std::abs(v), cur, out);
    }
    cur[axis] = 0;
}

}  // namespace

std::uint64_t shell_size(int d, int ell) {
    if (d < 1) throw ValidationError("shell_size: dimension must be >= 1");
    if (ell < 1) throw ValidationError("shell_size: radius must be >= 1");
    unsigned __int128 total = 0;
    for (int k = 1; k <= std::min(d, ell); ++k) total += shell_part(d, ell, k);
    if (total > std::numeric_limits<std::uint64_t>::max()) throw ResourceError("shell size overflow");
    return static_cast<std::uint64_t>(total);
}

Shell shell_points(int d, int ell, std::size_t cap) {
    check_dimension(d);
    std::uint64_t h = shell_size(d, ell);
    if (h > cap)
        throw ResourceError("shell d=" + std::to_string(d) + ", ell=" + std::to_string(ell) +
                            " has " + std::to_string(h) + " points, above the cap " +
                            std::to_string(cap));
    Shell s{d, ell, {}};
    s.points.reserve(h);
    Point cur;
    enumerate(d, 0, ell, cur, s.points);
    return s;
}

Point sample_shell_point(int d, int ell, Stream& rng) {
    double h = static_cast<double>(shell_size(d, ell));
    double u = rng.uniform() * h;
    int k = 1;
    int kmax = std::min(d, ell);
    for (; k < kmax; ++k) {
        u -= static_cast<double>(shell_part(d, ell, k));
        if (u < 0) break;
    }

    std::array<int, kMaxDim> axes{};
    for (int i = 0; i < d; ++i) axes[i] = i;
    for (int i = 0; i < k; ++i) {
        auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - i)));
        std::swap(axes[i], axes[j]);
    }

    // k-1 distinct cut points in {1..ell-1}, by partial Fisher-Yates on a small
    // index set; ell is bounded by the kernel radius cap.
    std::vector<int> cuts;
    if (k > 1) {
        std::vector<int> pool(static_cast<std::size_t>(ell - 1));
        for (int i = 0; i < ell - 1; ++i) pool[i] = i + 1;
        for (int i = 0; i < k - 1; ++i) {
            auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(ell - 1 - i)));
            std::swap(pool[i], pool[j]);
        }
        cuts.assign(pool.begin(), pool.begin() + (k - 1));
        std::sort(cuts.begin(), cuts.end());
    }
    cuts.push_back(ell);

    Point p;
    int prev = 0;
    for (int i = 0; i < k; ++i) {
        int part = cuts[i] - prev;
        prev = cuts[i];
        p[axes[i]] = (rng.next_u32() & 1u) ? -part : part;
    }
    return p;
}

BranchKernel::BranchKernel(int d, std::map<int, double> weights) : d_(d) {
    check_dimension(d);
    double sum = 0;
    for (auto [ell, p] : weights) {
        if (ell < 1 || ell > kMaxKernelRadius)
            throw ValidationError("kernel radius " + std::to_string(ell) + " outside [1, " +
                                  std::to_string(kMaxKernelRadius) + "]");
        if (!(p >= 0) || !std::isfinite(p))
            throw ValidationError("kernel weight for radius " + std::to_string(ell) +
                                  " must be a non-negative number");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", sum);
        throw ValidationError(std::string("weights sum ") + buf + " ≠ 1");
    }
    for (auto [ell, p] : weights) {
        if (p > 0) weights_.emplace(ell, p);
    }
    double acc = 0;
    for (auto [ell, p] : weights_) {
        shell_size(d, ell);  // overflow check
        radii_.push_back(ell);
        acc += p;
        cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
}

BranchKernel BranchKernel::nearest_neighbor(int d) {
    return BranchKernel(d, {{1, 1.0}});
}

BranchKernel BranchKernel::normalized(int d, std::map<int, double> weights, double slack) {
    double sum = 0;
    for (auto& [ell, p] : weights) sum += p;
    if (!(std::abs(sum - 1.0) <= slack)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", sum);
        throw ValidationError(std::string("weights sum ") + buf + " ≠ 1");
    }
    for (auto& [ell, p] : weights) p /= sum;
    // Renormalized weights can still be off by an ulp or two.
    double s2 = 0;
    for (auto& [ell, p] : weights) s2 += p;
    if (std::abs(s2 - 1.0) > 1e-12) throw ValidationError("kernel weights cannot be normalized");
    return BranchKernel(d, std::move(weights));
}

double BranchKernel::weight(int ell) const {
    auto it = weights_.find(ell);
    return it == weights_.end() ? 0.0 : it->second;
}

std::vector<int> BranchKernel::support() const { return radii_; }

double BranchKernel::prob(const Point& x, const Point& y) const {
    auto ell = l1_norm(y - x);
    if (ell == 0) return 0.0;
    auto it = weights_.find(static_cast<int>(ell));
    if (it == weights_.end()) return 0.0;
    return it->second / static_cast<double>(shell_size(d_, static_cast<int>(ell)));
}

Point BranchKernel::sample(Stream& rng) const {
    std::size_t i = 0;
    if (radii_.size() > 1) {
        double u = rng.uniform();
        while (i + 1 < radii_.size() && u >= cumulative_[i]) ++i;
    }
    return sample_shell_point(d_, radii_[i], rng);
}

std::string BranchKernel::describe() const {
    std::string s = "d=" + std::to_string(d_) + " {";
    bool first = true;
    for (auto [ell, p] : weights_) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%d:%.17g", first ? "" : ", ", ell, p);
        s += buf;
        first = false;
    }
    return s + "}";
}

double kernel_prob(const BranchKernel& k, const Point& x, const Point& y) { return k.prob(x, y); }

Point sample_offset(const BranchKernel& k, Stream& rng) { return k.sample(rng); }

}  // namespace stircp
