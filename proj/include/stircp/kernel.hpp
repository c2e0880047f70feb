#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stircp/lattice.hpp"
#include "stircp/rng.hpp"

namespace stircp {

inline constexpr int kMaxKernelRadius = 256;
inline constexpr std::size_t kDefaultShellCap = std::size_t{1} << 22;

// Number of lattice points at l1-distance ell from the origin in Z^d.
// Throws ValidationError for d < 1 or ell < 1, ResourceError on overflow.
std::uint64_t shell_size(int d, int ell);

struct Shell {
    int d = 0;
    int ell = 0;
    std::vector<Point> points;  // lexicographic order
    std::size_t size() const { return points.size(); }
};

// Enumerates the shell. Throws ResourceError when shell_size exceeds cap.
Shell shell_points(int d, int ell, std::size_t cap = kDefaultShellCap);

// Uniform point of the l1 shell: pick the number of nonzero coordinates,
// which coordinates, a uniform composition of ell and the signs.
Point sample_shell_point(int d, int ell, Stream& rng);

// Radial offspring displacement law: radius ell with probability p[ell],
// then uniform over the shell of that radius.
class BranchKernel {
public:
    // Weights must be non-negative with sum 1 within 1e-12.
    BranchKernel(int d, std::map<int, double> weights);

    static BranchKernel nearest_neighbor(int d);
    // Accepts weights summing to 1 within `slack` and renormalizes them.
    static BranchKernel normalized(int d, std::map<int, double> weights, double slack = 1e-9);

    int dim() const { return d_; }
    const std::map<int, double>& weights() const { return weights_; }
    double weight(int ell) const;
    int max_radius() const { return weights_.rbegin()->first; }
    // Radii with positive weight, ascending.
    std::vector<int> support() const;

    double prob(const Point& x, const Point& y) const;
    Point sample(Stream& rng) const;

    std::string describe() const;

    friend bool operator==(const BranchKernel&, const BranchKernel&) = default;

private:
    int d_;
    std::map<int, double> weights_;
    std::vector<int> radii_;
    std::vector<double> cumulative_;
};

double kernel_prob(const BranchKernel& k, const Point& x, const Point& y);
Point sample_offset(const BranchKernel& k, Stream& rng);

}  // namespace stircp
