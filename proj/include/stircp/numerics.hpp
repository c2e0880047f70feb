#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace stircp {

// Neumaier-compensated running sum.
class KahanSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0;
    double comp_ = 0;
};

// Count, mean and unbiased variance of a stream of values (Welford).
class RunningStats {
public:
    void add(double x) {
        ++n_;
        double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_of_mean() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0;
    double m2_ = 0;
};

// Wilson score interval for a binomial proportion.
struct Interval {
    double lo = 0;
    double hi = 0;
};
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

// Composite trapezoid integral of y over x from x[0] to x[k], for every k.
std::vector<double> cumulative_trapezoid(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace stircp
