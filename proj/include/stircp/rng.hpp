#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace stircp {

// Philox4x32-10 block function (Salmon et al., counter-based).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

// Independent stream families. A stream is addressed by (seed, replica,
// purpose), so results never depend on scheduling.
enum class StreamPurpose : std::uint16_t {
    simulation = 1,
    survival = 2,
    curves = 3,
    split_event = 4,
    zeta_count = 5,
    walk_exit = 6,
    walk_occupation = 7,
    poisson_occupation = 8,
    kernel_sampling = 9,
    lambda_probe = 10,
    decay = 11,
    moment = 12,
    z1_sampling = 13,
};

class Stream {
public:
    using result_type = std::uint32_t;

    Stream(std::uint64_t seed, std::uint64_t replica, StreamPurpose purpose);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u32(); }

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    // 53-bit uniform on [0, 1).
    double uniform();
    // Exponential with the given rate, via -log(1 - U).
    double exponential(double rate);
    // Uniform integer in [0, n), n > 0. Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t blocks_used() const { return block_; }

private:
    void refill();

    PhiloxKey key_;
    std::uint32_t purpose_;
    std::uint64_t replica_;
    std::uint64_t block_ = 0;
    PhiloxCounter buf_{};
    int idx_ = 4;
};

}  // namespace stircp
