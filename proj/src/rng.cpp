#include "stircp/rng.hpp"

#include <cmath>

#include "stircp/errors.hpp"

namespace stircp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

Stream::Stream(std::uint64_t seed, std::uint64_t replica, StreamPurpose purpose)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      purpose_(static_cast<std::uint32_t>(purpose)),
      replica_(replica) {}

// Counter layout: [block low 32 | block high 16, purpose 16 | replica low | replica high].
void Stream::refill() {
    if (block_ >= (std::uint64_t{1} << 48)) throw ResourceError("random stream exhausted");
    PhiloxCounter ctr{static_cast<std::uint32_t>(block_),
                      static_cast<std::uint32_t>((block_ >> 32) << 16) | purpose_,
                      static_cast<std::uint32_t>(replica_),
                      static_cast<std::uint32_t>(replica_ >> 32)};
    buf_ = philox4x32(ctr, key_);
    ++block_;
    idx_ = 0;
}

std::uint32_t Stream::next_u32() {
    if (idx_ == 4) refill();
    return buf_[static_cast<std::size_t>(idx_++)];
}

std::uint64_t Stream::next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double Stream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::exponential(double rate) {
    return -std::log1p(-uniform()) / rate;
}

std::uint64_t Stream::below(std::uint64_t n) {
    if (n <= 0xFFFFFFFFull) {
        auto n32 = static_cast<std::uint32_t>(n);
        std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * n32;
        auto low = static_cast<std::uint32_t>(m);
        if (low < n32) {
            std::uint32_t t = static_cast<std::uint32_t>(-n32) % n32;
            while (low < t) {
                m = static_cast<std::uint64_t>(next_u32()) * n32;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return m >> 32;
    }
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        std::uint64_t t = (0 - n) % n;
        while (low < t) {
            m = static_cast<unsigned __int128>(next_u64()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace stircp
