#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace senslab {

/// Deterministic, platform-independent random stream (xoshiro256**).
///
/// Every stream is identified by a 64-bit key. Child streams are derived
/// by hashing a name or an index into the parent key, so any unit of work
/// (a batch, a restart, one attack seed) can own an independent stream
/// whose output does not depend on scheduling or worker count.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {
        std::uint64_t s = key;
        for (auto& word : state_) word = splitmix64(s);
    }

    std::uint64_t key() const { return key_; }

    /// Child stream keyed by a label, e.g. derive("train.shuffle").
    RngStream derive(std::string_view name) const {
        std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a 64
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        std::uint64_t mixed = key_ ^ h;
        return RngStream(splitmix64(mixed));
    }

    /// Child stream keyed by an index (restart number, sample id, ...).
    RngStream derive(std::uint64_t index) const {
        std::uint64_t mixed = key_ ^ (0x9e3779b97f4a7c15ull * (index + 1));
        return RngStream(splitmix64(mixed));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller; caches the second draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t state_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace senslab
