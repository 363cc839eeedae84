#include "fattnn/rng.hpp"

#include <cmath>
#include <numbers>

#include "fattnn/error.hpp"

namespace fattnn {

const char* to_string(IoErrc code) noexcept {
    switch (code) {
        case IoErrc::open_failed: return "cannot open file";
        case IoErrc::bad_magic: return "bad magic bytes";
        case IoErrc::unsupported_version: return "unsupported format version";
        case IoErrc::foreign_endian: return "foreign byte order";
        case IoErrc::unsupported_dtype: return "unsupported dtype code";
        case IoErrc::dim_inconsistency: return "dimension inconsistency";
        case IoErrc::payload_length_mismatch: return "payload length mismatch";
        case IoErrc::write_failed: return "write failed";
    }
    return "unknown io error";
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t stream, std::uint64_t substream,
                               std::uint64_t counter) const noexcept {
    std::uint64_t key = splitmix64(seed_);
    key = splitmix64(key ^ (stream * 0xD1B54A32D192ED03ULL));
    key = splitmix64(key ^ (substream * 0xABC98388FB8FAC03ULL));
    return splitmix64(key ^ splitmix64(counter));
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t substream,
                           std::uint64_t counter) const noexcept {
    const std::uint64_t b = bits(stream, substream, counter) >> 11;
    return (static_cast<double>(b) + 1.0) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t stream, std::uint64_t substream,
                          std::uint64_t counter) const noexcept {
    const double u1 = uniform(stream, substream, 2 * counter);
    const double u2 = uniform(stream, substream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fattnn
