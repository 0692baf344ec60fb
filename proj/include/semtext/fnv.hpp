#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace semtext {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// Incremental 64-bit FNV-1a.
class Fnv1a64 {
public:
    constexpr Fnv1a64& update(std::string_view bytes) noexcept {
        for (char c : bytes) {
            step(static_cast<std::uint8_t>(c));
        }
        return *this;
    }

    constexpr Fnv1a64& update(std::span<const std::uint8_t> bytes) noexcept {
        for (std::uint8_t b : bytes) {
            step(b);
        }
        return *this;
    }

    constexpr Fnv1a64& update_byte(std::uint8_t b) noexcept {
        step(b);
        return *this;
    }

    constexpr std::uint64_t digest() const noexcept { return state_; }

private:
    constexpr void step(std::uint8_t b) noexcept {
        state_ ^= b;
        state_ *= kFnvPrime;
    }

    std::uint64_t state_ = kFnvOffsetBasis;
};

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    return Fnv1a64{}.update(bytes).digest();
}

static_assert(fnv1a64("") == kFnvOffsetBasis);
static_assert(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);

/// Hash of `left ∥ 0x1F ∥ right`, the separator-joined key used for cache and chunk ids.
constexpr std::uint64_t fnv1a64_joined(std::string_view left, std::string_view right) noexcept {
    return Fnv1a64{}.update(left).update_byte(0x1F).update(right).digest();
}

/// Lowercase, zero-padded 16-digit hex.
inline std::string to_hex(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

} // namespace semtext
