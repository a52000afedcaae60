#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace flpo {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

// "0x" followed by 16 lowercase hex digits.
std::string hash_to_hex(std::uint64_t h);
std::uint64_t hash_from_hex(std::string_view text);

}  // namespace flpo
