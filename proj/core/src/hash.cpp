#include "flpo/hash.hpp"

#include <fmt/format.h>

#include "flpo/errors.hpp"

namespace flpo {

std::string hash_to_hex(std::uint64_t h) { return fmt::format("0x{:016x}", h); }

std::uint64_t hash_from_hex(std::string_view text) {
    if (text.size() != 18 || text[0] != '0' || text[1] != 'x')
        throw ParseError(fmt::format("malformed hash '{}'", text), "hash");
    std::uint64_t h = 0;
    for (char c : text.substr(2)) {
        h <<= 4;
        if (c >= '0' && c <= '9') h |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') h |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw ParseError(fmt::format("malformed hash '{}'", text), "hash");
    }
    return h;
}

}  // namespace flpo
