#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace clpscf {

inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(uint64_t x) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[x & 0xf];
        x >>= 4;
    }
    return s;
}

inline std::string fnv1a64_hex(std::string_view bytes) { return to_hex(fnv1a64(bytes)); }

}  // namespace clpscf
