#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "cartloco/math.hpp"

namespace cartloco {

// FNV-1a, 64-bit. Content fingerprints only (run directories, dataset provenance) —
// not collision-resistant against an adversary and not used for anything security-like.
struct Fnv1a {
    std::uint64_t h = 14695981039346656037ull;

    void update(const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
    void update(const Vec& v) { update(v.data(), v.size() * sizeof(double)); }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 0; i < 16; ++i) out[static_cast<size_t>(i)] = digits[(h >> (60 - 4 * i)) & 0xf];
        return out;
    }
};

inline std::string fnv1a_hex(const std::string& s) {
    Fnv1a f;
    f.update(s);
    return f.hex();
}

}  // namespace cartloco
