#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace tempora {

// FNV-1a, 64 bit. Used for dataset fingerprints and checkpoint integrity.
class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) {
        update(s.data(), s.size());
        const std::uint64_t n = s.size();
        update(&n, sizeof n);
    }
    void update(std::span<const double> xs) { update(xs.data(), xs.size_bytes()); }
    void update(std::int64_t v) { update(&v, sizeof v); }

    std::uint64_t digest() const { return state_; }
    std::string hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 0; i < 16; ++i) out[15 - i] = digits[(state_ >> (4 * i)) & 0xF];
        return out;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

} // namespace tempora
