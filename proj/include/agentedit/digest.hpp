#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace agentedit {

inline std::string to_hex(std::span<const unsigned char> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

// Hex SHA-256 of the given bytes.
inline std::string sha256_hex(std::span<const unsigned char> bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr);
    return to_hex(std::span<const unsigned char>(md.data(), len));
}

inline std::string sha256_hex(std::string_view text)
{
    return sha256_hex(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

// Short form used in run ids and transcript entries.
inline std::string short_digest(std::string_view text, std::size_t chars = 16)
{
    return sha256_hex(text).substr(0, chars);
}

// FNV-1a, only used to seed deterministic synthetic content.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept
{
    std::uint64_t h = 1469598103934665603ull;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace agentedit
