#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include <openssl/evp.h>

#include "carrierforge/util.hpp"

namespace carrierforge {

// Streaming SHA-256 over OpenSSL's EVP interface.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
            throw Error("sha256: digest init failed");
    }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;
    ~Sha256() { EVP_MD_CTX_free(ctx_); }

    void update(std::span<const std::uint8_t> data) {
        if (EVP_DigestUpdate(ctx_, data.data(), data.size()) != 1)
            throw Error("sha256: digest update failed");
    }

    std::array<std::uint8_t, 32> finish() {
        std::array<std::uint8_t, 32> out{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, out.data(), &len) != 1 || len != out.size())
            throw Error("sha256: digest final failed");
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::span<const std::uint8_t> data) {
    Sha256 h;
    h.update(data);
    return to_hex(h.finish());
}

inline std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Hashes a file in binary mode; throws on unreadable input.
inline std::string sha256_hex_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("unreadable file: " + path.string());
    Sha256 h;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::streamsize got = in.gcount();
        if (got > 0)
            h.update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(buf.data()),
                                                   static_cast<std::size_t>(got)));
    }
    if (in.bad()) throw Error("read failure: " + path.string());
    return to_hex(h.finish());
}

}  // namespace carrierforge
