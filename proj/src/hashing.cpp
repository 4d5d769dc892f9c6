#include "terse/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdint>

#include "terse/error.hpp"

namespace terse {
namespace {

std::string to_hex(const unsigned char* data, unsigned int len) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0F]);
    }
    return out;
}

}  // namespace

field_hasher::field_hasher() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw error("SHA-256 initialisation failed");
    }
}

field_hasher::~field_hasher() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

field_hasher& field_hasher::add(std::string_view field) {
    auto* ctx = static_cast<EVP_MD_CTX*>(ctx_);
    std::array<unsigned char, 8> len{};
    auto n = static_cast<std::uint64_t>(field.size());
    for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(n >> (8 * i));
    EVP_DigestUpdate(ctx, len.data(), len.size());
    EVP_DigestUpdate(ctx, field.data(), field.size());
    return *this;
}

std::string field_hasher::hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md.data(), &len);
    return to_hex(md.data(), len);
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw error("SHA-256 failed");
    }
    return to_hex(md.data(), len);
}

}  // namespace terse
