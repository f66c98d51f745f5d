/* Copyright 2026 The ChainCI Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "chainci/crypto.hpp"

#include <sodium.h>

#include <cmath>
#include <cstring>
#include <mutex>

namespace chainci::crypto {

namespace {

void ensure_sodium() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0) {
            throw Error("CryptoInit", "libsodium initialization failed");
        }
    });
}

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

Hash sha256(const void* data, std::size_t len) {
    ensure_sodium();
    Hash out{};
    crypto_hash_sha256(out.data(), static_cast<const unsigned char*>(data), len);
    return out;
}

Hash sha256(const Bytes& data) { return sha256(data.data(), data.size()); }
Hash sha256(std::string_view data) { return sha256(data.data(), data.size()); }

std::string sha256_hex(std::string_view data) { return hex_encode(sha256(data)); }
std::string sha256_hex(const Bytes& data) { return hex_encode(sha256(data)); }

std::string hex_encode(const uint8_t* data, std::size_t len) {
    std::string out;
    out.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(kHexDigits[data[i] >> 4]);
        out.push_back(kHexDigits[data[i] & 0x0f]);
    }
    return out;
}

std::string hex_encode(const Bytes& data) { return hex_encode(data.data(), data.size()); }
std::string hex_encode(const Hash& h) { return hex_encode(h.data(), h.size()); }

Bytes hex_decode(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw Error("BadHex", "odd-length hex string");
    }
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_nibble(hex[2 * i]);
        int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            throw Error("BadHex", "non-hex character");
        }
        out[i] = static_cast<uint8_t>((hi << 4) | lo);
    }
    return out;
}

std::string base64_encode(const Bytes& data) {
    ensure_sodium();
    std::string out(sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::strlen(out.c_str()));
    return out;
}

Bytes base64_decode(std::string_view text) {
    ensure_sodium();
    Bytes out(text.size() / 4 * 3 + 3);
    std::size_t written = 0;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &written,
                          nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
        throw Error("BadBase64", "invalid base64 text");
    }
    out.resize(written);
    return out;
}

KeyPair ed25519_keypair(const Bytes& seed32) {
    ensure_sodium();
    if (seed32.size() != kSeedSize) {
        throw Error("BadSeed", "ed25519 seed must be 32 bytes");
    }
    KeyPair kp;
    kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed32.data());
    return kp;
}

Bytes ed25519_sign(const Bytes& secret_key, std::string_view payload) {
    ensure_sodium();
    if (secret_key.size() != kSecretKeySize) {
        throw Error("BadKey", "ed25519 secret key must be 64 bytes");
    }
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, reinterpret_cast<const unsigned char*>(payload.data()),
                         payload.size(), secret_key.data());
    return sig;
}

Bytes ed25519_sign(const Bytes& secret_key, const Bytes& payload) {
    return ed25519_sign(secret_key, std::string_view(reinterpret_cast<const char*>(payload.data()), payload.size()));
}

bool ed25519_verify(const Bytes& public_key, std::string_view payload, const Bytes& signature) {
    ensure_sodium();
    if (public_key.size() != kPublicKeySize || signature.size() != kSignatureSize) {
        return false;
    }
    return crypto_sign_verify_detached(signature.data(),
                                       reinterpret_cast<const unsigned char*>(payload.data()),
                                       payload.size(), public_key.data()) == 0;
}

bool ed25519_verify(const Bytes& public_key, const Bytes& payload, const Bytes& signature) {
    return ed25519_verify(public_key,
                          std::string_view(reinterpret_cast<const char*>(payload.data()), payload.size()),
                          signature);
}

Rng::Rng(const Bytes& seed) {
    uint64_t folded = 0xcbf29ce484222325ull; // FNV-1a over the seed bytes
    for (uint8_t b : seed) {
        folded ^= b;
        folded *= 0x100000001b3ull;
    }
    engine_.seed(folded);
}

uint64_t Rng::next() { return engine_(); }

int64_t Rng::in_range(int64_t lo, int64_t hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int64_t>(next() % static_cast<uint64_t>(hi - lo + 1));
}

bool Rng::chance(double probability) {
    if (probability <= 0.0) return false;
    if (probability >= 1.0) return true;
    const double unit = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return unit < probability;
}

Bytes Rng::bytes(std::size_t n) {
    Bytes out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<uint8_t>(next() & 0xff);
    }
    return out;
}

} // namespace chainci::crypto
