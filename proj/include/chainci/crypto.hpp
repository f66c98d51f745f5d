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

#pragma once

#include <array>
#include <cstddef>
#include <random>

#include "chainci/common.hpp"

namespace chainci::crypto {

inline constexpr std::size_t kHashSize = 32;
inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kSecretKeySize = 64;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kSeedSize = 32;

using Hash = std::array<uint8_t, kHashSize>;

Hash sha256(const void* data, std::size_t len);
Hash sha256(const Bytes& data);
Hash sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string sha256_hex(const Bytes& data);

std::string hex_encode(const uint8_t* data, std::size_t len);
std::string hex_encode(const Bytes& data);
std::string hex_encode(const Hash& h);
Bytes hex_decode(std::string_view hex); // throws BadHex

std::string base64_encode(const Bytes& data);
Bytes base64_decode(std::string_view text); // throws BadBase64

struct KeyPair {
    Bytes public_key; // 32 bytes
    Bytes secret_key; // 64 bytes (seed || public key, libsodium layout)
};

/// Ed25519 (RFC 8032). Key generation is a pure function of the 32-byte seed.
KeyPair ed25519_keypair(const Bytes& seed32);
Bytes ed25519_sign(const Bytes& secret_key, std::string_view payload);
Bytes ed25519_sign(const Bytes& secret_key, const Bytes& payload);
bool ed25519_verify(const Bytes& public_key, std::string_view payload, const Bytes& signature);
bool ed25519_verify(const Bytes& public_key, const Bytes& payload, const Bytes& signature);

/// Deterministic RNG for nonces and simulations. mt19937_64 sequences are
/// portable, so seeded runs are reproducible across machines; never use
/// std::uniform_* distributions (implementation-defined) with it.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    explicit Rng(const Bytes& seed); // folds bytes into a 64-bit seed

    uint64_t next();
    /// Uniform in [lo, hi] via modulo; fine for simulation jitter.
    int64_t in_range(int64_t lo, int64_t hi);
    bool chance(double probability);
    Bytes bytes(std::size_t n);

private:
    std::mt19937_64 engine_;
};

} // namespace chainci::crypto
