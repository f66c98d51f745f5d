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

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "chainci/canonical.hpp"
#include "chainci/crypto.hpp"

namespace chainci {

enum class Role { Admin, Peer, Orderer, Client };

std::string role_name(Role role);
Role role_from_name(const std::string& name); // throws BadRole

enum class Action { CreateChannel, JoinChannel, InstallContract, InitContract, Invoke, Query, Order };

std::string action_name(Action action);

/// A member of an organization: its signing key plus the metadata the org
/// root certifies. key_id doubles as the on-ledger identifier.
struct Identity {
    std::string org;
    std::string common_name;
    Role role = Role::Client;
    Bytes public_key;   // 32 bytes
    std::string key_id; // lowercase hex SHA-256 of public_key

    /// Canonical encoding signed by the issuing org root.
    std::string canonical() const;

    json to_json() const;
    static Identity from_json(const json& j);
};

/// Flat org-signed identity record standing in for an X.509 certificate.
struct Certificate {
    Identity identity;
    std::string issuer_org;
    Bytes signature; // Ed25519 over identity.canonical()

    json to_json() const;
    static Certificate from_json(const json& j);
};

struct OrgMaterials {
    std::string org;
    crypto::KeyPair root; // org root of trust
    std::vector<Certificate> certificates;
    std::map<std::string, Bytes> secret_keys; // key_id -> Ed25519 secret key

    const Certificate* find(const std::string& key_id) const;
    const Certificate& admin() const;
    std::vector<const Certificate*> with_role(Role role) const;

    /// Sign payload with the secret key belonging to key_id. UnknownKey if
    /// this org never issued that identity.
    Bytes sign(const std::string& key_id, std::string_view payload) const;
};

/// Deterministic cryptogen analog: all key material is a pure function of
/// (seed, org, role, index), so regeneration is bit-identical. Produces one
/// Admin, n_peers Peers, n_clients Clients, and one Orderer when
/// ordering_org is set.
OrgMaterials generate_org_materials(const std::string& org, int n_peers, int n_clients,
                                    const Bytes& seed32, bool ordering_org = false);

Bytes sign_payload(const Bytes& secret_key, std::string_view payload);

enum class VerifyFailure { None, UnknownOrg, BadCert, BadSig };

struct VerifyResult {
    bool ok = false;
    VerifyFailure reason = VerifyFailure::None;
};

/// Certificate check precedes the payload signature check, so a mutated
/// certificate reports BadCert even when the payload signature is fine.
VerifyResult verify_signature(const Certificate& cert, const std::map<std::string, Bytes>& org_roots,
                              std::string_view payload, const Bytes& signature);

struct AclPolicy {
    // (action, role) -> allow; anything unlisted denies.
    std::map<std::pair<Action, Role>, bool> rules;

    static AclPolicy default_policy();
};

struct Decision {
    bool allow = false;
    std::string reason;
};

Decision check_permission(const AclPolicy& policy, const Identity& identity, Action action);

/// Persistence: crypto/<org>/identities.json (public) and
/// crypto/<org>/secrets.json (mode 0600).
void save_org_materials(const std::filesystem::path& crypto_dir, const OrgMaterials& materials);
OrgMaterials load_org_materials(const std::filesystem::path& crypto_dir, const std::string& org);
std::vector<std::string> list_orgs(const std::filesystem::path& crypto_dir);

} // namespace chainci
