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

#include "chainci/identity.hpp"

#include <algorithm>
#include <fstream>

namespace chainci {

namespace fs = std::filesystem;

std::string role_name(Role role) {
    switch (role) {
    case Role::Admin: return "Admin";
    case Role::Peer: return "Peer";
    case Role::Orderer: return "Orderer";
    case Role::Client: return "Client";
    }
    throw Error("BadRole", "unhandled role");
}

Role role_from_name(const std::string& name) {
    if (name == "Admin") return Role::Admin;
    if (name == "Peer") return Role::Peer;
    if (name == "Orderer") return Role::Orderer;
    if (name == "Client") return Role::Client;
    throw Error("BadRole", "unknown role '" + name + "'");
}

std::string action_name(Action action) {
    switch (action) {
    case Action::CreateChannel: return "CreateChannel";
    case Action::JoinChannel: return "JoinChannel";
    case Action::InstallContract: return "InstallContract";
    case Action::InitContract: return "InitContract";
    case Action::Invoke: return "Invoke";
    case Action::Query: return "Query";
    case Action::Order: return "Order";
    }
    throw Error("BadAction", "unhandled action");
}

std::string Identity::canonical() const {
    json j{{"common_name", common_name},
           {"org", org},
           {"public_key", crypto::base64_encode(public_key)},
           {"role", role_name(role)}};
    return canonical_encode(j);
}

json Identity::to_json() const {
    return json{{"common_name", common_name},
                {"key_id", key_id},
                {"org", org},
                {"public_key", crypto::base64_encode(public_key)},
                {"role", role_name(role)}};
}

Identity Identity::from_json(const json& j) {
    Identity id;
    id.org = j.at("org").get<std::string>();
    id.common_name = j.at("common_name").get<std::string>();
    id.role = role_from_name(j.at("role").get<std::string>());
    id.public_key = crypto::base64_decode(j.at("public_key").get<std::string>());
    id.key_id = j.at("key_id").get<std::string>();
    if (id.key_id != crypto::sha256_hex(id.public_key)) {
        throw Error("BadIdentity", "key_id does not match public key");
    }
    return id;
}

json Certificate::to_json() const {
    return json{{"identity", identity.to_json()},
                {"issuer_org", issuer_org},
                {"signature", crypto::base64_encode(signature)}};
}

Certificate Certificate::from_json(const json& j) {
    Certificate c;
    c.identity = Identity::from_json(j.at("identity"));
    c.issuer_org = j.at("issuer_org").get<std::string>();
    c.signature = crypto::base64_decode(j.at("signature").get<std::string>());
    return c;
}

const Certificate* OrgMaterials::find(const std::string& key_id) const {
    for (const auto& cert : certificates) {
        if (cert.identity.key_id == key_id) return &cert;
    }
    return nullptr;
}

const Certificate& OrgMaterials::admin() const {
    for (const auto& cert : certificates) {
        if (cert.identity.role == Role::Admin) return cert;
    }
    throw Error("NoAdmin", "org " + org + " has no admin identity");
}

std::vector<const Certificate*> OrgMaterials::with_role(Role role) const {
    std::vector<const Certificate*> out;
    for (const auto& cert : certificates) {
        if (cert.identity.role == role) out.push_back(&cert);
    }
    return out;
}

Bytes OrgMaterials::sign(const std::string& key_id, std::string_view payload) const {
    auto it = secret_keys.find(key_id);
    if (it == secret_keys.end()) {
        throw Error("UnknownKey", "no secret key for " + key_id + " in org " + org);
    }
    return crypto::ed25519_sign(it->second, payload);
}

namespace {

Bytes derive_seed(const Bytes& seed32, const std::string& org, const std::string& role,
                  int index) {
    std::string material;
    material.reserve(64 + org.size() + role.size());
    material.append("chainci.keygen.v1");
    material.push_back('\0');
    material.append(reinterpret_cast<const char*>(seed32.data()), seed32.size());
    material.push_back('\0');
    material.append(org);
    material.push_back('\0');
    material.append(role);
    material.push_back('\0');
    material.append(std::to_string(index));
    auto h = crypto::sha256(material);
    return Bytes(h.begin(), h.end());
}

Certificate issue(const crypto::KeyPair& root, const std::string& org, const std::string& cn,
                  Role role, const crypto::KeyPair& kp) {
    Identity id;
    id.org = org;
    id.common_name = cn;
    id.role = role;
    id.public_key = kp.public_key;
    id.key_id = crypto::sha256_hex(kp.public_key);
    Certificate cert;
    cert.identity = id;
    cert.issuer_org = org;
    cert.signature = crypto::ed25519_sign(root.secret_key, id.canonical());
    return cert;
}

} // namespace

OrgMaterials generate_org_materials(const std::string& org, int n_peers, int n_clients,
                                    const Bytes& seed32, bool ordering_org) {
    if (org.empty()) {
        throw Error("EmptyOrgName", "org name must be nonempty");
    }
    if (n_peers < 1) {
        throw Error("ZeroPeers", "an org needs at least one peer");
    }
    if (n_clients < 0) {
        throw Error("BadCount", "n_clients must be >= 0");
    }

    OrgMaterials m;
    m.org = org;
    m.root = crypto::ed25519_keypair(derive_seed(seed32, org, "root", 0));

    auto add = [&](const std::string& cn, Role role, int index) {
        auto kp = crypto::ed25519_keypair(derive_seed(seed32, org, role_name(role), index));
        auto cert = issue(m.root, org, cn, role, kp);
        m.secret_keys[cert.identity.key_id] = kp.secret_key;
        m.certificates.push_back(std::move(cert));
    };

    add("admin@" + org, Role::Admin, 0);
    for (int i = 0; i < n_peers; ++i) {
        add("peer" + std::to_string(i) + "@" + org, Role::Peer, i);
    }
    for (int i = 0; i < n_clients; ++i) {
        add("client" + std::to_string(i) + "@" + org, Role::Client, i);
    }
    if (ordering_org) {
        add("orderer@" + org, Role::Orderer, 0);
    }
    return m;
}

Bytes sign_payload(const Bytes& secret_key, std::string_view payload) {
    return crypto::ed25519_sign(secret_key, payload);
}

VerifyResult verify_signature(const Certificate& cert, const std::map<std::string, Bytes>& org_roots,
                              std::string_view payload, const Bytes& signature) {
    auto root = org_roots.find(cert.issuer_org);
    if (root == org_roots.end()) {
        return {false, VerifyFailure::UnknownOrg};
    }
    if (!crypto::ed25519_verify(root->second, cert.identity.canonical(), cert.signature)) {
        return {false, VerifyFailure::BadCert};
    }
    if (!crypto::ed25519_verify(cert.identity.public_key, payload, signature)) {
        return {false, VerifyFailure::BadSig};
    }
    return {true, VerifyFailure::None};
}

AclPolicy AclPolicy::default_policy() {
    AclPolicy p;
    for (Action a : {Action::CreateChannel, Action::JoinChannel, Action::InstallContract,
                     Action::InitContract, Action::Invoke, Action::Query, Action::Order}) {
        p.rules[{a, Role::Admin}] = true;
    }
    for (Action a : {Action::Invoke, Action::Query, Action::JoinChannel}) {
        p.rules[{a, Role::Peer}] = true;
    }
    p.rules[{Action::Order, Role::Orderer}] = true;
    for (Action a : {Action::Invoke, Action::Query}) {
        p.rules[{a, Role::Client}] = true;
    }
    return p;
}

Decision check_permission(const AclPolicy& policy, const Identity& identity, Action action) {
    auto it = policy.rules.find({action, identity.role});
    if (it == policy.rules.end()) {
        return {false, action_name(action) + " is not granted to role " + role_name(identity.role) +
                           " (default deny)"};
    }
    if (!it->second) {
        return {false, action_name(action) + " is denied to role " + role_name(identity.role)};
    }
    return {true, "allowed"};
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("IoError", "cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("IoError", "cannot read " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

void save_org_materials(const fs::path& crypto_dir, const OrgMaterials& materials) {
    fs::path dir = crypto_dir / materials.org;
    fs::create_directories(dir);

    json certs = json::array();
    for (const auto& cert : materials.certificates) {
        certs.push_back(cert.to_json());
    }
    json identities{{"certificates", certs},
                    {"org", materials.org},
                    {"root_public_key", crypto::base64_encode(materials.root.public_key)}};
    write_file(dir / "identities.json", canonical_encode(identities));

    json secrets_map = json::object();
    for (const auto& [key_id, sk] : materials.secret_keys) {
        secrets_map[key_id] = crypto::base64_encode(sk);
    }
    json secrets{{"org", materials.org},
                 {"root_secret_key", crypto::base64_encode(materials.root.secret_key)},
                 {"secret_keys", secrets_map}};
    fs::path secrets_path = dir / "secrets.json";
    write_file(secrets_path, canonical_encode(secrets));
    fs::permissions(secrets_path, fs::perms::owner_read | fs::perms::owner_write,
                    fs::perm_options::replace);
}

OrgMaterials load_org_materials(const fs::path& crypto_dir, const std::string& org) {
    fs::path dir = crypto_dir / org;
    json identities = canonical_decode(read_file(dir / "identities.json"));
    json secrets = canonical_decode(read_file(dir / "secrets.json"));

    OrgMaterials m;
    m.org = identities.at("org").get<std::string>();
    m.root.public_key = crypto::base64_decode(identities.at("root_public_key").get<std::string>());
    m.root.secret_key = crypto::base64_decode(secrets.at("root_secret_key").get<std::string>());
    for (const auto& c : identities.at("certificates")) {
        m.certificates.push_back(Certificate::from_json(c));
    }
    for (const auto& [key_id, sk] : secrets.at("secret_keys").items()) {
        m.secret_keys[key_id] = crypto::base64_decode(sk.get<std::string>());
    }
    return m;
}

std::vector<std::string> list_orgs(const fs::path& crypto_dir) {
    std::vector<std::string> orgs;
    if (!fs::exists(crypto_dir)) return orgs;
    for (const auto& entry : fs::directory_iterator(crypto_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "identities.json")) {
            orgs.push_back(entry.path().filename().string());
        }
    }
    std::sort(orgs.begin(), orgs.end());
    return orgs;
}

} // namespace chainci
