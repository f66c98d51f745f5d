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

#include "chainci/ledger.hpp"

#include <algorithm>
#include <fstream>

namespace chainci {

namespace fs = std::filesystem;

namespace {

void require_fields(const json& j, std::initializer_list<const char*> fields, const std::string& what) {
    if (!j.is_object()) {
        throw Error("BadEncoding", what + " is not an object");
    }
    if (j.size() != fields.size()) {
        throw Error("BadEncoding", what + " has unexpected field count");
    }
    for (const char* f : fields) {
        if (!j.contains(f)) {
            throw Error("BadEncoding", what + " is missing field '" + f + "'");
        }
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("IoError", "cannot read " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("IoError", "cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace

Version Version::from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
        throw Error("BadEncoding", "version must be [height, tx_index]");
    }
    return {j[0].get<int64_t>(), j[1].get<int64_t>()};
}

std::string flag_name(ValidationFlag flag) {
    switch (flag) {
    case ValidationFlag::Valid: return "Valid";
    case ValidationFlag::MvccConflict: return "MvccConflict";
    case ValidationFlag::PolicyFail: return "PolicyFail";
    case ValidationFlag::BadSignature: return "BadSignature";
    case ValidationFlag::DuplicateTxId: return "DuplicateTxId";
    }
    throw Error("BadFlag", "unhandled validation flag");
}

ValidationFlag flag_from_name(const std::string& name) {
    if (name == "Valid") return ValidationFlag::Valid;
    if (name == "MvccConflict") return ValidationFlag::MvccConflict;
    if (name == "PolicyFail") return ValidationFlag::PolicyFail;
    if (name == "BadSignature") return ValidationFlag::BadSignature;
    if (name == "DuplicateTxId") return ValidationFlag::DuplicateTxId;
    throw Error("BadEncoding", "unknown validation flag '" + name + "'");
}

namespace {

json read_set_json(const std::vector<ReadItem>& reads) {
    json arr = json::array();
    for (const auto& r : reads) {
        json v = r.version ? r.version->to_json() : json(nullptr);
        arr.push_back(json{{"key", r.key}, {"version", v}});
    }
    return arr;
}

json write_set_json(const std::vector<WriteItem>& writes) {
    json arr = json::array();
    for (const auto& w : writes) {
        if (w.is_delete) {
            arr.push_back(json{{"delete", true}, {"key", w.key}});
        } else {
            arr.push_back(json{{"key", w.key}, {"value", crypto::base64_encode(w.value)}});
        }
    }
    return arr;
}

json private_hashes_json(const std::vector<PrivateHashItem>& items) {
    json arr = json::array();
    for (const auto& p : items) {
        arr.push_back(json{{"collection", p.collection}, {"hash", p.hash_hex}, {"key", p.key}});
    }
    return arr;
}

} // namespace

std::string Transaction::proposal_canonical() const {
    json j{{"args", args},
           {"channel", channel},
           {"contract", contract},
           {"creator", creator},
           {"function", function},
           {"nonce", crypto::base64_encode(nonce)}};
    return canonical_encode(j);
}

std::string Transaction::body_canonical() const {
    json j{{"args", args},
           {"channel", channel},
           {"contract", contract},
           {"creator", creator},
           {"function", function},
           {"nonce", crypto::base64_encode(nonce)},
           {"private_hashes", private_hashes_json(private_hashes)},
           {"read_set", read_set_json(read_set)},
           {"write_set", write_set_json(write_set)}};
    return canonical_encode(j);
}

std::string Transaction::computed_tx_id() const {
    return crypto::sha256_hex(proposal_canonical());
}

json Transaction::to_json() const {
    json endors = json::array();
    for (const auto& e : endorsements) {
        endors.push_back(json{{"key_id", e.key_id}, {"signature", crypto::base64_encode(e.signature)}});
    }
    return json{{"args", args},
                {"channel", channel},
                {"contract", contract},
                {"creator", creator},
                {"endorsements", endors},
                {"function", function},
                {"nonce", crypto::base64_encode(nonce)},
                {"private_hashes", private_hashes_json(private_hashes)},
                {"read_set", read_set_json(read_set)},
                {"tx_id", tx_id},
                {"write_set", write_set_json(write_set)}};
}

Transaction Transaction::from_json(const json& j) {
    require_fields(j,
                   {"args", "channel", "contract", "creator", "endorsements", "function", "nonce",
                    "private_hashes", "read_set", "tx_id", "write_set"},
                   "transaction");
    Transaction tx;
    tx.channel = j.at("channel").get<std::string>();
    tx.contract = j.at("contract").get<std::string>();
    tx.function = j.at("function").get<std::string>();
    for (const auto& a : j.at("args")) {
        if (!a.is_string()) throw Error("BadEncoding", "transaction args must be strings");
        tx.args.push_back(a.get<std::string>());
    }
    tx.creator = j.at("creator").get<std::string>();
    tx.nonce = crypto::base64_decode(j.at("nonce").get<std::string>());
    for (const auto& r : j.at("read_set")) {
        require_fields(r, {"key", "version"}, "read item");
        ReadItem item;
        item.key = r.at("key").get<std::string>();
        if (!r.at("version").is_null()) {
            item.version = Version::from_json(r.at("version"));
        }
        tx.read_set.push_back(std::move(item));
    }
    for (const auto& w : j.at("write_set")) {
        WriteItem item;
        if (w.contains("delete")) {
            require_fields(w, {"delete", "key"}, "delete item");
            if (!w.at("delete").is_boolean() || !w.at("delete").get<bool>()) {
                throw Error("BadEncoding", "delete marker must be true");
            }
            item.is_delete = true;
            item.key = w.at("key").get<std::string>();
        } else {
            require_fields(w, {"key", "value"}, "write item");
            item.key = w.at("key").get<std::string>();
            item.value = crypto::base64_decode(w.at("value").get<std::string>());
        }
        tx.write_set.push_back(std::move(item));
    }
    for (const auto& p : j.at("private_hashes")) {
        require_fields(p, {"collection", "hash", "key"}, "private hash item");
        tx.private_hashes.push_back({p.at("collection").get<std::string>(),
                                     p.at("key").get<std::string>(),
                                     p.at("hash").get<std::string>()});
    }
    for (const auto& e : j.at("endorsements")) {
        require_fields(e, {"key_id", "signature"}, "endorsement");
        tx.endorsements.push_back(
            {e.at("key_id").get<std::string>(), crypto::base64_decode(e.at("signature").get<std::string>())});
    }
    tx.tx_id = j.at("tx_id").get<std::string>();
    return tx;
}

std::string BlockHeader::canonical() const {
    json j{{"height", height}, {"merkle_root", merkle_root}, {"prev_hash", prev_hash}};
    return canonical_encode(j);
}

std::string Block::computed_merkle_root() const {
    std::vector<std::string> ids;
    ids.reserve(transactions.size());
    for (const auto& tx : transactions) ids.push_back(tx.tx_id);
    return merkle_root_hex(ids);
}

std::string Block::computed_block_hash() const {
    return crypto::sha256_hex(header.canonical());
}

json Block::to_json() const {
    json txs = json::array();
    for (const auto& tx : transactions) txs.push_back(tx.to_json());
    json flags = json::array();
    for (auto f : validation_flags) flags.push_back(flag_name(f));
    return json{{"block_hash", block_hash},
                {"header",
                 json{{"height", header.height},
                      {"merkle_root", header.merkle_root},
                      {"prev_hash", header.prev_hash}}},
                {"transactions", txs},
                {"validation_flags", flags}};
}

Block Block::from_json(const json& j) {
    require_fields(j, {"block_hash", "header", "transactions", "validation_flags"}, "block");
    require_fields(j.at("header"), {"height", "merkle_root", "prev_hash"}, "block header");
    if (!j.at("header").at("height").is_number_integer()) {
        throw Error("BadEncoding", "block height must be an integer");
    }
    Block b;
    b.header.height = j.at("header").at("height").get<int64_t>();
    b.header.merkle_root = j.at("header").at("merkle_root").get<std::string>();
    b.header.prev_hash = j.at("header").at("prev_hash").get<std::string>();
    for (const auto& t : j.at("transactions")) b.transactions.push_back(Transaction::from_json(t));
    for (const auto& f : j.at("validation_flags")) {
        if (!f.is_string()) throw Error("BadEncoding", "validation flag must be a string");
        b.validation_flags.push_back(flag_from_name(f.get<std::string>()));
    }
    b.block_hash = j.at("block_hash").get<std::string>();
    if (b.validation_flags.size() != b.transactions.size()) {
        throw Error("BadEncoding", "validation_flags length differs from transactions");
    }
    return b;
}

crypto::Hash merkle_root(const std::vector<crypto::Hash>& leaves) {
    if (leaves.empty()) {
        return crypto::Hash{}; // 32 zero bytes
    }
    std::vector<crypto::Hash> level = leaves;
    while (level.size() > 1) {
        std::vector<crypto::Hash> next;
        next.reserve((level.size() + 1) / 2);
        for (std::size_t i = 0; i < level.size(); i += 2) {
            const crypto::Hash& left = level[i];
            const crypto::Hash& right = (i + 1 < level.size()) ? level[i + 1] : level[i];
            uint8_t buf[64];
            std::copy(left.begin(), left.end(), buf);
            std::copy(right.begin(), right.end(), buf + 32);
            next.push_back(crypto::sha256(buf, sizeof buf));
        }
        level = std::move(next);
    }
    return level[0];
}

std::string merkle_root_hex(const std::vector<std::string>& leaf_hex) {
    std::vector<crypto::Hash> leaves;
    leaves.reserve(leaf_hex.size());
    for (const auto& h : leaf_hex) {
        Bytes raw = crypto::hex_decode(h);
        if (raw.size() != crypto::kHashSize) {
            throw Error("BadHex", "merkle leaf must be a 32-byte hash");
        }
        crypto::Hash leaf;
        std::copy(raw.begin(), raw.end(), leaf.begin());
        leaves.push_back(leaf);
    }
    return crypto::hex_encode(merkle_root(leaves));
}

std::optional<StateEntry> WorldState::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void WorldState::put(const std::string& key, Bytes value, Version version) {
    entries_[key] = StateEntry{std::move(value), version};
}

void WorldState::erase(const std::string& key) { entries_.erase(key); }

std::vector<std::string> WorldState::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.push_back(it->first);
    }
    return out;
}

json WorldState::to_json() const {
    json obj = json::object();
    for (const auto& [key, entry] : entries_) {
        obj[key] = json::array({crypto::base64_encode(entry.value), entry.version.to_json()});
    }
    return obj;
}

WorldState WorldState::from_json(const json& j) {
    WorldState s;
    for (const auto& [key, val] : j.items()) {
        s.entries_[key] = StateEntry{crypto::base64_decode(val.at(0).get<std::string>()),
                                     Version::from_json(val.at(1))};
    }
    return s;
}

std::string WorldState::digest() const { return crypto::sha256_hex(canonical_encode(to_json())); }

json ChannelConfig::to_json() const {
    json orgs_arr = json::array();
    for (const auto& org : orgs) {
        json certs = json::array();
        for (const auto& [key_id, cert] : directory) {
            if (cert.identity.org == org) certs.push_back(cert.to_json());
        }
        orgs_arr.push_back(json{{"certificates", certs},
                                {"name", org},
                                {"root_public_key", crypto::base64_encode(org_roots.at(org))}});
    }
    return json{{"channel", channel}, {"orgs", orgs_arr}};
}

ChannelConfig ChannelConfig::from_config_json(const json& j) {
    require_fields(j, {"channel", "orgs"}, "channel config");
    ChannelConfig cfg;
    cfg.channel = j.at("channel").get<std::string>();
    for (const auto& org_j : j.at("orgs")) {
        require_fields(org_j, {"certificates", "name", "root_public_key"}, "org config");
        const std::string name = org_j.at("name").get<std::string>();
        Bytes root = crypto::base64_decode(org_j.at("root_public_key").get<std::string>());
        cfg.org_roots[name] = root;
        cfg.orgs.push_back(name);
        for (const auto& cert_j : org_j.at("certificates")) {
            Certificate cert = Certificate::from_json(cert_j);
            if (cert.identity.org != name || cert.issuer_org != name) {
                throw Error("BadGenesis", "certificate org mismatch in config for " + name);
            }
            if (!crypto::ed25519_verify(root, cert.identity.canonical(), cert.signature)) {
                throw Error("BadGenesis",
                            "certificate for " + cert.identity.common_name + " fails verification");
            }
            cfg.directory[cert.identity.key_id] = std::move(cert);
        }
    }
    std::sort(cfg.orgs.begin(), cfg.orgs.end());
    if (cfg.orgs.empty()) {
        throw Error("BadGenesis", "config has no orgs");
    }
    return cfg;
}

LifecycleEntry lifecycle_from_state(const Bytes& value) {
    json j = canonical_decode(to_string(value));
    require_fields(j, {"functions", "name", "policy", "version"}, "lifecycle entry");
    LifecycleEntry e;
    e.name = j.at("name").get<std::string>();
    e.version = j.at("version").get<std::string>();
    for (const auto& f : j.at("functions")) e.functions.insert(f.get<std::string>());
    e.policy = EndorsementPolicy::from_json(j.at("policy"));
    return e;
}

const std::string& ChannelLedger::tip_hash() const {
    if (blocks_.empty()) return kZeroHash;
    return blocks_.back().block_hash;
}

void ChannelLedger::append_block(Block block) {
    const int64_t expected_height = height() + 1;
    if (block.header.height != expected_height) {
        throw Error("HeightMismatch", "expected height " + std::to_string(expected_height) +
                                          ", got " + std::to_string(block.header.height));
    }
    if (block.header.prev_hash != tip_hash()) {
        throw Error("PrevHashMismatch", "prev_hash does not match tip at height " +
                                            std::to_string(block.header.height));
    }
    if (block.header.merkle_root != block.computed_merkle_root()) {
        throw Error("BadMerkleRoot", "merkle root does not recompute at height " +
                                         std::to_string(block.header.height));
    }
    if (block.block_hash != block.computed_block_hash()) {
        throw Error("BadBlockHash", "block hash does not recompute at height " +
                                        std::to_string(block.header.height));
    }
    if (block.validation_flags.size() != block.transactions.size()) {
        throw Error("BadEncoding", "validation flags do not cover all transactions");
    }

    if (block.header.height == 0) {
        if (block.transactions.size() != 1 || block.transactions[0].contract != kConfigContract) {
            throw Error("BadGenesis", "genesis must contain exactly the config transaction");
        }
        const auto& tx = block.transactions[0];
        if (tx.args.size() != 1) {
            throw Error("BadGenesis", "config transaction must carry the config document");
        }
        config_ = ChannelConfig::from_config_json(canonical_decode(tx.args[0]));
    }

    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        const auto& tx = block.transactions[i];
        seen_tx_ids_.insert(tx.tx_id);
        if (block.validation_flags[i] != ValidationFlag::Valid) continue;
        const Version v{block.header.height, static_cast<int64_t>(i)};
        for (const auto& w : tx.write_set) {
            if (w.is_delete) {
                state_.erase(w.key);
                if (w.key.rfind(kLifecyclePrefix, 0) == 0) {
                    lifecycle_.erase(w.key.substr(kLifecyclePrefix.size()));
                }
            } else {
                state_.put(w.key, w.value, v);
                if (w.key.rfind(kLifecyclePrefix, 0) == 0) {
                    lifecycle_[w.key.substr(kLifecyclePrefix.size())] = lifecycle_from_state(w.value);
                }
            }
        }
    }
    blocks_.push_back(std::move(block));
}

std::optional<StateEntry> ChannelLedger::get_state(const std::string& key) const {
    return state_.get(key);
}

std::vector<HistoryEntry> ChannelLedger::read_history(const std::string& key) const {
    std::vector<HistoryEntry> out;
    for (const auto& block : blocks_) {
        for (std::size_t i = 0; i < block.transactions.size(); ++i) {
            if (block.validation_flags[i] != ValidationFlag::Valid) continue;
            const auto& tx = block.transactions[i];
            for (const auto& w : tx.write_set) {
                if (w.key != key) continue;
                out.push_back({tx.tx_id, w.is_delete, w.value,
                               Version{block.header.height, static_cast<int64_t>(i)}});
            }
        }
    }
    return out;
}

std::optional<LifecycleEntry> ChannelLedger::lifecycle_entry(const std::string& contract) const {
    auto it = lifecycle_.find(contract);
    if (it == lifecycle_.end()) return std::nullopt;
    return it->second;
}

void PrivateStore::declare_collection(const std::string& name, std::set<std::string> reader_orgs) {
    policy_[name] = std::move(reader_orgs);
    collections_.try_emplace(name);
}

bool PrivateStore::declared(const std::string& name) const { return policy_.count(name) > 0; }

std::string PrivateStore::put(const std::string& collection, const std::string& key, Bytes value) {
    if (!declared(collection)) {
        throw Error("UnknownCollection", "collection '" + collection + "' is not declared");
    }
    std::string hash = crypto::sha256_hex(value);
    collections_[collection][key] = std::move(value);
    return hash;
}

std::optional<Bytes> PrivateStore::read(const std::string& collection, const std::string& key,
                                        const std::string& reader_org) const {
    auto pol = policy_.find(collection);
    if (pol == policy_.end()) {
        throw Error("UnknownCollection", "collection '" + collection + "' is not declared");
    }
    if (pol->second.count(reader_org) == 0) {
        throw Error("ReadDenied", "org " + reader_org + " may not read collection " + collection);
    }
    auto coll = collections_.find(collection);
    if (coll == collections_.end()) return std::nullopt;
    auto it = coll->second.find(key);
    if (it == coll->second.end()) return std::nullopt;
    return it->second;
}

json PrivateStore::to_json() const {
    json out = json::object();
    for (const auto& [name, orgs] : policy_) {
        json data = json::object();
        auto coll = collections_.find(name);
        if (coll != collections_.end()) {
            for (const auto& [key, value] : coll->second) {
                data[key] = crypto::base64_encode(value);
            }
        }
        out[name] = json{{"data", data}, {"readers", std::vector<std::string>(orgs.begin(), orgs.end())}};
    }
    return out;
}

PrivateStore PrivateStore::from_json(const json& j) {
    PrivateStore s;
    for (const auto& [name, body] : j.items()) {
        std::set<std::string> readers;
        for (const auto& r : body.at("readers")) readers.insert(r.get<std::string>());
        s.declare_collection(name, std::move(readers));
        for (const auto& [key, value] : body.at("data").items()) {
            s.collections_[name][key] = crypto::base64_decode(value.get<std::string>());
        }
    }
    return s;
}

fs::path channel_dir(const fs::path& ledger_root, const std::string& channel) {
    return ledger_root / "ledger" / channel;
}

void save_block(const fs::path& ledger_root, const std::string& channel, const Block& block) {
    fs::path dir = channel_dir(ledger_root, channel) / "blocks";
    fs::create_directories(dir);
    write_file(dir / (std::to_string(block.header.height) + ".json"), canonical_encode(block.to_json()));
}

void save_state_snapshot(const fs::path& ledger_root, const ChannelLedger& ledger) {
    fs::path dir = channel_dir(ledger_root, ledger.channel());
    fs::create_directories(dir);
    write_file(dir / "state.json", canonical_encode(ledger.state().to_json()));
}

void save_private_store(const fs::path& ledger_root, const std::string& channel,
                        const PrivateStore& store) {
    fs::path dir = channel_dir(ledger_root, channel) / "private";
    fs::create_directories(dir);
    // One file per collection, as auditors expect to pull a single
    // collection without parsing the rest.
    for (const auto& [name, readers] : store.policies()) {
        json whole = store.to_json();
        write_file(dir / (name + ".json"), canonical_encode(json{{name, whole.at(name)}}));
    }
}

PrivateStore load_private_store(const fs::path& ledger_root, const std::string& channel) {
    PrivateStore store;
    fs::path dir = channel_dir(ledger_root, channel) / "private";
    if (!fs::exists(dir)) return store;
    json merged = json::object();
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        json one = canonical_decode(read_file(entry.path()));
        for (const auto& [name, body] : one.items()) merged[name] = body;
    }
    return PrivateStore::from_json(merged);
}

std::vector<std::string> list_channels(const fs::path& ledger_root) {
    std::vector<std::string> out;
    fs::path root = ledger_root / "ledger";
    if (!fs::exists(root)) return out;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "blocks")) {
            out.push_back(entry.path().filename().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> read_block_files(const fs::path& ledger_root, const std::string& channel) {
    std::vector<std::string> out;
    fs::path dir = channel_dir(ledger_root, channel) / "blocks";
    if (!fs::exists(dir)) return out;
    for (int64_t h = 0;; ++h) {
        fs::path file = dir / (std::to_string(h) + ".json");
        if (!fs::exists(file)) break;
        out.push_back(read_file(file));
    }
    return out;
}

} // namespace chainci
