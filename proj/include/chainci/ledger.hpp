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
#include <set>

#include "chainci/identity.hpp"
#include "chainci/policy.hpp"

namespace chainci {

/// Position of a transaction in the chain; total order is lexicographic.
struct Version {
    int64_t block_height = 0;
    int64_t tx_index = 0;

    auto operator<=>(const Version&) const = default;

    json to_json() const { return json::array({block_height, tx_index}); }
    static Version from_json(const json& j);
};

struct ReadItem {
    std::string key;
    std::optional<Version> version; // nullopt = key was absent at read time
};

struct WriteItem {
    std::string key;
    bool is_delete = false;
    Bytes value;
};

struct PrivateHashItem {
    std::string collection;
    std::string key;
    std::string hash_hex; // SHA-256 of the off-chain value
};

struct Endorsement {
    std::string key_id;
    Bytes signature; // over Transaction::body_canonical()
};

enum class ValidationFlag { Valid, MvccConflict, PolicyFail, BadSignature, DuplicateTxId };

std::string flag_name(ValidationFlag flag);
ValidationFlag flag_from_name(const std::string& name);

struct Transaction {
    std::string channel;
    std::string contract;
    std::string function;
    std::vector<std::string> args;
    std::string creator; // key_id
    Bytes nonce;         // 16 bytes
    std::vector<ReadItem> read_set;
    std::vector<WriteItem> write_set;
    std::vector<PrivateHashItem> private_hashes;
    std::vector<Endorsement> endorsements;
    std::string tx_id; // SHA-256 hex of proposal_canonical()

    /// tx_id pre-image: (channel, contract, function, args, creator, nonce).
    std::string proposal_canonical() const;
    /// Endorsement pre-image: everything except endorsements themselves.
    std::string body_canonical() const;
    std::string computed_tx_id() const;

    json to_json() const;
    static Transaction from_json(const json& j);
};

struct BlockHeader {
    int64_t height = 0;
    std::string prev_hash;   // hex, 32 zero bytes for genesis
    std::string merkle_root; // hex, over tx_ids

    std::string canonical() const;
};

inline const std::string kZeroHash(64, '0');

struct Block {
    BlockHeader header;
    std::vector<Transaction> transactions;
    std::vector<ValidationFlag> validation_flags; // parallel to transactions
    std::string block_hash;                       // SHA-256 hex of header canonical

    std::string computed_merkle_root() const;
    std::string computed_block_hash() const;

    json to_json() const;
    static Block from_json(const json& j);
};

/// Binary Merkle tree: parent = SHA-256(left || right); an odd node pairs
/// with itself; empty input yields 32 zero bytes; a single leaf is the root.
crypto::Hash merkle_root(const std::vector<crypto::Hash>& leaves);
std::string merkle_root_hex(const std::vector<std::string>& leaf_hex);

struct StateEntry {
    Bytes value;
    Version version;
};

class WorldState {
public:
    std::optional<StateEntry> get(const std::string& key) const;
    void put(const std::string& key, Bytes value, Version version);
    void erase(const std::string& key);
    const std::map<std::string, StateEntry>& entries() const { return entries_; }
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    std::string digest() const; // canonical hash of the full state

    json to_json() const;
    static WorldState from_json(const json& j);

private:
    std::map<std::string, StateEntry> entries_;
};

struct HistoryEntry {
    std::string tx_id;
    bool is_delete = false;
    Bytes value;
    Version version;
};

/// Membership and org roots carried by the genesis config transaction.
struct ChannelConfig {
    std::string channel;
    std::map<std::string, Bytes> org_roots;          // org -> root public key
    std::map<std::string, Certificate> directory;    // key_id -> certificate
    std::vector<std::string> orgs;                   // sorted

    json to_json() const;
    /// Parses and verifies every certificate against its org root.
    static ChannelConfig from_config_json(const json& j);
};

inline const std::string kConfigContract = "_config";
inline const std::string kLifecycleContract = "_lifecycle";
inline const std::string kConfigStateKey = "config/channel";
inline const std::string kLifecyclePrefix = "lifecycle/";

struct LifecycleEntry {
    std::string name;
    std::string version;
    std::set<std::string> functions;
    EndorsementPolicy policy;
};

/// One channel's chain plus the state derived from it. append_block enforces
/// linkage/merkle/hash integrity and applies the write sets of Valid
/// transactions; flag assignment itself lives in validation.cpp.
class ChannelLedger {
public:
    explicit ChannelLedger(std::string channel) : channel_(std::move(channel)) {}

    const std::string& channel() const { return channel_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    int64_t height() const { return static_cast<int64_t>(blocks_.size()) - 1; }
    const std::string& tip_hash() const;

    /// Structural checks (HeightMismatch, PrevHashMismatch, BadMerkleRoot,
    /// BadBlockHash) then state application. Genesis additionally installs
    /// the channel config.
    void append_block(Block block);

    std::optional<StateEntry> get_state(const std::string& key) const;
    const WorldState& state() const { return state_; }
    std::vector<HistoryEntry> read_history(const std::string& key) const;
    bool has_tx(const std::string& tx_id) const { return seen_tx_ids_.count(tx_id) > 0; }
    const std::set<std::string>& seen_tx_ids() const { return seen_tx_ids_; }

    const std::optional<ChannelConfig>& config() const { return config_; }
    const std::map<std::string, LifecycleEntry>& lifecycle() const { return lifecycle_; }
    std::optional<LifecycleEntry> lifecycle_entry(const std::string& contract) const;

private:
    std::string channel_;
    std::vector<Block> blocks_;
    WorldState state_;
    std::set<std::string> seen_tx_ids_;
    std::optional<ChannelConfig> config_;
    std::map<std::string, LifecycleEntry> lifecycle_;
};

LifecycleEntry lifecycle_from_state(const Bytes& value);

/// Off-chain values for private data collections; only hashes chain.
class PrivateStore {
public:
    void declare_collection(const std::string& name, std::set<std::string> reader_orgs);
    bool declared(const std::string& name) const;

    /// Stores the value and returns its SHA-256 hex for the transaction's
    /// private_hashes. UnknownCollection if the collection was not declared.
    std::string put(const std::string& collection, const std::string& key, Bytes value);

    /// ReadDenied when reader_org is not in the collection's policy; the
    /// on-chain hash stays readable by everyone regardless.
    std::optional<Bytes> read(const std::string& collection, const std::string& key,
                              const std::string& reader_org) const;

    const std::map<std::string, std::set<std::string>>& policies() const { return policy_; }

    json to_json() const;
    static PrivateStore from_json(const json& j);

private:
    std::map<std::string, std::map<std::string, Bytes>> collections_;
    std::map<std::string, std::set<std::string>> policy_;
};

// --- on-disk layout: ledger/<channel>/blocks/<height>.json etc. ---

std::filesystem::path channel_dir(const std::filesystem::path& ledger_root, const std::string& channel);
void save_block(const std::filesystem::path& ledger_root, const std::string& channel, const Block& block);
void save_state_snapshot(const std::filesystem::path& ledger_root, const ChannelLedger& ledger);
void save_private_store(const std::filesystem::path& ledger_root, const std::string& channel,
                        const PrivateStore& store);
PrivateStore load_private_store(const std::filesystem::path& ledger_root, const std::string& channel);
std::vector<std::string> list_channels(const std::filesystem::path& ledger_root);

/// Raw block file bytes in height order (missing file => stop). Parsing and
/// verification are validate_chain_bytes' concern so tampering that breaks
/// the encoding is reported, not thrown.
std::vector<std::string> read_block_files(const std::filesystem::path& ledger_root,
                                          const std::string& channel);

} // namespace chainci
