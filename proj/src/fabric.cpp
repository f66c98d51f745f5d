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

#include "chainci/fabric.hpp"

#include <algorithm>

namespace chainci {

namespace fs = std::filesystem;

namespace {

Bytes fold_seed(const Bytes& seed32, const std::string& label, uint64_t offset) {
    std::string material(reinterpret_cast<const char*>(seed32.data()), seed32.size());
    material += '\0';
    material += label;
    material += '\0';
    material += std::to_string(offset);
    auto h = crypto::sha256(material);
    return Bytes(h.begin(), h.end());
}

std::string pkg_key(const std::string& name, const std::string& version) {
    return name + ":" + version;
}

} // namespace

Fabric::Fabric(fs::path workspace, const TopologyOptions& topology, const Bytes& seed32)
    : workspace_(std::move(workspace)), registry_(ContractRegistry::builtins()),
      acl_(AclPolicy::default_policy()), rng_(0) {
    if (topology.orgs.empty()) {
        throw Error("ConfigError", "topology needs at least one org");
    }
    fs::create_directories(workspace_);
    const fs::path crypto_dir = workspace_ / "crypto";

    auto existing = list_orgs(crypto_dir);
    if (existing.empty()) {
        for (std::size_t i = 0; i < topology.orgs.size(); ++i) {
            // First org hosts the (single) ordering service.
            auto materials = generate_org_materials(topology.orgs[i], topology.peers_per_org,
                                                    topology.clients_per_org, seed32, i == 0);
            save_org_materials(crypto_dir, materials);
            orgs_.push_back(std::move(materials));
        }
    } else {
        for (const auto& org : existing) {
            orgs_.push_back(load_org_materials(crypto_dir, org));
        }
    }

    for (const auto& materials : orgs_) {
        int index = 0;
        for (const auto* cert : materials.with_role(Role::Peer)) {
            Peer p;
            p.org = materials.org;
            p.index = index++;
            p.identity = cert->identity;
            peers_.push_back(std::move(p));
        }
    }

    // Replay persisted channels into every replica; refuse tampered chains.
    uint64_t total_height = 0;
    for (const auto& channel : list_channels(workspace_)) {
        auto files = read_block_files(workspace_, channel);
        auto verdict = validate_chain_bytes(files);
        if (!verdict.ok) {
            throw Error("CorruptWorkspace", "channel " + channel + " fails verification at height " +
                                                std::to_string(verdict.first_bad_height) + " (" +
                                                verdict.reason + ")");
        }
        ChannelLedger reference(channel);
        for (const auto& text : files) {
            reference.append_block(Block::from_json(canonical_decode(text)));
        }
        total_height += static_cast<uint64_t>(reference.height() + 1);
        for (auto& peer : peers_) {
            ChannelLedger replica(channel);
            for (const auto& block : reference.blocks()) replica.append_block(block);
            peer.replicas.emplace(channel, std::move(replica));
        }
        channels_.emplace(channel, std::move(reference));
        private_.emplace(channel, load_private_store(workspace_, channel));
    }

    // Nonce stream offset depends on committed history so a reopened
    // workspace never reuses a (nonce, args) pair.
    rng_ = crypto::Rng(fold_seed(seed32, "fabric.nonce", total_height));
}

const OrgMaterials& Fabric::org(const std::string& name) const {
    for (const auto& m : orgs_) {
        if (m.org == name) return m;
    }
    throw Error("UnknownOrg", "no materials for org " + name);
}

std::vector<std::string> Fabric::org_names() const {
    std::vector<std::string> names;
    names.reserve(orgs_.size());
    for (const auto& m : orgs_) names.push_back(m.org);
    std::sort(names.begin(), names.end());
    return names;
}

Identity Fabric::admin_identity(const std::string& org_name) const {
    return org(org_name).admin().identity;
}

std::vector<Identity> Fabric::identities_with_role(Role role) const {
    std::vector<Identity> out;
    for (const auto& m : orgs_) {
        for (const auto* cert : m.with_role(role)) out.push_back(cert->identity);
    }
    return out;
}

std::optional<Identity> Fabric::find_identity(const std::string& key_id) const {
    for (const auto& m : orgs_) {
        if (const auto* cert = m.find(key_id)) return cert->identity;
    }
    return std::nullopt;
}

Peer& Fabric::peer(const std::string& name) {
    for (auto& p : peers_) {
        if (p.name() == name) return p;
    }
    throw Error("UnknownPeer", "no peer named " + name);
}

bool Fabric::has_channel(const std::string& channel) const { return channels_.count(channel) > 0; }

const ChannelLedger& Fabric::ledger(const std::string& channel) const {
    auto it = channels_.find(channel);
    if (it == channels_.end()) {
        throw Error("UnknownChannel", "channel " + channel + " does not exist");
    }
    return it->second;
}

PrivateStore& Fabric::private_store(const std::string& channel) {
    auto it = private_.find(channel);
    if (it == private_.end()) {
        throw Error("UnknownChannel", "channel " + channel + " does not exist");
    }
    return it->second;
}

void Fabric::require_permission(const Identity& identity, Action action) const {
    auto decision = check_permission(acl_, identity, action);
    if (!decision.allow) {
        throw Error("PermissionDenied", role_name(identity.role) + " " + identity.common_name +
                                            ": " + decision.reason);
    }
}

Bytes Fabric::next_nonce() { return rng_.bytes(16); }

Bytes Fabric::secret_key_for(const std::string& key_id) const {
    for (const auto& m : orgs_) {
        auto it = m.secret_keys.find(key_id);
        if (it != m.secret_keys.end()) return it->second;
    }
    throw Error("UnknownKey", "no secret key for " + key_id);
}

void Fabric::create_channel(const std::string& channel, const Identity& creator) {
    std::lock_guard lock(commit_mutex_);
    require_permission(creator, Action::CreateChannel);
    if (channels_.count(channel)) {
        throw Error("ChannelExists", "channel " + channel + " already exists");
    }

    ChannelConfig cfg;
    cfg.channel = channel;
    for (const auto& m : orgs_) {
        cfg.org_roots[m.org] = m.root.public_key;
        cfg.orgs.push_back(m.org);
        for (const auto& cert : m.certificates) {
            cfg.directory[cert.identity.key_id] = cert;
        }
    }
    std::sort(cfg.orgs.begin(), cfg.orgs.end());

    Transaction genesis_tx = make_genesis_tx(cfg, creator.key_id, next_nonce());
    Block genesis = seal_block(0, kZeroHash, {std::move(genesis_tx)});

    ChannelLedger reference(channel);
    assign_validation_flags(genesis, reference);

    channels_.emplace(channel, ChannelLedger(channel));
    private_.emplace(channel, PrivateStore{});
    commit_block(channel, std::move(genesis), {});
}

void Fabric::join_channel(const std::string& peer_name, const std::string& channel,
                          const Identity& caller) {
    std::lock_guard lock(commit_mutex_);
    require_permission(caller, Action::JoinChannel);
    auto ref = channels_.find(channel);
    if (ref == channels_.end()) {
        throw Error("UnknownChannel", "channel " + channel + " does not exist");
    }
    Peer& p = peer(peer_name);
    if (p.replicas.count(channel)) return; // already joined

    // Full replay reconstructs world state and re-checks every block.
    ChannelLedger replica(channel);
    for (const auto& block : ref->second.blocks()) {
        replica.append_block(block);
    }
    p.replicas.emplace(channel, std::move(replica));
}

std::string Fabric::install_contract(const std::string& peer_name, const ContractPackage& package,
                                     const Identity& caller) {
    require_permission(caller, Action::InstallContract);
    Peer& p = peer(peer_name);
    auto key = pkg_key(package.name, package.version);
    auto it = p.installed.find(key);
    if (it != p.installed.end()) {
        if (it->second.functions != package.functions) {
            throw Error("VersionConflict", key + " already installed with a different function list");
        }
        return it->second.package_id(); // idempotent
    }
    p.installed.emplace(key, package);
    return package.package_id();
}

std::string Fabric::init_contract(const std::string& channel, const std::string& name,
                                  const std::string& version, const EndorsementPolicy& policy,
                                  const Identity& caller) {
    require_permission(caller, Action::InitContract);
    policy.validate();
    const ChannelLedger& ref = ledger(channel);
    if (ref.lifecycle_entry(name)) {
        throw Error("AlreadyInitialized", "contract " + name + " is already active on " + channel);
    }
    const ContractDef* def = registry_.find(name);
    if (def == nullptr) {
        throw Error("UnknownContract", "no contract named " + name + " is registered");
    }
    auto key = pkg_key(name, version);
    for (const auto& p : peers_) {
        if (!p.replicas.count(channel)) continue;
        if (!p.installed.count(key)) {
            throw Error("NotInstalled", key + " is not installed on " + p.name());
        }
    }

    Transaction tx;
    tx.channel = channel;
    tx.contract = kLifecycleContract;
    tx.function = "init";
    tx.args = {name, version, canonical_encode(policy.to_json())};
    tx.creator = caller.key_id;
    tx.nonce = next_nonce();
    const std::string lifecycle_key = kLifecyclePrefix + name;
    auto current = ref.get_state(lifecycle_key);
    ReadItem read{lifecycle_key, std::nullopt};
    if (current) read.version = current->version;
    tx.read_set.push_back(std::move(read));
    tx.write_set.push_back(
        {lifecycle_key, false, lifecycle_state_value(name, version, def->function_names(), policy)});
    tx.tx_id = tx.computed_tx_id();
    tx.endorsements.push_back(
        {caller.key_id, crypto::ed25519_sign(secret_key_for(caller.key_id), tx.body_canonical())});

    auto outcome = submit_endorsed(channel, std::move(tx));
    if (outcome.flag != ValidationFlag::Valid) {
        throw Error("CommitFailed", "init transaction flagged " + flag_name(outcome.flag));
    }
    return outcome.tx_id;
}

std::vector<Peer*> Fabric::endorsing_peers(const std::string& channel) {
    // One endorsing peer per org: the lowest-indexed available peer that has
    // joined the channel.
    std::map<std::string, Peer*> chosen;
    for (auto& p : peers_) {
        if (!p.available || !p.replicas.count(channel)) continue;
        auto it = chosen.find(p.org);
        if (it == chosen.end() || p.index < it->second->index) {
            chosen[p.org] = &p;
        }
    }
    std::vector<Peer*> out;
    for (auto& [org, p] : chosen) out.push_back(p);
    if (out.empty()) {
        throw Error("PeerUnavailable", "no available peer has joined " + channel);
    }
    for (const auto& m : orgs_) {
        if (!chosen.count(m.org)) {
            throw Error("PeerUnavailable", "no available peer for org " + m.org + " on " + channel);
        }
    }
    return out;
}

Fabric::Endorsed Fabric::endorse_proposal(const std::string& channel, const ProposalSpec& spec) {
    const ChannelLedger& ref = ledger(channel);
    if (spec.contract != kLifecycleContract && !ref.lifecycle_entry(spec.contract)) {
        throw Error("UnknownContract", "contract " + spec.contract + " is not initialized on " + channel);
    }
    const ContractDef* def = registry_.find(spec.contract);
    if (def == nullptr) {
        throw Error("UnknownContract", "no contract named " + spec.contract + " is registered");
    }

    const Bytes nonce = next_nonce();
    auto peers = endorsing_peers(channel);
    const PrivateStore* collections = nullptr;
    if (auto it = private_.find(channel); it != private_.end()) collections = &it->second;

    std::optional<ProposalResult> reference;
    Transaction tx;
    for (Peer* p : peers) {
        LedgerStateView view(p->replicas.at(channel));
        ProposalResult result = execute_proposal(view, collections, *def, channel, spec.function,
                                                 spec.args, spec.creator, spec.transient, nonce);
        if (!reference) {
            reference = std::move(result);
            tx = reference->tx;
        } else if (result.tx.body_canonical() != tx.body_canonical()) {
            throw Error("EndorsementMismatch",
                        "peer " + p->name() + " produced a divergent read/write set");
        }
        tx.endorsements.push_back({p->identity.key_id, crypto::ed25519_sign(
                                                            secret_key_for(p->identity.key_id),
                                                            tx.body_canonical())});
    }
    return Endorsed{std::move(tx), std::move(reference->private_values),
                    std::move(reference->return_value)};
}

TxOutcome Fabric::submit_endorsed(const std::string& channel, Transaction tx,
                                  const std::vector<PrivatePut>& private_values) {
    std::lock_guard lock(commit_mutex_);
    ChannelLedger& ref = channels_.at(channel);
    Block block = seal_block(ref.height() + 1, ref.tip_hash(), {std::move(tx)});
    assign_validation_flags(block, ref);
    TxOutcome outcome;
    outcome.tx_id = block.transactions[0].tx_id;
    outcome.flag = block.validation_flags[0];
    commit_block(channel, std::move(block), private_values);
    return outcome;
}

TxOutcome Fabric::invoke(const std::string& channel, const std::string& contract,
                         const std::string& function, const std::vector<std::string>& args,
                         const Identity& creator, const std::map<std::string, Bytes>& transient) {
    require_permission(creator, Action::Invoke);
    ProposalSpec spec{contract, function, args, creator, transient};
    Endorsed endorsed = endorse_proposal(channel, spec);
    TxOutcome outcome = submit_endorsed(channel, std::move(endorsed.tx), endorsed.private_values);
    outcome.return_value = std::move(endorsed.return_value);
    return outcome;
}

std::vector<TxOutcome> Fabric::invoke_concurrent(const std::string& channel,
                                                 const std::vector<ProposalSpec>& specs) {
    // All proposals execute against the same committed snapshot, as if
    // submitted by concurrent clients; MVCC decides at commit time.
    std::vector<Endorsed> endorsed;
    std::vector<json> values;
    endorsed.reserve(specs.size());
    for (const auto& spec : specs) {
        require_permission(spec.creator, Action::Invoke);
        endorsed.push_back(endorse_proposal(channel, spec));
    }

    std::lock_guard lock(commit_mutex_);
    ChannelLedger& ref = channels_.at(channel);
    std::vector<PendingTx> pending;
    std::vector<PrivatePut> private_values;
    std::map<std::string, json> returns;
    for (auto& e : endorsed) {
        returns[e.tx.tx_id] = std::move(e.return_value);
        for (auto& pv : e.private_values) private_values.push_back(std::move(pv));
        pending.push_back(PendingTx{std::move(e.tx), 0});
    }

    std::vector<TxOutcome> outcomes;
    BlockCutConfig cfg = cut_config_;
    cfg.max_wait_ms = 0; // flush everything now
    for (auto& batch : cut_blocks(pending, cfg, 0)) {
        Block block = seal_block(ref.height() + 1, ref.tip_hash(), std::move(batch));
        assign_validation_flags(block, ref);
        for (std::size_t i = 0; i < block.transactions.size(); ++i) {
            TxOutcome o;
            o.tx_id = block.transactions[i].tx_id;
            o.flag = block.validation_flags[i];
            o.return_value = returns[o.tx_id];
            outcomes.push_back(std::move(o));
        }
        commit_block(channel, std::move(block), private_values);
    }
    return outcomes;
}

json Fabric::query(const std::string& channel, const std::string& contract,
                   const std::string& function, const std::vector<std::string>& args,
                   const Identity& creator) const {
    require_permission(creator, Action::Query);
    const ChannelLedger& ref = ledger(channel);
    if (contract != kLifecycleContract && !ref.lifecycle_entry(contract)) {
        throw Error("UnknownContract", "contract " + contract + " is not initialized on " + channel);
    }
    const ContractDef* def = registry_.find(contract);
    if (def == nullptr) {
        throw Error("UnknownContract", "no contract named " + contract + " is registered");
    }
    const PrivateStore* collections = nullptr;
    if (auto it = private_.find(channel); it != private_.end()) collections = &it->second;
    LedgerStateView view(ref);
    return execute_query(view, collections, *def, function, args, creator);
}

void Fabric::declare_private_collection(const std::string& channel, const std::string& name,
                                        std::set<std::string> reader_orgs) {
    std::lock_guard lock(commit_mutex_);
    PrivateStore& store = private_store(channel);
    store.declare_collection(name, std::move(reader_orgs));
    save_private_store(workspace_, channel, store);
}

std::optional<Bytes> Fabric::read_private(const std::string& channel, const std::string& collection,
                                          const std::string& key, const std::string& reader_org) const {
    auto it = private_.find(channel);
    if (it == private_.end()) {
        throw Error("UnknownChannel", "channel " + channel + " does not exist");
    }
    return it->second.read(collection, key, reader_org);
}

ValidateResult Fabric::verify_channel(const std::string& channel) const {
    return validate_workspace_chain(workspace_, channel);
}

std::vector<std::string> Fabric::chain_write_keys_with_prefix(const std::string& channel,
                                                              const std::string& prefix) const {
    const ChannelLedger& ref = ledger(channel);
    std::vector<std::string> out;
    for (const auto& block : ref.blocks()) {
        for (std::size_t i = 0; i < block.transactions.size(); ++i) {
            if (block.validation_flags[i] != ValidationFlag::Valid) continue;
            for (const auto& w : block.transactions[i].write_set) {
                if (w.key.rfind(prefix, 0) == 0) out.push_back(w.key);
            }
        }
    }
    return out;
}

void Fabric::commit_block(const std::string& channel, Block block,
                          const std::vector<PrivatePut>& private_values) {
    ChannelLedger& ref = channels_.at(channel);
    ref.append_block(block);

    // Every joined replica validates the same block; determinism means the
    // assigned flags must reproduce everywhere.
    for (auto& p : peers_) {
        auto it = p.replicas.find(channel);
        if (it == p.replicas.end()) continue;
        Block replica_copy = block;
        replica_copy.validation_flags.clear();
        assign_validation_flags(replica_copy, it->second);
        if (replica_copy.validation_flags != block.validation_flags) {
            throw Error("ConsensusViolation", "replica " + p.name() + " derived different flags");
        }
        it->second.append_block(std::move(replica_copy));
    }

    // Off-chain values for the Valid transactions of this block.
    PrivateStore& store = private_.at(channel);
    bool private_dirty = false;
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        if (block.validation_flags[i] != ValidationFlag::Valid) continue;
        for (const auto& h : block.transactions[i].private_hashes) {
            for (const auto& pv : private_values) {
                if (pv.collection == h.collection && pv.key == h.key &&
                    crypto::sha256_hex(pv.value) == h.hash_hex) {
                    store.put(pv.collection, pv.key, pv.value);
                    private_dirty = true;
                }
            }
        }
    }

    save_block(workspace_, channel, block);
    save_state_snapshot(workspace_, ref);
    if (private_dirty) {
        save_private_store(workspace_, channel, store);
    }
}

} // namespace chainci
