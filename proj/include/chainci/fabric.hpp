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

#include <mutex>

#include "chainci/chaincode.hpp"
#include "chainci/ordering.hpp"
#include "chainci/validation.hpp"

namespace chainci {

struct TopologyOptions {
    std::vector<std::string> orgs = {"Org1", "Org2"};
    int peers_per_org = 2;
    int clients_per_org = 1;
    std::string channel = "main";
};

struct Peer {
    std::string org;
    int index = 0;
    Identity identity;
    bool available = true;
    std::map<std::string, ContractPackage> installed; // "name:version" -> package
    std::map<std::string, ChannelLedger> replicas;    // channel -> replayed chain

    std::string name() const { return org + "/peer" + std::to_string(index); }
};

struct ProposalSpec {
    std::string contract;
    std::string function;
    std::vector<std::string> args;
    Identity creator;
    std::map<std::string, Bytes> transient;
};

struct TxOutcome {
    std::string tx_id;
    ValidationFlag flag = ValidationFlag::Valid;
    json return_value;
};

/// Single-process network: org materials, peers, one crash-free orderer, and
/// per-channel ledgers persisted under <workspace>/ledger. Commits are
/// serialized per Fabric instance; committed replicas are safe to read
/// concurrently.
class Fabric {
public:
    /// Opens an existing workspace (generating nothing) or bootstraps crypto
    /// material per `topology` when crypto/ is absent. Existing chains are
    /// verified on load; tampering surfaces as CorruptWorkspace.
    Fabric(std::filesystem::path workspace, const TopologyOptions& topology, const Bytes& seed32);

    const std::filesystem::path& workspace() const { return workspace_; }
    const std::vector<OrgMaterials>& org_materials() const { return orgs_; }
    const OrgMaterials& org(const std::string& name) const;
    std::vector<std::string> org_names() const;
    Identity admin_identity(const std::string& org) const;
    std::vector<Identity> identities_with_role(Role role) const;
    std::optional<Identity> find_identity(const std::string& key_id) const;

    ContractRegistry& registry() { return registry_; }

    std::vector<Peer>& peers() { return peers_; }
    Peer& peer(const std::string& name);

    bool has_channel(const std::string& channel) const;
    const ChannelLedger& ledger(const std::string& channel) const;
    PrivateStore& private_store(const std::string& channel);

    // --- channel / lifecycle operations ---

    void create_channel(const std::string& channel, const Identity& creator);
    void join_channel(const std::string& peer_name, const std::string& channel, const Identity& caller);
    std::string install_contract(const std::string& peer_name, const ContractPackage& package,
                                 const Identity& caller);
    std::string init_contract(const std::string& channel, const std::string& name,
                              const std::string& version, const EndorsementPolicy& policy,
                              const Identity& caller);

    // --- transaction flow ---

    /// Execute on every endorsing peer's snapshot, require byte-identical
    /// read/write sets, collect signatures. EndorsementMismatch /
    /// PeerUnavailable on failure.
    struct Endorsed {
        Transaction tx;
        std::vector<PrivatePut> private_values;
        json return_value;
    };
    Endorsed endorse_proposal(const std::string& channel, const ProposalSpec& spec);

    /// Order + validate + commit on every replica; persists the block.
    TxOutcome submit_endorsed(const std::string& channel, Transaction tx,
                              const std::vector<PrivatePut>& private_values = {});

    TxOutcome invoke(const std::string& channel, const std::string& contract,
                     const std::string& function, const std::vector<std::string>& args,
                     const Identity& creator, const std::map<std::string, Bytes>& transient = {});

    /// Endorse all proposals against the same snapshot, then order them into
    /// max_tx-sized blocks; MVCC validation sorts out the conflicts.
    std::vector<TxOutcome> invoke_concurrent(const std::string& channel,
                                             const std::vector<ProposalSpec>& specs);

    json query(const std::string& channel, const std::string& contract, const std::string& function,
               const std::vector<std::string>& args, const Identity& creator) const;

    void declare_private_collection(const std::string& channel, const std::string& name,
                                    std::set<std::string> reader_orgs);
    std::optional<Bytes> read_private(const std::string& channel, const std::string& collection,
                                      const std::string& key, const std::string& reader_org) const;

    /// Verifies the on-disk chain files, not the in-memory replicas.
    ValidateResult verify_channel(const std::string& channel) const;

    /// Every key with `prefix` written by a Valid transaction anywhere in
    /// the chain (full ledger scan, not just current state).
    std::vector<std::string> chain_write_keys_with_prefix(const std::string& channel,
                                                          const std::string& prefix) const;

    BlockCutConfig& cut_config() { return cut_config_; }
    const AclPolicy& acl() const { return acl_; }

private:
    void require_permission(const Identity& identity, Action action) const;
    std::vector<Peer*> endorsing_peers(const std::string& channel);
    Bytes next_nonce();
    void commit_block(const std::string& channel, Block block,
                      const std::vector<PrivatePut>& private_values);
    Bytes secret_key_for(const std::string& key_id) const;

    std::filesystem::path workspace_;
    std::vector<OrgMaterials> orgs_;
    std::vector<Peer> peers_;
    ContractRegistry registry_;
    AclPolicy acl_;
    std::map<std::string, ChannelLedger> channels_; // reference replicas
    std::map<std::string, PrivateStore> private_;
    BlockCutConfig cut_config_{10, 0}; // direct mode cuts immediately
    crypto::Rng rng_;
    mutable std::mutex commit_mutex_;
};

} // namespace chainci
