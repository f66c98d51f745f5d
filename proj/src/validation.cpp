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

#include "chainci/validation.hpp"

#include <unordered_set>

namespace chainci {

std::optional<StateEntry> StateOverlay::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    return base_.get_state(key);
}

std::optional<LifecycleEntry> StateOverlay::lifecycle_entry(const std::string& contract) const {
    auto it = entries_.find(kLifecyclePrefix + contract);
    if (it != entries_.end()) {
        if (!it->second) return std::nullopt;
        return lifecycle_from_state(it->second->value);
    }
    return base_.lifecycle_entry(contract);
}

bool StateOverlay::seen(const std::string& tx_id) const {
    return tx_ids_.count(tx_id) > 0 || base_.has_tx(tx_id);
}

void StateOverlay::apply(const Transaction& tx, Version version) {
    tx_ids_.insert(tx.tx_id);
    for (const auto& w : tx.write_set) {
        if (w.is_delete) {
            entries_[w.key] = std::nullopt;
        } else {
            entries_[w.key] = StateEntry{w.value, version};
        }
    }
}

ValidationFlag derive_flag(const Transaction& tx, const ChannelLedger& ledger,
                           const StateOverlay& overlay) {
    if (overlay.seen(tx.tx_id)) {
        return ValidationFlag::DuplicateTxId;
    }

    const auto& config = ledger.config();
    if (!config) {
        // No genesis committed; nothing can validate.
        return ValidationFlag::PolicyFail;
    }

    // Signature stage: any endorsement that fails verification (unknown
    // key_id or bad signature) marks the whole transaction.
    const std::string body = tx.body_canonical();
    std::set<std::string> endorsing_orgs;
    for (const auto& e : tx.endorsements) {
        auto it = config->directory.find(e.key_id);
        if (it == config->directory.end()) {
            return ValidationFlag::BadSignature;
        }
        if (!crypto::ed25519_verify(it->second.identity.public_key, body, e.signature)) {
            return ValidationFlag::BadSignature;
        }
        endorsing_orgs.insert(it->second.identity.org);
    }

    // Policy stage, purely structural over the verified endorsing orgs.
    if (tx.contract == kLifecycleContract) {
        auto creator = config->directory.find(tx.creator);
        if (creator == config->directory.end() || creator->second.identity.role != Role::Admin) {
            return ValidationFlag::PolicyFail;
        }
        if (!evaluate_policy(EndorsementPolicy::any_org(config->orgs), endorsing_orgs)) {
            return ValidationFlag::PolicyFail;
        }
    } else {
        auto entry = overlay.lifecycle_entry(tx.contract);
        if (!entry) {
            return ValidationFlag::PolicyFail; // uninitialized or config tx outside genesis
        }
        if (!evaluate_policy(entry->policy, endorsing_orgs)) {
            return ValidationFlag::PolicyFail;
        }
    }

    // MVCC stage: every read must still see the version it executed against.
    for (const auto& r : tx.read_set) {
        auto current = overlay.get(r.key);
        std::optional<Version> current_version;
        if (current) current_version = current->version;
        if (current_version != r.version) {
            return ValidationFlag::MvccConflict;
        }
    }
    return ValidationFlag::Valid;
}

void assign_validation_flags(Block& proposal, const ChannelLedger& ledger) {
    proposal.validation_flags.clear();
    if (proposal.header.height == 0) {
        check_genesis_content(proposal);
        proposal.validation_flags.assign(proposal.transactions.size(), ValidationFlag::Valid);
        return;
    }
    StateOverlay overlay(ledger);
    for (std::size_t i = 0; i < proposal.transactions.size(); ++i) {
        const auto& tx = proposal.transactions[i];
        ValidationFlag flag = derive_flag(tx, ledger, overlay);
        proposal.validation_flags.push_back(flag);
        if (flag == ValidationFlag::Valid) {
            overlay.apply(tx, Version{proposal.header.height, static_cast<int64_t>(i)});
        }
    }
}

void check_genesis_content(const Block& genesis) {
    if (genesis.header.height != 0) {
        throw Error("BadGenesis", "genesis must have height 0");
    }
    if (genesis.header.prev_hash != kZeroHash) {
        throw Error("BadGenesis", "genesis prev_hash must be 32 zero bytes");
    }
    if (genesis.transactions.size() != 1) {
        throw Error("BadGenesis", "genesis must contain exactly one config transaction");
    }
    const Transaction& tx = genesis.transactions[0];
    if (tx.contract != kConfigContract || tx.function != "genesis" || tx.args.size() != 1) {
        throw Error("BadGenesis", "genesis transaction is not a config transaction");
    }
    if (!tx.endorsements.empty() || !tx.read_set.empty() || !tx.private_hashes.empty()) {
        throw Error("BadGenesis", "config transaction must carry no endorsements or reads");
    }
    // The config document is covered by tx_id (it is an argument); the write
    // set is recomputed from it so nothing in the file floats free.
    if (tx.write_set.size() != 1 || tx.write_set[0].is_delete ||
        tx.write_set[0].key != kConfigStateKey || tx.write_set[0].value != to_bytes(tx.args[0])) {
        throw Error("BadGenesis", "config write set must be exactly the config document");
    }
    ChannelConfig cfg = ChannelConfig::from_config_json(canonical_decode(tx.args[0]));
    if (cfg.channel != tx.channel) {
        throw Error("BadGenesis", "config channel name mismatch");
    }
}

namespace {

ValidateResult check_block_structure(const Block& block, const ChannelLedger& replay) {
    const int64_t h = block.header.height;
    if (h != replay.height() + 1) {
        return ValidateResult::bad(replay.height() + 1, "HeightMismatch",
                                   "expected height " + std::to_string(replay.height() + 1));
    }
    if (block.header.prev_hash != replay.tip_hash()) {
        return ValidateResult::bad(h, "PrevHashMismatch", "prev_hash does not match tip");
    }
    if (block.header.merkle_root != block.computed_merkle_root()) {
        return ValidateResult::bad(h, "BadMerkleRoot", "merkle root does not recompute");
    }
    if (block.block_hash != block.computed_block_hash()) {
        return ValidateResult::bad(h, "BadBlockHash", "block hash does not recompute");
    }
    if (block.validation_flags.size() != block.transactions.size()) {
        return ValidateResult::bad(h, "BadEncoding", "validation flags do not cover transactions");
    }
    for (const auto& tx : block.transactions) {
        if (tx.tx_id != tx.computed_tx_id()) {
            return ValidateResult::bad(h, "BadTxId", "tx_id does not recompute for " + tx.tx_id);
        }
        std::unordered_set<std::string> keys;
        for (const auto& w : tx.write_set) {
            if (!keys.insert(w.key).second) {
                return ValidateResult::bad(h, "DuplicateWriteKey", "write set repeats key " + w.key);
            }
        }
    }
    return ValidateResult::good();
}

} // namespace

ValidateResult validate_chain(const std::vector<Block>& blocks) {
    if (blocks.empty()) {
        return ValidateResult::good();
    }
    ChannelLedger replay(blocks[0].transactions.empty() ? std::string{}
                                                        : blocks[0].transactions[0].channel);
    for (const auto& block : blocks) {
        const int64_t h = replay.height() + 1;
        try {
            // Corrupted hex in stored hashes surfaces as an Error from the
            // recomputation helpers; it must land in the result, not escape.
            auto structural = check_block_structure(block, replay);
            if (!structural.ok) return structural;

            if (h == 0) {
                check_genesis_content(block);
                for (auto flag : block.validation_flags) {
                    if (flag != ValidationFlag::Valid) {
                        return ValidateResult::bad(0, "FlagMismatch", "genesis flag must be Valid");
                    }
                }
            } else {
                StateOverlay overlay(replay);
                for (std::size_t i = 0; i < block.transactions.size(); ++i) {
                    const auto& tx = block.transactions[i];
                    ValidationFlag expected = derive_flag(tx, replay, overlay);
                    if (expected != block.validation_flags[i]) {
                        return ValidateResult::bad(
                            h, "FlagMismatch",
                            "tx " + std::to_string(i) + " revalidates as " + flag_name(expected) +
                                " but is recorded as " + flag_name(block.validation_flags[i]));
                    }
                    if (expected == ValidationFlag::Valid) {
                        overlay.apply(tx, Version{h, static_cast<int64_t>(i)});
                    }
                }
            }
            replay.append_block(block);
        } catch (const Error& e) {
            return ValidateResult::bad(h, e.code(), e.what());
        }
    }
    return ValidateResult::good();
}

ValidateResult validate_chain_bytes(const std::vector<std::string>& block_files) {
    std::vector<Block> blocks;
    blocks.reserve(block_files.size());
    for (std::size_t h = 0; h < block_files.size(); ++h) {
        const std::string& text = block_files[h];
        if (!is_canonical(text)) {
            return ValidateResult::bad(static_cast<int64_t>(h), "BadEncoding",
                                       "block file is not a canonical encoding");
        }
        try {
            blocks.push_back(Block::from_json(canonical_decode(text)));
        } catch (const Error& e) {
            return ValidateResult::bad(static_cast<int64_t>(h), e.code(), e.what());
        } catch (const json::exception& e) {
            return ValidateResult::bad(static_cast<int64_t>(h), "BadEncoding", e.what());
        }
    }
    return validate_chain(blocks);
}

ValidateResult validate_workspace_chain(const std::filesystem::path& workspace_root,
                                        const std::string& channel) {
    return validate_chain_bytes(read_block_files(workspace_root, channel));
}

Transaction make_genesis_tx(const ChannelConfig& config, const std::string& creator_key_id,
                            const Bytes& nonce16) {
    Transaction tx;
    tx.channel = config.channel;
    tx.contract = kConfigContract;
    tx.function = "genesis";
    tx.args = {canonical_encode(config.to_json())};
    tx.creator = creator_key_id;
    tx.nonce = nonce16;
    tx.write_set.push_back({kConfigStateKey, false, to_bytes(tx.args[0])});
    tx.tx_id = tx.computed_tx_id();
    return tx;
}

Bytes lifecycle_state_value(const std::string& name, const std::string& version,
                            const std::set<std::string>& functions, const EndorsementPolicy& policy) {
    json fns = json::array();
    for (const auto& f : functions) fns.push_back(f);
    json j{{"functions", fns}, {"name", name}, {"policy", policy.to_json()}, {"version", version}};
    return to_bytes(canonical_encode(j));
}

} // namespace chainci
