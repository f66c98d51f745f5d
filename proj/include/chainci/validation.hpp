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

#include "chainci/ledger.hpp"

namespace chainci {

struct ValidateResult {
    bool ok = true;
    int64_t first_bad_height = -1;
    std::string reason; // error code, e.g. PrevHashMismatch
    std::string detail;

    static ValidateResult good() { return {}; }
    static ValidateResult bad(int64_t height, std::string reason, std::string detail) {
        return {false, height, std::move(reason), std::move(detail)};
    }
};

/// Uncommitted view layered over a ledger: effects of earlier Valid
/// transactions in the block being validated count as current state
/// (execute-order-validate intra-block MVCC).
class StateOverlay {
public:
    explicit StateOverlay(const ChannelLedger& base) : base_(base) {}

    std::optional<StateEntry> get(const std::string& key) const;
    std::optional<LifecycleEntry> lifecycle_entry(const std::string& contract) const;
    bool seen(const std::string& tx_id) const;
    void apply(const Transaction& tx, Version version);

private:
    const ChannelLedger& base_;
    std::map<std::string, std::optional<StateEntry>> entries_; // nullopt = deleted
    std::set<std::string> tx_ids_;
};

/// Commit-time flag, checked in order: DuplicateTxId, BadSignature (any
/// endorsement failing verification), PolicyFail, MvccConflict, else Valid.
ValidationFlag derive_flag(const Transaction& tx, const ChannelLedger& ledger, const StateOverlay& overlay);

/// Fills proposal.validation_flags against the current ledger tip.
void assign_validation_flags(Block& proposal, const ChannelLedger& ledger);

/// Content rules for block 0: a single unendorsed config transaction whose
/// write set is exactly the config document. Throws BadGenesis.
void check_genesis_content(const Block& genesis);

/// Full verification walk from genesis: linkage, merkle roots, block hashes,
/// tx_id recomputation, and re-derivation of every validation flag
/// (including endorsement signature checks against the genesis directory).
ValidateResult validate_chain(const std::vector<Block>& blocks);

/// Same, starting from raw block-file bytes: files must parse and be
/// byte-exact canonical encodings, so any flipped bit is load-bearing.
ValidateResult validate_chain_bytes(const std::vector<std::string>& block_files);

ValidateResult validate_workspace_chain(const std::filesystem::path& workspace_root,
                                        const std::string& channel);

Transaction make_genesis_tx(const ChannelConfig& config, const std::string& creator_key_id,
                            const Bytes& nonce16);

Bytes lifecycle_state_value(const std::string& name, const std::string& version,
                            const std::set<std::string>& functions, const EndorsementPolicy& policy);

} // namespace chainci
