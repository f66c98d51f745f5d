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

#include <functional>

#include "chainci/ledger.hpp"

namespace chainci {

/// Read interface a contract executes against: a committed snapshot, never
/// half-applied blocks.
class StateView {
public:
    virtual ~StateView() = default;
    virtual std::optional<StateEntry> get(const std::string& key) const = 0;
    virtual std::vector<HistoryEntry> history(const std::string& key) const = 0;
};

class LedgerStateView final : public StateView {
public:
    explicit LedgerStateView(const ChannelLedger& ledger) : ledger_(ledger) {}
    std::optional<StateEntry> get(const std::string& key) const override { return ledger_.get_state(key); }
    std::vector<HistoryEntry> history(const std::string& key) const override {
        return ledger_.read_history(key);
    }

private:
    const ChannelLedger& ledger_;
};

struct PrivatePut {
    std::string collection;
    std::string key;
    Bytes value;
};

/// Accumulates the read/write set while a contract function runs. Reads of
/// this transaction's own writes return the pending value and record no read
/// dependency; everything else records (key, version).
class InvocationContext {
public:
    InvocationContext(const StateView& view, const PrivateStore* collections, Identity creator,
                      std::vector<std::string> args, std::map<std::string, Bytes> transient,
                      bool read_only);

    const std::vector<std::string>& args() const { return args_; }
    const std::string& arg(std::size_t i) const;
    const Identity& creator() const { return creator_; }

    std::optional<Bytes> get_state(const std::string& key);
    std::optional<Version> get_version(const std::string& key);
    void put_state(const std::string& key, Bytes value);
    void delete_state(const std::string& key);
    std::string put_private(const std::string& collection, const std::string& key, Bytes value);
    std::optional<Bytes> transient_value(const std::string& name) const;
    std::vector<HistoryEntry> history(const std::string& key) const;

    const std::vector<ReadItem>& reads() const { return reads_; }
    const std::vector<WriteItem>& writes() const { return writes_; }
    const std::vector<PrivateHashItem>& private_hashes() const { return private_hashes_; }
    const std::vector<PrivatePut>& private_puts() const { return private_puts_; }
    bool wrote() const { return !writes_.empty() || !private_puts_.empty(); }

private:
    const WriteItem* pending_write(const std::string& key) const;
    void record_read(const std::string& key, const std::optional<StateEntry>& entry);
    void ensure_writable() const;

    const StateView& view_;
    const PrivateStore* collections_;
    Identity creator_;
    std::vector<std::string> args_;
    std::map<std::string, Bytes> transient_;
    bool read_only_;
    std::vector<ReadItem> reads_;
    std::vector<WriteItem> writes_;
    std::vector<PrivateHashItem> private_hashes_;
    std::vector<PrivatePut> private_puts_;
};

using ContractFn = std::function<json(InvocationContext&)>;

struct ContractDef {
    std::string name;
    std::string version;
    std::map<std::string, ContractFn> functions;
    std::set<std::string> read_only; // functions safe to serve as queries

    std::set<std::string> function_names() const;
};

/// Shipping unit for the install step; package_id pins name, version and the
/// exact function list.
struct ContractPackage {
    std::string name;
    std::string version;
    std::set<std::string> functions;

    std::string package_id() const;
    static ContractPackage of(const ContractDef& def);
};

/// Natively registered deterministic contract functions; no sandboxed VM.
class ContractRegistry {
public:
    void add(ContractDef def);
    const ContractDef* find(const std::string& name) const;
    std::vector<std::string> names() const;

    /// provenance, attestation and deployment - the built-in security
    /// workflow contracts.
    static ContractRegistry builtins();

private:
    std::map<std::string, ContractDef> contracts_;
};

ContractDef make_provenance_contract();
ContractDef make_attestation_contract();
ContractDef make_deployment_contract();

/// Collection attestation report copies land in when the caller supplies the
/// full report as transient data.
inline const std::string kScanReportCollection = "scan-reports";

struct ProposalResult {
    Transaction tx; // unendorsed; tx_id filled
    std::vector<PrivatePut> private_values;
    json return_value;
};

/// Deterministic execution against a snapshot. No state mutates until the
/// ordering path commits the produced transaction.
ProposalResult execute_proposal(const StateView& view, const PrivateStore* collections,
                                const ContractDef& contract, const std::string& channel,
                                const std::string& function, const std::vector<std::string>& args,
                                const Identity& creator, const std::map<std::string, Bytes>& transient,
                                const Bytes& nonce16);

/// Read-only execution; a function that attempts a write raises
/// WriteInReadOnly and no transaction is produced.
json execute_query(const StateView& view, const PrivateStore* collections, const ContractDef& contract,
                   const std::string& function, const std::vector<std::string>& args,
                   const Identity& creator);

} // namespace chainci
