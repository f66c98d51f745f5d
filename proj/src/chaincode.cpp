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

#include "chainci/chaincode.hpp"

#include <algorithm>

namespace chainci {

InvocationContext::InvocationContext(const StateView& view, const PrivateStore* collections,
                                     Identity creator, std::vector<std::string> args,
                                     std::map<std::string, Bytes> transient, bool read_only)
    : view_(view),
      collections_(collections),
      creator_(std::move(creator)),
      args_(std::move(args)),
      transient_(std::move(transient)),
      read_only_(read_only) {}

const std::string& InvocationContext::arg(std::size_t i) const {
    if (i >= args_.size()) {
        throw Error("ContractError", "missing argument " + std::to_string(i));
    }
    return args_[i];
}

const WriteItem* InvocationContext::pending_write(const std::string& key) const {
    for (auto it = writes_.rbegin(); it != writes_.rend(); ++it) {
        if (it->key == key) return &*it;
    }
    return nullptr;
}

void InvocationContext::record_read(const std::string& key, const std::optional<StateEntry>& entry) {
    for (const auto& r : reads_) {
        if (r.key == key) return; // first read wins; duplicates add nothing
    }
    ReadItem item;
    item.key = key;
    if (entry) item.version = entry->version;
    reads_.push_back(std::move(item));
}

void InvocationContext::ensure_writable() const {
    if (read_only_) {
        throw Error("WriteInReadOnly", "read-only invocation attempted a write");
    }
}

std::optional<Bytes> InvocationContext::get_state(const std::string& key) {
    if (const WriteItem* w = pending_write(key)) {
        if (w->is_delete) return std::nullopt;
        return w->value;
    }
    auto entry = view_.get(key);
    record_read(key, entry);
    if (!entry) return std::nullopt;
    return entry->value;
}

std::optional<Version> InvocationContext::get_version(const std::string& key) {
    auto entry = view_.get(key);
    record_read(key, entry);
    if (!entry) return std::nullopt;
    return entry->version;
}

void InvocationContext::put_state(const std::string& key, Bytes value) {
    ensure_writable();
    writes_.push_back({key, false, std::move(value)});
}

void InvocationContext::delete_state(const std::string& key) {
    ensure_writable();
    writes_.push_back({key, true, {}});
}

std::string InvocationContext::put_private(const std::string& collection, const std::string& key,
                                           Bytes value) {
    ensure_writable();
    if (collections_ == nullptr || !collections_->declared(collection)) {
        throw Error("UnknownCollection", "collection '" + collection + "' is not declared");
    }
    std::string hash = crypto::sha256_hex(value);
    private_hashes_.push_back({collection, key, hash});
    private_puts_.push_back({collection, key, std::move(value)});
    return hash;
}

std::optional<Bytes> InvocationContext::transient_value(const std::string& name) const {
    auto it = transient_.find(name);
    if (it == transient_.end()) return std::nullopt;
    return it->second;
}

std::vector<HistoryEntry> InvocationContext::history(const std::string& key) const {
    return view_.history(key);
}

std::set<std::string> ContractDef::function_names() const {
    std::set<std::string> names;
    for (const auto& [name, fn] : functions) names.insert(name);
    return names;
}

std::string ContractPackage::package_id() const {
    json fns = json::array();
    for (const auto& f : functions) fns.push_back(f);
    json j{{"functions", fns}, {"name", name}, {"version", version}};
    return crypto::sha256_hex(canonical_encode(j));
}

ContractPackage ContractPackage::of(const ContractDef& def) {
    return ContractPackage{def.name, def.version, def.function_names()};
}

void ContractRegistry::add(ContractDef def) {
    contracts_[def.name] = std::move(def);
}

const ContractDef* ContractRegistry::find(const std::string& name) const {
    auto it = contracts_.find(name);
    if (it == contracts_.end()) return nullptr;
    return &it->second;
}

std::vector<std::string> ContractRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, def] : contracts_) out.push_back(name);
    return out;
}

ContractRegistry ContractRegistry::builtins() {
    ContractRegistry reg;
    reg.add(make_provenance_contract());
    reg.add(make_attestation_contract());
    reg.add(make_deployment_contract());
    return reg;
}

namespace {

bool is_digest(const std::string& s) {
    if (s.size() != 64) return false;
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

void require_digest(const std::string& s) {
    if (!is_digest(s)) {
        throw Error("MalformedDigest", "digest must be 64 lowercase hex characters");
    }
}

int parse_score(const std::string& s, const char* what) {
    std::size_t pos = 0;
    int value = 0;
    try {
        value = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw Error("ContractError", std::string(what) + " must be an integer in tenths");
    }
    if (pos != s.size() || value < 0 || value > 100) {
        throw Error("ContractError", std::string(what) + " must be within 0..100 tenths");
    }
    return value;
}

json parse_record(const Bytes& value) { return canonical_decode(to_string(value)); }

std::string artifact_key(const std::string& digest) { return "artifact/" + digest; }
std::string attest_count_key(const std::string& digest) { return "attest/" + digest + "/n"; }
std::string attest_key(const std::string& digest, int64_t seq) {
    return "attest/" + digest + "/" + std::to_string(seq);
}
std::string deploy_key(const std::string& env, const std::string& name) {
    return "deploy/" + env + "/" + name;
}

int64_t attest_count(InvocationContext& ctx, const std::string& digest) {
    auto raw = ctx.get_state(attest_count_key(digest));
    if (!raw) return 0;
    return canonical_decode(to_string(*raw)).get<int64_t>();
}

} // namespace

ContractDef make_provenance_contract() {
    ContractDef def;
    def.name = "provenance";
    def.version = "1.0";
    def.read_only = {"verify", "history"};

    def.functions["register"] = [](InvocationContext& ctx) -> json {
        const std::string& digest = ctx.arg(0);
        const std::string& name = ctx.arg(1);
        const std::string& tag = ctx.arg(2);
        const std::string& source_digest = ctx.arg(3);
        require_digest(digest);
        require_digest(source_digest);
        if (name.empty() || tag.empty()) {
            throw Error("ContractError", "artifact name and tag must be nonempty");
        }
        if (auto existing = ctx.get_state(artifact_key(digest))) {
            json rec = parse_record(*existing);
            if (rec.at("name") == name && rec.at("tag") == tag &&
                rec.at("source_digest") == source_digest) {
                return json{{"record", rec}, {"status", "exists"}};
            }
            throw Error("DuplicateArtifact",
                        "digest " + digest + " already registered with different metadata");
        }
        json rec{{"builder", ctx.creator().key_id},
                 {"digest", digest},
                 {"name", name},
                 {"source_digest", source_digest},
                 {"tag", tag}};
        ctx.put_state(artifact_key(digest), to_bytes(canonical_encode(rec)));
        return json{{"record", rec}, {"status", "registered"}};
    };

    def.functions["verify"] = [](InvocationContext& ctx) -> json {
        const std::string& digest = ctx.arg(0);
        require_digest(digest);
        auto value = ctx.get_state(artifact_key(digest));
        if (!value) {
            return json{{"status", "Unknown"}};
        }
        auto version = ctx.get_version(artifact_key(digest));
        return json{{"record", parse_record(*value)},
                    {"status", "Registered"},
                    {"version", version ? version->to_json() : json(nullptr)}};
    };

    def.functions["history"] = [](InvocationContext& ctx) -> json {
        const std::string& digest = ctx.arg(0);
        require_digest(digest);
        json out = json::array();
        for (const auto& entry : ctx.history(artifact_key(digest))) {
            out.push_back(json{{"delete", entry.is_delete},
                               {"record", entry.is_delete ? json(nullptr) : parse_record(entry.value)},
                               {"tx_id", entry.tx_id},
                               {"version", entry.version.to_json()}});
        }
        return json{{"history", out}};
    };

    return def;
}

ContractDef make_attestation_contract() {
    ContractDef def;
    def.name = "attestation";
    def.version = "1.0";
    def.read_only = {"latest"};

    def.functions["record"] = [](InvocationContext& ctx) -> json {
        const std::string& digest = ctx.arg(0);
        const std::string& report_hash = ctx.arg(1);
        const int max_score = parse_score(ctx.arg(2), "max_score");
        const std::string& verdict = ctx.arg(3);
        const int threshold = parse_score(ctx.arg(4), "threshold");
        require_digest(digest);
        require_digest(report_hash);
        if (verdict != "Pass" && verdict != "Halt") {
            throw Error("ContractError", "verdict must be Pass or Halt");
        }
        // A Halt below threshold is legitimate (unverified sources); a Pass
        // at or above it never is.
        if (verdict == "Pass" && max_score >= threshold) {
            throw Error("InconsistentVerdict", "Pass verdict with max_score >= threshold");
        }
        if (!ctx.get_state(artifact_key(digest))) {
            throw Error("UnknownArtifact", "no artifact registered for " + digest);
        }
        const int64_t seq = attest_count(ctx, digest);
        if (auto report = ctx.transient_value("report")) {
            if (crypto::sha256_hex(*report) != report_hash) {
                throw Error("ReportHashMismatch", "transient report does not hash to report_hash");
            }
            ctx.put_private(kScanReportCollection,
                            "report/" + digest + "/" + std::to_string(seq), *report);
        }
        json att{{"artifact_digest", digest},
                 {"max_score", max_score},
                 {"report_hash", report_hash},
                 {"scanner", ctx.creator().key_id},
                 {"threshold", threshold},
                 {"verdict", verdict}};
        ctx.put_state(attest_key(digest, seq), to_bytes(canonical_encode(att)));
        ctx.put_state(attest_count_key(digest), to_bytes(canonical_encode(json(seq + 1))));
        return json{{"seq", seq}};
    };

    def.functions["latest"] = [](InvocationContext& ctx) -> json {
        const std::string& digest = ctx.arg(0);
        require_digest(digest);
        if (!ctx.get_state(artifact_key(digest))) {
            throw Error("UnknownArtifact", "no artifact registered for " + digest);
        }
        const int64_t n = attest_count(ctx, digest);
        if (n == 0) {
            return json{{"status", "None"}};
        }
        auto value = ctx.get_state(attest_key(digest, n - 1));
        if (!value) {
            throw Error("ContractError", "attestation sequence is inconsistent");
        }
        return json{{"attestation", parse_record(*value)}, {"seq", n - 1}, {"status", "Recorded"}};
    };

    return def;
}

ContractDef make_deployment_contract() {
    ContractDef def;
    def.name = "deployment";
    def.version = "1.0";
    def.read_only = {"status"};

    def.functions["record"] = [](InvocationContext& ctx) -> json {
        const std::string& digest = ctx.arg(0);
        const std::string& environment = ctx.arg(1);
        const std::string& container = ctx.arg(2);
        require_digest(digest);
        if (environment.empty() || container.empty()) {
            throw Error("ContractError", "environment and container name must be nonempty");
        }
        if (!ctx.get_state(artifact_key(digest))) {
            throw Error("UnknownArtifact", "no artifact registered for " + digest);
        }
        const int64_t n = attest_count(ctx, digest);
        if (n == 0) {
            throw Error("NoPassingAttestation", "artifact has no attestation on record");
        }
        auto latest = ctx.get_state(attest_key(digest, n - 1));
        if (!latest || parse_record(*latest).at("verdict") != "Pass") {
            throw Error("NoPassingAttestation", "latest attestation is not a Pass");
        }
        json rec{{"artifact_digest", digest},
                 {"container_name", container},
                 {"deployer", ctx.creator().key_id},
                 {"environment", environment}};
        ctx.put_state(deploy_key(environment, container), to_bytes(canonical_encode(rec)));
        return json{{"record", rec}, {"status", "deployed"}};
    };

    def.functions["status"] = [](InvocationContext& ctx) -> json {
        const std::string& environment = ctx.arg(0);
        const std::string& container = ctx.arg(1);
        auto value = ctx.get_state(deploy_key(environment, container));
        if (!value) {
            return json{{"status", "Unknown"}};
        }
        return json{{"record", parse_record(*value)}, {"status", "Deployed"}};
    };

    return def;
}

namespace {

const ContractFn& find_function(const ContractDef& contract, const std::string& function) {
    auto it = contract.functions.find(function);
    if (it == contract.functions.end()) {
        throw Error("UnknownFunction",
                    "contract " + contract.name + " has no function '" + function + "'");
    }
    return it->second;
}

} // namespace

ProposalResult execute_proposal(const StateView& view, const PrivateStore* collections,
                                const ContractDef& contract, const std::string& channel,
                                const std::string& function, const std::vector<std::string>& args,
                                const Identity& creator, const std::map<std::string, Bytes>& transient,
                                const Bytes& nonce16) {
    const ContractFn& fn = find_function(contract, function);
    InvocationContext ctx(view, collections, creator, args, transient, /*read_only=*/false);
    json value;
    try {
        value = fn(ctx);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error("ContractError", e.what());
    }

    ProposalResult result;
    result.tx.channel = channel;
    result.tx.contract = contract.name;
    result.tx.function = function;
    result.tx.args = args;
    result.tx.creator = creator.key_id;
    result.tx.nonce = nonce16;
    result.tx.read_set = ctx.reads();
    result.tx.write_set = ctx.writes();
    result.tx.private_hashes = ctx.private_hashes();
    result.tx.tx_id = result.tx.computed_tx_id();
    result.private_values = ctx.private_puts();
    result.return_value = std::move(value);
    return result;
}

json execute_query(const StateView& view, const PrivateStore* collections, const ContractDef& contract,
                   const std::string& function, const std::vector<std::string>& args,
                   const Identity& creator) {
    const ContractFn& fn = find_function(contract, function);
    InvocationContext ctx(view, collections, creator, args, {}, /*read_only=*/true);
    try {
        return fn(ctx);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error("ContractError", e.what());
    }
}

} // namespace chainci
