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

#include "chainci/attacks.hpp"

#include <fstream>

namespace chainci::attacks {

namespace fs = std::filesystem;

namespace {

const std::string kChannel = "main";

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

struct WorkspaceInfo {
    fs::path archive;
    std::string registered_digest;
};

WorkspaceInfo read_run_info(const fs::path& workspace) {
    json report = canonical_decode(read_file(workspace / "run-report.json"));
    WorkspaceInfo info;
    for (const auto& r : report.at("results")) {
        if (r.at("kind") == "Package" && r.at("status") == "Success") {
            info.registered_digest = r.at("outputs").at("digest").get<std::string>();
            info.archive = workspace / r.at("outputs").at("archive").get<std::string>();
        }
    }
    if (info.registered_digest.empty()) {
        throw Error("WorkspaceNotReady", "run report has no packaged artifact");
    }
    return info;
}

Fabric open_workspace(const fs::path& workspace) {
    auto seed_hash = crypto::sha256(std::string("chainci.default.seed"));
    return Fabric(workspace, TopologyOptions{}, Bytes(seed_hash.begin(), seed_hash.end()));
}

pipeline::PipelineConfig gate_config(const fs::path& workspace) {
    pipeline::PipelineConfig cfg = pipeline::PipelineConfig::from_env(workspace, {});
    if (fs::exists(workspace / "allowlist.json")) {
        cfg.allowlist = vulnscan::load_allowlist(workspace / "allowlist.json");
    }
    return cfg;
}

ScenarioOutcome detected(std::string detector, std::string detail) {
    return {true, std::move(detector), std::move(detail)};
}

ScenarioOutcome missed(std::string detail) { return {false, "", std::move(detail)}; }

// --- injections ---

ScenarioOutcome run_artifact_tamper(crypto::Rng& rng, const fs::path& workspace) {
    WorkspaceInfo info = read_run_info(workspace);
    std::string bytes = read_file(info.archive);
    const std::size_t index = static_cast<std::size_t>(rng.next() % bytes.size());
    const uint8_t mask = static_cast<uint8_t>(1 + rng.next() % 255);
    bytes[index] = static_cast<char>(static_cast<uint8_t>(bytes[index]) ^ mask);
    write_file(info.archive, bytes);

    // Deploy-style check: recompute the on-disk digest, compare with the
    // digest registered at packaging time.
    const std::string recomputed = crypto::sha256_hex(read_file(info.archive));
    if (recomputed != info.registered_digest) {
        return detected("DigestMismatch", "archive byte " + std::to_string(index) +
                                              " flipped; digest moved to " + recomputed.substr(0, 12));
    }
    return missed("tampered archive still matches registered digest");
}

ScenarioOutcome run_ledger_rewrite(crypto::Rng& rng, const fs::path& workspace) {
    const fs::path blocks = workspace / "ledger" / kChannel / "blocks";
    std::vector<fs::path> files;
    for (int64_t h = 0;; ++h) {
        fs::path f = blocks / (std::to_string(h) + ".json");
        if (!fs::exists(f)) break;
        files.push_back(f);
    }
    if (files.empty()) {
        throw Error("WorkspaceNotReady", "no committed blocks under " + blocks.string());
    }
    const std::size_t target = static_cast<std::size_t>(rng.next() % files.size());
    std::string bytes = read_file(files[target]);
    const std::size_t index = static_cast<std::size_t>(rng.next() % bytes.size());
    const int bit = static_cast<int>(rng.next() % 8);
    bytes[index] = static_cast<char>(static_cast<uint8_t>(bytes[index]) ^ (1u << bit));
    write_file(files[target], bytes);

    auto verdict = validate_workspace_chain(workspace, kChannel);
    if (!verdict.ok) {
        if (verdict.first_bad_height > static_cast<int64_t>(target)) {
            return missed("detected only at height " + std::to_string(verdict.first_bad_height) +
                          " after mutating height " + std::to_string(target));
        }
        return detected("FirstBadHeight", "height " + std::to_string(verdict.first_bad_height) +
                                              " " + verdict.reason);
    }
    return missed("bit flip in block " + std::to_string(target) + " went unnoticed");
}

ScenarioOutcome run_unauthorized_invoke(crypto::Rng& rng, const fs::path& workspace) {
    Fabric fabric = open_workspace(workspace);
    auto clients = fabric.identities_with_role(Role::Client);
    if (clients.empty()) {
        throw Error("WorkspaceNotReady", "workspace has no client identities");
    }
    const Identity& client = clients[rng.next() % clients.size()];
    try {
        fabric.init_contract(kChannel, "provenance", "2.0",
                             EndorsementPolicy::any_org(fabric.org_names()), client);
    } catch (const Error& e) {
        if (e.code() == "PermissionDenied") {
            return detected("PermissionDenied", client.common_name + " rejected: " + e.what());
        }
        return missed("unexpected error " + e.code());
    }
    return missed("client-role identity was allowed to init a contract");
}

ScenarioOutcome run_replay_transaction(crypto::Rng& rng, const fs::path& workspace) {
    Fabric fabric = open_workspace(workspace);
    const ChannelLedger& ledger = fabric.ledger(kChannel);
    std::vector<Transaction> committed;
    for (const auto& block : ledger.blocks()) {
        if (block.header.height == 0) continue;
        for (std::size_t i = 0; i < block.transactions.size(); ++i) {
            if (block.validation_flags[i] == ValidationFlag::Valid) {
                committed.push_back(block.transactions[i]);
            }
        }
    }
    if (committed.empty()) {
        throw Error("WorkspaceNotReady", "no committed transactions to replay");
    }
    Transaction replayed = committed[rng.next() % committed.size()];
    auto outcome = fabric.submit_endorsed(kChannel, replayed);
    if (outcome.flag == ValidationFlag::DuplicateTxId) {
        return detected("DuplicateTxId", "resubmitted " + outcome.tx_id.substr(0, 12) + " rejected");
    }
    return missed("replayed transaction committed as " + flag_name(outcome.flag));
}

ScenarioOutcome run_dependency_downgrade(crypto::Rng& rng, const fs::path& workspace) {
    json manifest = canonical_decode(read_file(workspace / "deps.json"));
    if (!manifest.is_array() || manifest.empty()) {
        throw Error("WorkspaceNotReady", "deps.json has no dependencies");
    }
    // Pull the logging dependency back inside the vulnerable range.
    const std::string downgraded =
        "2." + std::to_string(rng.next() % 15) + "." + std::to_string(rng.next() % 10);
    bool rewritten = false;
    for (auto& dep : manifest) {
        if (dep.at("product") == "log4j") {
            dep["version"] = downgraded;
            rewritten = true;
        }
    }
    if (!rewritten) {
        manifest[0]["version"] = downgraded;
    }
    write_file(workspace / "deps.json", canonical_encode(manifest));

    auto outcome = pipeline::stage_depcheck(workspace / "deps.json", workspace / "feed.json",
                                            gate_config(workspace), workspace);
    if (outcome.report.verdict == vulnscan::Verdict::Halt) {
        return detected("GateHalt", "downgrade to " + downgraded + " halts at max score " +
                                        std::to_string(outcome.report.max_score));
    }
    return missed("downgrade to " + downgraded + " still passed the gate");
}

ScenarioOutcome run_endorsement_forgery(crypto::Rng& rng, const fs::path& workspace) {
    Fabric fabric = open_workspace(workspace);
    auto clients = fabric.identities_with_role(Role::Client);
    const Identity creator = clients.empty() ? fabric.admin_identity(fabric.org_names().front())
                                             : clients[rng.next() % clients.size()];

    // A key pair outside every org root signs the endorsement.
    crypto::KeyPair rogue = crypto::ed25519_keypair(rng.bytes(crypto::kSeedSize));

    const std::string digest = crypto::sha256_hex("forged." + std::to_string(rng.next()));
    const std::string source = crypto::sha256_hex("forged-src." + std::to_string(rng.next()));
    const ContractDef* def = fabric.registry().find("provenance");
    LedgerStateView view(fabric.ledger(kChannel));
    ProposalResult proposal =
        execute_proposal(view, nullptr, *def, kChannel, "register",
                         {digest, "rogue/app", "6.6.6", source}, creator, {}, rng.bytes(16));
    proposal.tx.endorsements.push_back(
        {crypto::sha256_hex(rogue.public_key),
         crypto::ed25519_sign(rogue.secret_key, proposal.tx.body_canonical())});

    auto outcome = fabric.submit_endorsed(kChannel, proposal.tx);
    if (outcome.flag == ValidationFlag::BadSignature) {
        return detected("BadSignature", "forged endorsement rejected, tx excluded from state");
    }
    return missed("forged endorsement committed as " + flag_name(outcome.flag));
}

} // namespace

std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
    case AttackKind::ArtifactTamper: return "ArtifactTamper";
    case AttackKind::LedgerRewrite: return "LedgerRewrite";
    case AttackKind::UnauthorizedInvoke: return "UnauthorizedInvoke";
    case AttackKind::ReplayTransaction: return "ReplayTransaction";
    case AttackKind::DependencyDowngrade: return "DependencyDowngrade";
    case AttackKind::EndorsementForgery: return "EndorsementForgery";
    }
    throw Error("ConfigError", "unhandled attack kind");
}

AttackKind attack_kind_from_name(const std::string& name) {
    for (AttackKind kind : kAllKinds) {
        if (attack_kind_name(kind) == name) return kind;
    }
    throw Error("ConfigError", "unknown attack kind '" + name + "'");
}

std::string stride_name(Stride s) {
    switch (s) {
    case Stride::Spoofing: return "Spoofing";
    case Stride::Tampering: return "Tampering";
    case Stride::Repudiation: return "Repudiation";
    case Stride::InformationDisclosure: return "InformationDisclosure";
    case Stride::DenialOfService: return "DenialOfService";
    case Stride::ElevationOfPrivilege: return "ElevationOfPrivilege";
    }
    throw Error("ConfigError", "unhandled stride category");
}

Stride stride_of(AttackKind kind) {
    switch (kind) {
    case AttackKind::ArtifactTamper: return Stride::Tampering;
    case AttackKind::LedgerRewrite: return Stride::Tampering;
    case AttackKind::UnauthorizedInvoke: return Stride::ElevationOfPrivilege;
    case AttackKind::ReplayTransaction: return Stride::Spoofing;
    case AttackKind::DependencyDowngrade: return Stride::Tampering;
    case AttackKind::EndorsementForgery: return Stride::Spoofing;
    }
    throw Error("ConfigError", "unhandled attack kind");
}

void require_ready_workspace(const fs::path& workspace) {
    const char* missing = nullptr;
    if (!fs::exists(workspace / "run-report.json")) missing = "run-report.json";
    else if (!fs::exists(workspace / "ledger" / kChannel / "blocks" / "0.json")) missing = "ledger blocks";
    else if (!fs::exists(workspace / "deps.json")) missing = "deps.json";
    else if (!fs::exists(workspace / "feed.json")) missing = "feed.json";
    if (missing != nullptr) {
        throw Error("WorkspaceNotReady",
                    "workspace " + workspace.string() + " lacks " + missing +
                        "; run a clean pipeline first");
    }
}

ScenarioOutcome execute_scenario(const AttackScenario& scenario, const fs::path& workspace) {
    require_ready_workspace(workspace);
    crypto::Rng rng(scenario.seed);
    switch (scenario.kind) {
    case AttackKind::ArtifactTamper: return run_artifact_tamper(rng, workspace);
    case AttackKind::LedgerRewrite: return run_ledger_rewrite(rng, workspace);
    case AttackKind::UnauthorizedInvoke: return run_unauthorized_invoke(rng, workspace);
    case AttackKind::ReplayTransaction: return run_replay_transaction(rng, workspace);
    case AttackKind::DependencyDowngrade: return run_dependency_downgrade(rng, workspace);
    case AttackKind::EndorsementForgery: return run_endorsement_forgery(rng, workspace);
    }
    throw Error("ConfigError", "unhandled attack kind");
}

uint64_t derive_scenario_seed(const Bytes& base_seed, AttackKind kind, int index) {
    std::string material(reinterpret_cast<const char*>(base_seed.data()), base_seed.size());
    material += '\0';
    material += attack_kind_name(kind);
    material += '\0';
    material += std::to_string(index);
    auto h = crypto::sha256(material);
    uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed = (seed << 8) | h[static_cast<std::size_t>(i)];
    return seed;
}

void copy_workspace(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    const fs::path to_abs = fs::weakly_canonical(to);
    for (const auto& entry : fs::directory_iterator(from)) {
        // Scratch areas may live inside the workspace; never copy a
        // destination into itself.
        if (entry.path().filename() == ".attack-scratch" ||
            fs::weakly_canonical(entry.path()) == to_abs) {
            continue;
        }
        fs::copy(entry.path(), to / entry.path().filename(),
                 fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }
}

json AttackReport::to_json() const {
    auto record_json = [](const ScenarioRecord& r) {
        return json{{"detail", r.detail},
                    {"detected", r.detected},
                    {"detector", r.detector},
                    {"kind", attack_kind_name(r.kind)},
                    {"seed", r.seed},
                    {"stride", stride_name(r.stride)}};
    };
    json records = json::array();
    for (const auto& r : this->records) records.push_back(record_json(r));
    json missed_arr = json::array();
    for (const auto& r : missed) missed_arr.push_back(record_json(r));
    json per_kind = json::object();
    for (const auto& [kind, run] : per_kind_run) {
        int64_t det = 0;
        if (auto it = per_kind_detected.find(kind); it != per_kind_detected.end()) det = it->second;
        per_kind[kind] = json{{"detected", det}, {"run", run}};
    }
    json stride = json::object();
    for (const auto& [name, count] : stride_summary) stride[name] = count;
    return json{{"detected", detected},
                {"missed", missed_arr},
                {"per_kind", per_kind},
                {"records", records},
                {"scenarios_run", scenarios_run},
                {"stride_summary", stride}};
}

AttackReport run_suite(const std::vector<AttackKind>& kinds, int seeds_per_kind,
                       const Bytes& base_seed, const fs::path& base_workspace,
                       const fs::path& scratch_dir) {
    require_ready_workspace(base_workspace);
    AttackReport report;
    for (AttackKind kind : kinds) {
        for (int i = 0; i < seeds_per_kind; ++i) {
            AttackScenario scenario{kind, derive_scenario_seed(base_seed, kind, i)};
            const fs::path copy =
                scratch_dir / (attack_kind_name(kind) + "-" + std::to_string(i));
            fs::remove_all(copy);
            copy_workspace(base_workspace, copy);

            ScenarioOutcome outcome = execute_scenario(scenario, copy);
            ScenarioRecord record{kind,  scenario.seed,     stride_of(kind),
                                  outcome.detected, outcome.detector, outcome.detail};
            ++report.scenarios_run;
            ++report.per_kind_run[attack_kind_name(kind)];
            ++report.stride_summary[stride_name(stride_of(kind))];
            if (outcome.detected) {
                ++report.detected;
                ++report.per_kind_detected[attack_kind_name(kind)];
            } else {
                report.missed.push_back(record);
            }
            report.records.push_back(std::move(record));
            fs::remove_all(copy);
        }
    }
    return report;
}

int control_detections(const std::vector<AttackKind>& kinds, const fs::path& workspace) {
    require_ready_workspace(workspace);
    int detections = 0;
    for (AttackKind kind : kinds) {
        switch (kind) {
        case AttackKind::ArtifactTamper: {
            WorkspaceInfo info = read_run_info(workspace);
            if (crypto::sha256_hex(read_file(info.archive)) != info.registered_digest) ++detections;
            break;
        }
        case AttackKind::LedgerRewrite: {
            if (!validate_workspace_chain(workspace, kChannel).ok) ++detections;
            break;
        }
        case AttackKind::UnauthorizedInvoke: {
            // An authorized admin passes the same permission check the
            // attack trips over.
            Fabric fabric = open_workspace(workspace);
            const Identity admin = fabric.admin_identity(fabric.org_names().front());
            auto decision = check_permission(fabric.acl(), admin, Action::InitContract);
            if (!decision.allow) ++detections;
            break;
        }
        case AttackKind::ReplayTransaction: {
            Fabric fabric = open_workspace(workspace);
            const Identity admin = fabric.admin_identity(fabric.org_names().front());
            const std::string digest = crypto::sha256_hex("control." + workspace.string());
            const std::string source = crypto::sha256_hex("control-src." + workspace.string());
            auto outcome = fabric.invoke(kChannel, "provenance", "register",
                                         {digest, "control/app", "0.1", source}, admin);
            if (outcome.flag != ValidationFlag::Valid) ++detections;
            break;
        }
        case AttackKind::DependencyDowngrade: {
            auto outcome = pipeline::stage_depcheck(workspace / "deps.json", workspace / "feed.json",
                                                    gate_config(workspace), workspace);
            if (outcome.report.verdict == vulnscan::Verdict::Halt) ++detections;
            break;
        }
        case AttackKind::EndorsementForgery: {
            Fabric fabric = open_workspace(workspace);
            const Identity admin = fabric.admin_identity(fabric.org_names().front());
            const std::string digest = crypto::sha256_hex("control-forge." + workspace.string());
            const std::string source = crypto::sha256_hex("control-forge-src." + workspace.string());
            auto outcome = fabric.invoke(kChannel, "provenance", "register",
                                         {digest, "control/app", "0.2", source}, admin);
            if (outcome.flag == ValidationFlag::BadSignature) ++detections;
            break;
        }
        }
    }
    return detections;
}

} // namespace chainci::attacks
