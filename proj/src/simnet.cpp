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

#include "chainci/simnet.hpp"

#include <algorithm>
#include <fstream>
#include <queue>

namespace chainci {

void SimNetConfig::validate() const {
    if (latency_min_ms < 0 || latency_max_ms < latency_min_ms) {
        throw Error("ConfigError", "latency range must satisfy 0 <= min <= max");
    }
    if (drop_probability < 0.0 || drop_probability > 1.0) {
        throw Error("ConfigError", "drop probability must be within [0, 1]");
    }
    if (drop_probability > 0.95) {
        throw Error("ConfigError", "drop probability above 0.95 cannot make progress");
    }
    cut.validate();
}

namespace {

constexpr int kMaxSendAttempts = 500;

enum class MsgKind { ExecRequest, EndorseReply, TxSubmit, BlockDeliver, CutTimer };

struct SimPeerNode {
    std::string org;
    int index = 0;
    Identity identity;
    ChannelLedger replica;
    std::map<int64_t, Block> buffered; // out-of-order block deliveries

    SimPeerNode(std::string org_, int index_, Identity id, std::string channel)
        : org(std::move(org_)), index(index_), identity(std::move(id)), replica(std::move(channel)) {}

    std::string name() const { return org + "/peer" + std::to_string(index); }
};

struct GatewayState {
    WorkloadOp op;
    Identity creator;
    Bytes nonce;
    std::map<std::string, Transaction> responses; // endorsing peer -> executed tx
    std::size_t expected = 0;
    bool submitted = false;
    bool failed = false;
};

struct SimEvent {
    int64_t t = 0;
    uint64_t seq = 0;
    MsgKind kind = MsgKind::CutTimer;
    std::string from;
    std::string to;
    int proposal = -1;
    int peer = -1;      // index into peers for ExecRequest/EndorseReply
    Transaction tx;     // EndorseReply payload / TxSubmit payload
    Block block;        // BlockDeliver payload
    int attempt = 0;
};

struct EventOrder {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
        if (a.t != b.t) return a.t > b.t;
        return a.seq > b.seq;
    }
};

class Simulation {
public:
    Simulation(const SimTopology& topology, const SimNetConfig& config,
               const std::vector<WorkloadOp>& workload)
        : topology_(topology), config_(config), workload_(workload),
          rng_(config.seed ^ 0x5311c1a9u) {}

    SimResult run();

private:
    void log(int64_t t, const std::string& type, const std::string& from, const std::string& to,
             const std::string& detail) {
        json line{{"detail", detail}, {"from", from}, {"seq", log_seq_++},
                  {"t", t},           {"to", to},     {"type", type}};
        result_.event_log.push_back(canonical_encode(line));
    }

    bool partitioned(const std::string& a, const std::string& b, int64_t t) const {
        for (const auto& p : config_.partitions) {
            if (t >= p.heal_at_ms) continue;
            const bool a_in_a = p.side_a.count(a) > 0, a_in_b = p.side_b.count(a) > 0;
            const bool b_in_a = p.side_a.count(b) > 0, b_in_b = p.side_b.count(b) > 0;
            if ((a_in_a && b_in_b) || (a_in_b && b_in_a)) return true;
        }
        return false;
    }

    void schedule(SimEvent ev) {
        ev.seq = next_seq_++;
        queue_.push(std::move(ev));
    }

    /// Transport with loss + retransmission: each attempt draws latency and
    /// a drop; dropped or partitioned sends retry until delivered.
    void send(int64_t now, SimEvent ev) {
        if (ev.attempt == 0) {
            log(now, "send", ev.from, ev.to, msg_detail(ev));
        }
        if (ev.attempt >= kMaxSendAttempts) {
            log(now, "undeliverable", ev.from, ev.to, msg_detail(ev));
            return;
        }
        const int64_t latency = rng_.in_range(config_.latency_min_ms, config_.latency_max_ms);
        const bool blocked = partitioned(ev.from, ev.to, now + latency);
        if (blocked || rng_.chance(config_.drop_probability)) {
            log(now, "drop", ev.from, ev.to, msg_detail(ev));
            SimEvent retry = std::move(ev);
            ++retry.attempt;
            retry.t = now + 2 * config_.latency_max_ms + 1;
            // Re-enters send() at retry.t via a self-addressed timer.
            retry_queue_.push_back(std::move(retry));
            schedule(SimEvent{retry_queue_.back().t, 0, MsgKind::CutTimer, "retry", "retry", -1, -1,
                              {}, {}, static_cast<int>(retry_queue_.size() - 1)});
            return;
        }
        ev.t = now + latency;
        schedule(std::move(ev));
    }

    std::string msg_detail(const SimEvent& ev) const {
        switch (ev.kind) {
        case MsgKind::ExecRequest: return "exec_req:p" + std::to_string(ev.proposal);
        case MsgKind::EndorseReply: return "endorse:p" + std::to_string(ev.proposal);
        case MsgKind::TxSubmit: return "tx:" + ev.tx.tx_id.substr(0, 12);
        case MsgKind::BlockDeliver: return "block:" + std::to_string(ev.block.header.height);
        case MsgKind::CutTimer: return "timer";
        }
        return "?";
    }

    void bootstrap();
    void inject_workload();
    void handle(const SimEvent& ev);
    void handle_exec_request(const SimEvent& ev);
    void handle_endorse_reply(const SimEvent& ev);
    void handle_tx_submit(const SimEvent& ev);
    void handle_block_deliver(const SimEvent& ev);
    void orderer_cut(int64_t now);
    void peer_commit(SimPeerNode& peer, const Block& block, int64_t now);

    Bytes secret_key_for(const std::string& key_id) const;
    const ContractDef* contract_def(const std::string& name) const {
        return registry_.find(name);
    }

    SimTopology topology_;
    SimNetConfig config_;
    std::vector<WorkloadOp> workload_;
    crypto::Rng rng_;

    std::vector<OrgMaterials> orgs_;
    std::vector<SimPeerNode> peers_;
    std::map<std::string, std::size_t> endorser_of_org_; // org -> peer index
    ContractRegistry registry_ = ContractRegistry::builtins();
    std::vector<GatewayState> gateways_;

    // Orderer: sequences blocks, never validates.
    std::vector<PendingTx> orderer_pending_;
    int64_t orderer_next_height_ = 0;
    std::string orderer_last_hash_ = kZeroHash;

    std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> queue_;
    std::vector<SimEvent> retry_queue_;
    uint64_t next_seq_ = 1;
    uint64_t log_seq_ = 0;
    SimResult result_;
};

Bytes Simulation::secret_key_for(const std::string& key_id) const {
    for (const auto& m : orgs_) {
        auto it = m.secret_keys.find(key_id);
        if (it != m.secret_keys.end()) return it->second;
    }
    throw Error("UnknownKey", "no secret key for " + key_id);
}

void Simulation::bootstrap() {
    auto seed_hash = crypto::sha256("chainci.simnet." + std::to_string(config_.seed));
    Bytes seed(seed_hash.begin(), seed_hash.end());

    for (std::size_t i = 0; i < topology_.orgs.size(); ++i) {
        const auto& spec = topology_.orgs[i];
        orgs_.push_back(generate_org_materials(spec.name, spec.peers, 1, seed, i == 0));
    }

    ChannelConfig cfg;
    cfg.channel = topology_.channel;
    for (const auto& m : orgs_) {
        cfg.org_roots[m.org] = m.root.public_key;
        cfg.orgs.push_back(m.org);
        for (const auto& cert : m.certificates) cfg.directory[cert.identity.key_id] = cert;
    }
    std::sort(cfg.orgs.begin(), cfg.orgs.end());

    const Identity bootstrap_admin = orgs_[0].admin().identity;
    Transaction genesis_tx = make_genesis_tx(cfg, bootstrap_admin.key_id, rng_.bytes(16));
    Block genesis = seal_block(0, kZeroHash, {std::move(genesis_tx)});
    {
        ChannelLedger scratch(topology_.channel);
        assign_validation_flags(genesis, scratch);
    }

    // Lifecycle block: the three built-ins activate with an any-org policy.
    std::vector<std::string> org_names;
    for (const auto& m : orgs_) org_names.push_back(m.org);
    std::sort(org_names.begin(), org_names.end());
    const EndorsementPolicy policy = EndorsementPolicy::any_org(org_names);

    ChannelLedger staging(topology_.channel);
    staging.append_block(genesis);

    std::vector<Transaction> inits;
    for (const std::string name : {"provenance", "attestation", "deployment"}) {
        const ContractDef* def = registry_.find(name);
        Transaction tx;
        tx.channel = topology_.channel;
        tx.contract = kLifecycleContract;
        tx.function = "init";
        tx.args = {name, def->version, canonical_encode(policy.to_json())};
        tx.creator = bootstrap_admin.key_id;
        tx.nonce = rng_.bytes(16);
        tx.read_set.push_back({kLifecyclePrefix + name, std::nullopt});
        tx.write_set.push_back({kLifecyclePrefix + name, false,
                                lifecycle_state_value(name, def->version, def->function_names(), policy)});
        tx.tx_id = tx.computed_tx_id();
        tx.endorsements.push_back({bootstrap_admin.key_id,
                                   crypto::ed25519_sign(secret_key_for(bootstrap_admin.key_id),
                                                        tx.body_canonical())});
        inits.push_back(std::move(tx));
    }
    Block init_block = seal_block(1, genesis.block_hash, std::move(inits));
    assign_validation_flags(init_block, staging);
    for (auto flag : init_block.validation_flags) {
        if (flag != ValidationFlag::Valid) {
            throw Error("BootstrapFailed", "lifecycle transaction did not validate");
        }
    }

    for (const auto& m : orgs_) {
        int index = 0;
        for (const auto* cert : m.with_role(Role::Peer)) {
            SimPeerNode node(m.org, index, cert->identity, topology_.channel);
            node.replica.append_block(genesis);
            node.replica.append_block(init_block);
            if (index == 0) endorser_of_org_[m.org] = peers_.size();
            peers_.push_back(std::move(node));
            ++index;
        }
    }

    orderer_next_height_ = 2;
    orderer_last_hash_ = init_block.block_hash;
    log(0, "bootstrap", "orderer", "*",
        "channel:" + topology_.channel + ",orgs:" + std::to_string(orgs_.size()) +
            ",peers:" + std::to_string(peers_.size()));
}

void Simulation::inject_workload() {
    for (std::size_t i = 0; i < workload_.size(); ++i) {
        const auto& op = workload_[i];
        GatewayState gw;
        gw.op = op;
        const auto& materials = [&]() -> const OrgMaterials& {
            for (const auto& m : orgs_) {
                if (m.org == op.client_org) return m;
            }
            throw Error("ConfigError", "workload references unknown org " + op.client_org);
        }();
        auto clients = materials.with_role(Role::Client);
        gw.creator = clients.empty() ? materials.admin().identity : clients[0]->identity;
        gw.nonce = rng_.bytes(16);
        gw.expected = endorser_of_org_.size();
        gateways_.push_back(std::move(gw));

        const int64_t t = 1 + static_cast<int64_t>(i) * config_.submit_stagger_ms;
        for (const auto& [org, peer_idx] : endorser_of_org_) {
            SimEvent ev;
            ev.t = t;
            ev.kind = MsgKind::ExecRequest;
            ev.from = "gw:" + op.client_org;
            ev.to = peers_[peer_idx].name();
            ev.proposal = static_cast<int>(i);
            ev.peer = static_cast<int>(peer_idx);
            send(t, std::move(ev));
        }
    }
}

void Simulation::handle_exec_request(const SimEvent& ev) {
    log(ev.t, "deliver", ev.from, ev.to, msg_detail(ev));
    SimPeerNode& peer = peers_[static_cast<std::size_t>(ev.peer)];
    GatewayState& gw = gateways_[static_cast<std::size_t>(ev.proposal)];

    const ContractDef* def = contract_def(gw.op.contract);
    if (def == nullptr || !peer.replica.lifecycle_entry(gw.op.contract)) {
        log(ev.t, "exec_fail", peer.name(), ev.from, "p" + std::to_string(ev.proposal));
        return;
    }
    LedgerStateView view(peer.replica);
    ProposalResult result;
    try {
        result = execute_proposal(view, nullptr, *def, topology_.channel, gw.op.function, gw.op.args,
                                  gw.creator, {}, gw.nonce);
    } catch (const Error& e) {
        log(ev.t, "exec_fail", peer.name(), ev.from, std::string("p") + std::to_string(ev.proposal) +
                                                         ":" + e.code());
        return;
    }
    result.tx.endorsements.push_back(
        {peer.identity.key_id,
         crypto::ed25519_sign(secret_key_for(peer.identity.key_id), result.tx.body_canonical())});

    SimEvent reply;
    reply.t = ev.t;
    reply.kind = MsgKind::EndorseReply;
    reply.from = peer.name();
    reply.to = ev.from;
    reply.proposal = ev.proposal;
    reply.peer = ev.peer;
    reply.tx = std::move(result.tx);
    send(ev.t, std::move(reply));
}

void Simulation::handle_endorse_reply(const SimEvent& ev) {
    log(ev.t, "deliver", ev.from, ev.to, msg_detail(ev));
    GatewayState& gw = gateways_[static_cast<std::size_t>(ev.proposal)];
    if (gw.submitted || gw.failed) return; // duplicate delivery after retransmit
    gw.responses[ev.from] = ev.tx;
    if (gw.responses.size() < gw.expected) return;

    // All endorsers answered: read/write sets must be byte-identical.
    Transaction merged;
    bool first = true;
    for (const auto& [peer_name, tx] : gw.responses) {
        if (first) {
            merged = tx;
            first = false;
            continue;
        }
        if (tx.body_canonical() != merged.body_canonical()) {
            gw.failed = true;
            log(ev.t, "endorse_mismatch", ev.to, "*", "p" + std::to_string(ev.proposal));
            return;
        }
        for (const auto& e : tx.endorsements) merged.endorsements.push_back(e);
    }
    gw.submitted = true;

    SimEvent submit;
    submit.t = ev.t;
    submit.kind = MsgKind::TxSubmit;
    submit.from = ev.to; // the gateway
    submit.to = "orderer";
    submit.proposal = ev.proposal;
    submit.tx = std::move(merged);
    send(ev.t, std::move(submit));
}

void Simulation::handle_tx_submit(const SimEvent& ev) {
    log(ev.t, "deliver", ev.from, ev.to, msg_detail(ev));
    for (const auto& pending : orderer_pending_) {
        if (pending.tx.tx_id == ev.tx.tx_id) return; // duplicate delivery
    }
    orderer_pending_.push_back(PendingTx{ev.tx, ev.t});
    orderer_cut(ev.t);
    if (!orderer_pending_.empty()) {
        SimEvent timer;
        timer.t = ev.t + config_.cut.max_wait_ms;
        timer.kind = MsgKind::CutTimer;
        timer.from = "orderer";
        timer.to = "orderer";
        timer.peer = -1;
        schedule(std::move(timer));
    }
}

void Simulation::orderer_cut(int64_t now) {
    for (auto& batch : cut_blocks(orderer_pending_, config_.cut, now)) {
        Block block = seal_block(orderer_next_height_++, orderer_last_hash_, std::move(batch));
        orderer_last_hash_ = block.block_hash;
        log(now, "cut", "orderer", "*",
            "block:" + std::to_string(block.header.height) + ",txs:" +
                std::to_string(block.transactions.size()));
        for (std::size_t p = 0; p < peers_.size(); ++p) {
            SimEvent ev;
            ev.t = now;
            ev.kind = MsgKind::BlockDeliver;
            ev.from = "orderer";
            ev.to = peers_[p].name();
            ev.peer = static_cast<int>(p);
            ev.block = block;
            send(now, std::move(ev));
        }
    }
}

void Simulation::peer_commit(SimPeerNode& peer, const Block& block, int64_t now) {
    Block local = block;
    assign_validation_flags(local, peer.replica);
    int64_t height = local.header.height;
    peer.replica.append_block(std::move(local));
    log(now, "commit", peer.name(), "",
        "block:" + std::to_string(height) + ",tip:" + peer.replica.tip_hash().substr(0, 12));
}

void Simulation::handle_block_deliver(const SimEvent& ev) {
    log(ev.t, "deliver", ev.from, ev.to, msg_detail(ev));
    SimPeerNode& peer = peers_[static_cast<std::size_t>(ev.peer)];
    const int64_t h = ev.block.header.height;
    if (h <= peer.replica.height()) return; // retransmitted duplicate
    peer.buffered[h] = ev.block;
    while (true) {
        auto it = peer.buffered.find(peer.replica.height() + 1);
        if (it == peer.buffered.end()) break;
        peer_commit(peer, it->second, ev.t);
        peer.buffered.erase(it);
    }
}

void Simulation::handle(const SimEvent& ev) {
    switch (ev.kind) {
    case MsgKind::ExecRequest: handle_exec_request(ev); break;
    case MsgKind::EndorseReply: handle_endorse_reply(ev); break;
    case MsgKind::TxSubmit: handle_tx_submit(ev); break;
    case MsgKind::BlockDeliver: handle_block_deliver(ev); break;
    case MsgKind::CutTimer:
        if (ev.from == "retry") {
            // Re-attempt a dropped message.
            SimEvent retry = retry_queue_[static_cast<std::size_t>(ev.attempt)];
            send(ev.t, std::move(retry));
        } else {
            orderer_cut(ev.t);
        }
        break;
    }
}

SimResult Simulation::run() {
    config_.validate();
    if (topology_.orgs.empty()) {
        throw Error("ConfigError", "topology has no orgs");
    }
    for (const auto& spec : topology_.orgs) {
        if (spec.peers < 1) throw Error("ConfigError", "every org needs at least one peer");
    }

    bootstrap();
    inject_workload();

    int64_t now = 0;
    while (!queue_.empty()) {
        SimEvent ev = queue_.top();
        queue_.pop();
        now = ev.t;
        handle(ev);
    }

    result_.end_ms = now;
    bool converged = true;
    std::string first;
    for (const auto& peer : peers_) {
        std::string fingerprint = crypto::sha256_hex(peer.replica.tip_hash() + "|" +
                                                     peer.replica.state().digest() + "|" +
                                                     std::to_string(peer.replica.height()));
        result_.final_fingerprint[peer.name()] = fingerprint;
        result_.final_height[peer.name()] = peer.replica.height();
        if (first.empty()) {
            first = fingerprint;
        } else if (fingerprint != first) {
            converged = false;
        }
    }
    result_.converged = converged;
    for (const auto& gw : gateways_) {
        if (gw.submitted) ++result_.proposals_committed;
    }
    return result_;
}

} // namespace

SimResult run_simnet(const SimTopology& topology, const SimNetConfig& config,
                     const std::vector<WorkloadOp>& workload) {
    Simulation sim(topology, config, workload);
    return sim.run();
}

void write_event_log(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("IoError", "cannot write " + path.string());
    }
    for (const auto& line : lines) {
        out << line << '\n';
    }
}

std::vector<WorkloadOp> make_register_workload(int count, uint64_t seed,
                                               const std::vector<std::string>& client_orgs) {
    std::vector<WorkloadOp> ops;
    ops.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::string digest =
            crypto::sha256_hex("workload." + std::to_string(seed) + "." + std::to_string(i));
        const std::string source =
            crypto::sha256_hex("source." + std::to_string(seed) + "." + std::to_string(i));
        WorkloadOp op;
        op.contract = "provenance";
        op.function = "register";
        op.args = {digest, "demo/app", "1." + std::to_string(i), source};
        op.client_org = client_orgs[static_cast<std::size_t>(i) % client_orgs.size()];
        ops.push_back(std::move(op));
    }
    return ops;
}

} // namespace chainci
