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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chainci/fabric.hpp"
#include "chainci/ordering.hpp"

#include "support.hpp"

using namespace chainci;

namespace {

Bytes test_seed() { return Bytes(crypto::kSeedSize, 0x5c); }

TopologyOptions two_orgs() {
    TopologyOptions topo;
    topo.orgs = {"Org1", "Org2"};
    topo.peers_per_org = 2;
    topo.clients_per_org = 1;
    return topo;
}

struct Net {
    test::TempDir dir{"ordering"};
    Fabric fabric;
    Identity admin;

    explicit Net(TopologyOptions topo = two_orgs()) : fabric(dir.path(), topo, test_seed()) {
        admin = fabric.admin_identity("Org1");
        fabric.create_channel("main", admin);
        for (auto& p : fabric.peers()) {
            fabric.join_channel(p.name(), "main", admin);
        }
        for (const char* name : {"provenance", "attestation", "deployment"}) {
            const ContractDef* def = fabric.registry().find(name);
            const ContractPackage pkg = ContractPackage::of(*def);
            for (auto& p : fabric.peers()) {
                fabric.install_contract(p.name(), pkg, admin);
            }
            fabric.init_contract("main", name, def->version,
                                 EndorsementPolicy::any_org(fabric.org_names()), admin);
        }
    }

    std::string register_artifact(int i) {
        const std::string digest = crypto::sha256_hex("artifact" + std::to_string(i));
        const std::string source = crypto::sha256_hex("source" + std::to_string(i));
        auto outcome = fabric.invoke("main", "provenance", "register",
                                     {digest, "demo/app", "v" + std::to_string(i), source}, admin);
        REQUIRE(outcome.flag == ValidationFlag::Valid);
        return digest;
    }
};

// Independent oracle: a policy denotes a family of satisfying org sets; a
// subset passes iff it contains one of them. Built bottom-up, no reuse of
// evaluate_policy's recursion shape.
using Family = std::set<std::set<std::string>>;

Family cross_union(const Family& a, const Family& b) {
    Family out;
    for (const auto& x : a) {
        for (const auto& y : b) {
            std::set<std::string> merged = x;
            merged.insert(y.begin(), y.end());
            out.insert(std::move(merged));
        }
    }
    return out;
}

Family family_of(const EndorsementPolicy& p) {
    switch (p.kind) {
    case EndorsementPolicy::Kind::Org:
        return {{p.org}};
    case EndorsementPolicy::Kind::Or: {
        Family out;
        for (const auto& c : p.children) {
            Family f = family_of(c);
            out.insert(f.begin(), f.end());
        }
        return out;
    }
    case EndorsementPolicy::Kind::And: {
        Family out = {{}};
        for (const auto& c : p.children) out = cross_union(out, family_of(c));
        return out;
    }
    case EndorsementPolicy::Kind::OutOf: {
        // Union over all k-subsets of children of their And-family.
        Family out;
        const std::size_t n = p.children.size();
        for (uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (__builtin_popcount(mask) != p.k) continue;
            Family chosen = {{}};
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (1u << i)) chosen = cross_union(chosen, family_of(p.children[i]));
            }
            out.insert(chosen.begin(), chosen.end());
        }
        return out;
    }
    }
    return {};
}

bool oracle_eval(const EndorsementPolicy& p, const std::set<std::string>& orgs) {
    for (const auto& required : family_of(p)) {
        bool contained = true;
        for (const auto& org : required) {
            if (!orgs.count(org)) {
                contained = false;
                break;
            }
        }
        if (contained) return true;
    }
    return false;
}

EndorsementPolicy random_tree(crypto::Rng& rng, const std::vector<std::string>& orgs, int depth) {
    if (depth == 0 || rng.next() % 4 == 0) {
        return EndorsementPolicy::org_member(orgs[rng.next() % orgs.size()]);
    }
    const int n = 1 + static_cast<int>(rng.next() % 4);
    std::vector<EndorsementPolicy> children;
    for (int i = 0; i < n; ++i) children.push_back(random_tree(rng, orgs, depth - 1));
    switch (rng.next() % 3) {
    case 0: return EndorsementPolicy::all_of(std::move(children));
    case 1: return EndorsementPolicy::any_of(std::move(children));
    default: {
        const int k = 1 + static_cast<int>(rng.next() % n);
        return EndorsementPolicy::out_of(k, std::move(children));
    }
    }
}

} // namespace

TEST_CASE("policy evaluation basics") {
    auto o = [](const char* n) { return EndorsementPolicy::org_member(n); };
    CHECK(evaluate_policy(EndorsementPolicy::out_of(2, {o("Org1"), o("Org2"), o("Org3")}),
                          {"Org1", "Org3"}));
    CHECK_FALSE(evaluate_policy(EndorsementPolicy::all_of({o("Org1"), o("Org2")}), {"Org1"}));
    CHECK(evaluate_policy(EndorsementPolicy::any_of({o("Org1"), o("Org2")}), {"Org2"}));
    CHECK_FALSE(evaluate_policy(EndorsementPolicy::any_org({"Org1", "Org2"}), {}));
}

TEST_CASE("policy validation rejects malformed trees") {
    CHECK_THROWS_AS(EndorsementPolicy::out_of(0, {EndorsementPolicy::org_member("A")}).validate(),
                    Error);
    CHECK_THROWS_AS(EndorsementPolicy::out_of(3, {EndorsementPolicy::org_member("A")}).validate(),
                    Error);
    CHECK_THROWS_AS(EndorsementPolicy::all_of({}).validate(), Error);
    CHECK_THROWS_AS(EndorsementPolicy::org_member("").validate(), Error);
}

TEST_CASE("policy json round trip") {
    crypto::Rng rng(11);
    const std::vector<std::string> orgs = {"Org1", "Org2", "Org3"};
    for (int i = 0; i < 50; ++i) {
        EndorsementPolicy p = random_tree(rng, orgs, 3);
        EndorsementPolicy back = EndorsementPolicy::from_json(p.to_json());
        CHECK(canonical_encode(back.to_json()) == canonical_encode(p.to_json()));
    }
}

TEST_CASE("policy truth tables match the brute-force subset oracle") {
    const std::vector<std::string> orgs = {"O1", "O2", "O3", "O4", "O5"};
    crypto::Rng rng(2024);
    int cases = 0;
    for (int t = 0; t < 400; ++t) {
        EndorsementPolicy tree = random_tree(rng, orgs, 3);
        for (uint32_t mask = 0; mask < 32; ++mask) {
            std::set<std::string> subset;
            for (std::size_t i = 0; i < orgs.size(); ++i) {
                if (mask & (1u << i)) subset.insert(orgs[i]);
            }
            CHECK(evaluate_policy(tree, subset) == oracle_eval(tree, subset));
            ++cases;
        }
    }
    CHECK(cases >= 10000);
}

TEST_CASE("cut_blocks batching") {
    auto make_pending = [](int n, int64_t arrival) {
        std::vector<PendingTx> pending;
        for (int i = 0; i < n; ++i) {
            Transaction tx;
            tx.channel = "main";
            tx.contract = "kv";
            tx.function = "set";
            tx.args = {std::to_string(i)};
            tx.creator = std::string(64, 'e');
            tx.nonce = Bytes(16, static_cast<uint8_t>(i));
            tx.tx_id = tx.computed_tx_id();
            pending.push_back({std::move(tx), arrival});
        }
        return pending;
    };

    SUBCASE("five transactions at max two per block, no waiting") {
        auto pending = make_pending(5, 0);
        auto batches = cut_blocks(pending, BlockCutConfig{2, 0}, 0);
        REQUIRE(batches.size() == 3);
        CHECK(batches[0].size() == 2);
        CHECK(batches[1].size() == 2);
        CHECK(batches[2].size() == 1);
        CHECK(pending.empty());
        // Arrival order preserved.
        CHECK(batches[0][0].args[0] == "0");
        CHECK(batches[2][0].args[0] == "4");
    }
    SUBCASE("single transaction cuts only after max_wait") {
        auto pending = make_pending(1, 0);
        auto none = cut_blocks(pending, BlockCutConfig{10, 500}, 499);
        CHECK(none.empty());
        CHECK(pending.size() == 1);
        auto one = cut_blocks(pending, BlockCutConfig{10, 500}, 500);
        REQUIRE(one.size() == 1);
        CHECK(one[0].size() == 1);
        CHECK(pending.empty());
    }
    SUBCASE("empty pending cuts nothing") {
        std::vector<PendingTx> pending;
        CHECK(cut_blocks(pending, BlockCutConfig{10, 500}, 12345).empty());
    }
    SUBCASE("config is validated") {
        auto pending = make_pending(1, 0);
        CHECK_THROWS_AS(cut_blocks(pending, BlockCutConfig{0, 500}, 0), Error);
    }
}

TEST_CASE("endorsed invokes commit as Valid and converge across replicas") {
    Net net;
    const std::string digest = net.register_artifact(1);

    // Every replica holds the identical chain.
    const std::string tip = net.fabric.ledger("main").tip_hash();
    for (auto& p : net.fabric.peers()) {
        CHECK(p.replicas.at("main").tip_hash() == tip);
        CHECK(p.replicas.at("main").state().digest() ==
              net.fabric.ledger("main").state().digest());
    }
    CHECK(net.fabric.ledger("main").get_state("artifact/" + digest).has_value());
}

TEST_CASE("endorsement mismatch is detected when one peer's state diverges") {
    Net net;
    const std::string digest = net.register_artifact(7);

    // Fork one peer: locally delete the artifact so its execution diverges.
    Peer& rogue = net.fabric.peer("Org1/peer0");
    ChannelLedger& replica = rogue.replicas.at("main");
    Transaction del;
    del.channel = "main";
    del.contract = kLifecycleContract; // admin-signed infrastructure write
    del.function = "init";
    del.args = {"tamper"};
    del.creator = net.admin.key_id;
    del.nonce = Bytes(16, 0x66);
    del.read_set = {};
    del.write_set = {{"artifact/" + digest, true, {}}};
    del.tx_id = del.computed_tx_id();
    del.endorsements.push_back(
        {net.admin.key_id,
         net.fabric.org("Org1").sign(net.admin.key_id, del.body_canonical())});
    Block fork = seal_block(replica.height() + 1, replica.tip_hash(), {del});
    assign_validation_flags(fork, replica);
    REQUIRE(fork.validation_flags[0] == ValidationFlag::Valid);
    replica.append_block(fork);

    try {
        net.fabric.invoke("main", "provenance", "register",
                          {digest, "demo/app", "v7", crypto::sha256_hex("source7")}, net.admin);
        FAIL("expected EndorsementMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == "EndorsementMismatch");
    }
}

TEST_CASE("partitioned-away peers make endorsement unavailable") {
    Net net;
    for (auto& p : net.fabric.peers()) {
        if (p.org == "Org2") p.available = false;
    }
    try {
        net.register_artifact(2);
        FAIL("expected PeerUnavailable");
    } catch (const Error& e) {
        CHECK(e.code() == "PeerUnavailable");
    }
}

TEST_CASE("intra-block MVCC: second writer of the same key conflicts") {
    Net net;
    const std::string digest = crypto::sha256_hex("contested");
    const std::string source = crypto::sha256_hex("contested-source");
    ProposalSpec a{"provenance", "register", {digest, "demo/app", "1", source}, net.admin, {}};
    ProposalSpec b{"provenance", "register", {digest, "demo/app", "2", source}, net.admin, {}};

    auto outcomes = net.fabric.invoke_concurrent("main", {a, b});
    REQUIRE(outcomes.size() == 2);
    CHECK(outcomes[0].flag == ValidationFlag::Valid);
    CHECK(outcomes[1].flag == ValidationFlag::MvccConflict);

    // Only the first write landed.
    auto entry = net.fabric.ledger("main").get_state("artifact/" + digest);
    REQUIRE(entry.has_value());
    CHECK(canonical_decode(to_string(entry->value)).at("tag") == "1");
}

TEST_CASE("replayed transactions are flagged DuplicateTxId") {
    Net net;
    net.register_artifact(3);
    const auto& blocks = net.fabric.ledger("main").blocks();
    const Transaction replayed = blocks.back().transactions[0];

    auto outcome = net.fabric.submit_endorsed("main", replayed);
    CHECK(outcome.flag == ValidationFlag::DuplicateTxId);

    // And the flag re-derives identically from disk.
    auto verdict = net.fabric.verify_channel("main");
    CHECK(verdict.ok);
}

TEST_CASE("an endorsement from outside all org roots is BadSignature") {
    Net net;
    const std::string digest = crypto::sha256_hex("forged");
    const ContractDef* def = net.fabric.registry().find("provenance");
    LedgerStateView view(net.fabric.ledger("main"));
    auto proposal = execute_proposal(view, nullptr, *def, "main", "register",
                                     {digest, "rogue", "1", crypto::sha256_hex("forged-src")},
                                     net.admin, {}, Bytes(16, 0x21));
    crypto::KeyPair rogue = crypto::ed25519_keypair(Bytes(32, 0x99));
    proposal.tx.endorsements.push_back(
        {crypto::sha256_hex(rogue.public_key),
         crypto::ed25519_sign(rogue.secret_key, proposal.tx.body_canonical())});

    auto outcome = net.fabric.submit_endorsed("main", proposal.tx);
    CHECK(outcome.flag == ValidationFlag::BadSignature);
    CHECK_FALSE(net.fabric.ledger("main").get_state("artifact/" + digest).has_value());
}

TEST_CASE("unendorsed app transactions fail policy") {
    Net net;
    const std::string digest = crypto::sha256_hex("unendorsed");
    const ContractDef* def = net.fabric.registry().find("provenance");
    LedgerStateView view(net.fabric.ledger("main"));
    auto proposal = execute_proposal(view, nullptr, *def, "main", "register",
                                     {digest, "x", "1", crypto::sha256_hex("es")}, net.admin, {},
                                     Bytes(16, 0x22));
    auto outcome = net.fabric.submit_endorsed("main", proposal.tx);
    CHECK(outcome.flag == ValidationFlag::PolicyFail);
}

TEST_CASE("contract lifecycle errors") {
    test::TempDir dir{"lifecycle"};
    Fabric fabric(dir.path(), two_orgs(), test_seed());
    Identity admin = fabric.admin_identity("Org1");
    fabric.create_channel("main", admin);
    for (auto& p : fabric.peers()) fabric.join_channel(p.name(), "main", admin);
    const ContractDef* def = fabric.registry().find("provenance");
    const ContractPackage pkg = ContractPackage::of(*def);
    const EndorsementPolicy policy = EndorsementPolicy::any_org(fabric.org_names());

    SUBCASE("init before install") {
        try {
            fabric.init_contract("main", "provenance", "1.0", policy, admin);
            FAIL("expected NotInstalled");
        } catch (const Error& e) {
            CHECK(e.code() == "NotInstalled");
        }
    }
    SUBCASE("install is idempotent, conflicting function lists are not") {
        for (auto& p : fabric.peers()) fabric.install_contract(p.name(), pkg, admin);
        CHECK(fabric.install_contract("Org1/peer0", pkg, admin) == pkg.package_id());
        ContractPackage conflicting = pkg;
        conflicting.functions.insert("extra");
        try {
            fabric.install_contract("Org1/peer0", conflicting, admin);
            FAIL("expected VersionConflict");
        } catch (const Error& e) {
            CHECK(e.code() == "VersionConflict");
        }
    }
    SUBCASE("client may not install") {
        const Identity client = fabric.identities_with_role(Role::Client).front();
        try {
            fabric.install_contract("Org1/peer0", pkg, client);
            FAIL("expected PermissionDenied");
        } catch (const Error& e) {
            CHECK(e.code() == "PermissionDenied");
        }
    }
    SUBCASE("double init reports AlreadyInitialized") {
        for (auto& p : fabric.peers()) fabric.install_contract(p.name(), pkg, admin);
        fabric.init_contract("main", "provenance", "1.0", policy, admin);
        try {
            fabric.init_contract("main", "provenance", "1.0", policy, admin);
            FAIL("expected AlreadyInitialized");
        } catch (const Error& e) {
            CHECK(e.code() == "AlreadyInitialized");
        }
    }
    SUBCASE("invoke before init reports UnknownContract") {
        try {
            fabric.invoke("main", "provenance", "register",
                          {std::string(64, 'a'), "x", "1", std::string(64, 'b')}, admin);
            FAIL("expected UnknownContract");
        } catch (const Error& e) {
            CHECK(e.code() == "UnknownContract");
        }
    }
}

TEST_CASE("join_channel replays state exactly") {
    test::TempDir dir{"join"};
    Fabric fabric(dir.path(), two_orgs(), test_seed());
    Identity admin = fabric.admin_identity("Org1");
    fabric.create_channel("main", admin);
    // Join only three of the four peers; commit through them.
    fabric.join_channel("Org1/peer0", "main", admin);
    fabric.join_channel("Org1/peer1", "main", admin);
    fabric.join_channel("Org2/peer0", "main", admin);
    const ContractDef* def = fabric.registry().find("provenance");
    const ContractPackage pkg = ContractPackage::of(*def);
    for (auto& p : fabric.peers()) fabric.install_contract(p.name(), pkg, admin);
    fabric.init_contract("main", "provenance", "1.0",
                         EndorsementPolicy::any_org(fabric.org_names()), admin);
    for (int i = 0; i < 5; ++i) {
        fabric.invoke("main", "provenance", "register",
                      {crypto::sha256_hex("a" + std::to_string(i)), "demo", "1",
                       crypto::sha256_hex("s" + std::to_string(i))},
                      admin);
    }

    SUBCASE("late joiner reconstructs the same state digest") {
        fabric.join_channel("Org2/peer1", "main", admin);
        CHECK(fabric.peer("Org2/peer1").replicas.at("main").state().digest() ==
              fabric.ledger("main").state().digest());
        CHECK(fabric.peer("Org2/peer1").replicas.at("main").tip_hash() ==
              fabric.ledger("main").tip_hash());
    }
    SUBCASE("unknown channel") {
        try {
            fabric.join_channel("Org2/peer1", "side", admin);
            FAIL("expected UnknownChannel");
        } catch (const Error& e) {
            CHECK(e.code() == "UnknownChannel");
        }
    }
    SUBCASE("client-role caller is denied") {
        const Identity client = fabric.identities_with_role(Role::Client).front();
        try {
            fabric.join_channel("Org2/peer1", "main", client);
            FAIL("expected PermissionDenied");
        } catch (const Error& e) {
            CHECK(e.code() == "PermissionDenied");
        }
    }
}

TEST_CASE("workspace chains reload and survive verification, tampering is caught") {
    test::TempDir dir{"persist"};
    std::string expected_digest;
    {
        Net net; // its own tempdir
        // Reuse net's workspace for the reload by copying the files.
        net.register_artifact(10);
        net.register_artifact(11);
        expected_digest = net.fabric.ledger("main").state().digest();
        std::filesystem::copy(net.dir.path(), dir.path(),
                              std::filesystem::copy_options::recursive |
                                  std::filesystem::copy_options::overwrite_existing);
    }

    SUBCASE("reopen validates and replays") {
        Fabric reopened(dir.path(), two_orgs(), test_seed());
        CHECK(reopened.ledger("main").state().digest() == expected_digest);
        CHECK(reopened.verify_channel("main").ok);
    }
    SUBCASE("random bit flips are always caught at or before the mutated height") {
        crypto::Rng rng(31337);
        const auto blocks_dir = dir.path() / "ledger" / "main" / "blocks";
        std::vector<std::filesystem::path> files;
        for (int64_t h = 0;; ++h) {
            auto f = blocks_dir / (std::to_string(h) + ".json");
            if (!std::filesystem::exists(f)) break;
            files.push_back(f);
        }
        REQUIRE(files.size() >= 3);
        for (int trial = 0; trial < 60; ++trial) {
            const std::size_t target = rng.next() % files.size();
            const std::string original = test::read_text(files[target]);
            std::string mutated = original;
            mutated[rng.next() % mutated.size()] ^= static_cast<char>(1u << (rng.next() % 8));
            test::write_text(files[target], mutated);

            auto verdict = validate_workspace_chain(dir.path(), "main");
            CHECK_FALSE(verdict.ok);
            CHECK(verdict.first_bad_height <= static_cast<int64_t>(target));

            test::write_text(files[target], original);
        }
        CHECK(validate_workspace_chain(dir.path(), "main").ok);
    }
    SUBCASE("reopening a tampered workspace raises CorruptWorkspace") {
        auto file = dir.path() / "ledger" / "main" / "blocks" / "2.json";
        std::string bytes = test::read_text(file);
        bytes[bytes.size() / 2] ^= 0x04;
        test::write_text(file, bytes);
        try {
            Fabric reopened(dir.path(), two_orgs(), test_seed());
            FAIL("expected CorruptWorkspace");
        } catch (const Error& e) {
            CHECK(e.code() == "CorruptWorkspace");
        }
    }
}

TEST_CASE("private data flows through invoke transient into the channel store") {
    Net net;
    net.fabric.declare_private_collection("main", kScanReportCollection, {"Org1"});
    const std::string digest = net.register_artifact(20);
    const Bytes body = to_bytes(std::string("full scan report"));
    const std::string report_hash = crypto::sha256_hex(body);

    auto outcome = net.fabric.invoke("main", "attestation", "record",
                                     {digest, report_hash, "10", "Pass", "70"}, net.admin,
                                     {{"report", body}});
    REQUIRE(outcome.flag == ValidationFlag::Valid);

    auto read = net.fabric.read_private("main", kScanReportCollection, "report/" + digest + "/0",
                                        "Org1");
    REQUIRE(read.has_value());
    CHECK(*read == body);

    try {
        net.fabric.read_private("main", kScanReportCollection, "report/" + digest + "/0", "Org2");
        FAIL("expected ReadDenied");
    } catch (const Error& e) {
        CHECK(e.code() == "ReadDenied");
    }
}

TEST_CASE("a wholesale block replacement with stale linkage is pinned to its height") {
    Net net;
    for (int i = 30; i < 36; ++i) net.register_artifact(i);
    auto blocks_dir = net.dir.path() / "ledger" / "main" / "blocks";

    // Replace block 7 with an internally consistent block whose prev_hash
    // points two blocks back.
    auto original = Block::from_json(canonical_decode(test::read_text(blocks_dir / "7.json")));
    auto phony = Block::from_json(canonical_decode(test::read_text(blocks_dir / "6.json")));
    Block replacement = seal_block(7, phony.header.prev_hash, original.transactions);
    replacement.validation_flags = original.validation_flags;
    test::write_text(blocks_dir / "7.json", canonical_encode(replacement.to_json()));

    auto verdict = validate_workspace_chain(net.dir.path(), "main");
    CHECK_FALSE(verdict.ok);
    CHECK(verdict.first_bad_height == 7);
    CHECK(verdict.reason == "PrevHashMismatch");
}

TEST_CASE("a flipped byte in transaction args surfaces as BadTxId or BadMerkleRoot") {
    Net net;
    for (int i = 40; i < 45; ++i) net.register_artifact(i);
    auto file = net.dir.path() / "ledger" / "main" / "blocks" / "4.json";

    json block = canonical_decode(test::read_text(file));
    std::string arg = block.at("transactions").at(0).at("args").at(1).get<std::string>();
    arg[0] = arg[0] == 'x' ? 'y' : 'x';
    block["transactions"][0]["args"][1] = arg;
    test::write_text(file, canonical_encode(block));

    auto verdict = validate_workspace_chain(net.dir.path(), "main");
    CHECK_FALSE(verdict.ok);
    CHECK(verdict.first_bad_height == 4);
    CHECK((verdict.reason == "BadTxId" || verdict.reason == "BadMerkleRoot"));
}
