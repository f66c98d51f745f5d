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

#include "chainci/ledger.hpp"
#include "chainci/ordering.hpp"
#include "chainci/validation.hpp"

#include "support.hpp"

using namespace chainci;

namespace {

std::string hex32(uint8_t fill) { return crypto::hex_encode(Bytes(32, fill)); }

Transaction plain_tx(const std::string& channel, const std::string& key, const std::string& value,
                     uint8_t nonce_fill) {
    Transaction tx;
    tx.channel = channel;
    tx.contract = "kv";
    tx.function = "set";
    tx.args = {key, value};
    tx.creator = std::string(64, 'e');
    tx.nonce = Bytes(16, nonce_fill);
    tx.read_set.push_back({key, std::nullopt});
    tx.write_set.push_back({key, false, to_bytes(value)});
    tx.tx_id = tx.computed_tx_id();
    return tx;
}

Block make_test_genesis() {
    static const OrgMaterials m = generate_org_materials("Org1", 1, 0, Bytes(32, 0x5a));
    ChannelConfig cfg;
    cfg.channel = "main";
    cfg.org_roots["Org1"] = m.root.public_key;
    cfg.orgs = {"Org1"};
    for (const auto& c : m.certificates) cfg.directory[c.identity.key_id] = c;
    Transaction tx = make_genesis_tx(cfg, m.admin().identity.key_id, Bytes(16, 0x01));
    Block b = seal_block(0, kZeroHash, {tx});
    b.validation_flags = {ValidationFlag::Valid};
    return b;
}

} // namespace

TEST_CASE("merkle root rules") {
    SUBCASE("empty list gives 32 zero bytes") {
        CHECK(merkle_root_hex({}) == std::string(64, '0'));
    }
    SUBCASE("single leaf is the root") {
        CHECK(merkle_root_hex({hex32(0xab)}) == hex32(0xab));
    }
    SUBCASE("odd leaf pairs with itself (three-leaf vector, recomputed externally)") {
        CHECK(merkle_root_hex({hex32(0x11), hex32(0x22), hex32(0x33)}) ==
              "e046522f24b39f1a9a2cf96bebcd386df477f282d7ac9b61d0ca59d8fe8f81b6");
    }
    SUBCASE("changing any leaf changes the root") {
        auto root = merkle_root_hex({hex32(0x11), hex32(0x22), hex32(0x33), hex32(0x44)});
        auto moved = merkle_root_hex({hex32(0x11), hex32(0x22), hex32(0x35), hex32(0x44)});
        CHECK(root != moved);
        CHECK(root == merkle_root_hex({hex32(0x11), hex32(0x22), hex32(0x33), hex32(0x44)}));
    }
}

// Golden block fixture; every hash below was recomputed with an independent
// SHA-256 implementation over the documented canonical encodings.
TEST_CASE("full block canonical encoding is pinned") {
    Transaction tx;
    tx.channel = "main";
    tx.contract = "provenance";
    tx.function = "register";
    tx.args = {std::string(64, 'a'), "demo/app", "1.0.0", std::string(64, 'b')};
    tx.creator = std::string(64, 'e');
    tx.nonce = Bytes(16, 0x01);
    tx.read_set.push_back({"artifact/" + std::string(64, 'a'), std::nullopt});
    tx.write_set.push_back({"artifact/" + std::string(64, 'a'), false, to_bytes(std::string(R"({"x":1})"))});
    tx.endorsements.push_back({std::string(64, 'f'), Bytes(64, 0x02)});
    tx.tx_id = tx.computed_tx_id();
    CHECK(tx.tx_id == "c90fcc8f11709e8d8eba3e8c8b7a859a06b137dd993a4686f4f90941f6420e03");

    Block block;
    block.header.height = 3;
    block.header.prev_hash = std::string(64, 'd');
    block.transactions = {tx};
    block.validation_flags = {ValidationFlag::Valid};
    block.header.merkle_root = block.computed_merkle_root();
    CHECK(block.header.merkle_root == tx.tx_id); // single leaf
    block.block_hash = block.computed_block_hash();
    CHECK(block.block_hash == "bcfdb0f6263a986cf8200f2f791b08dadc402078c98afcd0af9dc2e5de6303a2");

    const std::string encoded = canonical_encode(block.to_json());
    CHECK(encoded.size() == 1174);
    CHECK(crypto::sha256_hex(encoded) ==
          "c956a5c129474cbf8c7e153c501ede6d17c8e76a895b6ccb51620dc06f14d28b");

    // The canonical bytes parse back to an identical block.
    Block reparsed = Block::from_json(canonical_decode(encoded));
    CHECK(canonical_encode(reparsed.to_json()) == encoded);
}

TEST_CASE("append_block enforces linkage") {
    ChannelLedger ledger("main");
    Transaction tx = plain_tx("main", "k", "v", 0x10);

    SUBCASE("wrong starting height") {
        Block bad = seal_block(1, kZeroHash, {tx});
        bad.validation_flags = {ValidationFlag::Valid};
        try {
            ledger.append_block(bad);
            FAIL("expected HeightMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == "HeightMismatch");
        }
    }
    SUBCASE("wrong prev hash") {
        Block bad = seal_block(0, hex32(0x99), {tx});
        bad.validation_flags = {ValidationFlag::Valid};
        try {
            ledger.append_block(bad);
            FAIL("expected PrevHashMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == "PrevHashMismatch");
        }
    }
    SUBCASE("stored merkle root must recompute") {
        Block bad = make_test_genesis();
        bad.header.merkle_root = hex32(0x42);
        bad.block_hash = bad.computed_block_hash();
        try {
            ledger.append_block(bad);
            FAIL("expected BadMerkleRoot");
        } catch (const Error& e) {
            CHECK(e.code() == "BadMerkleRoot");
        }
    }
    SUBCASE("stored block hash must recompute") {
        Block bad = make_test_genesis();
        bad.block_hash = hex32(0x42);
        try {
            ledger.append_block(bad);
            FAIL("expected BadBlockHash");
        } catch (const Error& e) {
            CHECK(e.code() == "BadBlockHash");
        }
    }
}

TEST_CASE("world state and history follow valid writes only") {
    ChannelLedger ledger("main");
    Block b0 = make_test_genesis();
    ledger.append_block(b0);

    Transaction t1 = plain_tx("main", "k", "v1", 0x02);
    Transaction t2 = plain_tx("main", "k", "v2", 0x03);
    Block b1 = seal_block(1, b0.block_hash, {t1, t2});
    b1.validation_flags = {ValidationFlag::Valid, ValidationFlag::MvccConflict};
    ledger.append_block(b1);

    SUBCASE("get_state sees the last valid write") {
        auto entry = ledger.get_state("k");
        REQUIRE(entry.has_value());
        CHECK(to_string(entry->value) == "v1");
        CHECK(entry->version == Version{1, 0});
    }
    SUBCASE("unknown key is absent") {
        CHECK_FALSE(ledger.get_state("nope").has_value());
    }
    SUBCASE("invalid transactions leave no history") {
        auto history = ledger.read_history("k");
        REQUIRE(history.size() == 1);
        CHECK(history[0].tx_id == t1.tx_id);
        CHECK(history[0].version == Version{1, 0});
    }
    SUBCASE("delete markers remove the key but stay in history") {
        Transaction t3 = plain_tx("main", "k", "ignored", 0x04);
        t3.write_set = {{"k", true, {}}};
        t3.read_set = {{"k", Version{1, 0}}};
        t3.tx_id = t3.computed_tx_id();
        Block b2 = seal_block(2, b1.block_hash, {t3});
        b2.validation_flags = {ValidationFlag::Valid};
        ledger.append_block(b2);

        CHECK_FALSE(ledger.get_state("k").has_value());
        auto history = ledger.read_history("k");
        REQUIRE(history.size() == 2);
        CHECK(history[1].is_delete);
    }
    SUBCASE("history and state agree on every written key") {
        auto history = ledger.read_history("k");
        auto entry = ledger.get_state("k");
        REQUIRE(!history.empty());
        REQUIRE(entry.has_value());
        CHECK(history.back().value == entry->value);
        CHECK(history.back().version == entry->version);
    }
}

TEST_CASE("state replay equivalence: fresh fold over the chain rebuilds the state") {
    ChannelLedger ledger("main");
    crypto::Rng rng(4242);

    Block genesis = make_test_genesis();
    ledger.append_block(genesis);

    for (int height = 1; height <= 8; ++height) {
        std::vector<Transaction> txs;
        std::vector<ValidationFlag> flags;
        const int count = 1 + static_cast<int>(rng.next() % 4);
        for (int i = 0; i < count; ++i) {
            const std::string key = "key" + std::to_string(rng.next() % 5);
            Transaction tx = plain_tx("main", key, "v" + std::to_string(rng.next() % 100),
                                      static_cast<uint8_t>(rng.next() % 256));
            tx.nonce[0] = static_cast<uint8_t>(height);
            tx.nonce[1] = static_cast<uint8_t>(i);
            tx.tx_id = tx.computed_tx_id();
            txs.push_back(tx);
            flags.push_back(rng.next() % 3 == 0 ? ValidationFlag::MvccConflict
                                                : ValidationFlag::Valid);
        }
        Block b = seal_block(height, ledger.tip_hash(), txs);
        b.validation_flags = flags;
        ledger.append_block(b);
    }

    // Oracle: independent fold over the stored blocks.
    std::map<std::string, std::pair<std::string, Version>> oracle;
    for (const auto& block : ledger.blocks()) {
        for (std::size_t i = 0; i < block.transactions.size(); ++i) {
            if (block.validation_flags[i] != ValidationFlag::Valid) continue;
            for (const auto& w : block.transactions[i].write_set) {
                if (w.is_delete) {
                    oracle.erase(w.key);
                } else {
                    oracle[w.key] = {to_string(w.value),
                                     Version{block.header.height, static_cast<int64_t>(i)}};
                }
            }
        }
    }
    CHECK(oracle.size() == ledger.state().entries().size());
    for (const auto& [key, expected] : oracle) {
        auto entry = ledger.get_state(key);
        REQUIRE(entry.has_value());
        CHECK(to_string(entry->value) == expected.first);
        CHECK(entry->version == expected.second);
    }
}

TEST_CASE("private data collections enforce reader policy") {
    PrivateStore store;
    store.declare_collection("scan-reports", {"Org1"});

    SUBCASE("member org reads the value and the hash matches") {
        Bytes value = to_bytes(std::string("secret report"));
        std::string hash = store.put("scan-reports", "r1", value);
        CHECK(hash == crypto::sha256_hex(value));
        auto read = store.read("scan-reports", "r1", "Org1");
        REQUIRE(read.has_value());
        CHECK(*read == value);
    }
    SUBCASE("non-member read is refused") {
        store.put("scan-reports", "r1", to_bytes(std::string("secret")));
        try {
            store.read("scan-reports", "r1", "Org2");
            FAIL("expected ReadDenied");
        } catch (const Error& e) {
            CHECK(e.code() == "ReadDenied");
        }
    }
    SUBCASE("undeclared collection is rejected") {
        try {
            store.put("nope", "k", to_bytes(std::string("v")));
            FAIL("expected UnknownCollection");
        } catch (const Error& e) {
            CHECK(e.code() == "UnknownCollection");
        }
    }
    SUBCASE("absent key reads as nullopt for members") {
        CHECK_FALSE(store.read("scan-reports", "missing", "Org1").has_value());
    }
}

TEST_CASE("private store persists across save/load") {
    test::TempDir dir("private");
    PrivateStore store;
    store.declare_collection("scan-reports", {"Org1", "Org2"});
    store.put("scan-reports", "k", to_bytes(std::string("v")));
    save_private_store(dir.path(), "main", store);

    PrivateStore loaded = load_private_store(dir.path(), "main");
    CHECK(loaded.declared("scan-reports"));
    auto v = loaded.read("scan-reports", "k", "Org2");
    REQUIRE(v.has_value());
    CHECK(to_string(*v) == "v");
}

TEST_CASE("block files round trip through disk in height order") {
    test::TempDir dir("blocks");
    Block b0 = make_test_genesis();
    save_block(dir.path(), "main", b0);

    auto files = read_block_files(dir.path(), "main");
    REQUIRE(files.size() == 1);
    CHECK(is_canonical(files[0]));
    Block loaded = Block::from_json(canonical_decode(files[0]));
    CHECK(loaded.block_hash == b0.block_hash);
    CHECK(list_channels(dir.path()) == std::vector<std::string>{"main"});
}

TEST_CASE("transaction schema is strict") {
    Transaction tx = plain_tx("main", "k", "v", 0x01);
    json good = tx.to_json();

    json missing = good;
    missing.erase("nonce");
    CHECK_THROWS_AS(Transaction::from_json(missing), Error);

    json extra = good;
    extra["sneaky"] = 1;
    CHECK_THROWS_AS(Transaction::from_json(extra), Error);
}
