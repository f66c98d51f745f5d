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

struct BlockCutConfig {
    int max_tx_per_block = 10;
    int64_t max_wait_ms = 500; // simulated milliseconds

    void validate() const {
        if (max_tx_per_block < 1) throw Error("ConfigError", "max_tx_per_block must be >= 1");
        if (max_wait_ms < 0) throw Error("ConfigError", "max_wait_ms must be >= 0");
    }
};

struct PendingTx {
    Transaction tx;
    int64_t arrival_ms = 0;
};

/// Greedy batching in arrival order: a batch closes when it reaches
/// max_tx_per_block, or when max_wait has elapsed since the oldest pending
/// transaction. Cut transactions are removed from `pending`.
std::vector<std::vector<Transaction>> cut_blocks(std::vector<PendingTx>& pending,
                                                 const BlockCutConfig& config, int64_t now_ms);

/// Header + hashes for a block proposal; validation flags stay empty until
/// commit-time validation assigns them.
Block seal_block(int64_t height, const std::string& prev_hash, std::vector<Transaction> txs);

} // namespace chainci
