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

#include "chainci/ordering.hpp"

namespace chainci {

std::vector<std::vector<Transaction>> cut_blocks(std::vector<PendingTx>& pending,
                                                 const BlockCutConfig& config, int64_t now_ms) {
    config.validate();
    std::vector<std::vector<Transaction>> batches;
    std::size_t i = 0;
    while (i < pending.size()) {
        const std::size_t remaining = pending.size() - i;
        if (remaining >= static_cast<std::size_t>(config.max_tx_per_block)) {
            std::vector<Transaction> batch;
            batch.reserve(config.max_tx_per_block);
            for (int k = 0; k < config.max_tx_per_block; ++k) {
                batch.push_back(std::move(pending[i + k].tx));
            }
            i += static_cast<std::size_t>(config.max_tx_per_block);
            batches.push_back(std::move(batch));
            continue;
        }
        // Partial batch: only cut once the oldest member has waited long
        // enough.
        if (now_ms - pending[i].arrival_ms >= config.max_wait_ms) {
            std::vector<Transaction> batch;
            batch.reserve(remaining);
            for (std::size_t k = i; k < pending.size(); ++k) {
                batch.push_back(std::move(pending[k].tx));
            }
            i = pending.size();
            batches.push_back(std::move(batch));
            continue;
        }
        break;
    }
    pending.erase(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(i));
    return batches;
}

Block seal_block(int64_t height, const std::string& prev_hash, std::vector<Transaction> txs) {
    Block b;
    b.header.height = height;
    b.header.prev_hash = prev_hash;
    b.transactions = std::move(txs);
    b.header.merkle_root = b.computed_merkle_root();
    b.block_hash = b.computed_block_hash();
    return b;
}

} // namespace chainci
