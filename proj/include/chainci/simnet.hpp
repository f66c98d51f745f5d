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

#include "chainci/fabric.hpp"

namespace chainci {

struct SimOrgSpec {
    std::string name;
    int peers = 1;
};

struct SimTopology {
    std::vector<SimOrgSpec> orgs; // first org hosts the single orderer
    std::string channel = "main";
};

struct SimPartition {
    std::set<std::string> side_a; // endpoint names, e.g. "Org1/peer0"
    std::set<std::string> side_b;
    int64_t heal_at_ms = 0;
};

struct SimNetConfig {
    uint64_t seed = 0;
    int64_t latency_min_ms = 5;
    int64_t latency_max_ms = 50;
    double drop_probability = 0.0; // per delivery attempt; retransmission recovers
    std::vector<SimPartition> partitions;
    BlockCutConfig cut{10, 500};
    int64_t submit_stagger_ms = 3; // workload injection spacing

    void validate() const;
};

struct WorkloadOp {
    std::string contract;
    std::string function;
    std::vector<std::string> args;
    std::string client_org;
};

struct SimResult {
    bool converged = false;
    int64_t end_ms = 0;
    std::map<std::string, std::string> final_fingerprint; // peer -> chain+state digest
    std::map<std::string, int64_t> final_height;
    std::vector<std::string> event_log; // canonical JSON lines
    int64_t proposals_committed = 0;
};

/// Seeded, event-driven simulation over simulated time only: gateways fan
/// proposals to one endorsing peer per org, the single orderer batches per
/// the cut config, every peer validates and commits independently. Message
/// drops and partitions are recovered by retransmission, so connected peers
/// converge to identical chains; identical seeds give byte-identical logs.
SimResult run_simnet(const SimTopology& topology, const SimNetConfig& config,
                     const std::vector<WorkloadOp>& workload);

void write_event_log(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// Deterministic register-style workload used by tests and the CLI.
std::vector<WorkloadOp> make_register_workload(int count, uint64_t seed,
                                               const std::vector<std::string>& client_orgs);

} // namespace chainci
