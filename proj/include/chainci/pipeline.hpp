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
#include "chainci/vulnscan.hpp"

namespace chainci::pipeline {

enum class StageKind { Build, Package, DepCheck, LedgerBootstrap, Deploy, Custom };

StageKind stage_kind_from_name(const std::string& name);
std::string stage_kind_name(StageKind kind);

struct StageDef {
    std::string name;
    StageKind kind = StageKind::Custom;
    std::vector<std::string> depends_on;
    std::map<std::string, std::string> params; // values already env-expanded
};

struct PipelineDef {
    std::vector<StageDef> stages;
    std::vector<std::string> topo_order; // filled by validation

    const StageDef& stage(const std::string& name) const;
};

using EnvMap = std::map<std::string, std::string>;

/// ${VAR} expansion; unknown variables raise UnboundVariable.
std::string expand_vars(const std::string& text, const EnvMap& env);

/// Explicit config map wins over the process environment, which wins over
/// built-in defaults.
EnvMap effective_env(const EnvMap& explicit_env);

PipelineDef parse_pipeline_def(const json& j, const EnvMap& env);
PipelineDef load_pipeline_def(const std::filesystem::path& path, const EnvMap& env);

/// Default five-stage definition: build, containerise, dependency gate,
/// ledger bootstrap, deploy.
json default_pipeline_json();

struct PipelineConfig {
    std::string fabric_bin;      // ledger workspace root
    std::string image_name = "app";
    std::string image_tag = "1.0";
    std::string container_name = "app-${BUILD_NUMBER}";
    int64_t build_number = 1;
    bool parallel = false;
    int threshold = vulnscan::kDefaultThresholdTenths;
    std::vector<std::string> allowlist;
    vulnscan::SourceMode mode = vulnscan::SourceMode::Strict;
    std::string environment = "staging";
    Bytes seed; // workspace key material seed
    TopologyOptions topology;

    static PipelineConfig from_env(const std::filesystem::path& workspace, const EnvMap& env);
    EnvMap as_env() const;
    json snapshot() const; // run-report config echo, no secrets
};

enum class StageStatus { Success, Failed, Halted, Skipped };

std::string stage_status_name(StageStatus s);

struct StageResult {
    std::string name;
    StageKind kind = StageKind::Custom;
    StageStatus status = StageStatus::Success;
    int64_t started_ns = 0; // relative to run start
    int64_t ended_ns = 0;
    std::map<std::string, std::string> outputs;
    std::string error;      // message, empty on success
    std::string error_code; // machine-readable

    int64_t duration_ns() const { return ended_ns - started_ns; }
    int64_t duration_ms() const { return duration_ns() / 1000000; }
};

enum class RunOutcome { Success, HaltedAtGate, Failed };

std::string run_outcome_name(RunOutcome o);

struct PipelineRun {
    std::string run_id;
    json config_snapshot;
    std::vector<StageResult> results; // completion order
    RunOutcome overall = RunOutcome::Success;
    std::vector<std::string> ledger_txs; // register/attest/deploy tx ids
    int64_t total_wall_ns = 0;

    const StageResult* result(const std::string& stage_name) const;
    json to_json() const;
};

// --- individual stages, exposed for tests and the attack harness ---

struct BuildOutput {
    Bytes artifact;
    std::string source_digest; // canonical file-tree hash
};

/// Hermetic by default: the artifact is a deterministic archive of the
/// source tree. params["cmd"]/params["out"] switch to an external build
/// command (BuildCommandFailed on nonzero exit).
BuildOutput stage_build(const std::map<std::string, std::string>& params,
                        const std::filesystem::path& workspace);

std::string tree_digest(const std::filesystem::path& root); // MissingSource

struct PackagedImage {
    std::string name;
    std::string tag;
    std::string digest; // SHA-256 hex of the archive bytes
    std::string container_name;
    std::filesystem::path archive_path;
};

/// Timestamp-free archive: same artifact + config always digests the same.
PackagedImage stage_package(const Bytes& artifact, const std::string& source_digest,
                            const PipelineConfig& config, const std::filesystem::path& workspace);

struct DepCheckOutcome {
    vulnscan::ScanReport report;
    std::filesystem::path report_path;
};

/// Runs the scanner gate; the report file is written whatever the verdict.
DepCheckOutcome stage_depcheck(const std::filesystem::path& manifest_path,
                               const std::filesystem::path& feed_path, const PipelineConfig& config,
                               const std::filesystem::path& workspace);

/// Idempotent: materials, genesis, joined peers, installed + initialized
/// built-ins. Re-running against a healthy workspace commits nothing new;
/// a tampered chain raises CorruptWorkspace.
void stage_ledger_bootstrap(const PipelineConfig& config, const std::filesystem::path& workspace);

struct DeployOutcome {
    std::vector<std::string> tx_ids; // register, attest, deploy
    std::string environment;
    std::string container_name;
    std::string digest;
};

/// Recomputes the archive digest from disk before anything is recorded;
/// DigestMismatch stops a tampered artifact, NoPassingAttestation a halted
/// report that reached this far.
DeployOutcome stage_deploy(const PackagedImage& image, const vulnscan::ScanReport& report,
                           const PipelineConfig& config, const std::filesystem::path& workspace);

PipelineRun run_pipeline(const PipelineDef& def, const PipelineConfig& config,
                         const std::filesystem::path& workspace);

json timing_report_json(const PipelineRun& run);
void emit_timing_report(const PipelineRun& run, const std::filesystem::path& path);
void write_run_reports(const PipelineRun& run, const std::filesystem::path& workspace);

} // namespace chainci::pipeline
