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

#include "chainci/pipeline.hpp"

namespace chainci::attacks {

enum class AttackKind {
    ArtifactTamper,
    LedgerRewrite,
    UnauthorizedInvoke,
    ReplayTransaction,
    DependencyDowngrade,
    EndorsementForgery,
};

inline constexpr AttackKind kAllKinds[] = {
    AttackKind::ArtifactTamper,    AttackKind::LedgerRewrite,
    AttackKind::UnauthorizedInvoke, AttackKind::ReplayTransaction,
    AttackKind::DependencyDowngrade, AttackKind::EndorsementForgery,
};

std::string attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

enum class Stride {
    Spoofing,
    Tampering,
    Repudiation,
    InformationDisclosure,
    DenialOfService,
    ElevationOfPrivilege,
};

std::string stride_name(Stride s);

/// STRIDE category is fixed per attack class.
Stride stride_of(AttackKind kind);

struct AttackScenario {
    AttackKind kind = AttackKind::ArtifactTamper;
    uint64_t seed = 0;
};

struct ScenarioOutcome {
    bool detected = false;
    std::string detector; // e.g. "DigestMismatch", "FirstBadHeight"
    std::string detail;
};

/// Injects the attack into `workspace` (on-disk artifacts, not in-memory
/// state) and runs the corresponding detector. The workspace is mutated;
/// callers hand in a disposable copy. WorkspaceNotReady when the workspace
/// lacks a completed clean pipeline run.
ScenarioOutcome execute_scenario(const AttackScenario& scenario,
                                 const std::filesystem::path& workspace);

struct ScenarioRecord {
    AttackKind kind;
    uint64_t seed;
    Stride stride;
    bool detected;
    std::string detector;
    std::string detail;
};

struct AttackReport {
    int64_t scenarios_run = 0;
    int64_t detected = 0;
    std::vector<ScenarioRecord> records;
    std::vector<ScenarioRecord> missed;
    std::map<std::string, int64_t> per_kind_detected;
    std::map<std::string, int64_t> per_kind_run;
    std::map<std::string, int64_t> stride_summary;

    json to_json() const;
};

/// Deterministic fan-out: scenario seeds derive from SHA-256(base_seed,
/// kind, index); each scenario runs against a fresh copy of
/// `base_workspace` under `scratch_dir`.
AttackReport run_suite(const std::vector<AttackKind>& kinds, int seeds_per_kind,
                       const Bytes& base_seed, const std::filesystem::path& base_workspace,
                       const std::filesystem::path& scratch_dir);

/// Runs every kind's detector against an untouched workspace; the returned
/// count is the number of (false) detections, expected to be zero.
int control_detections(const std::vector<AttackKind>& kinds,
                       const std::filesystem::path& workspace);

/// A workspace qualifies once a clean pipeline run completed in it.
void require_ready_workspace(const std::filesystem::path& workspace);

uint64_t derive_scenario_seed(const Bytes& base_seed, AttackKind kind, int index);

void copy_workspace(const std::filesystem::path& from, const std::filesystem::path& to);

} // namespace chainci::attacks
