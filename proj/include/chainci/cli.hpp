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

#include <iosfwd>

#include "chainci/pipeline.hpp"

namespace chainci::cli {

/// Exit codes: 0 success/pass, 2 usage or config error, 3 gate halt,
/// 4 integrity violation detected, 5 internal error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitGateHalt = 3;
inline constexpr int kExitIntegrity = 4;
inline constexpr int kExitInternal = 5;

/// Full command dispatch without touching process state; argv excludes the
/// program name. Never throws and never exits outside {0,2,3,4,5}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct InitOptions {
    int orgs = 2;
    int peers_per_org = 2;
    Bytes seed; // empty = built-in default
};

/// Idempotent workspace setup: crypto material, bootstrapped channel,
/// default pipeline definition and the demo project fixtures. Existing
/// files are left alone.
void init_workspace(const std::filesystem::path& workspace, const InitOptions& options);

/// Workspace settings persisted by init (chainci.json).
struct WorkspaceSettings {
    int orgs = 2;
    int peers_per_org = 2;
    std::string channel = "main";
    Bytes seed;

    TopologyOptions topology() const;
};

WorkspaceSettings load_workspace_settings(const std::filesystem::path& workspace);

// Demo fixtures (also used by the test suites).
json fixture_feed();
json fixture_clean_manifest();
json fixture_vulnerable_manifest();
json fixture_allowlist();
void write_app_fixture(const std::filesystem::path& app_dir);

} // namespace chainci::cli
