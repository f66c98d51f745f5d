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

#include <filesystem>
#include <optional>

#include "chainci/canonical.hpp"

namespace chainci::vulnscan {

/// CPE 2.3 formatted name: cpe:2.3:part:vendor:product:version:update:
/// edition:language:sw_edition:target_sw:target_hw:other
struct CpeName {
    char part = 'a'; // a (application), o (os), h (hardware)
    std::string vendor;
    std::string product;
    std::string version;
    std::string update{"*"};
    std::string edition{"*"};
    std::string language{"*"};
    std::string sw_edition{"*"};
    std::string target_sw{"*"};
    std::string target_hw{"*"};
    std::string other{"*"};

    std::string to_string() const;
};

/// Splits on unescaped ':' (backslash escapes); lowercases vendor/product.
/// Errors: BadPrefix, FieldCount, BadPart.
CpeName parse_cpe(const std::string& text);

enum class Severity { None, Low, Medium, High, Critical };

std::string severity_name(Severity s);
Severity severity_from_name(const std::string& name);
Severity severity_for_score(int score_tenths);

struct CpeMatch {
    CpeName cpe;
    std::optional<std::string> version_start_including;
    std::optional<std::string> version_start_excluding;
    std::optional<std::string> version_end_including;
    std::optional<std::string> version_end_excluding;

    bool has_bounds() const {
        return version_start_including || version_start_excluding || version_end_including ||
               version_end_excluding;
    }
};

struct CveEntry {
    std::string id; // CVE-YYYY-NNNN+
    std::string description;
    int base_score = 0; // CVSS base score in tenths, 0..100
    Severity severity = Severity::None;
    std::vector<CpeMatch> matches;
};

struct Dependency {
    std::string vendor;
    std::string product;
    std::string version;
    std::string source_url;
    std::string declared_in;
};

enum class Ordering { Less, Equal, Greater };

/// Dot/dash segmented comparison: pure-numeric segments compare numerically,
/// anything else bytewise; missing segments count as "0" (so 1.0 == 1.0.0
/// and "1a" sorts after "1").
Ordering compare_versions(const std::string& a, const std::string& b);

enum class MatchReason { VersionMatch, ExactMatch };

struct Finding {
    Dependency dependency;
    std::string cve_id;
    int base_score = 0;
    MatchReason reason = MatchReason::ExactMatch;
};

/// One finding per feed entry whose cpe_match list hits the dependency.
std::vector<Finding> match_dependency(const Dependency& dep, const std::vector<CveEntry>& feed);

enum class SourceMode { Strict, Permissive };

SourceMode source_mode_from_name(const std::string& name);

/// Verified iff source_url starts with an allowlist prefix. An empty
/// allowlist verifies nothing in strict mode and everything in permissive.
bool source_verified(const Dependency& dep, const std::vector<std::string>& allowlist,
                     SourceMode mode);

enum class Verdict { Pass, Halt };

struct ScanReport {
    std::vector<Finding> findings;
    std::vector<Dependency> unverified_sources;
    int max_score = 0;  // tenths
    int threshold = 70; // tenths; CVSS High band floor by default
    SourceMode mode = SourceMode::Strict;
    Verdict verdict = Verdict::Pass;
    std::string report_hash; // SHA-256 hex of the canonical report body

    json to_json() const;
    std::string canonical_body() const; // report without the hash field
    std::string render_text() const;
};

inline constexpr int kDefaultThresholdTenths = 70;

/// Verdict rule: Halt iff max_score >= threshold, or any unverified source
/// in strict mode.
ScanReport scan_manifest(const std::vector<Dependency>& manifest, const std::vector<CveEntry>& feed,
                         int threshold_tenths, const std::vector<std::string>& allowlist,
                         SourceMode mode);

/// Schema-validated loaders; errors carry the offending path. FeedInvalid /
/// ManifestInvalid.
std::vector<CveEntry> parse_feed(const json& j);
std::vector<CveEntry> load_feed(const std::filesystem::path& path);
std::vector<Dependency> parse_manifest(const json& j, const std::string& declared_in);
std::vector<Dependency> load_manifest(const std::filesystem::path& path);
std::vector<std::string> load_allowlist(const std::filesystem::path& path);

} // namespace chainci::vulnscan
