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

#include "chainci/vulnscan.hpp"

#include "chainci/crypto.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace chainci::vulnscan {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string read_file(const std::filesystem::path& path, const char* error_code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(error_code, "cannot read " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

std::string CpeName::to_string() const {
    auto escape = [](const std::string& field) {
        std::string out;
        for (char c : field) {
            if (c == ':' || c == '\\') out.push_back('\\');
            out.push_back(c);
        }
        return out;
    };
    std::ostringstream os;
    os << "cpe:2.3:" << part;
    for (const std::string* f : {&vendor, &product, &version, &update, &edition, &language,
                                 &sw_edition, &target_sw, &target_hw, &other}) {
        os << ':' << escape(*f);
    }
    return os.str();
}

CpeName parse_cpe(const std::string& text) {
    // Split on unescaped ':'; a backslash escapes the next character.
    std::vector<std::string> fields;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\\' && i + 1 < text.size()) {
            current.push_back(text[++i]);
            continue;
        }
        if (c == ':') {
            fields.push_back(std::move(current));
            current.clear();
            continue;
        }
        current.push_back(c);
    }
    fields.push_back(std::move(current));

    if (fields.size() < 2 || fields[0] != "cpe" || fields[1] != "2.3") {
        throw Error("BadPrefix", "CPE name must start with cpe:2.3:");
    }
    if (fields.size() != 13) {
        throw Error("FieldCount", "CPE 2.3 name needs exactly 13 fields, got " +
                                      std::to_string(fields.size()));
    }
    if (fields[2].size() != 1 || (fields[2] != "a" && fields[2] != "o" && fields[2] != "h")) {
        throw Error("BadPart", "CPE part must be a, o or h");
    }

    CpeName cpe;
    cpe.part = fields[2][0];
    cpe.vendor = lowercase(fields[3]);
    cpe.product = lowercase(fields[4]);
    cpe.version = fields[5];
    cpe.update = fields[6];
    cpe.edition = fields[7];
    cpe.language = fields[8];
    cpe.sw_edition = fields[9];
    cpe.target_sw = fields[10];
    cpe.target_hw = fields[11];
    cpe.other = fields[12];
    return cpe;
}

std::string severity_name(Severity s) {
    switch (s) {
    case Severity::None: return "None";
    case Severity::Low: return "Low";
    case Severity::Medium: return "Medium";
    case Severity::High: return "High";
    case Severity::Critical: return "Critical";
    }
    throw Error("BadSeverity", "unhandled severity");
}

Severity severity_from_name(const std::string& name) {
    if (name == "None") return Severity::None;
    if (name == "Low") return Severity::Low;
    if (name == "Medium") return Severity::Medium;
    if (name == "High") return Severity::High;
    if (name == "Critical") return Severity::Critical;
    throw Error("FeedInvalid", "unknown severity '" + name + "'");
}

Severity severity_for_score(int score_tenths) {
    if (score_tenths == 0) return Severity::None;
    if (score_tenths <= 39) return Severity::Low;
    if (score_tenths <= 69) return Severity::Medium;
    if (score_tenths <= 89) return Severity::High;
    return Severity::Critical;
}

namespace {

std::vector<std::string> split_segments(const std::string& v) {
    std::vector<std::string> out;
    std::string current;
    for (char c : v) {
        if (c == '.' || c == '-') {
            out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    out.push_back(std::move(current));
    return out;
}

bool pure_numeric(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Numeric compare on digit strings without overflow: strip leading zeros,
// then compare by length and lexicographically.
Ordering compare_numeric(const std::string& a, const std::string& b) {
    auto strip = [](const std::string& s) {
        std::size_t i = 0;
        while (i + 1 < s.size() && s[i] == '0') ++i;
        return s.substr(i);
    };
    std::string sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size() ? Ordering::Less : Ordering::Greater;
    if (sa == sb) return Ordering::Equal;
    return sa < sb ? Ordering::Less : Ordering::Greater;
}

Ordering compare_segment(const std::string& a, const std::string& b) {
    if (pure_numeric(a) && pure_numeric(b)) {
        return compare_numeric(a, b);
    }
    if (a == b) return Ordering::Equal;
    return a < b ? Ordering::Less : Ordering::Greater;
}

} // namespace

Ordering compare_versions(const std::string& a, const std::string& b) {
    auto sa = split_segments(a);
    auto sb = split_segments(b);
    const std::size_t n = std::max(sa.size(), sb.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& ea = i < sa.size() ? sa[i] : "0";
        const std::string& eb = i < sb.size() ? sb[i] : "0";
        Ordering o = compare_segment(ea, eb);
        if (o != Ordering::Equal) return o;
    }
    return Ordering::Equal;
}

namespace {

bool field_matches(const std::string& pattern, const std::string& value) {
    return pattern == "*" || pattern == lowercase(value);
}

bool version_in_bounds(const std::string& version, const CpeMatch& m) {
    if (m.version_start_including &&
        compare_versions(version, *m.version_start_including) == Ordering::Less) {
        return false;
    }
    if (m.version_start_excluding &&
        compare_versions(version, *m.version_start_excluding) != Ordering::Greater) {
        return false;
    }
    if (m.version_end_including &&
        compare_versions(version, *m.version_end_including) == Ordering::Greater) {
        return false;
    }
    if (m.version_end_excluding &&
        compare_versions(version, *m.version_end_excluding) != Ordering::Less) {
        return false;
    }
    return true;
}

std::optional<MatchReason> match_one(const Dependency& dep, const CpeMatch& m) {
    if (!field_matches(m.cpe.vendor, dep.vendor) || !field_matches(m.cpe.product, dep.product)) {
        return std::nullopt;
    }
    if (m.has_bounds()) {
        if (version_in_bounds(dep.version, m)) return MatchReason::VersionMatch;
        return std::nullopt;
    }
    if (m.cpe.version == "*" || compare_versions(dep.version, m.cpe.version) == Ordering::Equal) {
        return MatchReason::ExactMatch;
    }
    return std::nullopt;
}

} // namespace

std::vector<Finding> match_dependency(const Dependency& dep, const std::vector<CveEntry>& feed) {
    std::vector<Finding> findings;
    for (const auto& entry : feed) {
        for (const auto& m : entry.matches) {
            if (auto reason = match_one(dep, m)) {
                findings.push_back(Finding{dep, entry.id, entry.base_score, *reason});
                break; // one finding per hitting entry
            }
        }
    }
    return findings;
}

SourceMode source_mode_from_name(const std::string& name) {
    if (name == "strict") return SourceMode::Strict;
    if (name == "permissive") return SourceMode::Permissive;
    throw Error("ConfigError", "mode must be strict or permissive");
}

bool source_verified(const Dependency& dep, const std::vector<std::string>& allowlist,
                     SourceMode mode) {
    if (allowlist.empty()) {
        return mode == SourceMode::Permissive;
    }
    for (const auto& prefix : allowlist) {
        if (!prefix.empty() && dep.source_url.rfind(prefix, 0) == 0) return true;
    }
    return false;
}

namespace {

json dependency_json(const Dependency& d) {
    return json{{"declared_in", d.declared_in},
                {"product", d.product},
                {"source_url", d.source_url},
                {"vendor", d.vendor},
                {"version", d.version}};
}

json report_body(const ScanReport& r) {
    json findings = json::array();
    for (const auto& f : r.findings) {
        findings.push_back(json{{"base_score", f.base_score},
                                {"cve", f.cve_id},
                                {"dependency", dependency_json(f.dependency)},
                                {"reason", f.reason == MatchReason::VersionMatch ? "VersionMatch"
                                                                                 : "ExactMatch"}});
    }
    json unverified = json::array();
    for (const auto& d : r.unverified_sources) unverified.push_back(dependency_json(d));
    return json{{"findings", findings},
                {"max_score", r.max_score},
                {"mode", r.mode == SourceMode::Strict ? "strict" : "permissive"},
                {"threshold", r.threshold},
                {"unverified_sources", unverified},
                {"verdict", r.verdict == Verdict::Halt ? "Halt" : "Pass"}};
}

} // namespace

std::string ScanReport::canonical_body() const { return canonical_encode(report_body(*this)); }

json ScanReport::to_json() const {
    json j = report_body(*this);
    j["report_hash"] = report_hash;
    return j;
}

std::string ScanReport::render_text() const {
    std::ostringstream os;
    os << "dependency scan: " << (verdict == Verdict::Halt ? "HALT" : "PASS") << "\n";
    os << "max score " << max_score / 10 << "." << max_score % 10 << " against threshold "
       << threshold / 10 << "." << threshold % 10 << "\n";
    if (findings.empty()) {
        os << "no known vulnerabilities matched\n";
    }
    for (const auto& f : findings) {
        os << "  " << f.cve_id << " score " << f.base_score / 10 << "." << f.base_score % 10 << "  "
           << f.dependency.vendor << ":" << f.dependency.product << ":" << f.dependency.version
           << (f.reason == MatchReason::VersionMatch ? " (version range)" : " (exact)") << "\n";
    }
    for (const auto& d : unverified_sources) {
        os << "  unverified source: " << d.vendor << ":" << d.product << " from '" << d.source_url
           << "'\n";
    }
    return os.str();
}

ScanReport scan_manifest(const std::vector<Dependency>& manifest, const std::vector<CveEntry>& feed,
                         int threshold_tenths, const std::vector<std::string>& allowlist,
                         SourceMode mode) {
    if (threshold_tenths < 0 || threshold_tenths > 100) {
        throw Error("ConfigError", "threshold must be within 0..100 tenths");
    }
    ScanReport report;
    report.threshold = threshold_tenths;
    report.mode = mode;
    for (const auto& dep : manifest) {
        for (auto& f : match_dependency(dep, feed)) {
            report.max_score = std::max(report.max_score, f.base_score);
            report.findings.push_back(std::move(f));
        }
        if (!source_verified(dep, allowlist, mode)) {
            report.unverified_sources.push_back(dep);
        }
    }
    const bool halt_on_score = report.max_score >= report.threshold;
    const bool halt_on_source = mode == SourceMode::Strict && !report.unverified_sources.empty();
    report.verdict = (halt_on_score || halt_on_source) ? Verdict::Halt : Verdict::Pass;
    report.report_hash = crypto::sha256_hex(report.canonical_body());
    return report;
}

namespace {

[[noreturn]] void feed_error(const std::string& path, const std::string& message) {
    throw Error("FeedInvalid", path + ": " + message);
}

} // namespace

std::vector<CveEntry> parse_feed(const json& j) {
    if (!j.is_array()) feed_error("$", "feed must be an array of CVE entries");
    std::vector<CveEntry> feed;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string path = "entries[" + std::to_string(i) + "]";
        const json& e = j[i];
        if (!e.is_object()) feed_error(path, "entry must be an object");
        CveEntry entry;
        try {
            entry.id = e.at("id").get<std::string>();
            entry.description = e.at("description").get<std::string>();
            if (!e.at("base_score").is_number_integer()) {
                feed_error(path + ".base_score", "score must be an integer in tenths");
            }
            entry.base_score = e.at("base_score").get<int>();
            entry.severity = severity_from_name(e.at("severity").get<std::string>());
        } catch (const json::exception& ex) {
            feed_error(path, ex.what());
        }
        if (entry.id.rfind("CVE-", 0) != 0 || entry.id.size() < 13 || entry.id[8] != '-') {
            feed_error(path + ".id", "id must look like CVE-YYYY-NNNN");
        }
        if (entry.base_score < 0 || entry.base_score > 100) {
            feed_error(path + ".base_score", "score out of range 0..100");
        }
        if (entry.severity != severity_for_score(entry.base_score)) {
            feed_error(path + ".severity", "severity inconsistent with score band");
        }
        if (!e.contains("matches") || !e.at("matches").is_array()) {
            feed_error(path + ".matches", "matches must be an array");
        }
        for (std::size_t k = 0; k < e.at("matches").size(); ++k) {
            const std::string mpath = path + ".matches[" + std::to_string(k) + "]";
            const json& mj = e.at("matches")[k];
            CpeMatch m;
            try {
                m.cpe = parse_cpe(mj.at("cpe").get<std::string>());
            } catch (const Error& ex) {
                feed_error(mpath + ".cpe", ex.what());
            } catch (const json::exception& ex) {
                feed_error(mpath, ex.what());
            }
            auto bound = [&](const char* name) -> std::optional<std::string> {
                if (!mj.contains(name)) return std::nullopt;
                if (!mj.at(name).is_string()) feed_error(mpath, std::string(name) + " must be a string");
                return mj.at(name).get<std::string>();
            };
            m.version_start_including = bound("version_start_including");
            m.version_start_excluding = bound("version_start_excluding");
            m.version_end_including = bound("version_end_including");
            m.version_end_excluding = bound("version_end_excluding");
            if (m.version_start_including && m.version_start_excluding) {
                feed_error(mpath, "at most one start bound is allowed");
            }
            if (m.version_end_including && m.version_end_excluding) {
                feed_error(mpath, "at most one end bound is allowed");
            }
            entry.matches.push_back(std::move(m));
        }
        feed.push_back(std::move(entry));
    }
    return feed;
}

std::vector<CveEntry> load_feed(const std::filesystem::path& path) {
    json j;
    try {
        j = canonical_decode(read_file(path, "FeedInvalid"));
    } catch (const Error& e) {
        throw Error("FeedInvalid", path.string() + ": " + e.what());
    }
    return parse_feed(j);
}

std::vector<Dependency> parse_manifest(const json& j, const std::string& declared_in) {
    if (!j.is_array()) {
        throw Error("ManifestInvalid", declared_in + ": manifest must be an array");
    }
    std::vector<Dependency> deps;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string path = declared_in + ": deps[" + std::to_string(i) + "]";
        const json& d = j[i];
        Dependency dep;
        try {
            dep.vendor = lowercase(d.at("vendor").get<std::string>());
            dep.product = lowercase(d.at("product").get<std::string>());
            dep.version = d.at("version").get<std::string>();
            dep.source_url = d.value("source_url", std::string{});
        } catch (const json::exception& ex) {
            throw Error("ManifestInvalid", path + ": " + ex.what());
        }
        if (dep.vendor.empty() || dep.product.empty() || dep.version.empty()) {
            throw Error("ManifestInvalid", path + ": vendor, product and version must be nonempty");
        }
        dep.declared_in = declared_in;
        deps.push_back(std::move(dep));
    }
    return deps;
}

std::vector<Dependency> load_manifest(const std::filesystem::path& path) {
    json j;
    try {
        j = canonical_decode(read_file(path, "ManifestInvalid"));
    } catch (const Error& e) {
        throw Error("ManifestInvalid", path.string() + ": " + e.what());
    }
    return parse_manifest(j, path.string());
}

std::vector<std::string> load_allowlist(const std::filesystem::path& path) {
    json j = canonical_decode(read_file(path, "ConfigError"));
    if (!j.is_array()) {
        throw Error("ConfigError", path.string() + ": allowlist must be an array of URL prefixes");
    }
    std::vector<std::string> out;
    for (const auto& p : j) out.push_back(p.get<std::string>());
    return out;
}

} // namespace chainci::vulnscan
