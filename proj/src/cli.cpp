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

#include "chainci/cli.hpp"

#include "chainci/attacks.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace chainci::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("IoError", "cannot read " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_if_absent(const fs::path& path, std::string_view content) {
    if (fs::exists(path)) return;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("IoError", "cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

Bytes parse_seed(const std::string& hex) {
    if (hex.empty()) {
        auto h = crypto::sha256(std::string("chainci.default.seed"));
        return Bytes(h.begin(), h.end());
    }
    Bytes raw = crypto::hex_decode(hex);
    if (raw.size() == crypto::kSeedSize) return raw;
    auto h = crypto::sha256(raw);
    return Bytes(h.begin(), h.end());
}

const std::set<std::string> kUsageCodes = {
    "ConfigError",   "ParseError",    "CycleDetected",   "UnknownDependency", "UnboundVariable",
    "FeedInvalid",   "ManifestInvalid", "UnknownChannel", "BadHex",          "BadBase64",
    "MalformedDigest", "IoError",     "UnknownStage",    "EmptyOrgName",      "ZeroPeers",
    "BadPolicy",     "BadCount",      "WorkspaceNotReady"};

const std::set<std::string> kIntegrityCodes = {
    "CorruptWorkspace", "DigestMismatch", "BadMerkleRoot", "BadBlockHash", "PrevHashMismatch",
    "HeightMismatch",   "BadTxId",        "FlagMismatch",  "BadGenesis",   "BadEncoding",
    "ConsensusViolation"};

int exit_code_for(const Error& e) {
    if (kUsageCodes.count(e.code())) return kExitUsage;
    if (kIntegrityCodes.count(e.code())) return kExitIntegrity;
    return kExitInternal;
}

} // namespace

json fixture_feed() {
    return json::array(
        {json{{"base_score", 100},
              {"description",
               "Remote code execution in the logging library via crafted lookup strings."},
              {"id", "CVE-2021-44228"},
              {"matches", json::array({json{{"cpe", "cpe:2.3:a:apache:log4j:*:*:*:*:*:*:*:*"},
                                            {"version_end_excluding", "2.15.0"}}})},
              {"severity", "Critical"}},
         json{{"base_score", 100},
              {"description",
               "Remote code execution in the web framework multipart parser (insecure "
               "deserialization)."},
              {"id", "CVE-2017-5638"},
              {"matches", json::array({json{{"cpe", "cpe:2.3:a:apache:struts:*:*:*:*:*:*:*:*"},
                                            {"version_start_including", "2.3.5"},
                                            {"version_end_including", "2.3.31"}}})},
              {"severity", "Critical"}},
         json{{"base_score", 85},
              {"description", "SQL injection through unsanitized string escaping in the driver."},
              {"id", "CVE-2019-10001"},
              {"matches",
               json::array({json{{"cpe", "cpe:2.3:a:dbsoft:dbdriver:1.4.2:*:*:*:*:*:*:*"}}})},
              {"severity", "High"}}});
}

json fixture_clean_manifest() {
    return json::array(
        {json{{"product", "log4j"},
              {"source_url", "https://registry.example/apache/log4j"},
              {"vendor", "apache"},
              {"version", "2.17.0"}},
         json{{"product", "webapp-core"},
              {"source_url", "https://registry.example/demo/webapp-core"},
              {"vendor", "demo"},
              {"version", "3.1.0"}},
         json{{"product", "dbdriver"},
              {"source_url", "https://registry.example/dbsoft/dbdriver"},
              {"vendor", "dbsoft"},
              {"version", "1.5.0"}}});
}

json fixture_vulnerable_manifest() {
    json manifest = fixture_clean_manifest();
    manifest[0]["version"] = "2.14.1";
    return manifest;
}

json fixture_allowlist() { return json::array({"https://registry.example/"}); }

void write_app_fixture(const fs::path& app_dir) {
    write_file_if_absent(app_dir / "main.c",
                         "#include <stdio.h>\n\nint main(void) {\n"
                         "    printf(\"demo application\\n\");\n    return 0;\n}\n");
    write_file_if_absent(app_dir / "config.json", "{\"port\":8080,\"service\":\"demo\"}\n");
    write_file_if_absent(app_dir / "lib" / "helper.c",
                         "int helper_add(int a, int b) { return a + b; }\n");
}

TopologyOptions WorkspaceSettings::topology() const {
    TopologyOptions topo;
    topo.orgs.clear();
    for (int i = 1; i <= orgs; ++i) topo.orgs.push_back("Org" + std::to_string(i));
    topo.peers_per_org = peers_per_org;
    topo.channel = channel;
    return topo;
}

WorkspaceSettings load_workspace_settings(const fs::path& workspace) {
    WorkspaceSettings s;
    s.seed = parse_seed("");
    const fs::path file = workspace / "chainci.json";
    if (!fs::exists(file)) return s;
    json j = canonical_decode(read_file(file));
    s.orgs = j.value("orgs", 2);
    s.peers_per_org = j.value("peers_per_org", 2);
    s.channel = j.value("channel", std::string("main"));
    if (j.contains("seed")) s.seed = crypto::hex_decode(j.at("seed").get<std::string>());
    return s;
}

void init_workspace(const fs::path& workspace, const InitOptions& options) {
    if (options.orgs < 1) {
        throw Error("ConfigError", "at least one org is required");
    }
    fs::create_directories(workspace);

    WorkspaceSettings settings;
    settings.orgs = options.orgs;
    settings.peers_per_org = options.peers_per_org;
    settings.seed = options.seed.empty() ? parse_seed("") : options.seed;

    const fs::path settings_file = workspace / "chainci.json";
    if (fs::exists(settings_file)) {
        settings = load_workspace_settings(workspace);
    } else {
        json j{{"channel", settings.channel},
               {"orgs", settings.orgs},
               {"peers_per_org", settings.peers_per_org},
               {"seed", crypto::hex_encode(settings.seed)}};
        write_file_if_absent(settings_file, canonical_encode(j));
    }

    write_file_if_absent(workspace / "pipeline.json",
                         canonical_encode(pipeline::default_pipeline_json()));
    write_file_if_absent(workspace / "deps.json", canonical_encode(fixture_clean_manifest()));
    write_file_if_absent(workspace / "feed.json", canonical_encode(fixture_feed()));
    write_file_if_absent(workspace / "allowlist.json", canonical_encode(fixture_allowlist()));
    write_app_fixture(workspace / "app");

    pipeline::PipelineConfig config = pipeline::PipelineConfig::from_env(workspace, {});
    config.seed = settings.seed;
    config.topology = settings.topology();
    pipeline::stage_ledger_bootstrap(config, workspace);
}

namespace {

pipeline::PipelineConfig workspace_config(const fs::path& workspace) {
    WorkspaceSettings settings = load_workspace_settings(workspace);
    pipeline::PipelineConfig config = pipeline::PipelineConfig::from_env(workspace, {});
    config.seed = settings.seed;
    config.topology = settings.topology();
    if (fs::exists(workspace / "allowlist.json")) {
        config.allowlist = vulnscan::load_allowlist(workspace / "allowlist.json");
    }
    return config;
}

int cmd_init(const fs::path& workspace, int orgs, int peers, const std::string& seed_hex,
             bool json_out, std::ostream& out) {
    InitOptions options;
    options.orgs = orgs;
    options.peers_per_org = peers;
    options.seed = parse_seed(seed_hex);
    init_workspace(workspace, options);
    if (json_out) {
        out << canonical_encode(json{{"status", "ready"}, {"workspace", workspace.string()}}) << "\n";
    } else {
        out << "workspace ready at " << workspace.string() << "\n";
    }
    return kExitOk;
}

int cmd_run(const fs::path& workspace, const std::string& pipeline_file, bool parallel,
            bool json_out, std::ostream& out, std::ostream& err) {
    pipeline::PipelineConfig config = workspace_config(workspace);
    config.parallel = parallel;
    auto def = pipeline::load_pipeline_def(workspace / pipeline_file,
                                           pipeline::effective_env({{"FABRIC_BIN", config.fabric_bin}}));
    pipeline::PipelineRun run = pipeline::run_pipeline(def, config, workspace);

    if (json_out) {
        out << canonical_encode(run.to_json()) << "\n";
    } else {
        out << "run " << run.run_id << ": " << pipeline::run_outcome_name(run.overall) << "\n";
        for (const auto& r : run.results) {
            out << "  " << r.name << ": " << pipeline::stage_status_name(r.status);
            if (!r.error.empty()) out << " (" << r.error << ")";
            out << " [" << r.duration_ms() << " ms]\n";
        }
        if (!run.ledger_txs.empty()) {
            out << "ledger transactions:\n";
            for (const auto& id : run.ledger_txs) out << "  " << id << "\n";
        }
    }

    switch (run.overall) {
    case pipeline::RunOutcome::Success: return kExitOk;
    case pipeline::RunOutcome::HaltedAtGate: return kExitGateHalt;
    case pipeline::RunOutcome::Failed: break;
    }
    for (const auto& r : run.results) {
        if (r.status == pipeline::StageStatus::Failed && kIntegrityCodes.count(r.error_code)) {
            err << "integrity violation in stage " << r.name << ": " << r.error << "\n";
            return kExitIntegrity;
        }
    }
    err << "pipeline failed\n";
    return kExitInternal;
}

int cmd_scan(const fs::path& workspace, const std::string& manifest, const std::string& feed,
             int threshold, const std::string& allowlist_file, const std::string& mode_name,
             bool json_out, std::ostream& out) {
    auto deps = vulnscan::load_manifest(workspace / manifest);
    auto entries = vulnscan::load_feed(workspace / feed);
    std::vector<std::string> allowlist;
    if (!allowlist_file.empty()) {
        allowlist = vulnscan::load_allowlist(workspace / allowlist_file);
    } else if (fs::exists(workspace / "allowlist.json")) {
        allowlist = vulnscan::load_allowlist(workspace / "allowlist.json");
    }
    auto report = vulnscan::scan_manifest(deps, entries, threshold, allowlist,
                                          vulnscan::source_mode_from_name(mode_name));
    if (json_out) {
        out << canonical_encode(report.to_json()) << "\n";
    } else {
        out << report.render_text();
    }
    return report.verdict == vulnscan::Verdict::Halt ? kExitGateHalt : kExitOk;
}

int cmd_ledger_verify(const fs::path& workspace, const std::string& channel, bool json_out,
                      std::ostream& out, std::ostream& err) {
    auto verdict = validate_workspace_chain(workspace, channel);
    if (json_out) {
        json j{{"channel", channel}, {"ok", verdict.ok}};
        if (!verdict.ok) {
            j["first_bad_height"] = verdict.first_bad_height;
            j["reason"] = verdict.reason;
        }
        out << canonical_encode(j) << "\n";
    } else if (verdict.ok) {
        out << "channel " << channel << ": chain verifies\n";
    }
    if (!verdict.ok) {
        err << "FirstBadHeight(" << verdict.first_bad_height << ", " << verdict.reason
            << "): " << verdict.detail << "\n";
        return kExitIntegrity;
    }
    return kExitOk;
}

int cmd_ledger_query(const fs::path& workspace, const std::string& channel, const std::string& key,
                     bool history, std::ostream& out) {
    WorkspaceSettings settings = load_workspace_settings(workspace);
    Fabric fabric(workspace, settings.topology(), settings.seed);
    const ChannelLedger& ledger = fabric.ledger(channel);
    if (history) {
        json arr = json::array();
        for (const auto& h : ledger.read_history(key)) {
            arr.push_back(json{{"delete", h.is_delete},
                               {"tx_id", h.tx_id},
                               {"value", h.is_delete ? json(nullptr)
                                                     : json(crypto::base64_encode(h.value))},
                               {"version", h.version.to_json()}});
        }
        out << canonical_encode(json{{"history", arr}, {"key", key}}) << "\n";
        return kExitOk;
    }
    auto entry = ledger.get_state(key);
    json j{{"key", key},
           {"value", entry ? json(crypto::base64_encode(entry->value)) : json(nullptr)},
           {"version", entry ? entry->version.to_json() : json(nullptr)}};
    out << canonical_encode(j) << "\n";
    return kExitOk;
}

int cmd_artifact_verify(const fs::path& workspace, const std::string& digest, bool json_out,
                        std::ostream& out, std::ostream& err) {
    if (digest.size() != 64) {
        throw Error("MalformedDigest", "digest must be 64 hex characters");
    }
    crypto::hex_decode(digest); // BadHex -> usage error

    WorkspaceSettings settings = load_workspace_settings(workspace);
    Fabric fabric(workspace, settings.topology(), settings.seed);
    const Identity admin = fabric.admin_identity(fabric.org_names().front());
    json verdict = fabric.query(settings.channel, "provenance", "verify", {digest}, admin);

    std::string status = verdict.at("status").get<std::string>();
    bool file_ok = false;
    std::string detail;
    if (status == "Registered") {
        const json& record = verdict.at("record");
        fs::path archive = workspace / "dist" /
                           (record.at("name").get<std::string>() + "-" +
                            record.at("tag").get<std::string>() + ".img.json");
        std::string sanitized = archive.filename().string();
        for (char& c : sanitized) {
            if (c == ':') c = '_';
        }
        archive = archive.parent_path() / sanitized;
        if (fs::exists(archive)) {
            file_ok = crypto::sha256_hex(read_file(archive)) == digest;
            if (!file_ok) detail = "local archive does not hash to the registered digest";
        } else {
            detail = "registered, but no local archive at " + archive.string();
        }
    } else {
        detail = "digest is not registered on the ledger";
    }

    if (json_out) {
        out << canonical_encode(json{{"digest", digest},
                                     {"file_ok", file_ok},
                                     {"status", status},
                                     {"detail", detail}})
            << "\n";
    } else {
        out << "artifact " << digest.substr(0, 12) << "...: " << status
            << (file_ok ? ", archive verified" : "") << "\n";
    }
    if (status != "Registered" || !file_ok) {
        err << "artifact verification failed: " << detail << "\n";
        return kExitIntegrity;
    }
    return kExitOk;
}

int cmd_attack(const fs::path& workspace, const std::string& kinds_arg, int seeds,
               const std::string& base_seed_hex, bool json_out, std::ostream& out,
               std::ostream& err) {
    std::vector<attacks::AttackKind> kinds;
    if (kinds_arg == "all" || kinds_arg.empty()) {
        kinds.assign(std::begin(attacks::kAllKinds), std::end(attacks::kAllKinds));
    } else {
        std::string token;
        std::istringstream stream(kinds_arg);
        while (std::getline(stream, token, ',')) {
            if (!token.empty()) kinds.push_back(attacks::attack_kind_from_name(token));
        }
    }
    if (kinds.empty()) {
        throw Error("ConfigError", "no attack kinds selected");
    }

    // The suite needs a completed clean run to attack; produce one on demand.
    if (!fs::exists(workspace / "run-report.json") && fs::exists(workspace / "pipeline.json")) {
        pipeline::PipelineConfig config = workspace_config(workspace);
        auto def = pipeline::load_pipeline_def(workspace / "pipeline.json",
                                               pipeline::effective_env({}));
        pipeline::run_pipeline(def, config, workspace);
    }

    const Bytes base_seed = base_seed_hex.empty() ? to_bytes("chainci.attack") :
                                                    crypto::hex_decode(base_seed_hex);
    const fs::path scratch = workspace / ".attack-scratch";
    fs::remove_all(scratch);

    auto report = attacks::run_suite(kinds, seeds, base_seed, workspace, scratch);

    const fs::path control = scratch / "control";
    attacks::copy_workspace(workspace, control);
    const int false_positives = attacks::control_detections(kinds, control);
    fs::remove_all(scratch);

    json report_json = report.to_json();
    report_json["false_positives"] = false_positives;
    std::ofstream report_out(workspace / "attack-report.json", std::ios::binary | std::ios::trunc);
    report_out << canonical_encode(report_json);
    report_out.close();

    if (json_out) {
        out << canonical_encode(report_json) << "\n";
    } else {
        out << "attack suite: " << report.detected << "/" << report.scenarios_run
            << " detected, false positives: " << false_positives << "\n";
        for (const auto& [kind, run_count] : report.per_kind_run) {
            int64_t det = 0;
            if (auto it = report.per_kind_detected.find(kind); it != report.per_kind_detected.end()) {
                det = it->second;
            }
            out << "  " << kind << ": " << det << "/" << run_count << "\n";
        }
    }
    if (report.detected != report.scenarios_run || false_positives != 0) {
        err << "attack suite found gaps: missed " << report.missed.size() << ", false positives "
            << false_positives << "\n";
        return kExitIntegrity;
    }
    return kExitOk;
}

int cmd_report(const fs::path& workspace, const std::string& run_id, bool json_out,
               std::ostream& out) {
    const fs::path dir = workspace / "runs" / run_id;
    if (!fs::exists(dir / "run-report.json")) {
        throw Error("ConfigError", "no run report for id " + run_id);
    }
    json run = canonical_decode(read_file(dir / "run-report.json"));
    json timing = canonical_decode(read_file(dir / "timing-report.json"));
    if (json_out) {
        out << canonical_encode(json{{"run", run}, {"timing", timing}}) << "\n";
        return kExitOk;
    }
    out << "run " << run.at("run_id").get<std::string>() << ": "
        << run.at("overall").get<std::string>() << "\n";
    for (const auto& s : timing.at("stages")) {
        out << "  " << s.at("name").get<std::string>() << ": " << s.at("duration_ms").get<int64_t>()
            << " ms (" << s.at("status").get<std::string>() << ")\n";
    }
    out << "total wall: " << timing.at("total_wall_ns").get<int64_t>() / 1000000 << " ms, serial sum: "
        << timing.at("serial_sum_ns").get<int64_t>() / 1000000 << " ms\n";
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"blockchain-backed CI/CD security toolkit"};
    app.require_subcommand(1);

    std::string workspace = ".";
    app.add_option("--workspace", workspace, "workspace root (default: current directory)");

    // init
    auto* init = app.add_subcommand("init", "create and bootstrap a workspace");
    int orgs = 2, peers = 2;
    std::string seed_hex;
    bool init_json = false;
    init->add_option("--orgs", orgs, "number of organizations");
    init->add_option("--peers-per-org", peers, "peers per organization");
    init->add_option("--seed", seed_hex, "hex seed for deterministic key material");
    init->add_flag("--json", init_json, "JSON output");

    // run
    auto* run = app.add_subcommand("run", "execute a pipeline definition");
    std::string pipeline_file = "pipeline.json";
    bool parallel = false, run_json = false;
    run->add_option("--pipeline", pipeline_file, "pipeline definition file");
    run->add_flag("--parallel", parallel, "run independent stages concurrently");
    run->add_flag("--json", run_json, "JSON output");

    // scan
    auto* scan = app.add_subcommand("scan", "scan a dependency manifest against a CVE feed");
    std::string manifest_file, feed_file, allowlist_file, mode = "strict";
    int threshold = vulnscan::kDefaultThresholdTenths;
    bool scan_json = false;
    scan->add_option("--manifest", manifest_file, "dependency manifest")->required();
    scan->add_option("--feed", feed_file, "CVE feed file")->required();
    scan->add_option("--threshold", threshold, "halt threshold in CVSS tenths (default 70)");
    scan->add_option("--allowlist", allowlist_file, "source allowlist file");
    scan->add_option("--mode", mode, "strict|permissive source verification");
    scan->add_flag("--json", scan_json, "JSON output");

    // ledger-verify
    auto* lverify = app.add_subcommand("ledger-verify", "verify a channel's chain from disk");
    std::string channel = "main";
    bool lverify_json = false;
    lverify->add_option("--channel", channel, "channel name")->required();
    lverify->add_flag("--json", lverify_json, "JSON output");

    // ledger-query
    auto* lquery = app.add_subcommand("ledger-query", "query world state or key history");
    std::string q_channel = "main", q_key;
    bool q_history = false;
    lquery->add_option("--channel", q_channel, "channel name")->required();
    lquery->add_option("--key", q_key, "state key")->required();
    lquery->add_flag("--history", q_history, "return the full write history");

    // artifact-verify
    auto* averify = app.add_subcommand("artifact-verify", "check a packaged artifact against the ledger");
    std::string digest;
    bool averify_json = false;
    averify->add_option("--digest", digest, "artifact digest (SHA-256 hex)")->required();
    averify->add_flag("--json", averify_json, "JSON output");

    // attack
    auto* attack = app.add_subcommand("attack", "run the mock-attack suite");
    std::string kinds = "all", base_seed_hex;
    int seeds_per_kind = 5;
    bool attack_json = false;
    attack->add_option("--kinds", kinds, "comma-separated attack kinds or 'all'");
    attack->add_option("--seeds", seeds_per_kind, "seeds per kind");
    attack->add_option("--base-seed", base_seed_hex, "hex base seed");
    attack->add_flag("--json", attack_json, "JSON output");

    // report
    auto* report = app.add_subcommand("report", "show a stored run report");
    std::string run_id;
    bool report_json = false;
    report->add_option("--run", run_id, "run id")->required();
    report->add_flag("--json", report_json, "JSON output");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << e.what() << "\n";
        return kExitUsage;
    }

    const fs::path ws(workspace);
    try {
        if (init->parsed()) return cmd_init(ws, orgs, peers, seed_hex, init_json, out);
        if (run->parsed()) return cmd_run(ws, pipeline_file, parallel, run_json, out, err);
        if (scan->parsed())
            return cmd_scan(ws, manifest_file, feed_file, threshold, allowlist_file, mode, scan_json,
                            out);
        if (lverify->parsed()) return cmd_ledger_verify(ws, channel, lverify_json, out, err);
        if (lquery->parsed()) return cmd_ledger_query(ws, q_channel, q_key, q_history, out);
        if (averify->parsed()) return cmd_artifact_verify(ws, digest, averify_json, out, err);
        if (attack->parsed())
            return cmd_attack(ws, kinds, seeds_per_kind, base_seed_hex, attack_json, out, err);
        if (report->parsed()) return cmd_report(ws, run_id, report_json, out);
        err << "no command given\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (...) {
        err << "internal error\n";
        return kExitInternal;
    }
}

} // namespace chainci::cli
