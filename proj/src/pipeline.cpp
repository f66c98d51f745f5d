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

#include "chainci/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <set>
#include <thread>

namespace chainci::pipeline {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string read_file(const fs::path& path, const char* error_code = "IoError") {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(error_code, "cannot read " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::string_view content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("IoError", "cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string sanitize_filename(std::string s) {
    for (char& c : s) {
        if (c == '/' || c == ':' || c == '\\') c = '_';
    }
    return s;
}

} // namespace

StageKind stage_kind_from_name(const std::string& name) {
    if (name == "Build") return StageKind::Build;
    if (name == "Package") return StageKind::Package;
    if (name == "DepCheck") return StageKind::DepCheck;
    if (name == "LedgerBootstrap") return StageKind::LedgerBootstrap;
    if (name == "Deploy") return StageKind::Deploy;
    if (name == "Custom") return StageKind::Custom;
    throw Error("ParseError", "unknown stage kind '" + name + "'");
}

std::string stage_kind_name(StageKind kind) {
    switch (kind) {
    case StageKind::Build: return "Build";
    case StageKind::Package: return "Package";
    case StageKind::DepCheck: return "DepCheck";
    case StageKind::LedgerBootstrap: return "LedgerBootstrap";
    case StageKind::Deploy: return "Deploy";
    case StageKind::Custom: return "Custom";
    }
    throw Error("ParseError", "unhandled stage kind");
}

const StageDef& PipelineDef::stage(const std::string& name) const {
    for (const auto& s : stages) {
        if (s.name == name) return s;
    }
    throw Error("UnknownStage", "no stage named " + name);
}

std::string expand_vars(const std::string& text, const EnvMap& env) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
            std::size_t close = text.find('}', i + 2);
            if (close == std::string::npos) {
                throw Error("UnboundVariable", "unterminated ${ in '" + text + "'");
            }
            const std::string name = text.substr(i + 2, close - i - 2);
            auto it = env.find(name);
            if (it == env.end()) {
                throw Error("UnboundVariable", "variable " + name + " is not set");
            }
            out += it->second;
            i = close + 1;
            continue;
        }
        out.push_back(text[i++]);
    }
    return out;
}

EnvMap effective_env(const EnvMap& explicit_env) {
    EnvMap env{{"FABRIC_BIN", ""},
               {"IMAGE_NAME", "app"},
               {"IMAGE_TAG", "1.0"},
               {"CONTAINER_NAME", "app-${BUILD_NUMBER}"},
               {"BUILD_NUMBER", "1"}};
    for (const auto& [key, def] : env) {
        if (const char* v = std::getenv(key.c_str())) {
            env[key] = v;
        }
    }
    for (const auto& [key, value] : explicit_env) {
        env[key] = value;
    }
    return env;
}

namespace {

void check_dag(PipelineDef& def) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < def.stages.size(); ++i) {
        if (!index.emplace(def.stages[i].name, i).second) {
            throw Error("ParseError", "duplicate stage name '" + def.stages[i].name + "'");
        }
    }
    for (const auto& s : def.stages) {
        for (const auto& dep : s.depends_on) {
            if (!index.count(dep)) {
                throw Error("UnknownDependency",
                            "stage '" + s.name + "' depends on unknown stage '" + dep + "'");
            }
        }
    }

    // DFS cycle detection that can name the offending path.
    std::vector<int> state(def.stages.size(), 0); // 0 white, 1 gray, 2 black
    std::vector<std::string> order;
    std::vector<std::string> stack;
    std::function<void(std::size_t)> visit = [&](std::size_t i) {
        state[i] = 1;
        stack.push_back(def.stages[i].name);
        for (const auto& dep : def.stages[i].depends_on) {
            std::size_t d = index.at(dep);
            if (state[d] == 1) {
                auto at = std::find(stack.begin(), stack.end(), dep);
                std::string path;
                for (auto it = at; it != stack.end(); ++it) {
                    if (!path.empty()) path += " -> ";
                    path += *it;
                }
                throw Error("CycleDetected", "dependency cycle: " + path + " -> " + dep);
            }
            if (state[d] == 0) visit(d);
        }
        stack.pop_back();
        state[i] = 2;
        order.push_back(def.stages[i].name);
    };
    for (std::size_t i = 0; i < def.stages.size(); ++i) {
        if (state[i] == 0) visit(i);
    }
    def.topo_order = std::move(order); // dependencies first
}

} // namespace

PipelineDef parse_pipeline_def(const json& j, const EnvMap& env) {
    if (!j.is_object() || !j.contains("stages") || !j.at("stages").is_array()) {
        throw Error("ParseError", "pipeline definition must be {\"stages\": [...]}");
    }
    PipelineDef def;
    for (const auto& sj : j.at("stages")) {
        StageDef stage;
        try {
            stage.name = sj.at("name").get<std::string>();
            stage.kind = stage_kind_from_name(sj.at("kind").get<std::string>());
        } catch (const json::exception& e) {
            throw Error("ParseError", e.what());
        }
        if (stage.name.empty()) {
            throw Error("ParseError", "stage name must be nonempty");
        }
        if (sj.contains("depends_on")) {
            for (const auto& d : sj.at("depends_on")) stage.depends_on.push_back(d.get<std::string>());
        }
        if (sj.contains("params")) {
            for (const auto& [key, value] : sj.at("params").items()) {
                if (!value.is_string()) {
                    throw Error("ParseError", "stage param " + key + " must be a string");
                }
                stage.params[key] = expand_vars(value.get<std::string>(), env);
            }
        }
        def.stages.push_back(std::move(stage));
    }
    check_dag(def);
    return def;
}

PipelineDef load_pipeline_def(const fs::path& path, const EnvMap& env) {
    json j;
    try {
        j = canonical_decode(read_file(path, "ParseError"));
    } catch (const Error& e) {
        throw Error("ParseError", path.string() + ": " + e.what());
    }
    return parse_pipeline_def(j, env);
}

json default_pipeline_json() {
    return json{{"stages",
                 json::array(
                     {json{{"kind", "Build"}, {"name", "build"}, {"params", json{{"src", "app"}}}},
                      json{{"depends_on", json::array({"build"})},
                           {"kind", "Package"},
                           {"name", "containerise"}},
                      json{{"depends_on", json::array({"build"})},
                           {"kind", "DepCheck"},
                           {"name", "dependency-check"},
                           {"params", json{{"feed", "feed.json"}, {"manifest", "deps.json"}}}},
                      json{{"depends_on", json::array({"dependency-check"})},
                           {"kind", "LedgerBootstrap"},
                           {"name", "ledger-bootstrap"}},
                      json{{"depends_on", json::array({"containerise", "ledger-bootstrap"})},
                           {"kind", "Deploy"},
                           {"name", "deploy"},
                           {"params", json{{"environment", "staging"}}}}})}};
}

PipelineConfig PipelineConfig::from_env(const fs::path& workspace, const EnvMap& env) {
    EnvMap e = effective_env(env);
    PipelineConfig cfg;
    cfg.fabric_bin = e.at("FABRIC_BIN").empty() ? fs::absolute(workspace).string()
                                                : e.at("FABRIC_BIN");
    cfg.image_name = e.at("IMAGE_NAME");
    cfg.image_tag = e.at("IMAGE_TAG");
    cfg.container_name = e.at("CONTAINER_NAME");
    try {
        cfg.build_number = std::stoll(e.at("BUILD_NUMBER"));
    } catch (const std::exception&) {
        throw Error("ConfigError", "BUILD_NUMBER must be an integer");
    }
    auto seed_hash = crypto::sha256(std::string("chainci.default.seed"));
    cfg.seed = Bytes(seed_hash.begin(), seed_hash.end());
    return cfg;
}

EnvMap PipelineConfig::as_env() const {
    return EnvMap{{"FABRIC_BIN", fabric_bin},
                  {"IMAGE_NAME", image_name},
                  {"IMAGE_TAG", image_tag},
                  {"CONTAINER_NAME", container_name},
                  {"BUILD_NUMBER", std::to_string(build_number)}};
}

json PipelineConfig::snapshot() const {
    return json{{"build_number", build_number},
                {"container_name", container_name},
                {"environment", environment},
                {"fabric_bin", fabric_bin},
                {"image_name", image_name},
                {"image_tag", image_tag},
                {"mode", mode == vulnscan::SourceMode::Strict ? "strict" : "permissive"},
                {"parallel", parallel},
                {"threshold", threshold}};
}

std::string stage_status_name(StageStatus s) {
    switch (s) {
    case StageStatus::Success: return "Success";
    case StageStatus::Failed: return "Failed";
    case StageStatus::Halted: return "Halted";
    case StageStatus::Skipped: return "Skipped";
    }
    throw Error("BadStatus", "unhandled stage status");
}

std::string run_outcome_name(RunOutcome o) {
    switch (o) {
    case RunOutcome::Success: return "Success";
    case RunOutcome::HaltedAtGate: return "HaltedAtGate";
    case RunOutcome::Failed: return "Failed";
    }
    throw Error("BadStatus", "unhandled run outcome");
}

const StageResult* PipelineRun::result(const std::string& stage_name) const {
    for (const auto& r : results) {
        if (r.name == stage_name) return &r;
    }
    return nullptr;
}

json PipelineRun::to_json() const {
    json results_arr = json::array();
    for (const auto& r : results) {
        json outputs = json::object();
        for (const auto& [key, value] : r.outputs) outputs[key] = value;
        results_arr.push_back(json{{"duration_ms", r.duration_ms()},
                                   {"duration_ns", r.duration_ns()},
                                   {"ended_ns", r.ended_ns},
                                   {"error", r.error},
                                   {"error_code", r.error_code},
                                   {"kind", stage_kind_name(r.kind)},
                                   {"name", r.name},
                                   {"outputs", outputs},
                                   {"started_ns", r.started_ns},
                                   {"status", stage_status_name(r.status)}});
    }
    return json{{"config", config_snapshot},
                {"ledger_txs", ledger_txs},
                {"overall", run_outcome_name(overall)},
                {"results", results_arr},
                {"run_id", run_id},
                {"total_wall_ns", total_wall_ns}};
}

std::string tree_digest(const fs::path& root) {
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw Error("MissingSource", "source directory " + root.string() + " does not exist");
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), root).generic_string();
        entries.emplace_back(rel, crypto::sha256_hex(read_file(entry.path())));
    }
    if (entries.empty()) {
        throw Error("MissingSource", "source directory " + root.string() + " has no files");
    }
    std::sort(entries.begin(), entries.end());
    json tree = json::array();
    for (const auto& [path, hash] : entries) {
        tree.push_back(json::array({path, hash}));
    }
    return crypto::sha256_hex(canonical_encode(tree));
}

BuildOutput stage_build(const std::map<std::string, std::string>& params, const fs::path& workspace) {
    const std::string src = params.count("src") ? params.at("src") : "app";
    const fs::path src_dir = workspace / src;
    BuildOutput out;
    out.source_digest = tree_digest(src_dir);

    if (params.count("cmd")) {
        // External toolchain escape hatch; the hermetic path below is the
        // test default.
        const std::string cmd = "cd '" + workspace.string() + "' && " + params.at("cmd");
        int rc = std::system(cmd.c_str());
        if (rc != 0) {
            throw Error("BuildCommandFailed", "build command exited with " + std::to_string(rc));
        }
        if (!params.count("out")) {
            throw Error("ConfigError", "build cmd requires an 'out' artifact path");
        }
        out.artifact = to_bytes(read_file(workspace / params.at("out"), "BuildCommandFailed"));
        return out;
    }

    // Hermetic transform: a deterministic archive of the source tree.
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& entry : fs::recursive_directory_iterator(src_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), src_dir).generic_string();
        files.emplace_back(rel, crypto::base64_encode(to_bytes(read_file(entry.path()))));
    }
    std::sort(files.begin(), files.end());
    json archive{{"files", json::array()}, {"source_digest", out.source_digest}};
    for (const auto& [path, content] : files) {
        archive["files"].push_back(json::array({path, content}));
    }
    out.artifact = to_bytes(canonical_encode(archive));
    return out;
}

PackagedImage stage_package(const Bytes& artifact, const std::string& source_digest,
                            const PipelineConfig& config, const fs::path& workspace) {
    if (config.image_name.empty() || config.image_tag.empty()) {
        throw Error("MissingImageName", "IMAGE_NAME and IMAGE_TAG must be set to package");
    }
    if (artifact.empty()) {
        throw Error("MissingArtifact", "cannot package an empty artifact");
    }
    json archive{{"artifact", crypto::base64_encode(artifact)},
                 {"manifest", json{{"image", config.image_name},
                                   {"source_digest", source_digest},
                                   {"tag", config.image_tag}}}};
    const std::string bytes = canonical_encode(archive);

    PackagedImage image;
    image.name = config.image_name;
    image.tag = config.image_tag;
    image.digest = crypto::sha256_hex(bytes);
    image.container_name =
        expand_vars(config.container_name, {{"BUILD_NUMBER", std::to_string(config.build_number)}});
    image.archive_path =
        workspace / "dist" / (sanitize_filename(config.image_name) + "-" + config.image_tag + ".img.json");
    write_file(image.archive_path, bytes);
    return image;
}

DepCheckOutcome stage_depcheck(const fs::path& manifest_path, const fs::path& feed_path,
                               const PipelineConfig& config, const fs::path& workspace) {
    auto manifest = vulnscan::load_manifest(manifest_path);
    auto feed = vulnscan::load_feed(feed_path);
    DepCheckOutcome out;
    out.report = vulnscan::scan_manifest(manifest, feed, config.threshold, config.allowlist,
                                         config.mode);
    out.report_path = workspace / "scan-report.json";
    // The report lands on disk whatever the verdict; auditors want halted
    // runs the most.
    write_file(out.report_path, canonical_encode(out.report.to_json()));
    write_file(workspace / "scan-report.txt", out.report.render_text());
    return out;
}

namespace {

fs::path fabric_root(const PipelineConfig& config, const fs::path& workspace) {
    if (config.fabric_bin.empty()) return workspace;
    fs::path root(config.fabric_bin);
    if (root.is_relative()) return workspace / root;
    return root;
}

std::unique_ptr<Fabric> open_fabric(const PipelineConfig& config, const fs::path& workspace,
                                    bool allow_create) {
    const fs::path root = fabric_root(config, workspace);
    if (!allow_create && list_orgs(root / "crypto").empty()) {
        throw Error("NotBootstrapped", "no crypto material under " + root.string() +
                                           "; run the ledger bootstrap stage first");
    }
    return std::make_unique<Fabric>(root, config.topology, config.seed);
}

} // namespace

void stage_ledger_bootstrap(const PipelineConfig& config, const fs::path& workspace) {
    auto fabric = open_fabric(config, workspace, /*allow_create=*/true);
    const std::string channel = config.topology.channel;
    const Identity admin = fabric->admin_identity(fabric->org_names().front());

    if (!fabric->has_channel(channel)) {
        fabric->create_channel(channel, admin);
    }
    for (auto& peer : fabric->peers()) {
        fabric->join_channel(peer.name(), channel, admin);
    }
    if (!fabric->private_store(channel).declared(kScanReportCollection)) {
        fabric->declare_private_collection(channel, kScanReportCollection,
                                           {fabric->org_names().front()});
    }

    const EndorsementPolicy policy = EndorsementPolicy::any_org(fabric->org_names());
    for (const std::string name : {"provenance", "attestation", "deployment"}) {
        const ContractDef* def = fabric->registry().find(name);
        const ContractPackage pkg = ContractPackage::of(*def);
        for (auto& peer : fabric->peers()) {
            fabric->install_contract(peer.name(), pkg, admin);
        }
        if (!fabric->ledger(channel).lifecycle_entry(name)) {
            fabric->init_contract(channel, name, def->version, policy, admin);
        }
    }
}

DeployOutcome stage_deploy(const PackagedImage& image, const vulnscan::ScanReport& report,
                           const PipelineConfig& config, const fs::path& workspace) {
    auto fabric = open_fabric(config, workspace, /*allow_create=*/false);
    const std::string channel = config.topology.channel;
    if (!fabric->has_channel(channel)) {
        throw Error("NotBootstrapped", "channel " + channel + " does not exist yet");
    }

    // Anything could have touched dist/ since packaging; trust only a fresh
    // digest of the bytes on disk.
    if (!fs::exists(image.archive_path)) {
        throw Error("MissingArtifact", "packaged archive " + image.archive_path.string() + " is gone");
    }
    const std::string archive_bytes = read_file(image.archive_path);
    const std::string actual = crypto::sha256_hex(archive_bytes);
    if (actual != image.digest) {
        throw Error("DigestMismatch", "packaged archive hashes to " + actual.substr(0, 12) +
                                          "... but " + image.digest.substr(0, 12) +
                                          "... was recorded at packaging time");
    }
    const json archive = canonical_decode(archive_bytes);
    const std::string source_digest = archive.at("manifest").at("source_digest").get<std::string>();

    const Identity deployer = fabric->admin_identity(fabric->org_names().front());
    DeployOutcome out;
    out.environment = config.environment;
    out.container_name = image.container_name;
    out.digest = image.digest;

    auto must_commit = [](const TxOutcome& o, const char* what) {
        if (o.flag != ValidationFlag::Valid) {
            throw Error("CommitFailed", std::string(what) + " transaction flagged " + flag_name(o.flag));
        }
    };

    auto reg = fabric->invoke(channel, "provenance", "register",
                              {image.digest, image.name, image.tag, source_digest}, deployer);
    must_commit(reg, "register");
    out.tx_ids.push_back(reg.tx_id);

    const std::string verdict = report.verdict == vulnscan::Verdict::Halt ? "Halt" : "Pass";
    std::map<std::string, Bytes> transient{{"report", to_bytes(report.canonical_body())}};
    auto att = fabric->invoke(channel, "attestation", "record",
                              {image.digest, report.report_hash, std::to_string(report.max_score),
                               verdict, std::to_string(report.threshold)},
                              deployer, transient);
    must_commit(att, "attestation");
    out.tx_ids.push_back(att.tx_id);

    auto dep = fabric->invoke(channel, "deployment", "record",
                              {image.digest, out.environment, out.container_name}, deployer);
    must_commit(dep, "deployment");
    out.tx_ids.push_back(dep.tx_id);
    return out;
}

namespace {

struct RunContext {
    std::mutex mutex;
    std::map<std::string, BuildOutput> builds;
    std::map<std::string, PackagedImage> images;
    std::map<std::string, vulnscan::ScanReport> reports;
};

/// All stages reachable through depends_on, nearest first.
std::vector<std::string> transitive_deps(const PipelineDef& def, const std::string& name) {
    std::vector<std::string> out;
    std::set<std::string> visited;
    std::deque<std::string> frontier(def.stage(name).depends_on.begin(),
                                     def.stage(name).depends_on.end());
    while (!frontier.empty()) {
        std::string cur = frontier.front();
        frontier.pop_front();
        if (!visited.insert(cur).second) continue;
        out.push_back(cur);
        for (const auto& d : def.stage(cur).depends_on) frontier.push_back(d);
    }
    return out;
}

template <typename T>
const T* find_upstream(const PipelineDef& def, const std::string& stage,
                       const std::map<std::string, T>& pool) {
    for (const auto& dep : transitive_deps(def, stage)) {
        auto it = pool.find(dep);
        if (it != pool.end()) return &it->second;
    }
    return nullptr;
}

class Engine {
public:
    Engine(const PipelineDef& def, const PipelineConfig& config, fs::path workspace)
        : def_(def), config_(config), workspace_(std::move(workspace)) {}

    PipelineRun run();

private:
    StageResult execute(const StageDef& stage);
    void run_serial();
    void run_parallel();
    bool deps_satisfied(const StageDef& stage, std::string* blocker, StageStatus* blocker_status);

    const PipelineDef& def_;
    const PipelineConfig& config_;
    fs::path workspace_;
    RunContext ctx_;
    Clock::time_point start_;
    std::mutex results_mutex_;
    std::map<std::string, StageResult> results_;
    std::vector<std::string> completion_order_;
    std::vector<std::string> ledger_txs_;
};

bool Engine::deps_satisfied(const StageDef& stage, std::string* blocker, StageStatus* blocker_status) {
    std::lock_guard lock(results_mutex_);
    for (const auto& dep : stage.depends_on) {
        auto it = results_.find(dep);
        if (it == results_.end() || it->second.status != StageStatus::Success) {
            *blocker = dep;
            *blocker_status = it == results_.end() ? StageStatus::Skipped : it->second.status;
            return false;
        }
    }
    return true;
}

StageResult Engine::execute(const StageDef& stage) {
    StageResult result;
    result.name = stage.name;
    result.kind = stage.kind;
    result.started_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();

    std::string blocker;
    StageStatus blocker_status = StageStatus::Skipped;
    if (!deps_satisfied(stage, &blocker, &blocker_status)) {
        result.status = StageStatus::Skipped;
        result.error = "upstream stage '" + blocker + "' finished " + stage_status_name(blocker_status);
        result.error_code = "UpstreamNotSuccessful";
        result.ended_ns =
            std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();
        return result;
    }

    // Scratch area per stage; ledger and dist/ are the shared surfaces.
    fs::create_directories(workspace_ / ".stages" / stage.name);

    try {
        switch (stage.kind) {
        case StageKind::Build: {
            BuildOutput out = stage_build(stage.params, workspace_);
            result.outputs["source_digest"] = out.source_digest;
            result.outputs["artifact_bytes"] = std::to_string(out.artifact.size());
            std::lock_guard lock(ctx_.mutex);
            ctx_.builds[stage.name] = std::move(out);
            break;
        }
        case StageKind::Package: {
            const BuildOutput* build;
            {
                std::lock_guard lock(ctx_.mutex);
                build = find_upstream(def_, stage.name, ctx_.builds);
            }
            if (build == nullptr) {
                throw Error("MissingInput", "no Build stage upstream of '" + stage.name + "'");
            }
            PackagedImage image = stage_package(build->artifact, build->source_digest, config_,
                                                workspace_);
            result.outputs["digest"] = image.digest;
            result.outputs["container_name"] = image.container_name;
            result.outputs["archive"] = fs::relative(image.archive_path, workspace_).generic_string();
            std::lock_guard lock(ctx_.mutex);
            ctx_.images[stage.name] = std::move(image);
            break;
        }
        case StageKind::DepCheck: {
            const std::string manifest =
                stage.params.count("manifest") ? stage.params.at("manifest") : "deps.json";
            const std::string feed = stage.params.count("feed") ? stage.params.at("feed") : "feed.json";
            DepCheckOutcome out =
                stage_depcheck(workspace_ / manifest, workspace_ / feed, config_, workspace_);
            result.outputs["verdict"] =
                out.report.verdict == vulnscan::Verdict::Halt ? "Halt" : "Pass";
            result.outputs["max_score"] = std::to_string(out.report.max_score);
            result.outputs["report_hash"] = out.report.report_hash;
            result.outputs["report"] = fs::relative(out.report_path, workspace_).generic_string();
            if (out.report.verdict == vulnscan::Verdict::Halt) {
                result.status = StageStatus::Halted;
                result.error = "dependency gate halted the pipeline";
                result.error_code = "GateHalt";
            }
            std::lock_guard lock(ctx_.mutex);
            ctx_.reports[stage.name] = std::move(out.report);
            break;
        }
        case StageKind::LedgerBootstrap: {
            stage_ledger_bootstrap(config_, workspace_);
            result.outputs["channel"] = config_.topology.channel;
            break;
        }
        case StageKind::Deploy: {
            const PackagedImage* image;
            const vulnscan::ScanReport* report;
            {
                std::lock_guard lock(ctx_.mutex);
                image = find_upstream(def_, stage.name, ctx_.images);
                report = find_upstream(def_, stage.name, ctx_.reports);
            }
            if (image == nullptr) {
                throw Error("MissingInput", "no Package stage upstream of '" + stage.name + "'");
            }
            if (report == nullptr) {
                throw Error("MissingInput", "no DepCheck stage upstream of '" + stage.name + "'");
            }
            PipelineConfig cfg = config_;
            if (stage.params.count("environment")) cfg.environment = stage.params.at("environment");
            DeployOutcome out = stage_deploy(*image, *report, cfg, workspace_);
            result.outputs["environment"] = out.environment;
            result.outputs["container_name"] = out.container_name;
            result.outputs["digest"] = out.digest;
            result.outputs["tx_register"] = out.tx_ids[0];
            result.outputs["tx_attest"] = out.tx_ids[1];
            result.outputs["tx_deploy"] = out.tx_ids[2];
            std::lock_guard lock(results_mutex_);
            for (const auto& id : out.tx_ids) ledger_txs_.push_back(id);
            break;
        }
        case StageKind::Custom: {
            if (stage.params.count("sleep_ms")) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(std::stoll(stage.params.at("sleep_ms"))));
            }
            if (stage.params.count("fail")) {
                throw Error("CustomStageFailed", stage.params.at("fail"));
            }
            for (const auto& [key, value] : stage.params) result.outputs[key] = value;
            break;
        }
        }
    } catch (const Error& e) {
        result.status = StageStatus::Failed;
        result.error = e.what();
        result.error_code = e.code();
    } catch (const std::exception& e) {
        result.status = StageStatus::Failed;
        result.error = e.what();
        result.error_code = "InternalError";
    }

    result.ended_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();
    return result;
}

void Engine::run_serial() {
    for (const auto& name : def_.topo_order) {
        StageResult r = execute(def_.stage(name));
        std::lock_guard lock(results_mutex_);
        completion_order_.push_back(name);
        results_[name] = std::move(r);
    }
}

void Engine::run_parallel() {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < def_.stages.size(); ++i) index[def_.stages[i].name] = i;

    std::vector<int> waiting(def_.stages.size(), 0);
    std::vector<std::vector<std::size_t>> dependents(def_.stages.size());
    for (std::size_t i = 0; i < def_.stages.size(); ++i) {
        waiting[i] = static_cast<int>(def_.stages[i].depends_on.size());
        for (const auto& dep : def_.stages[i].depends_on) {
            dependents[index.at(dep)].push_back(i);
        }
    }

    std::mutex m;
    std::condition_variable cv;
    std::deque<std::size_t> ready;
    std::size_t completed = 0;
    for (const auto& name : def_.topo_order) {
        std::size_t i = index.at(name);
        if (waiting[i] == 0) ready.push_back(i);
    }

    auto worker = [&] {
        std::unique_lock lock(m);
        while (completed < def_.stages.size()) {
            if (ready.empty()) {
                cv.wait(lock);
                continue;
            }
            const std::size_t i = ready.front();
            ready.pop_front();
            lock.unlock();
            StageResult r = execute(def_.stages[i]);
            {
                std::lock_guard res_lock(results_mutex_);
                completion_order_.push_back(def_.stages[i].name);
                results_[def_.stages[i].name] = std::move(r);
            }
            lock.lock();
            ++completed;
            for (std::size_t d : dependents[i]) {
                if (--waiting[d] == 0) ready.push_back(d);
            }
            cv.notify_all();
        }
        cv.notify_all();
    };

    unsigned n = std::max(2u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                 static_cast<unsigned>(def_.stages.size())));
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

PipelineRun Engine::run() {
    start_ = Clock::now();
    if (config_.parallel) {
        run_parallel();
    } else {
        run_serial();
    }

    PipelineRun run;
    run.config_snapshot = config_.snapshot();
    run.total_wall_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();
    bool any_failed = false, any_halted = false;
    for (const auto& name : completion_order_) {
        const StageResult& r = results_.at(name);
        if (r.status == StageStatus::Failed) any_failed = true;
        if (r.kind == StageKind::DepCheck && r.status == StageStatus::Halted) any_halted = true;
        run.results.push_back(r);
    }
    run.overall = any_halted ? RunOutcome::HaltedAtGate
                             : (any_failed ? RunOutcome::Failed : RunOutcome::Success);
    run.ledger_txs = ledger_txs_;

    const auto wall = std::chrono::system_clock::now().time_since_epoch();
    json id_src{{"config", run.config_snapshot},
                {"started_unix_ns",
                 std::chrono::duration_cast<std::chrono::nanoseconds>(wall).count()}};
    run.run_id = crypto::sha256_hex(canonical_encode(id_src)).substr(0, 16);
    return run;
}

} // namespace

PipelineRun run_pipeline(const PipelineDef& def, const PipelineConfig& config,
                         const fs::path& workspace) {
    if (!fs::exists(workspace)) {
        throw Error("ConfigError", "workspace " + workspace.string() + " does not exist");
    }
    Engine engine(def, config, workspace);
    PipelineRun run = engine.run();
    write_run_reports(run, workspace);
    return run;
}

json timing_report_json(const PipelineRun& run) {
    json stages = json::array();
    int64_t serial_sum = 0;
    int64_t depcheck_ns = 0;
    for (const auto& r : run.results) {
        serial_sum += r.duration_ns();
        if (r.kind == StageKind::DepCheck) depcheck_ns += r.duration_ns();
        stages.push_back(json{{"duration_ms", r.duration_ms()},
                              {"duration_ns", r.duration_ns()},
                              {"ended_ns", r.ended_ns},
                              {"name", r.name},
                              {"started_ns", r.started_ns},
                              {"status", stage_status_name(r.status)}});
    }
    const int64_t share_permille =
        run.total_wall_ns > 0 ? depcheck_ns * 1000 / run.total_wall_ns : 0;
    return json{{"depcheck_ns", depcheck_ns},
                {"depcheck_share_permille", share_permille},
                {"serial_sum_ns", serial_sum},
                {"stages", stages},
                {"total_wall_ns", run.total_wall_ns}};
}

void emit_timing_report(const PipelineRun& run, const fs::path& path) {
    write_file(path, canonical_encode(timing_report_json(run)));
}

void write_run_reports(const PipelineRun& run, const fs::path& workspace) {
    const std::string report = canonical_encode(run.to_json());
    write_file(workspace / "run-report.json", report);
    emit_timing_report(run, workspace / "timing-report.json");
    const fs::path run_dir = workspace / "runs" / run.run_id;
    write_file(run_dir / "run-report.json", report);
    emit_timing_report(run, run_dir / "timing-report.json");
}

} // namespace chainci::pipeline
