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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chainci/pipeline.hpp"

#include "chainci/cli.hpp"
#include "support.hpp"

using namespace chainci;
using namespace chainci::pipeline;

namespace {

PipelineConfig test_config(const std::filesystem::path& workspace) {
    PipelineConfig cfg = PipelineConfig::from_env(workspace, {});
    cfg.seed = Bytes(crypto::kSeedSize, 0x3d);
    cfg.allowlist = {"https://registry.example/"};
    return cfg;
}

/// Clean demo workspace: app sources, manifests, feed, default definition.
void lay_out_workspace(const std::filesystem::path& ws, bool vulnerable = false) {
    cli::write_app_fixture(ws / "app");
    test::write_text(ws / "deps.json",
                     canonical_encode(vulnerable ? cli::fixture_vulnerable_manifest()
                                                 : cli::fixture_clean_manifest()));
    test::write_text(ws / "feed.json", canonical_encode(cli::fixture_feed()));
    test::write_text(ws / "allowlist.json", canonical_encode(cli::fixture_allowlist()));
    test::write_text(ws / "pipeline.json", canonical_encode(default_pipeline_json()));
}

} // namespace

TEST_CASE("pipeline definition loading") {
    test::TempDir dir("def");
    EnvMap env = effective_env({{"IMAGE_TAG", "1.2"}});

    SUBCASE("linear chain loads in topological order") {
        test::write_text(dir.path() / "p.json", R"({"stages":[
            {"name":"c","kind":"Custom","depends_on":["b"]},
            {"name":"a","kind":"Custom"},
            {"name":"b","kind":"Custom","depends_on":["a"]}]})");
        PipelineDef def = load_pipeline_def(dir.path() / "p.json", env);
        REQUIRE(def.topo_order.size() == 3);
        auto pos = [&](const std::string& n) {
            return std::find(def.topo_order.begin(), def.topo_order.end(), n) -
                   def.topo_order.begin();
        };
        CHECK(pos("a") < pos("b"));
        CHECK(pos("b") < pos("c"));
    }
    SUBCASE("self-dependency is a cycle") {
        test::write_text(dir.path() / "p.json",
                         R"({"stages":[{"name":"b","kind":"Custom","depends_on":["b"]}]})");
        try {
            load_pipeline_def(dir.path() / "p.json", env);
            FAIL("expected CycleDetected");
        } catch (const Error& e) {
            CHECK(e.code() == "CycleDetected");
            CHECK(std::string(e.what()).find("b") != std::string::npos);
        }
    }
    SUBCASE("longer cycles name the path") {
        test::write_text(dir.path() / "p.json", R"({"stages":[
            {"name":"a","kind":"Custom","depends_on":["c"]},
            {"name":"b","kind":"Custom","depends_on":["a"]},
            {"name":"c","kind":"Custom","depends_on":["b"]}]})");
        CHECK_THROWS_AS(load_pipeline_def(dir.path() / "p.json", env), Error);
    }
    SUBCASE("unknown dependency") {
        test::write_text(dir.path() / "p.json",
                         R"({"stages":[{"name":"a","kind":"Custom","depends_on":["ghost"]}]})");
        try {
            load_pipeline_def(dir.path() / "p.json", env);
            FAIL("expected UnknownDependency");
        } catch (const Error& e) {
            CHECK(e.code() == "UnknownDependency");
        }
    }
    SUBCASE("env placeholders expand") {
        test::write_text(dir.path() / "p.json", R"({"stages":[
            {"name":"a","kind":"Custom","params":{"tag":"${IMAGE_TAG}"}}]})");
        PipelineDef def = load_pipeline_def(dir.path() / "p.json", env);
        CHECK(def.stage("a").params.at("tag") == "1.2");
    }
    SUBCASE("unbound variable") {
        test::write_text(dir.path() / "p.json", R"({"stages":[
            {"name":"a","kind":"Custom","params":{"x":"${NO_SUCH_VAR}"}}]})");
        try {
            load_pipeline_def(dir.path() / "p.json", env);
            FAIL("expected UnboundVariable");
        } catch (const Error& e) {
            CHECK(e.code() == "UnboundVariable");
        }
    }
    SUBCASE("duplicate stage names are rejected") {
        test::write_text(dir.path() / "p.json", R"({"stages":[
            {"name":"a","kind":"Custom"},{"name":"a","kind":"Custom"}]})");
        CHECK_THROWS_AS(load_pipeline_def(dir.path() / "p.json", env), Error);
    }
    SUBCASE("parse error on invalid json") {
        test::write_text(dir.path() / "p.json", "{nope");
        try {
            load_pipeline_def(dir.path() / "p.json", env);
            FAIL("expected ParseError");
        } catch (const Error& e) {
            CHECK(e.code() == "ParseError");
        }
    }
}

TEST_CASE("environment precedence: explicit beats process beats defaults") {
    ::setenv("IMAGE_TAG", "from-process", 1);
    EnvMap env = effective_env({{"IMAGE_NAME", "explicit-app"}});
    CHECK(env.at("IMAGE_NAME") == "explicit-app"); // explicit wins
    CHECK(env.at("IMAGE_TAG") == "from-process");  // process beats default
    CHECK(env.at("BUILD_NUMBER") == "1");          // built-in default
    ::unsetenv("IMAGE_TAG");
}

TEST_CASE("hermetic build digests") {
    test::TempDir dir("build");
    cli::write_app_fixture(dir.path() / "app");
    std::map<std::string, std::string> params{{"src", "app"}};

    SUBCASE("digest is stable across runs") {
        auto a = stage_build(params, dir.path());
        auto b = stage_build(params, dir.path());
        CHECK(a.source_digest == b.source_digest);
        CHECK(a.artifact == b.artifact);
    }
    SUBCASE("renaming a file with identical contents changes the digest") {
        auto before = stage_build(params, dir.path());
        std::filesystem::rename(dir.path() / "app" / "main.c", dir.path() / "app" / "main2.c");
        auto after = stage_build(params, dir.path());
        CHECK(before.source_digest != after.source_digest);
    }
    SUBCASE("content change changes the digest") {
        auto before = stage_build(params, dir.path());
        test::write_text(dir.path() / "app" / "main.c", "int main(void){return 1;}\n");
        auto after = stage_build(params, dir.path());
        CHECK(before.source_digest != after.source_digest);
    }
    SUBCASE("empty source directory is MissingSource") {
        std::filesystem::create_directories(dir.path() / "empty");
        try {
            stage_build({{"src", "empty"}}, dir.path());
            FAIL("expected MissingSource");
        } catch (const Error& e) {
            CHECK(e.code() == "MissingSource");
        }
    }
    SUBCASE("missing source directory is MissingSource") {
        CHECK_THROWS_AS(stage_build({{"src", "nope"}}, dir.path()), Error);
    }
}

TEST_CASE("packaging is reproducible and renders the container name") {
    test::TempDir dir("pkg");
    cli::write_app_fixture(dir.path() / "app");
    auto build = stage_build({{"src", "app"}}, dir.path());
    PipelineConfig cfg = test_config(dir.path());
    cfg.container_name = "app-${BUILD_NUMBER}";
    cfg.build_number = 7;

    SUBCASE("identical inputs, identical digest") {
        auto a = stage_package(build.artifact, build.source_digest, cfg, dir.path());
        auto b = stage_package(build.artifact, build.source_digest, cfg, dir.path());
        CHECK(a.digest == b.digest);
        CHECK(a.container_name == "app-7");
        CHECK(std::filesystem::exists(a.archive_path));
        CHECK(crypto::sha256_hex(test::read_text(a.archive_path)) == a.digest);
    }
    SUBCASE("missing image name") {
        cfg.image_name.clear();
        try {
            stage_package(build.artifact, build.source_digest, cfg, dir.path());
            FAIL("expected MissingImageName");
        } catch (const Error& e) {
            CHECK(e.code() == "MissingImageName");
        }
    }
}

TEST_CASE("dependency gate stage") {
    test::TempDir dir("gate");
    PipelineConfig cfg = test_config(dir.path());

    SUBCASE("clean manifest passes with zero score") {
        lay_out_workspace(dir.path());
        auto out = stage_depcheck(dir.path() / "deps.json", dir.path() / "feed.json", cfg,
                                  dir.path());
        CHECK(out.report.verdict == vulnscan::Verdict::Pass);
        CHECK(out.report.max_score == 0);
        CHECK(std::filesystem::exists(dir.path() / "scan-report.json"));
    }
    SUBCASE("vulnerable manifest halts and still writes the report") {
        lay_out_workspace(dir.path(), /*vulnerable=*/true);
        auto out = stage_depcheck(dir.path() / "deps.json", dir.path() / "feed.json", cfg,
                                  dir.path());
        CHECK(out.report.verdict == vulnscan::Verdict::Halt);
        CHECK(out.report.max_score == 100);
        CHECK(std::filesystem::exists(dir.path() / "scan-report.json"));
        json stored = canonical_decode(test::read_text(dir.path() / "scan-report.json"));
        CHECK(stored.at("verdict") == "Halt");
    }
    SUBCASE("malformed feed fails with FeedInvalid") {
        lay_out_workspace(dir.path());
        test::write_text(dir.path() / "feed.json", "[{\"id\":\"CVE-1\"}]");
        CHECK_THROWS_AS(
            stage_depcheck(dir.path() / "deps.json", dir.path() / "feed.json", cfg, dir.path()),
            Error);
    }
}

TEST_CASE("ledger bootstrap is idempotent and detects corruption") {
    test::TempDir dir("boot");
    PipelineConfig cfg = test_config(dir.path());

    stage_ledger_bootstrap(cfg, dir.path());
    auto files_after_first = read_block_files(dir.path(), "main");
    CHECK(files_after_first.size() >= 2); // genesis + lifecycle inits

    stage_ledger_bootstrap(cfg, dir.path());
    auto files_after_second = read_block_files(dir.path(), "main");
    CHECK(files_after_second.size() == files_after_first.size());
    CHECK(files_after_second == files_after_first);

    SUBCASE("tampered block file raises CorruptWorkspace") {
        auto file = dir.path() / "ledger" / "main" / "blocks" / "1.json";
        std::string bytes = test::read_text(file);
        bytes[bytes.size() / 3] ^= 0x10;
        test::write_text(file, bytes);
        try {
            stage_ledger_bootstrap(cfg, dir.path());
            FAIL("expected CorruptWorkspace");
        } catch (const Error& e) {
            CHECK(e.code() == "CorruptWorkspace");
        }
    }
}

TEST_CASE("deploy stage recomputes the archive digest and records three transactions") {
    test::TempDir dir("deploy");
    lay_out_workspace(dir.path());
    PipelineConfig cfg = test_config(dir.path());
    stage_ledger_bootstrap(cfg, dir.path());
    auto build = stage_build({{"src", "app"}}, dir.path());
    auto image = stage_package(build.artifact, build.source_digest, cfg, dir.path());
    auto gate = stage_depcheck(dir.path() / "deps.json", dir.path() / "feed.json", cfg, dir.path());
    REQUIRE(gate.report.verdict == vulnscan::Verdict::Pass);

    SUBCASE("happy path commits register, attest, deploy") {
        auto out = stage_deploy(image, gate.report, cfg, dir.path());
        CHECK(out.tx_ids.size() == 3);

        Fabric fabric(dir.path(), cfg.topology, cfg.seed);
        CHECK(fabric.ledger("main").get_state("artifact/" + image.digest).has_value());
        CHECK(fabric.ledger("main")
                  .get_state("deploy/" + cfg.environment + "/" + image.container_name)
                  .has_value());
        // Full attestation appears in the private collection, hash on chain.
        auto report_copy = fabric.read_private("main", kScanReportCollection,
                                               "report/" + image.digest + "/0", "Org1");
        REQUIRE(report_copy.has_value());
        CHECK(crypto::sha256_hex(*report_copy) == gate.report.report_hash);
    }
    SUBCASE("archive modified after packaging is DigestMismatch, nothing deployed") {
        std::string bytes = test::read_text(image.archive_path);
        bytes[bytes.size() / 2] ^= 0x01;
        test::write_text(image.archive_path, bytes);
        try {
            stage_deploy(image, gate.report, cfg, dir.path());
            FAIL("expected DigestMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == "DigestMismatch");
        }
        Fabric fabric(dir.path(), cfg.topology, cfg.seed);
        CHECK(fabric.chain_write_keys_with_prefix("main", "deploy/").empty());
    }
    SUBCASE("a Halt report reaching deploy is stopped by the contract") {
        test::write_text(dir.path() / "deps.json",
                         canonical_encode(cli::fixture_vulnerable_manifest()));
        auto halted =
            stage_depcheck(dir.path() / "deps.json", dir.path() / "feed.json", cfg, dir.path());
        REQUIRE(halted.report.verdict == vulnscan::Verdict::Halt);
        try {
            stage_deploy(image, halted.report, cfg, dir.path());
            FAIL("expected NoPassingAttestation");
        } catch (const Error& e) {
            CHECK(e.code() == "NoPassingAttestation");
        }
        Fabric fabric(dir.path(), cfg.topology, cfg.seed);
        CHECK(fabric.chain_write_keys_with_prefix("main", "deploy/").empty());
    }
}

TEST_CASE("full pipeline run on the clean fixture") {
    test::TempDir dir("runclean");
    lay_out_workspace(dir.path());
    PipelineConfig cfg = test_config(dir.path());
    PipelineDef def = load_pipeline_def(dir.path() / "pipeline.json", effective_env({}));

    PipelineRun run = run_pipeline(def, cfg, dir.path());
    CHECK(run.overall == RunOutcome::Success);
    CHECK(run.ledger_txs.size() == 3);
    for (const auto& r : run.results) {
        CHECK(r.status == StageStatus::Success);
    }
    CHECK(std::filesystem::exists(dir.path() / "run-report.json"));
    CHECK(std::filesystem::exists(dir.path() / "timing-report.json"));
    CHECK(std::filesystem::exists(dir.path() / "runs" / run.run_id / "run-report.json"));

    // Reports are canonical.
    CHECK(is_canonical(test::read_text(dir.path() / "run-report.json")));
    CHECK(is_canonical(test::read_text(dir.path() / "timing-report.json")));
}

TEST_CASE("vulnerable fixture halts at the gate and never deploys") {
    test::TempDir dir("runvuln");
    lay_out_workspace(dir.path(), /*vulnerable=*/true);
    PipelineConfig cfg = test_config(dir.path());
    PipelineDef def = load_pipeline_def(dir.path() / "pipeline.json", effective_env({}));

    PipelineRun run = run_pipeline(def, cfg, dir.path());
    CHECK(run.overall == RunOutcome::HaltedAtGate);
    CHECK(run.ledger_txs.empty());

    const StageResult* gate = run.result("dependency-check");
    REQUIRE(gate != nullptr);
    CHECK(gate->status == StageStatus::Halted);

    // Everything downstream of the gate is skipped.
    const StageResult* boot = run.result("ledger-bootstrap");
    REQUIRE(boot != nullptr);
    CHECK(boot->status == StageStatus::Skipped);
    const StageResult* deploy = run.result("deploy");
    REQUIRE(deploy != nullptr);
    CHECK(deploy->status == StageStatus::Skipped);

    // No deployment key anywhere on the ledger (bootstrap was skipped, so
    // there may be no chain at all; both count as "no deploy key").
    if (!read_block_files(dir.path(), "main").empty()) {
        Fabric fabric(dir.path(), cfg.topology, cfg.seed);
        CHECK(fabric.chain_write_keys_with_prefix("main", "deploy/").empty());
    }
}

TEST_CASE("failed stage marks transitive dependents skipped") {
    test::TempDir dir("skip");
    test::write_text(dir.path() / "p.json", R"({"stages":[
        {"name":"boom","kind":"Custom","params":{"fail":"exploded"}},
        {"name":"mid","kind":"Custom","depends_on":["boom"]},
        {"name":"leaf","kind":"Custom","depends_on":["mid"]}]})");
    PipelineConfig cfg = test_config(dir.path());
    PipelineDef def = load_pipeline_def(dir.path() / "p.json", effective_env({}));
    PipelineRun run = run_pipeline(def, cfg, dir.path());

    CHECK(run.overall == RunOutcome::Failed);
    CHECK(run.result("boom")->status == StageStatus::Failed);
    CHECK(run.result("mid")->status == StageStatus::Skipped);
    CHECK(run.result("leaf")->status == StageStatus::Skipped);
}

TEST_CASE("parallel and serial runs produce identical outcomes") {
    auto run_with = [](bool parallel) {
        test::TempDir dir("par");
        lay_out_workspace(dir.path());
        PipelineConfig cfg = test_config(dir.path());
        cfg.parallel = parallel;
        PipelineDef def = load_pipeline_def(dir.path() / "pipeline.json", effective_env({}));
        PipelineRun run = run_pipeline(def, cfg, dir.path());
        std::map<std::string, std::string> statuses;
        std::string digest;
        for (const auto& r : run.results) {
            statuses[r.name] = stage_status_name(r.status);
            if (r.kind == StageKind::Package) digest = r.outputs.at("digest");
        }
        Fabric fabric(dir.path(), cfg.topology, cfg.seed);
        return std::tuple{run.overall, statuses, digest,
                          fabric.ledger("main").state().digest()};
    };
    auto serial = run_with(false);
    auto parallel = run_with(true);
    CHECK(std::get<0>(serial) == std::get<0>(parallel));
    CHECK(std::get<1>(serial) == std::get<1>(parallel));
    CHECK(std::get<2>(serial) == std::get<2>(parallel));
    CHECK(std::get<3>(serial) == std::get<3>(parallel));
}

TEST_CASE("parallel custom stages overlap in time") {
    test::TempDir dir("overlap");
    test::write_text(dir.path() / "p.json", R"({"stages":[
        {"name":"left","kind":"Custom","params":{"sleep_ms":"80"}},
        {"name":"right","kind":"Custom","params":{"sleep_ms":"80"}}]})");
    PipelineConfig cfg = test_config(dir.path());
    cfg.parallel = true;
    PipelineDef def = load_pipeline_def(dir.path() / "p.json", effective_env({}));
    PipelineRun run = run_pipeline(def, cfg, dir.path());

    json timing = timing_report_json(run);
    CHECK(timing.at("total_wall_ns").get<int64_t>() <= timing.at("serial_sum_ns").get<int64_t>());
}

TEST_CASE("timing report covers every stage once") {
    test::TempDir dir("timing");
    lay_out_workspace(dir.path());
    PipelineConfig cfg = test_config(dir.path());
    PipelineDef def = load_pipeline_def(dir.path() / "pipeline.json", effective_env({}));
    PipelineRun run = run_pipeline(def, cfg, dir.path());

    json timing = timing_report_json(run);
    std::set<std::string> names;
    for (const auto& s : timing.at("stages")) {
        CHECK(names.insert(s.at("name").get<std::string>()).second);
        CHECK(s.at("duration_ns").get<int64_t>() >= 0);
    }
    CHECK(names.size() == def.stages.size());

    int64_t depcheck_ns = timing.at("depcheck_ns").get<int64_t>();
    CHECK(depcheck_ns > 0);
    CHECK(timing.at("total_wall_ns").get<int64_t>() > 0);
    // Serial run: wall time at least the largest stage duration.
    int64_t max_stage = 0;
    for (const auto& s : timing.at("stages")) {
        max_stage = std::max(max_stage, s.at("duration_ns").get<int64_t>());
    }
    CHECK(timing.at("total_wall_ns").get<int64_t>() >= max_stage);
}

TEST_CASE("bootstrap stays a no-op over many reruns") {
    test::TempDir dir("rerun");
    PipelineConfig cfg = test_config(dir.path());
    stage_ledger_bootstrap(cfg, dir.path());
    auto baseline = read_block_files(dir.path(), "main");
    for (int i = 0; i < 3; ++i) {
        stage_ledger_bootstrap(cfg, dir.path());
        CHECK(read_block_files(dir.path(), "main") == baseline);
    }
}

TEST_CASE("digest chain is consistent end to end on a successful run") {
    test::TempDir dir("chain");
    lay_out_workspace(dir.path());
    PipelineConfig cfg = test_config(dir.path());
    PipelineDef def = load_pipeline_def(dir.path() / "pipeline.json", effective_env({}));
    PipelineRun run = run_pipeline(def, cfg, dir.path());
    REQUIRE(run.overall == RunOutcome::Success);

    const std::string source_digest = run.result("build")->outputs.at("source_digest");
    const std::string packaged = run.result("containerise")->outputs.at("digest");
    const std::string archive_rel = run.result("containerise")->outputs.at("archive");

    // source tree -> archive manifest
    CHECK(source_digest == tree_digest(dir.path() / "app"));
    const std::string archive_bytes = test::read_text(dir.path() / archive_rel);
    json archive = canonical_decode(archive_bytes);
    CHECK(archive.at("manifest").at("source_digest") == source_digest);
    // archive bytes -> packaged digest
    CHECK(crypto::sha256_hex(archive_bytes) == packaged);

    // packaged digest -> registered record -> deployment record
    Fabric fabric(dir.path(), cfg.topology, cfg.seed);
    auto artifact = fabric.ledger("main").get_state("artifact/" + packaged);
    REQUIRE(artifact.has_value());
    json record = canonical_decode(to_string(artifact->value));
    CHECK(record.at("digest") == packaged);
    CHECK(record.at("source_digest") == source_digest);

    const std::string container = run.result("deploy")->outputs.at("container_name");
    auto deployed = fabric.ledger("main").get_state("deploy/" + cfg.environment + "/" + container);
    REQUIRE(deployed.has_value());
    CHECK(canonical_decode(to_string(deployed->value)).at("artifact_digest") == packaged);
}
