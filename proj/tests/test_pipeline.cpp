#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "carrierforge/forge.hpp"
#include "carrierforge/pipeline.hpp"
#include "test_support.hpp"

using namespace carrierforge;
using testsup::TempDir;
using testsup::read_file;
using testsup::write_file;

namespace {

struct Staged {
    testsup::TempDir tmp;
    std::filesystem::path image;
    std::optional<std::filesystem::path> cue;
    ForgeArtifact art;
};

std::unique_ptr<Staged> stage(const std::string& fixture) {
    auto s = std::make_unique<Staged>();
    s->art = forge(testsup::load_fixture(fixture));
    auto saved = save_artifact(s->art, s->tmp.path() / "carrier");
    s->image = saved.image_path;
    s->cue = saved.cue_path;
    return s;
}

StabilizedOutput run(Staged& s, const std::string& carrier_id, const std::filesystem::path& out_root) {
    const CueSheet* cue_sheet = s.art.truth.cue_sheet ? &*s.art.truth.cue_sheet : nullptr;
    const CarrierClass cls = classify(s.art.image, cue_sheet);
    return run_plan("EAP256", carrier_id, s.image, s.cue, plan_for(cls), out_root);
}

}  // namespace

TEST_CASE("layout_path naming convention") {
    CHECK(layout_path("EAP256", "C0001", PathRelation::DerivedFromImages) ==
          std::filesystem::path("EAP256/derived/C0001"));
    CHECK(layout_path("EAP256", "HD01", PathRelation::SiblingSubmission) ==
          std::filesystem::path("EAP256/native/HD01"));
    CHECK(layout_path("EAP256", "C0001", PathRelation::MasterImage) ==
          std::filesystem::path("EAP256/masters/C0001"));
    CHECK_THROWS_AS(layout_path("EAP256", "a/b", PathRelation::DerivedFromImages), Error);
    CHECK_THROWS_AS(layout_path("EAP256", "..", PathRelation::DerivedFromImages), Error);
    CHECK_THROWS_AS(layout_path("", "C1", PathRelation::DerivedFromImages), Error);
    CHECK_THROWS_AS(layout_path("E\\AP", "C1", PathRelation::DerivedFromImages), Error);
}

TEST_CASE("run_plan: data disk extracts the tree and keeps the master") {
    auto s = stage("iso_basic");
    auto out_root = s->tmp.path() / "out";
    auto result = run(*s, "C0001", out_root);

    REQUIRE(result.master_image_paths.size() == 1);
    CHECK(read_file(result.master_image_paths[0]) == s->art.image);
    const auto extracted = out_root / "EAP256/derived/C0001/extracted";
    for (const auto& f : s->art.truth.tree) CHECK(read_file(extracted / f.path) == f.bytes);
    // source image untouched
    CHECK(read_file(s->image) == s->art.image);
}

TEST_CASE("run_plan: mixed mode fixture yields one tree plus two wavs") {
    auto s = stage("mixed_mode");
    auto out_root = s->tmp.path() / "out";
    auto result = run(*s, "MIX1", out_root);

    const auto derived = out_root / "EAP256/derived/MIX1";
    // data track
    for (const auto& f : s->art.truth.tree)
        CHECK(read_file(derived / "track01" / f.path) == f.bytes);
    // audio tracks wrapped: wav payload equals the forged raw payload
    for (std::size_t t = 1; t < s->art.truth.tracks.size(); ++t) {
        auto wav = read_file(derived / ("track" + std::string(t < 9 ? "0" : "") +
                                        std::to_string(t + 1) + ".wav"));
        const auto& payload = s->art.truth.tracks[t].payload;
        REQUIRE(wav.size() == payload.size() + 44);
        CHECK(std::equal(payload.begin(), payload.end(), wav.begin() + 44));
        CHECK(detect_riff(wav));
    }
    // master kept (bin + cue)
    REQUIRE(result.master_image_paths.size() == 2);
}

TEST_CASE("run_plan: malformed audio tracks are copied verbatim, no double header") {
    auto s = stage("malformed_wav");
    auto out_root = s->tmp.path() / "out";
    run(*s, "MAL1", out_root);
    const auto derived = out_root / "EAP256/derived/MAL1";
    for (std::size_t t = 0; t < s->art.truth.tracks.size(); ++t) {
        auto wav = read_file(derived / ("track0" + std::to_string(t + 1) + ".wav"));
        CHECK(wav == s->art.truth.tracks[t].payload);  // byte-for-byte, not re-wrapped
    }
}

TEST_CASE("run_plan: red book audio wraps every track") {
    auto s = stage("redbook_2track");
    auto out_root = s->tmp.path() / "out";
    run(*s, "AUD1", out_root);
    const auto derived = out_root / "EAP256/derived/AUD1";
    for (std::size_t t = 0; t < s->art.truth.tracks.size(); ++t) {
        auto wav = read_file(derived / ("track0" + std::to_string(t + 1) + ".wav"));
        CHECK(wav == wrap_wav(s->art.truth.tracks[t].payload));
    }
}

TEST_CASE("run_plan: manual-flag variants write a marker and nothing else") {
    for (const char* fixture : {"hfsplus", "mds_opaque", "unknown"}) {
        auto s = stage(fixture);
        auto out_root = s->tmp.path() / "out";
        auto result = run(*s, "MAN1", out_root);
        REQUIRE(result.derived_paths.size() == 1);
        auto marker = read_file(out_root / "EAP256/derived/MAN1" / kManualMarkerName);
        std::string text(marker.begin(), marker.end());
        CHECK(text.rfind("MANUAL:", 0) == 0);
        CHECK(result.master_image_paths.size() == 1);
    }
}

TEST_CASE("run_plan: step failure quarantines the carrier under failed/") {
    auto s = stage("iso_basic");
    // truncate the staged image mid-extent so extraction fails after the
    // master copy step succeeded
    auto bytes = read_file(s->image);
    auto entries = iso_list(bytes);
    std::uint64_t cut = 0;
    for (const auto& e : entries)
        if (e.path == "A.TIF") cut = static_cast<std::uint64_t>(e.extent_lba) * 2048 + 10;
    bytes.resize(cut);
    write_file(s->image, bytes);

    auto out_root = s->tmp.path() / "out";
    const auto plan = plan_for(CarrierClass::IsoDataDisk);
    CHECK_THROWS_AS(run_plan("EAP256", "BAD1", s->image, std::nullopt, plan, out_root),
                    PipelineError);
    CHECK(std::filesystem::exists(out_root / "EAP256/failed/BAD1/masters"));
    CHECK_FALSE(std::filesystem::exists(out_root / "EAP256/masters/BAD1"));
}

TEST_CASE("run_plan: slashed ledger identifiers map to safe directories") {
    auto s = stage("iso_basic");
    auto out_root = s->tmp.path() / "out";
    auto result = run(*s, "EAP256/1/1", out_root);
    CHECK(std::filesystem::exists(out_root / "EAP256/masters/EAP256_1_1"));
    CHECK(result.notes.find("filesystem-safe") != std::string::npos);
}

namespace {

std::filesystem::path make_batch(const TempDir& tmp, const std::string& name,
                                 const std::vector<std::pair<std::string, std::string>>& files) {
    auto root = tmp.path() / name;
    std::filesystem::create_directories(root);
    for (const auto& [rel, content] : files) write_file(root / rel, content);
    manifest_write(manifest_create(root), root / kManifestFileName);
    return root;
}

}  // namespace

TEST_CASE("merge_batches: disjoint batches union cleanly") {
    TempDir tmp;
    auto b1 = make_batch(tmp, "b1", {{"p/m/a.iso", "aaa"}, {"p/d/a/x.tif", "xxx"}});
    auto b2 = make_batch(tmp, "b2", {{"p/m/b.iso", "bbb"}});
    auto report = merge_batches({b1, b2}, tmp.path() / "proj");
    CHECK(report.files_copied == 3);
    CHECK(report.identical_collisions.empty());
    auto verification = manifest_verify(manifest_read(report.consolidated_manifest), tmp.path() / "proj");
    CHECK(verification.clean());
    CHECK(read_file(tmp.path() / "proj/p/m/a.iso") == std::vector<std::uint8_t>{'a', 'a', 'a'});
}

TEST_CASE("merge_batches: identical collision merges, digest conflict aborts") {
    TempDir tmp;
    auto b1 = make_batch(tmp, "b1", {{"same.bin", "identical"}, {"left.bin", "l"}});
    auto b2 = make_batch(tmp, "b2", {{"same.bin", "identical"}, {"right.bin", "r"}});
    auto report = merge_batches({b1, b2}, tmp.path() / "proj");
    CHECK(report.files_copied == 3);
    CHECK(report.identical_collisions == std::vector<std::string>{"same.bin"});

    auto b3 = make_batch(tmp, "b3", {{"same.bin", "DIFFERENT"}});
    CHECK_THROWS_WITH_AS(merge_batches({b3}, tmp.path() / "proj"), doctest::Contains("conflict"),
                         Error);
}

TEST_CASE("merge_batches: unverified batch is refused") {
    TempDir tmp;
    auto no_manifest = tmp.path() / "raw";
    write_file(no_manifest / "f.bin", std::string("x"));
    CHECK_THROWS_WITH_AS(merge_batches({no_manifest}, tmp.path() / "proj"),
                         doctest::Contains("unverified"), Error);

    auto stale = make_batch(tmp, "stale", {{"f.bin", "original"}});
    write_file(stale / "f.bin", std::string("tampered"));
    CHECK_THROWS_WITH_AS(merge_batches({stale}, tmp.path() / "proj2"),
                         doctest::Contains("unverified"), Error);
}

TEST_CASE("dedupe: duplicate grouping, dry run, apply, idempotence") {
    TempDir tmp;
    auto b = make_batch(tmp, "b", {{"z/copy2.iso", "same bytes"},
                                   {"a/copy1.iso", "same bytes"},
                                   {"unique.bin", "only one"}});
    auto report = merge_batches({b}, tmp.path() / "proj");
    const auto proj = tmp.path() / "proj";

    SUBCASE("dry run returns records and touches nothing") {
        auto before = testsup::tree_digest(proj);
        auto records = dedupe(proj);
        REQUIRE(records.size() == 1);
        CHECK(records[0].kept_path == "a/copy1.iso");
        REQUIRE(records[0].duplicate_paths.size() == 1);
        CHECK(records[0].duplicate_paths[0] == "z/copy2.iso");
        CHECK(testsup::tree_digest(proj) == before);
    }
    SUBCASE("apply rewrites duplicates as link records; second run is empty") {
        auto records = dedupe(proj, true);
        REQUIRE(records.size() == 1);
        auto pointer = read_file(proj / "z/copy2.iso");
        CHECK(std::string(pointer.begin(), pointer.end()) == "DUPLICATE-OF:a/copy1.iso\n");
        CHECK(read_file(proj / "a/copy1.iso") ==
              std::vector<std::uint8_t>{'s', 'a', 'm', 'e', ' ', 'b', 'y', 't', 'e', 's'});
        // manifest refreshed, verification still clean
        CHECK(manifest_verify(manifest_read(proj / kManifestFileName), proj).clean());
        CHECK(dedupe(proj, true).empty());
        CHECK(dedupe(proj).empty());
    }
    SUBCASE("all-distinct tree yields no records") {
        std::filesystem::remove(proj / "z/copy2.iso");
        manifest_write(manifest_create(proj), proj / kManifestFileName);
        CHECK(dedupe(proj).empty());
    }
}

TEST_CASE("dedupe: stale manifest is an error") {
    TempDir tmp;
    auto b = make_batch(tmp, "b", {{"f.bin", "v1"}});
    merge_batches({b}, tmp.path() / "proj");
    write_file(tmp.path() / "proj/f.bin", std::string("v2"));
    CHECK_THROWS_WITH_AS(dedupe(tmp.path() / "proj"), doctest::Contains("out of date"), Error);
    CHECK_THROWS_AS(dedupe(tmp.path() / "nowhere"), Error);
}

TEST_CASE("masters keep their digest across a full run") {
    auto s = stage("udf_bridge");
    auto out_root = s->tmp.path() / "out";
    const std::string before = sha256_hex_file(s->image);
    run(*s, "UDF1", out_root);
    CHECK(sha256_hex_file(s->image) == before);
    const auto master = out_root / "EAP256/masters/UDF1" / s->image.filename();
    CHECK(sha256_hex_file(master) == before);
}
