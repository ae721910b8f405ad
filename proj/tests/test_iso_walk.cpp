#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "carrierforge/forge.hpp"
#include "carrierforge/iso_walk.hpp"
#include "test_support.hpp"

using namespace carrierforge;

namespace {

std::map<std::string, const IsoEntry*> by_path(const std::vector<IsoEntry>& entries) {
    std::map<std::string, const IsoEntry*> m;
    for (const auto& e : entries) m[e.path] = &e;
    return m;
}

// Independent check of an extracted tree against forge ground truth.
void check_tree_equals(const std::filesystem::path& root, const std::vector<ForgeFile>& truth) {
    std::size_t files_found = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) ++files_found;
    }
    CHECK(files_found == truth.size());
    for (const auto& f : truth) {
        auto got = testsup::read_file(root / f.path);
        CHECK_MESSAGE(got == f.bytes, "content mismatch for ", f.path);
    }
}

}  // namespace

TEST_CASE("iso_list: basic fixture listing") {
    auto art = forge(testsup::load_fixture("iso_basic"));
    auto entries = iso_list(art.image);
    REQUIRE(entries.size() == 3);
    auto m = by_path(entries);
    REQUIRE(m.count("A.TIF"));
    REQUIRE(m.count("DIR"));
    REQUIRE(m.count("DIR/B.TXT"));
    CHECK(m["A.TIF"]->data_length == 100);
    CHECK_FALSE(m["A.TIF"]->is_directory);
    CHECK(m["A.TIF"]->version_suffix_stripped);
    CHECK(m["DIR"]->is_directory);
    CHECK(m["DIR/B.TXT"]->data_length == 7);
    CHECK(m["DIR/B.TXT"]->recorded_at == "2011-11-01T00:00:00Z");
    CHECK(m["DIR/B.TXT"]->timestamp_valid);

    // directories precede their children; document order is stable
    auto again = iso_list(art.image);
    for (std::size_t i = 0; i < entries.size(); ++i) CHECK(entries[i].path == again[i].path);
    std::size_t dir_at = 0, child_at = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].path == "DIR") dir_at = i;
        if (entries[i].path == "DIR/B.TXT") child_at = i;
    }
    CHECK(dir_at < child_at);
}

TEST_CASE("iso_list: empty root") {
    auto art = forge(testsup::load_fixture("iso_empty_root"));
    CHECK(iso_list(art.image).empty());
}

TEST_CASE("iso_list: truncated image names the offending entry") {
    auto art = forge(testsup::load_fixture("iso_basic"));
    auto entries = iso_list(art.image);
    auto m = by_path(entries);
    // cut the image in the middle of A.TIF's extent
    const std::uint64_t cut = static_cast<std::uint64_t>(m["A.TIF"]->extent_lba) * 2048 + 50;
    auto mutated = corrupt(art, Mutation::truncate(cut));
    CHECK_THROWS_WITH_AS(iso_list(mutated.image), doctest::Contains("A.TIF"), Error);
}

TEST_CASE("iso_list: malformed record length reports LBA and offset") {
    auto art = forge(testsup::load_fixture("iso_basic"));
    auto entries = iso_list(art.image);
    // find the root directory extent via the first entry's record home:
    // corrupt the length byte of the first record in the root directory
    auto info_entries = by_path(entries);
    // root extent: scan PVD root record (offset 16*2048+156+2, little endian)
    const std::uint32_t root_extent = read_u32le(art.image, 16 * 2048 + 156 + 2);
    auto broken = art;
    broken.image[static_cast<std::size_t>(root_extent) * 2048] = 17;  // < 34, nonzero
    try {
        iso_list(broken.image);
        FAIL("expected malformed record error");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("malformed record length") != std::string::npos);
        CHECK(msg.find(std::to_string(root_extent)) != std::string::npos);
        CHECK(msg.find("offset 0") != std::string::npos);
    }
}

TEST_CASE("iso_list: directory cycle is detected") {
    auto art = forge(testsup::load_fixture("iso_basic"));
    const std::uint32_t root_extent = read_u32le(art.image, 16 * 2048 + 156 + 2);
    // rewrite DIR's record extent to point back at the root directory
    auto broken = art;
    std::size_t base = static_cast<std::size_t>(root_extent) * 2048;
    std::size_t pos = base;
    bool patched = false;
    while (broken.image[pos] != 0) {
        const std::uint8_t len = broken.image[pos];
        const std::uint8_t name_len = broken.image[pos + 32];
        std::string name(reinterpret_cast<const char*>(&broken.image[pos + 33]), name_len);
        if (name == "DIR") {
            write_u32le(&broken.image[pos + 2], root_extent);
            write_u32be(&broken.image[pos + 6], root_extent);
            patched = true;
            break;
        }
        pos += len;
    }
    REQUIRE(patched);
    CHECK_THROWS_WITH_AS(iso_list(broken.image), doctest::Contains("cycle"), Error);
}

TEST_CASE("iso_list: interleaved and extended-attribute records are rejected") {
    auto art = forge(testsup::load_fixture("iso_basic"));
    const std::uint32_t root_extent = read_u32le(art.image, 16 * 2048 + 156 + 2);
    const std::size_t first_child = static_cast<std::size_t>(root_extent) * 2048 + 34 + 34;
    SUBCASE("interleave unit size") {
        auto broken = art;
        broken.image[first_child + 26] = 1;
        CHECK_THROWS_WITH_AS(iso_list(broken.image), doctest::Contains("interleaved"), Error);
    }
    SUBCASE("extended attribute length") {
        auto broken = art;
        broken.image[first_child + 1] = 8;
        CHECK_THROWS_WITH_AS(iso_list(broken.image), doctest::Contains("extended attribute"), Error);
    }
    SUBCASE("multi-extent flag") {
        auto broken = art;
        broken.image[first_child + 25] |= 0x80;
        CHECK_THROWS_WITH_AS(iso_list(broken.image), doctest::Contains("multi-extent"), Error);
    }
}

TEST_CASE("iso_list: out-of-range timestamp is preserved raw and flagged") {
    auto art = forge(testsup::load_fixture("iso_basic"));
    const std::uint32_t root_extent = read_u32le(art.image, 16 * 2048 + 156 + 2);
    const std::size_t first_child = static_cast<std::size_t>(root_extent) * 2048 + 34 + 34;
    auto broken = art;
    broken.image[first_child + 18 + 1] = 13;  // month 13
    auto entries = iso_list(broken.image);
    REQUIRE_FALSE(entries.empty());
    CHECK_FALSE(entries[0].timestamp_valid);
    CHECK(entries[0].recorded_at.empty());
    CHECK(entries[0].recorded_raw[1] == 13);
}

TEST_CASE("iso_extract: forge round trip is byte identical") {
    testsup::TempDir tmp;
    for (const char* fixture : {"iso_basic", "iso_edge_sizes", "iso_empty_root"}) {
        auto art = forge(testsup::load_fixture(fixture));
        auto dest = tmp.path() / fixture / "extracted";
        std::filesystem::create_directories(dest.parent_path());
        auto report = iso_extract(art.image, dest);
        check_tree_equals(dest, art.truth.tree);
        CHECK(report.files_written == art.truth.tree.size());
        std::uint64_t expected_bytes = 0;
        for (const auto& f : art.truth.tree) expected_bytes += f.bytes.size();
        CHECK(report.bytes_written == expected_bytes);
        // sidecar written next to the destination
        CHECK(std::filesystem::exists(tmp.path() / fixture / "extracted.sidecar.json"));
    }
}

TEST_CASE("iso_extract: block boundary file sizes") {
    testsup::TempDir tmp;
    auto art = forge(testsup::load_fixture("iso_edge_sizes"));
    auto report = iso_extract(art.image, tmp.path() / "out");
    CHECK(report.files_written == 6);
    auto m = by_path(report.entries);
    CHECK(m["Z0.BIN"]->data_length == 0);
    CHECK(m["B2047.BIN"]->data_length == 2047);
    CHECK(m["B2048.BIN"]->data_length == 2048);
    CHECK(m["B2049.BIN"]->data_length == 2049);
    CHECK(std::filesystem::file_size(tmp.path() / "out/Z0.BIN") == 0);
}

TEST_CASE("iso_extract: collision with existing content is an error") {
    testsup::TempDir tmp;
    auto art = forge(testsup::load_fixture("iso_basic"));
    testsup::write_file(tmp.path() / "out/A.TIF", std::string("already here"));
    CHECK_THROWS_WITH_AS(iso_extract(art.image, tmp.path() / "out"),
                         doctest::Contains("collision"), Error);
    // the pre-existing file was not clobbered
    auto bytes = testsup::read_file(tmp.path() / "out/A.TIF");
    CHECK(std::string(bytes.begin(), bytes.end()) == "already here");
}

TEST_CASE("iso_extract: sidecar carries the image digest and entries") {
    testsup::TempDir tmp;
    auto art = forge(testsup::load_fixture("iso_basic"));
    iso_extract(art.image, tmp.path() / "out");
    auto side = testsup::read_file(tmp.path() / "out.sidecar.json");
    auto doc = nlohmann::json::parse(side.begin(), side.end());
    CHECK(doc["image_sha256"] == sha256_hex(art.image));
    CHECK(doc["name_case"] == "preserved-verbatim");
    CHECK(doc["entries"].size() == 3);
}

TEST_CASE("iso_list: joliet tree carries long names") {
    auto art = forge(testsup::load_fixture("iso_joliet"));
    auto primary = iso_list(art.image);
    auto joliet = iso_list(art.image, {.joliet = true});
    auto m = by_path(joliet);
    REQUIRE(m.count("A Long Report Name.tiff"));
    REQUIRE(m.count("Folder One/notes about the scan.txt"));
    // the primary tree still walks, with mangled 8.3 names
    CHECK(primary.size() == joliet.size());
    for (const auto& e : primary) {
        CHECK(e.path.find(' ') == std::string::npos);
    }
}

TEST_CASE("iso_extract: joliet round trip") {
    testsup::TempDir tmp;
    auto art = forge(testsup::load_fixture("iso_joliet"));
    iso_extract(art.image, tmp.path() / "out", {.joliet = true});
    check_tree_equals(tmp.path() / "out", art.truth.tree);
}

TEST_CASE("iso_list: no descriptor at all") {
    std::vector<std::uint8_t> blob(40 * 2048, 0xab);
    CHECK_THROWS_WITH_AS(iso_list(blob), doctest::Contains("no primary volume descriptor"), Error);
}
