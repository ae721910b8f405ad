#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "carrierforge/fixity.hpp"
#include "test_support.hpp"

using namespace carrierforge;
using testsup::TempDir;
using testsup::read_file;
using testsup::write_file;

TEST_CASE("sha256 known answers") {
    // NIST FIPS 180 vectors plus the ASCII "hello" value, all confirmed
    // against coreutils sha256sum.
    CHECK(sha256_hex(std::string_view("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string_view("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string_view("hello")) ==
          "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
}

TEST_CASE("manifest_create basics") {
    TempDir tmp;
    SUBCASE("empty root yields zero entries") {
        CHECK(manifest_create(tmp.path()).entries.empty());
    }
    SUBCASE("known file digest") {
        write_file(tmp.path() / "a.txt", std::string("hello"));
        auto m = manifest_create(tmp.path());
        REQUIRE(m.entries.size() == 1);
        CHECK(m.entries[0].relative_path == "a.txt");
        CHECK(m.entries[0].digest ==
              "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
    }
    SUBCASE("nested paths use forward slashes and sort by byte order") {
        write_file(tmp.path() / "d/e.bin", std::string("x"));
        write_file(tmp.path() / "b.txt", std::string("y"));
        std::filesystem::create_directories(tmp.path() / "emptydir");
        auto m = manifest_create(tmp.path());
        REQUIRE(m.entries.size() == 2);
        CHECK(m.entries[0].relative_path == "b.txt");
        CHECK(m.entries[1].relative_path == "d/e.bin");
    }
    SUBCASE("missing root is an error") {
        CHECK_THROWS_AS(manifest_create(tmp.path() / "nope"), Error);
    }
}

TEST_CASE("manifest serialization is byte-stable and round-trips") {
    TempDir tmp;
    write_file(tmp.path() / "a.bin", std::string("AAA"));
    write_file(tmp.path() / "sub/b.bin", std::string("BBB"));
    auto m1 = manifest_create(tmp.path());
    auto m2 = manifest_create(tmp.path());
    CHECK(manifest_to_text(m1) == manifest_to_text(m2));
    auto parsed = manifest_parse(manifest_to_text(m1));
    CHECK(parsed.entries == m1.entries);
}

TEST_CASE("manifest_verify classifications") {
    TempDir tmp;
    write_file(tmp.path() / "one.bin", std::string("payload one"));
    write_file(tmp.path() / "sub/two.bin", std::string("payload two"));
    auto m = manifest_create(tmp.path());

    SUBCASE("untouched tree is fully ok") {
        auto r = manifest_verify(m, tmp.path());
        CHECK(r.ok.size() == 2);
        CHECK(r.clean());
    }
    SUBCASE("one flipped bit flags exactly that path") {
        auto bytes = read_file(tmp.path() / "sub/two.bin");
        bytes[3] ^= 0x10;
        write_file(tmp.path() / "sub/two.bin", bytes);
        auto r = manifest_verify(m, tmp.path());
        REQUIRE(r.mismatched.size() == 1);
        CHECK(r.mismatched[0].path == "sub/two.bin");
        CHECK(r.ok == std::vector<std::string>{"one.bin"});
        CHECK(r.missing.empty());
        CHECK(r.extra.empty());
    }
    SUBCASE("added file is extra") {
        write_file(tmp.path() / "later.txt", std::string("appeared"));
        auto r = manifest_verify(m, tmp.path());
        CHECK(r.extra == std::vector<std::string>{"later.txt"});
        CHECK_FALSE(r.clean());
    }
    SUBCASE("deleted file is missing") {
        std::filesystem::remove(tmp.path() / "one.bin");
        auto r = manifest_verify(m, tmp.path());
        CHECK(r.missing == std::vector<std::string>{"one.bin"});
    }
}

TEST_CASE("every single-bit corruption of a small fixture is detected") {
    TempDir tmp;
    const std::string content = "fixity sentinel!";  // 16 bytes, exhaustive sweep
    write_file(tmp.path() / "f.bin", content);
    auto m = manifest_create(tmp.path());
    for (std::size_t byte = 0; byte < content.size(); ++byte) {
        for (int bit = 0; bit < 8; ++bit) {
            auto bytes = read_file(tmp.path() / "f.bin");
            bytes[byte] ^= static_cast<std::uint8_t>(1 << bit);
            write_file(tmp.path() / "f.bin", bytes);
            auto r = manifest_verify(m, tmp.path());
            REQUIRE(r.mismatched.size() == 1);
            bytes[byte] ^= static_cast<std::uint8_t>(1 << bit);
            write_file(tmp.path() / "f.bin", bytes);
        }
    }
    CHECK(manifest_verify(m, tmp.path()).clean());
}

TEST_CASE("manifest_normalize: the tool-chaos cases") {
    SUBCASE("uppercase hex, star marker, backslash path") {
        std::string digest_up = upper_ascii(sha256_hex(std::string_view("z")));
        std::string raw = digest_up + " *dir\\f.bin\n";
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        auto r = manifest_normalize(bytes);
        REQUIRE(r.manifest.entries.size() == 1);
        CHECK(r.manifest.entries[0].relative_path == "dir/f.bin");
        CHECK(r.manifest.entries[0].digest == lower_ascii(digest_up));
        CHECK(r.log.size() == 3);
    }
    SUBCASE("already-canonical text is the identity with an empty log") {
        std::string raw = sha256_hex(std::string_view("a")) + " a.bin\n" +
                          sha256_hex(std::string_view("b")) + " b.bin\n";
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        auto r = manifest_normalize(bytes);
        CHECK(r.log.empty());
        CHECK(manifest_to_text(r.manifest) == raw);
    }
    SUBCASE("unrecognizable digest names the line") {
        std::string raw = "not-a-digest f.bin\n";
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        CHECK_THROWS_WITH_AS(manifest_normalize(bytes), doctest::Contains("line 1"), Error);
    }
    SUBCASE("duplicate path after normalization") {
        std::string raw = sha256_hex(std::string_view("a")) + " dir\\x\n" +
                          sha256_hex(std::string_view("b")) + " dir/x\n";
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        CHECK_THROWS_WITH_AS(manifest_normalize(bytes), doctest::Contains("duplicate"), Error);
    }
    SUBCASE("latin-1 path bytes are transcoded") {
        std::string raw = sha256_hex(std::string_view("a")) + " caf\xe9.txt\n";
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        auto r = manifest_normalize(bytes);
        REQUIRE(r.manifest.entries.size() == 1);
        CHECK(is_valid_utf8(r.manifest.entries[0].relative_path));
        CHECK_FALSE(r.log.empty());
    }
}

TEST_CASE("manifest_normalize is idempotent") {
    std::mt19937 gen(4242);
    auto random_adversarial = [&]() {
        std::string text;
        const int n = 1 + static_cast<int>(gen() % 6);
        for (int i = 0; i < n; ++i) {
            std::string digest = sha256_hex(std::string_view(std::to_string(gen())));
            if (gen() % 2) digest = upper_ascii(digest);
            std::string path = "dir" + std::to_string(gen() % 100) +
                               (gen() % 2 ? "\\" : "/") + "f" + std::to_string(i) + ".bin";
            text += digest + (gen() % 2 ? "  *" : " ") + path + (gen() % 2 ? "\r\n" : "\n");
        }
        return text;
    };
    for (int round = 0; round < 40; ++round) {
        std::string raw = random_adversarial();
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        NormalizationResult first;
        try {
            first = manifest_normalize(bytes);
        } catch (const Error&) {
            continue;  // duplicate path collisions are legitimate rejections
        }
        const std::string canon = manifest_to_text(first.manifest);
        std::vector<std::uint8_t> canon_bytes(canon.begin(), canon.end());
        auto second = manifest_normalize(canon_bytes);
        CHECK(second.log.empty());
        CHECK(manifest_to_text(second.manifest) == canon);
    }
}

TEST_CASE("bag_pack and bag_verify") {
    TempDir tmp;
    SUBCASE("two files end up under data/ and re-verify") {
        write_file(tmp.path() / "src/a.tif", std::string("image bytes"));
        write_file(tmp.path() / "src/meta/b.txt", std::string("notes"));
        auto bag = bag_pack(tmp.path() / "src", tmp.path() / "bag");
        auto manifest_bytes = read_file(bag / "manifest-sha256.txt");
        std::string manifest_text(manifest_bytes.begin(), manifest_bytes.end());
        CHECK(std::count(manifest_text.begin(), manifest_text.end(), '\n') == 2);
        CHECK(manifest_text.find(" data/a.tif\n") != std::string::npos);
        CHECK(manifest_text.find(" data/meta/b.txt") != std::string::npos);
        auto decl_bytes = read_file(bag / "bagit.txt");
        CHECK(std::string(decl_bytes.begin(), decl_bytes.end()) ==
              "BagIt-Version: 0.97\nTag-File-Character-Encoding: UTF-8\n");
        CHECK(bag_verify(bag).clean());
    }
    SUBCASE("empty root packs a valid empty bag") {
        std::filesystem::create_directories(tmp.path() / "empty");
        auto bag = bag_pack(tmp.path() / "empty", tmp.path() / "bag");
        CHECK(read_file(bag / "manifest-sha256.txt").empty());
        CHECK(bag_verify(bag).clean());
    }
    SUBCASE("non-empty destination is refused") {
        write_file(tmp.path() / "src/a", std::string("x"));
        write_file(tmp.path() / "bag/stale", std::string("y"));
        CHECK_THROWS_WITH_AS(bag_pack(tmp.path() / "src", tmp.path() / "bag"),
                             doctest::Contains("not empty"), Error);
    }
    SUBCASE("tampering inside the bag is caught") {
        write_file(tmp.path() / "src/a.bin", std::string("original"));
        auto bag = bag_pack(tmp.path() / "src", tmp.path() / "bag");
        write_file(bag / "data/a.bin", std::string("tampered"));
        auto r = bag_verify(bag);
        REQUIRE(r.mismatched.size() == 1);
        CHECK(r.mismatched[0].path == "data/a.bin");
    }
}

TEST_CASE("manifest_verify over forge trees is clean by construction") {
    TempDir tmp;
    for (const char* name : {"iso_basic", "iso_edge_sizes"}) {
        auto art = forge(testsup::load_fixture(name));
        auto root = tmp.path() / name;
        for (const auto& f : art.truth.tree) write_file(root / f.path, f.bytes);
        if (art.truth.tree.empty()) std::filesystem::create_directories(root);
        auto m = manifest_create(root);
        CHECK(manifest_verify(m, root).clean());
        CHECK(m.entries.size() == art.truth.tree.size());
    }
}
