#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "carrierforge/sha256.hpp"
#include "carrierforge/util.hpp"

// SHA-256 collection manifests: creation, verification with completeness
// checking, normalization of foreign manifests, and BagIt-style packaging.
//
// Canonical manifest form: one "digest<SP>relative/path" per line, LF
// endings, UTF-8, lowercase hex, entries sorted by path byte order. Hashing
// is always binary mode. Foreign manifests (other separators, encodings,
// binary-mode markers) are accepted only through manifest_normalize.

namespace carrierforge {

inline constexpr const char* kManifestFileName = "manifest-sha256.txt";
inline constexpr const char* kBagDeclarationName = "bagit.txt";

struct ManifestEntry {
    std::string relative_path;  // forward slashes
    std::string digest;         // 64 lowercase hex chars

    bool operator==(const ManifestEntry&) const = default;
};

struct ChecksumManifest {
    static constexpr const char* algorithm = "sha256";
    std::string root;  // label only; verification takes the root explicitly
    std::vector<ManifestEntry> entries;
    std::string created_at;
};

struct VerificationReport {
    struct Mismatch {
        std::string path, expected, actual;
    };
    std::vector<std::string> ok;
    std::vector<Mismatch> mismatched;
    std::vector<std::string> missing;
    std::vector<std::string> extra;

    bool clean() const { return mismatched.empty() && missing.empty() && extra.empty(); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["ok"] = ok;
        j["missing"] = missing;
        j["extra"] = extra;
        j["mismatched"] = nlohmann::json::array();
        for (const auto& m : mismatched)
            j["mismatched"].push_back({{"path", m.path}, {"expected", m.expected}, {"actual", m.actual}});
        j["clean"] = clean();
        return j;
    }
};

namespace detail {

// The manifest and bag declaration live at the collection root; they are the
// fixity layer's own artifacts, not payload.
inline bool is_fixity_artifact(const std::string& relative) {
    return relative == kManifestFileName || relative == kBagDeclarationName;
}

inline std::vector<std::string> list_files(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::string rel = fs::relative(e.path(), root).generic_string();
        if (is_fixity_artifact(rel)) continue;
        files.push_back(std::move(rel));
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace detail

// Hashes every regular file under root (binary mode, sorted paths). Empty
// directories are ignored; an unreadable file aborts creation.
inline ChecksumManifest manifest_create(const std::filesystem::path& root) {
    if (!std::filesystem::exists(root)) throw Error("manifest root does not exist: " + root.string());
    ChecksumManifest m;
    m.root = root.string();
    m.created_at = now_iso8601_utc();
    for (const auto& rel : detail::list_files(root)) {
        m.entries.push_back({rel, sha256_hex_file(root / rel)});
    }
    return m;
}

// Re-hashes the tree and classifies every manifest path as ok, mismatched or
// missing; files on disk that the manifest does not cover are extra.
inline VerificationReport manifest_verify(const ChecksumManifest& manifest,
                                          const std::filesystem::path& root) {
    VerificationReport report;
    std::set<std::string> on_disk;
    if (std::filesystem::exists(root)) {
        for (const auto& rel : detail::list_files(root)) on_disk.insert(rel);
    }
    for (const auto& entry : manifest.entries) {
        if (!on_disk.count(entry.relative_path)) {
            report.missing.push_back(entry.relative_path);
            continue;
        }
        on_disk.erase(entry.relative_path);
        const std::string actual = sha256_hex_file(root / entry.relative_path);
        if (actual == entry.digest) report.ok.push_back(entry.relative_path);
        else report.mismatched.push_back({entry.relative_path, entry.digest, actual});
    }
    report.extra.assign(on_disk.begin(), on_disk.end());
    return report;
}

inline std::string manifest_to_text(const ChecksumManifest& m) {
    std::string out;
    for (const auto& e : m.entries) out += e.digest + " " + e.relative_path + "\n";
    return out;
}

// Strict parser for the canonical form; foreign input goes through
// manifest_normalize instead.
inline ChecksumManifest manifest_parse(std::string_view text) {
    ChecksumManifest m;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        const std::size_t sp = line.find(' ');
        if (sp == std::string_view::npos)
            throw Error("manifest line " + std::to_string(line_no) + ": no separator");
        std::string_view digest = line.substr(0, sp);
        std::string_view path = line.substr(sp + 1);
        if (!is_hex_digest64(digest) || digest != lower_ascii(digest))
            throw Error("manifest line " + std::to_string(line_no) + ": bad digest");
        if (path.empty()) throw Error("manifest line " + std::to_string(line_no) + ": empty path");
        m.entries.push_back({std::string(path), std::string(digest)});
    }
    if (!std::is_sorted(m.entries.begin(), m.entries.end(),
                        [](const auto& a, const auto& b) { return a.relative_path < b.relative_path; }))
        throw Error("manifest entries not sorted");
    for (std::size_t i = 1; i < m.entries.size(); ++i)
        if (m.entries[i].relative_path == m.entries[i - 1].relative_path)
            throw Error("duplicate manifest path: " + m.entries[i].relative_path);
    return m;
}

inline void manifest_write(const ChecksumManifest& m, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    out << manifest_to_text(m);
    if (!out) throw Error("cannot write manifest: " + file.string());
}

inline ChecksumManifest manifest_read(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read manifest: " + file.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto m = manifest_parse(text);
    m.root = file.parent_path().string();
    return m;
}

struct NormalizationResult {
    ChecksumManifest manifest;
    std::vector<std::string> log;  // one line per applied transformation
};

// Converts a foreign manifest (checksum tools disagree about separators,
// digest case, binary-mode markers and encodings) to canonical form,
// recording every transformation.
inline NormalizationResult manifest_normalize(std::span<const std::uint8_t> raw_text,
                                              const std::string& declared_conventions = "") {
    NormalizationResult result;
    if (!declared_conventions.empty())
        result.log.push_back("declared: " + declared_conventions);
    auto decoded = decode_text(raw_text);
    if (decoded.transcoded_from_latin1) result.log.push_back("transcoded Latin-1 to UTF-8");

    int line_no = 0;
    std::size_t pos = 0;
    const std::string& text = decoded.text;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
            result.log.push_back("line " + std::to_string(line_no) + ": dropped CR line ending");
        }
        if (line.empty()) continue;

        const std::size_t sp = line.find_first_of(" \t");
        std::string digest = line.substr(0, sp == std::string::npos ? line.size() : sp);
        if (!is_hex_digest64(digest))
            throw Error("line " + std::to_string(line_no) + ": no recognizable SHA-256 digest");
        if (digest != lower_ascii(digest)) {
            digest = lower_ascii(digest);
            result.log.push_back("line " + std::to_string(line_no) + ": lowercased digest");
        }
        if (sp == std::string::npos)
            throw Error("line " + std::to_string(line_no) + ": digest without path");
        std::string path = line.substr(sp);
        const std::size_t first = path.find_first_not_of(" \t");
        path = first == std::string::npos ? std::string() : path.substr(first);
        if (!path.empty() && path.front() == '*') {
            path.erase(path.begin());
            result.log.push_back("line " + std::to_string(line_no) + ": stripped binary-mode marker");
        }
        if (path.find('\\') != std::string::npos) {
            std::replace(path.begin(), path.end(), '\\', '/');
            result.log.push_back("line " + std::to_string(line_no) + ": converted backslashes");
        }
        if (path.empty()) throw Error("line " + std::to_string(line_no) + ": empty path");
        result.manifest.entries.push_back({path, digest});
    }

    auto& entries = result.manifest.entries;
    if (!std::is_sorted(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return a.relative_path < b.relative_path;
        })) {
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.relative_path < b.relative_path; });
        result.log.push_back("sorted entries by path");
    }
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].relative_path == entries[i - 1].relative_path)
            throw Error("duplicate path after normalization: " + entries[i].relative_path);
    result.manifest.created_at = now_iso8601_utc();
    return result;
}

// ---- BagIt-style packaging ---------------------------------------------------

// Creates bag_destination/{bagit.txt, manifest-sha256.txt, data/} with the
// payload copied under data/. A failed copy removes the partial bag.
inline std::filesystem::path bag_pack(const std::filesystem::path& root,
                                      const std::filesystem::path& bag_destination) {
    namespace fs = std::filesystem;
    if (!fs::exists(root)) throw Error("bag source does not exist: " + root.string());
    if (fs::exists(bag_destination) && !fs::is_empty(bag_destination))
        throw Error("bag destination not empty: " + bag_destination.string());
    fs::create_directories(bag_destination);
    try {
        const fs::path data = bag_destination / "data";
        fs::create_directories(data);
        ChecksumManifest manifest;
        for (const auto& rel : detail::list_files(root)) {
            const fs::path target = data / fs::path(rel);
            fs::create_directories(target.parent_path());
            fs::copy_file(root / rel, target);
            manifest.entries.push_back({"data/" + rel, sha256_hex_file(target)});
        }
        std::ofstream decl(bag_destination / kBagDeclarationName, std::ios::binary);
        decl << "BagIt-Version: 0.97\nTag-File-Character-Encoding: UTF-8\n";
        if (!decl) throw Error("cannot write bag declaration");
        std::string lines;
        for (const auto& e : manifest.entries) lines += e.digest + " " + e.relative_path + "\n";
        std::ofstream mf(bag_destination / kManifestFileName, std::ios::binary);
        mf << lines;
        if (!mf) throw Error("cannot write bag manifest");
    } catch (...) {
        std::error_code ec;
        fs::remove_all(bag_destination, ec);  // never leave a half-built bag
        throw;
    }
    return bag_destination;
}

inline bool is_bag(const std::filesystem::path& root) {
    return std::filesystem::exists(root / kBagDeclarationName);
}

// Verifies a bag in place: manifest entries against data/ plus completeness
// over the payload directory.
inline VerificationReport bag_verify(const std::filesystem::path& bag_root) {
    if (!is_bag(bag_root)) throw Error("not a bag (no bagit.txt): " + bag_root.string());
    auto manifest = manifest_read(bag_root / kManifestFileName);
    return manifest_verify(manifest, bag_root);
}

}  // namespace carrierforge
