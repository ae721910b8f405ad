#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carrierforge/sha256.hpp"
#include "carrierforge/util.hpp"

// ISO 9660 directory tree walking and file extraction. Only the primary
// volume descriptor tree is walked by default; the Joliet supplementary tree
// can be selected where long names matter. Interleaved files, extended
// attribute records and multi-extent files are surfaced as errors rather
// than skipped.

namespace carrierforge {

struct IsoEntry {
    std::string path;  // forward slashes, relative, verbatim on-disk case
    bool is_directory = false;
    std::uint32_t extent_lba = 0;
    std::uint32_t data_length = 0;
    std::string recorded_at;  // ISO-8601 UTC; empty when the on-disk stamp is out of range
    std::array<std::uint8_t, 7> recorded_raw{};
    bool timestamp_valid = false;
    bool version_suffix_stripped = false;
};

struct IsoListOptions {
    bool joliet = false;
};

struct ExtractionReport {
    std::uint64_t files_written = 0;
    std::uint64_t bytes_written = 0;
    std::vector<IsoEntry> entries;
};

namespace detail {

inline constexpr std::size_t kVolumeDescriptorStart = 16;

struct RawDirRecord {
    std::uint32_t extent = 0;
    std::uint32_t size = 0;
    std::uint8_t flags = 0;
    std::array<std::uint8_t, 7> date{};
    std::uint8_t xattr_len = 0;
    std::uint8_t unit_size = 0;
    std::uint8_t gap_size = 0;
    std::string identifier;  // raw bytes, version suffix still attached
};

// Parses one directory record at `rec`; bounds were checked by the caller.
inline RawDirRecord parse_dir_record(std::span<const std::uint8_t> rec) {
    RawDirRecord r;
    r.xattr_len = rec[1];
    r.extent = read_u32le(rec, 2);
    r.size = read_u32le(rec, 10);
    std::copy(rec.begin() + 18, rec.begin() + 25, r.date.begin());
    r.flags = rec[25];
    r.unit_size = rec[26];
    r.gap_size = rec[27];
    const std::size_t name_len = rec[32];
    r.identifier.assign(reinterpret_cast<const char*>(rec.data()) + 33, name_len);
    return r;
}

inline void fill_timestamp(IsoEntry& e, const std::array<std::uint8_t, 7>& d) {
    e.recorded_raw = d;
    const int year = 1900 + d[0];
    const int month = d[1], day = d[2], hour = d[3], minute = d[4], second = d[5];
    const int tz = static_cast<std::int8_t>(d[6]);
    const bool in_range = month >= 1 && month <= 12 && day >= 1 && day <= 31 && hour <= 23 &&
                          minute <= 59 && second <= 59 && tz >= -48 && tz <= 52;
    if (!in_range) {
        e.timestamp_valid = false;
        return;
    }
    std::tm tm{};
    tm.tm_year = year - 1900;
    tm.tm_mon = month - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = minute;
    tm.tm_sec = second;
    e.recorded_at = to_iso8601_utc(timegm(&tm) - tz * 15 * 60);
    e.timestamp_valid = true;
}

inline std::string decode_ucs2be(std::string_view raw) {
    std::string out;
    for (std::size_t i = 0; i + 1 < raw.size(); i += 2) {
        const char32_t cp = static_cast<char32_t>((static_cast<unsigned char>(raw[i]) << 8) |
                                                  static_cast<unsigned char>(raw[i + 1]));
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
        } else {
            out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
        }
    }
    return out;
}

struct WalkContext {
    std::span<const std::uint8_t> image;
    std::size_t block_size = 2048;
    bool joliet = false;
    std::set<std::uint32_t> visited;
    std::vector<IsoEntry>* out = nullptr;
};

inline void walk_directory(WalkContext& ctx, std::uint32_t extent, std::uint32_t size,
                           const std::string& prefix) {
    if (!ctx.visited.insert(extent).second)
        throw Error("cycle detected: directory extent " + std::to_string(extent) + " revisited");
    const std::uint64_t dir_start = static_cast<std::uint64_t>(extent) * ctx.block_size;
    if (dir_start + size > ctx.image.size())
        throw Error("record extends past image end: directory '" + (prefix.empty() ? "/" : prefix) + "'");

    std::size_t pos = 0;
    while (pos < size) {
        const std::uint64_t abs = dir_start + pos;
        const std::uint8_t len = ctx.image[abs];
        if (len == 0) {
            // records never span sector boundaries; skip the zero tail
            pos = (pos / ctx.block_size + 1) * ctx.block_size;
            continue;
        }
        const std::uint64_t lba = extent + pos / ctx.block_size;
        const std::size_t offset_in_block = pos % ctx.block_size;
        if (len < 34 || offset_in_block + len > ctx.block_size || pos + len > size)
            throw Error("malformed record length at LBA " + std::to_string(lba) + " offset " +
                        std::to_string(offset_in_block));
        auto rec_bytes = ctx.image.subspan(abs, len);
        if (std::size_t(33) + rec_bytes[32] > len)
            throw Error("malformed record length at LBA " + std::to_string(lba) + " offset " +
                        std::to_string(offset_in_block) + " (identifier overruns record)");
        RawDirRecord rec = parse_dir_record(rec_bytes);
        pos += len;

        if (rec.identifier.size() == 1 && (rec.identifier[0] == '\0' || rec.identifier[0] == '\x01'))
            continue;  // self / parent

        std::string name = ctx.joliet ? decode_ucs2be(rec.identifier) : rec.identifier;
        IsoEntry entry;
        entry.is_directory = (rec.flags & 0x02) != 0;
        if (rec.xattr_len != 0)
            throw Error("extended attribute record on '" + name + "' not supported");
        if (rec.unit_size != 0 || rec.gap_size != 0)
            throw Error("interleaved file '" + name + "' not supported");
        if (rec.flags & 0x80)
            throw Error("multi-extent file '" + name + "' not supported");
        if (!entry.is_directory) {
            const std::size_t semi = name.rfind(';');
            if (semi != std::string::npos) {
                name = name.substr(0, semi);
                entry.version_suffix_stripped = true;
            }
        }
        entry.path = prefix.empty() ? name : prefix + "/" + name;
        entry.extent_lba = rec.extent;
        entry.data_length = rec.size;
        fill_timestamp(entry, rec.date);

        if (entry.is_directory) {
            ctx.out->push_back(entry);
            walk_directory(ctx, rec.extent, rec.size, entry.path);
        } else {
            if (static_cast<std::uint64_t>(rec.extent) * ctx.block_size + rec.size > ctx.image.size())
                throw Error("record extends past image end: '" + entry.path + "'");
            ctx.out->push_back(entry);
        }
    }
}

struct DescriptorChoice {
    std::size_t offset = 0;    // byte offset of the chosen descriptor
    std::size_t block_size = 2048;
};

inline DescriptorChoice find_descriptor(std::span<const std::uint8_t> image, bool joliet) {
    const std::size_t start = kVolumeDescriptorStart * 2048;
    for (std::size_t off = start; off + 2048 <= image.size(); off += 2048) {
        const std::uint8_t type = image[off];
        if (std::memcmp(image.data() + off + 1, "CD001", 5) != 0) break;
        if (type == 255) break;
        if (!joliet && type == 1)
            return {off, read_u16le(image, off + 128)};
        if (joliet && type == 2) {
            const std::uint8_t* esc = image.data() + off + 88;
            if (esc[0] == 0x25 && esc[1] == 0x2f && (esc[2] == 0x40 || esc[2] == 0x43 || esc[2] == 0x45))
                return {off, read_u16le(image, off + 128)};
        }
    }
    throw Error(joliet ? "no Joliet supplementary volume descriptor"
                       : "no primary volume descriptor");
}

}  // namespace detail

// Depth-first listing of the directory tree, document order, directories
// before their children. Length fields are read from the little-endian half.
inline std::vector<IsoEntry> iso_list(std::span<const std::uint8_t> image, IsoListOptions options = {}) {
    auto choice = detail::find_descriptor(image, options.joliet);
    if (choice.block_size == 0 || choice.block_size % 512 != 0)
        throw Error("implausible logical block size " + std::to_string(choice.block_size));
    auto root = detail::parse_dir_record(image.subspan(choice.offset + 156, 34));
    std::vector<IsoEntry> entries;
    detail::WalkContext ctx;
    ctx.image = image;
    ctx.block_size = choice.block_size;
    ctx.joliet = options.joliet;
    ctx.out = &entries;
    detail::walk_directory(ctx, root.extent, root.size, "");
    return entries;
}

inline nlohmann::json to_json(const IsoEntry& e) {
    return nlohmann::json{
        {"path", e.path},
        {"is_directory", e.is_directory},
        {"extent_lba", e.extent_lba},
        {"data_length", e.data_length},
        {"recorded_at", e.recorded_at},
        {"recorded_raw", to_hex(e.recorded_raw)},
        {"timestamp_valid", e.timestamp_valid},
        {"version_suffix_stripped", e.version_suffix_stripped},
    };
}

// Writes every file of the image under `destination`, preserving directory
// structure and verbatim on-disk name case. Existing files are never
// overwritten: any collision aborts. A JSON sidecar next to the destination
// records the entry listing and the source image digest.
inline ExtractionReport iso_extract(std::span<const std::uint8_t> image,
                                    const std::filesystem::path& destination,
                                    IsoListOptions options = {}) {
    namespace fs = std::filesystem;
    ExtractionReport report;
    report.entries = iso_list(image, options);
    auto choice = detail::find_descriptor(image, options.joliet);

    const fs::path sidecar = destination.parent_path() /
                             (destination.filename().string() + ".sidecar.json");
    if (fs::exists(sidecar)) throw Error("collision: sidecar already exists: " + sidecar.string());
    fs::create_directories(destination);

    for (const auto& e : report.entries) {
        const fs::path target = destination / fs::path(e.path);
        if (e.is_directory) {
            if (fs::exists(target) && !fs::is_directory(target))
                throw Error("collision: '" + target.string() + "' exists and is not a directory");
            fs::create_directories(target);
            continue;
        }
        if (fs::exists(target)) throw Error("collision: '" + target.string() + "' already exists");
        fs::create_directories(target.parent_path());
        std::ofstream out(target, std::ios::binary);
        if (!out) throw Error("cannot write '" + target.string() + "'");
        if (e.data_length > 0) {
            const std::uint64_t at = static_cast<std::uint64_t>(e.extent_lba) * choice.block_size;
            out.write(reinterpret_cast<const char*>(image.data() + at), e.data_length);
        }
        if (!out) throw Error("write failure on '" + target.string() + "'");
        ++report.files_written;
        report.bytes_written += e.data_length;
    }

    nlohmann::json doc;
    doc["image_sha256"] = sha256_hex(image);
    doc["name_case"] = "preserved-verbatim";
    doc["tree"] = options.joliet ? "joliet" : "primary";
    doc["entries"] = nlohmann::json::array();
    for (const auto& e : report.entries) doc["entries"].push_back(to_json(e));
    std::ofstream side(sidecar, std::ios::binary);
    side << doc.dump(2) << "\n";
    if (!side) throw Error("cannot write sidecar '" + sidecar.string() + "'");
    return report;
}

}  // namespace carrierforge
