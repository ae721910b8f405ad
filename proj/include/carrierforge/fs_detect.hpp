#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carrierforge/iso_walk.hpp"
#include "carrierforge/util.hpp"

// Signature-level detection of the filesystem / container families that turn
// up inside a single data payload. Detectors are mutually independent and
// total: absence is an empty result, never a failure. Precedence between
// families is the classifier's job.

namespace carrierforge {

enum class VolumeFamily { Iso9660, Udf, HfsPlus, MdsContainer, Unknown };

inline const char* to_string(VolumeFamily f) {
    switch (f) {
        case VolumeFamily::Iso9660: return "Iso9660";
        case VolumeFamily::Udf: return "Udf";
        case VolumeFamily::HfsPlus: return "HfsPlus";
        case VolumeFamily::MdsContainer: return "MdsContainer";
        case VolumeFamily::Unknown: return "Unknown";
    }
    return "?";
}

struct VolumeInfo {
    VolumeFamily family = VolumeFamily::Unknown;
    std::string volume_id;          // trimmed of trailing spaces; may be empty
    std::uint32_t block_size = 0;
    std::string detail;
};

// Looks for a type-1 "CD001" volume descriptor from sector 16 onward.
inline std::optional<VolumeInfo> detect_iso9660(std::span<const std::uint8_t> image) {
    for (std::size_t off = 16 * 2048; off + 2048 <= image.size(); off += 2048) {
        if (std::memcmp(image.data() + off + 1, "CD001", 5) != 0) return std::nullopt;
        const std::uint8_t type = image[off];
        if (type == 255) return std::nullopt;
        if (type != 1) continue;
        VolumeInfo info;
        info.family = VolumeFamily::Iso9660;
        info.volume_id = rtrim_spaces(
            std::string_view(reinterpret_cast<const char*>(image.data()) + off + 40, 32));
        info.block_size = read_u16le(image, off + 128);
        return info;
    }
    return std::nullopt;
}

// Walks the volume recognition sequence (2048-byte structures from byte
// 32768) looking for an NSR02/NSR03 descriptor. ISO descriptors ("CD001")
// share the recognition space on bridge disks and are stepped over.
inline std::optional<VolumeInfo> detect_udf(std::span<const std::uint8_t> image) {
    bool bea_seen = false;
    for (std::size_t off = 32768; off + 2048 <= image.size(); off += 2048) {
        const char* id = reinterpret_cast<const char*>(image.data()) + off + 1;
        if (std::memcmp(id, "CD001", 5) == 0) continue;
        if (std::memcmp(id, "BEA01", 5) == 0) {
            bea_seen = true;
            continue;
        }
        if (std::memcmp(id, "BOOT2", 5) == 0 || std::memcmp(id, "CDW02", 5) == 0) continue;
        if (std::memcmp(id, "NSR02", 5) == 0 || std::memcmp(id, "NSR03", 5) == 0) {
            VolumeInfo info;
            info.family = VolumeFamily::Udf;
            info.block_size = 2048;
            info.detail = std::string(id, 5);
            if (!bea_seen) info.detail += " (no BEA01)";
            return info;
        }
        return std::nullopt;  // TEA01 or foreign bytes end the sequence
    }
    return std::nullopt;
}

// HFS+ ("H+") or case-sensitive HFSX ("HX") volume header signature at 1024.
inline std::optional<VolumeInfo> detect_hfsplus(std::span<const std::uint8_t> image) {
    if (image.size() < 1026) return std::nullopt;
    const bool plus = image[1024] == 'H' && image[1025] == '+';
    const bool hfsx = image[1024] == 'H' && image[1025] == 'X';
    if (!plus && !hfsx) return std::nullopt;
    VolumeInfo info;
    info.family = VolumeFamily::HfsPlus;
    info.block_size = 512;
    if (hfsx) info.detail = "HFSX";
    return info;
}

// Media Descriptor container. Signature only: the format has no public
// specification, so contents are never parsed and such files route to
// manual handling.
inline std::optional<VolumeInfo> detect_mds(std::span<const std::uint8_t> image) {
    static constexpr char kSig[] = "MEDIA DESCRIPTOR";
    constexpr std::size_t n = sizeof(kSig) - 1;
    if (image.size() < n || std::memcmp(image.data(), kSig, n) != 0) return std::nullopt;
    VolumeInfo info;
    info.family = VolumeFamily::MdsContainer;
    info.block_size = 1;
    info.detail = "signature only";
    return info;
}

// True iff the root listing carries a top-level VIDEO_TS directory.
inline bool detect_dvd_video(const std::vector<IsoEntry>& entries) {
    for (const auto& e : entries) {
        if (e.is_directory && e.path.find('/') == std::string::npos &&
            iequals_ascii(e.path, "VIDEO_TS"))
            return true;
    }
    return false;
}

// Runs every byte-level detector; order matches classification precedence.
inline std::vector<VolumeInfo> detect_all(std::span<const std::uint8_t> image) {
    std::vector<VolumeInfo> found;
    if (auto v = detect_mds(image)) found.push_back(*v);
    if (auto v = detect_hfsplus(image)) found.push_back(*v);
    if (auto v = detect_iso9660(image)) found.push_back(*v);
    if (auto v = detect_udf(image)) found.push_back(*v);
    return found;
}

}  // namespace carrierforge
