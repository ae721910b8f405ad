#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carrierforge/classify.hpp"
#include "carrierforge/fixity.hpp"
#include "carrierforge/iso_walk.hpp"
#include "carrierforge/sector_codec.hpp"

// Executes processing plans end to end (image -> tracks -> files) and the
// post-stabilization cleanup: merging batch trees, de-duplication, and the
// uniform directory naming convention.
//
// Layout: <project>/masters/<carrier> holds the untouched images,
// <project>/derived/<carrier> what was extracted from them, and
// <project>/native/<carrier> sibling submissions that arrived as plain
// files. Masters and derived files coexist; nothing here ever deletes or
// rewrites a master.

namespace carrierforge {

inline constexpr const char* kManualMarkerName = "manual.marker";
inline constexpr const char* kManualPrefix = "MANUAL:";
inline constexpr const char* kDuplicatePrefix = "DUPLICATE-OF:";

enum class PathRelation { MasterImage, DerivedFromImages, SiblingSubmission };

// Deterministic component of the naming convention; identifiers must be
// clean single path components.
inline std::filesystem::path layout_path(const std::string& project_id, const std::string& carrier_id,
                                         PathRelation relation) {
    if (!is_clean_path_component(project_id))
        throw Error("bad project identifier '" + project_id + "'");
    if (!is_clean_path_component(carrier_id))
        throw Error("bad carrier identifier '" + carrier_id + "'");
    const char* middle = relation == PathRelation::MasterImage        ? "masters"
                         : relation == PathRelation::DerivedFromImages ? "derived"
                                                                       : "native";
    return std::filesystem::path(project_id) / middle / carrier_id;
}

struct StabilizedOutput {
    std::string carrier_id;
    std::vector<std::filesystem::path> master_image_paths;
    std::vector<std::filesystem::path> derived_paths;
    ProcessingPlan plan;
    std::filesystem::path manifest_ref;  // filled once the batch manifest exists
    std::string notes;
};

struct PipelineError : Error {
    PipelineError(std::string carrier, const std::string& what_arg)
        : Error("carrier " + carrier + ": " + what_arg), carrier_id(std::move(carrier)) {}
    std::string carrier_id;
};

namespace detail {

inline std::vector<std::uint8_t> load_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read '" + p.string() + "'");
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

inline void store_file(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
    std::filesystem::create_directories(p.parent_path());
    if (std::filesystem::exists(p)) throw Error("refusing to overwrite '" + p.string() + "'");
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write '" + p.string() + "'");
}

inline std::string two_digit(int n) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d", n);
    return buf;
}

inline bool is_link_record(const std::filesystem::path& p) {
    constexpr std::size_t probe = 13;  // strlen(kDuplicatePrefix)
    std::ifstream in(p, std::ios::binary);
    char head[probe];
    in.read(head, probe);
    return in.gcount() == probe && std::memcmp(head, kDuplicatePrefix, probe) == 0;
}

}  // namespace detail

// Runs one carrier's plan. Any step failure quarantines this carrier's
// partial outputs under <project>/failed/<carrier> and rethrows; other
// carriers in the batch are unaffected.
inline StabilizedOutput run_plan(const std::string& project_id, const std::string& carrier_id,
                                 const std::filesystem::path& image_path,
                                 const std::optional<std::filesystem::path>& cue_path,
                                 const ProcessingPlan& plan, const std::filesystem::path& output_root) {
    namespace fs = std::filesystem;
    const std::string fs_carrier = fs_safe_component(carrier_id);
    const std::string fs_project = fs_safe_component(project_id);
    const fs::path masters = output_root / layout_path(fs_project, fs_carrier, PathRelation::MasterImage);
    const fs::path derived = output_root / layout_path(fs_project, fs_carrier, PathRelation::DerivedFromImages);

    StabilizedOutput out;
    out.carrier_id = carrier_id;
    out.plan = plan;
    if (fs_carrier != carrier_id)
        out.notes += "carrier id mapped to filesystem-safe '" + fs_carrier + "'; ";

    try {
        std::vector<std::uint8_t> image = detail::load_file(image_path);
        std::optional<CueSheet> cue;
        std::map<std::string, std::vector<std::uint8_t>> bin_files;
        std::vector<TrackPayload> payloads;

        for (PlanStep step : plan.steps) {
            switch (step) {
                case PlanStep::KeepImageAsMaster: {
                    const fs::path target = masters / image_path.filename();
                    detail::store_file(target, image);
                    out.master_image_paths.push_back(target);
                    if (cue_path) {
                        const auto cue_bytes = detail::load_file(*cue_path);
                        const fs::path cue_target = masters / cue_path->filename();
                        detail::store_file(cue_target, cue_bytes);
                        out.master_image_paths.push_back(cue_target);
                    }
                    break;
                }
                case PlanStep::SplitTracks: {
                    if (!cue_path) throw Error("plan needs a cue sheet but none was given");
                    cue = parse_cue_bytes(detail::load_file(*cue_path));
                    for (const auto& name : cue->source_files) {
                        if (name == image_path.filename().string()) bin_files[name] = image;
                        else bin_files[name] = detail::load_file(cue_path->parent_path() / name);
                    }
                    payloads = split_tracks(*cue, bin_files);
                    for (const auto& p : payloads) {
                        if (p.track.pregap_sectors > 0)
                            out.notes += "track " + std::to_string(p.track.number) + " preserves " +
                                         std::to_string(p.track.pregap_sectors) + " pregap sectors; ";
                    }
                    break;
                }
                case PlanStep::ExtractIsoFiles: {
                    if (payloads.empty()) {
                        const fs::path dest = derived / "extracted";
                        iso_extract(image, dest);
                        out.derived_paths.push_back(dest);
                    } else {
                        for (const auto& p : payloads) {
                            if (p.suggested_kind != PayloadKind::IsoData) continue;
                            const fs::path dest =
                                derived / ("track" + detail::two_digit(p.track.number));
                            iso_extract(p.bytes, dest);
                            out.derived_paths.push_back(dest);
                        }
                    }
                    break;
                }
                case PlanStep::WrapAudioWav:
                case PlanStep::CopyWavVerbatim: {
                    // Each audio track goes by its own head bytes: already
                    // WAV-wrapped payloads are copied verbatim (never a
                    // second header), raw CD-DA is wrapped.
                    for (const auto& p : payloads) {
                        if (p.suggested_kind == PayloadKind::IsoData) continue;
                        const fs::path target =
                            derived / ("track" + detail::two_digit(p.track.number) + ".wav");
                        if (p.suggested_kind == PayloadKind::WavWrappedAudio)
                            detail::store_file(target, p.bytes);
                        else
                            detail::store_file(target, wrap_wav(p.bytes));
                        out.derived_paths.push_back(target);
                    }
                    break;
                }
                case PlanStep::FlagForManual: {
                    const fs::path marker = derived / kManualMarkerName;
                    const std::string content = std::string(kManualPrefix) + plan.rationale + "\n";
                    detail::store_file(marker, std::span<const std::uint8_t>(
                                                   reinterpret_cast<const std::uint8_t*>(content.data()),
                                                   content.size()));
                    out.derived_paths.push_back(marker);
                    break;
                }
            }
        }
        return out;
    } catch (const std::exception& e) {
        // quarantine partial output, leave the rest of the batch alone
        const fs::path failed = output_root / fs_project / "failed" / fs_carrier;
        std::error_code ec;
        fs::create_directories(failed, ec);
        if (fs::exists(masters)) fs::rename(masters, failed / "masters", ec);
        if (fs::exists(derived)) fs::rename(derived, failed / "derived", ec);
        throw PipelineError(carrier_id, e.what());
    }
}

// ---- batch merge ---------------------------------------------------------

struct MergeReport {
    std::uint64_t files_copied = 0;
    std::vector<std::string> identical_collisions;  // merged silently, recorded here
    std::filesystem::path consolidated_manifest;

    nlohmann::json to_json() const {
        return nlohmann::json{{"files_copied", files_copied},
                              {"identical_collisions", identical_collisions},
                              {"consolidated_manifest", consolidated_manifest.string()}};
    }
};

// Unifies verified batch trees under project_root. Name collisions with
// identical digests merge; different digests abort with both sources named.
inline MergeReport merge_batches(const std::vector<std::filesystem::path>& batch_roots,
                                 const std::filesystem::path& project_root) {
    namespace fs = std::filesystem;
    MergeReport report;
    // verification gate
    for (const auto& root : batch_roots) {
        const fs::path mf = root / kManifestFileName;
        if (!fs::exists(mf)) throw Error("unverified batch (no manifest): " + root.string());
        auto verification = manifest_verify(manifest_read(mf), root);
        if (!verification.clean()) throw Error("unverified batch (manifest stale): " + root.string());
    }
    fs::create_directories(project_root);
    for (const auto& root : batch_roots) {
        for (const auto& rel : detail::list_files(root)) {
            const fs::path source = root / rel;
            const fs::path target = project_root / rel;
            if (fs::exists(target)) {
                const std::string a = sha256_hex_file(source);
                const std::string b = sha256_hex_file(target);
                if (a != b)
                    throw Error("merge conflict on '" + rel + "': " + source.string() + " vs " +
                                target.string());
                report.identical_collisions.push_back(rel);
                continue;
            }
            fs::create_directories(target.parent_path());
            fs::copy_file(source, target);
            ++report.files_copied;
        }
    }
    auto manifest = manifest_create(project_root);
    report.consolidated_manifest = project_root / kManifestFileName;
    manifest_write(manifest, report.consolidated_manifest);
    return report;
}

// ---- de-duplication --------------------------------------------------------

struct DedupeRecord {
    std::filesystem::path kept_path;  // lexicographically smallest of the group
    std::vector<std::filesystem::path> duplicate_paths;
    std::string digest;

    nlohmann::json to_json() const {
        nlohmann::json dups = nlohmann::json::array();
        for (const auto& d : duplicate_paths) dups.push_back(d.string());
        return nlohmann::json{
            {"kept", kept_path.string()}, {"duplicates", dups}, {"digest", digest}};
    }
};

// Groups files by digest under the consolidated manifest. Dry run by
// default; with apply=true every duplicate becomes a one-line link record
// pointing at the kept path, and the manifest is refreshed. Link records are
// never grouped again, which makes the operation idempotent.
inline std::vector<DedupeRecord> dedupe(const std::filesystem::path& project_root, bool apply = false) {
    namespace fs = std::filesystem;
    const fs::path mf = project_root / kManifestFileName;
    if (!fs::exists(mf)) throw Error("consolidated manifest missing: " + mf.string());
    auto manifest = manifest_read(mf);

    std::map<std::string, std::vector<std::string>> groups;  // digest -> sorted rel paths
    for (const auto& e : manifest.entries) {
        const fs::path p = project_root / e.relative_path;
        if (!fs::exists(p)) throw Error("manifest out of date: missing '" + e.relative_path + "'");
        const std::string actual = sha256_hex_file(p);
        if (actual != e.digest)
            throw Error("manifest out of date: digest mismatch on '" + e.relative_path + "'");
        if (detail::is_link_record(p)) continue;
        groups[e.digest].push_back(e.relative_path);
    }

    std::vector<DedupeRecord> records;
    for (auto& [digest, paths] : groups) {
        if (paths.size() < 2) continue;
        std::sort(paths.begin(), paths.end());
        DedupeRecord rec;
        rec.digest = digest;
        rec.kept_path = paths.front();
        for (std::size_t i = 1; i < paths.size(); ++i) {
            rec.duplicate_paths.emplace_back(paths[i]);
            if (apply) {
                const std::string pointer = std::string(kDuplicatePrefix) + paths.front() + "\n";
                std::ofstream out(project_root / paths[i], std::ios::binary | std::ios::trunc);
                out << pointer;
                if (!out) throw Error("cannot write link record '" + paths[i] + "'");
            }
        }
        records.push_back(std::move(rec));
    }
    std::sort(records.begin(), records.end(),
              [](const DedupeRecord& a, const DedupeRecord& b) { return a.kept_path < b.kept_path; });
    if (apply && !records.empty()) manifest_write(manifest_create(project_root), mf);
    return records;
}

}  // namespace carrierforge
