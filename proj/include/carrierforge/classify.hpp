#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carrierforge/fs_detect.hpp"
#include "carrierforge/sector_codec.hpp"

// Carrier-variant taxonomy and the per-variant processing plan. The decision
// order runs from the most specific signature to the least, with Unknown as
// the safe sink; classification never throws.

namespace carrierforge {

enum class CarrierClass {
    IsoDataDisk,
    UdfDataDisk,
    DvdVideo,
    HfsPlus,
    RedBookAudio,
    MixedMode,
    MalformedAudioWav,
    MdsOpaque,
    Unknown,
};

inline constexpr CarrierClass kAllCarrierClasses[] = {
    CarrierClass::IsoDataDisk,   CarrierClass::UdfDataDisk, CarrierClass::DvdVideo,
    CarrierClass::HfsPlus,       CarrierClass::RedBookAudio, CarrierClass::MixedMode,
    CarrierClass::MalformedAudioWav, CarrierClass::MdsOpaque, CarrierClass::Unknown,
};

inline const char* to_string(CarrierClass c) {
    switch (c) {
        case CarrierClass::IsoDataDisk: return "IsoDataDisk";
        case CarrierClass::UdfDataDisk: return "UdfDataDisk";
        case CarrierClass::DvdVideo: return "DvdVideo";
        case CarrierClass::HfsPlus: return "HfsPlus";
        case CarrierClass::RedBookAudio: return "RedBookAudio";
        case CarrierClass::MixedMode: return "MixedMode";
        case CarrierClass::MalformedAudioWav: return "MalformedAudioWav";
        case CarrierClass::MdsOpaque: return "MdsOpaque";
        case CarrierClass::Unknown: return "Unknown";
    }
    return "?";
}

inline std::optional<CarrierClass> carrier_class_from_string(std::string_view s) {
    for (CarrierClass c : kAllCarrierClasses)
        if (s == to_string(c)) return c;
    return std::nullopt;
}

enum class PlanStep {
    KeepImageAsMaster,
    SplitTracks,
    WrapAudioWav,
    CopyWavVerbatim,
    ExtractIsoFiles,
    FlagForManual,
};

inline const char* to_string(PlanStep s) {
    switch (s) {
        case PlanStep::KeepImageAsMaster: return "KeepImageAsMaster";
        case PlanStep::SplitTracks: return "SplitTracks";
        case PlanStep::WrapAudioWav: return "WrapAudioWav";
        case PlanStep::CopyWavVerbatim: return "CopyWavVerbatim";
        case PlanStep::ExtractIsoFiles: return "ExtractIsoFiles";
        case PlanStep::FlagForManual: return "FlagForManual";
    }
    return "?";
}

struct ProcessingPlan {
    std::vector<PlanStep> steps;
    std::string rationale;

    bool contains(PlanStep s) const {
        return std::find(steps.begin(), steps.end(), s) != steps.end();
    }
};

namespace detail {

// Head bytes of one track's user data, enough for a RIFF probe. Tracks that
// live outside the probed byte sequence read as empty.
inline std::span<const std::uint8_t> track_head(std::span<const std::uint8_t> image,
                                                const CueSheet& cue, const TrackDescriptor& t) {
    if (cue.source_files.empty() || t.source_file != cue.source_files.front()) return {};
    const std::uint64_t at = t.start_sector * raw_size(t.mode);
    if (at + 12 > image.size()) return {};
    return image.subspan(at, 12);
}

inline std::optional<std::vector<std::uint8_t>> first_data_payload(std::span<const std::uint8_t> image,
                                                                   const CueSheet& cue) {
    try {
        std::map<std::string, std::vector<std::uint8_t>> files;
        if (cue.source_files.size() != 1) return std::nullopt;
        files[cue.source_files.front()] = std::vector<std::uint8_t>(image.begin(), image.end());
        for (auto& p : split_tracks(cue, files)) {
            if (p.suggested_kind == PayloadKind::IsoData) return std::move(p.bytes);
        }
    } catch (const Error&) {
    }
    return std::nullopt;
}

inline bool has_video_ts(std::span<const std::uint8_t> payload) {
    try {
        return detect_dvd_video(iso_list(payload));
    } catch (const Error&) {
        return false;  // unreadable tree cannot prove DVD-Video
    }
}

}  // namespace detail

// Assigns the carrier-variant taxonomy class. `image` is the disk image (or
// the cue's binary file when a cue sheet accompanies it).
inline CarrierClass classify(std::span<const std::uint8_t> image, const CueSheet* cue = nullptr) {
    if (detect_mds(image)) return CarrierClass::MdsOpaque;

    if (cue && !cue->tracks.empty()) {
        const bool any_audio = std::any_of(cue->tracks.begin(), cue->tracks.end(),
                                           [](const TrackDescriptor& t) { return is_audio_mode(t.mode); });
        if (any_audio) {
            const bool all_audio = std::all_of(cue->tracks.begin(), cue->tracks.end(),
                                               [](const TrackDescriptor& t) { return is_audio_mode(t.mode); });
            if (!all_audio) return CarrierClass::MixedMode;
            for (const auto& t : cue->tracks) {
                if (detect_riff(detail::track_head(image, *cue, t))) return CarrierClass::MalformedAudioWav;
            }
            return CarrierClass::RedBookAudio;
        }
    }

    // Single data payload: deframed track 1 when a (data-only) cue is
    // present, the image itself otherwise.
    std::optional<std::vector<std::uint8_t>> deframed;
    std::span<const std::uint8_t> payload = image;
    if (cue) {
        deframed = detail::first_data_payload(image, *cue);
        if (!deframed) return CarrierClass::Unknown;
        payload = *deframed;
    }
    if (detect_hfsplus(payload)) return CarrierClass::HfsPlus;
    const bool iso = detect_iso9660(payload).has_value();
    const bool udf = detect_udf(payload).has_value();
    if (iso && udf) return detail::has_video_ts(payload) ? CarrierClass::DvdVideo : CarrierClass::UdfDataDisk;
    if (iso) return detail::has_video_ts(payload) ? CarrierClass::DvdVideo : CarrierClass::IsoDataDisk;
    return CarrierClass::Unknown;
}

// Deterministic class -> plan mapping. Every plan keeps the master image;
// variants the toolkit cannot post-process end in a manual flag.
inline ProcessingPlan plan_for(CarrierClass cls) {
    ProcessingPlan plan;
    plan.rationale = std::string("classified as ") + to_string(cls);
    plan.steps.push_back(PlanStep::KeepImageAsMaster);
    switch (cls) {
        case CarrierClass::IsoDataDisk:
        case CarrierClass::UdfDataDisk:
        case CarrierClass::DvdVideo:
            plan.steps.push_back(PlanStep::ExtractIsoFiles);
            break;
        case CarrierClass::RedBookAudio:
            plan.steps.push_back(PlanStep::SplitTracks);
            plan.steps.push_back(PlanStep::WrapAudioWav);
            break;
        case CarrierClass::MixedMode:
            plan.steps.push_back(PlanStep::SplitTracks);
            plan.steps.push_back(PlanStep::ExtractIsoFiles);
            plan.steps.push_back(PlanStep::WrapAudioWav);
            break;
        case CarrierClass::MalformedAudioWav:
            plan.steps.push_back(PlanStep::SplitTracks);
            plan.steps.push_back(PlanStep::CopyWavVerbatim);
            break;
        case CarrierClass::HfsPlus:
        case CarrierClass::MdsOpaque:
        case CarrierClass::Unknown:
            plan.steps.push_back(PlanStep::FlagForManual);
            break;
    }
    return plan;
}

}  // namespace carrierforge
