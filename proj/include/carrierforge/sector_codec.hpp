#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "carrierforge/util.hpp"

// Byte-level primitives for raw CD data: cue sheet parsing, BIN track
// splitting and framing, WAV synthesis, RIFF payload detection.
//
// Framing constants follow ECMA-130: a raw sector is 2352 bytes; Mode 1
// carries 2048 bytes of user data behind a 16-byte sync+header and ahead of
// 288 bytes of EDC/ECC. EDC/ECC bytes are discarded on deframing, never
// verified: unreadable sectors are a carrier-level failure, not a codec one.

namespace carrierforge {

inline constexpr std::size_t kRawSector = 2352;
inline constexpr std::size_t kDataSector = 2048;
inline constexpr std::size_t kSectorsPerSecond = 75;  // Red Book timing

enum class SectorMode {
    Audio2352,
    Mode1_2048,
    Mode1_2352,
    Mode2_2352,
    Mode2Form1_2352,
};

inline std::size_t raw_size(SectorMode m) {
    return m == SectorMode::Mode1_2048 ? kDataSector : kRawSector;
}

inline std::size_t user_data_size(SectorMode m) {
    switch (m) {
        case SectorMode::Audio2352: return 2352;
        case SectorMode::Mode1_2048: return 2048;
        case SectorMode::Mode1_2352: return 2048;
        case SectorMode::Mode2_2352: return 2336;  // Form1/Form2 sub-header left uninterpreted
        case SectorMode::Mode2Form1_2352: return 2048;
    }
    return 0;
}

inline bool is_audio_mode(SectorMode m) { return m == SectorMode::Audio2352; }

inline const char* to_string(SectorMode m) {
    switch (m) {
        case SectorMode::Audio2352: return "Audio2352";
        case SectorMode::Mode1_2048: return "Mode1_2048";
        case SectorMode::Mode1_2352: return "Mode1_2352";
        case SectorMode::Mode2_2352: return "Mode2_2352";
        case SectorMode::Mode2Form1_2352: return "Mode2Form1_2352";
    }
    return "?";
}

struct TrackDescriptor {
    int number = 0;                 // 1..99
    SectorMode mode = SectorMode::Audio2352;
    std::string source_file;
    std::uint64_t start_sector = 0;  // within source file
    // Empty until resolved: the last track of a file runs to end of file,
    // which is only known once the bytes are in hand (split_tracks fills it).
    std::optional<std::uint64_t> length_sectors;
    std::uint64_t pregap_sectors = 0;
};

struct CueSheet {
    std::vector<TrackDescriptor> tracks;
    std::vector<std::string> source_files;  // in FILE order, deduplicated
};

enum class PayloadKind { IsoData, RawAudio, WavWrappedAudio };

inline const char* to_string(PayloadKind k) {
    switch (k) {
        case PayloadKind::IsoData: return "IsoData";
        case PayloadKind::RawAudio: return "RawAudio";
        case PayloadKind::WavWrappedAudio: return "WavWrappedAudio";
    }
    return "?";
}

struct TrackPayload {
    TrackDescriptor track;  // length_sectors resolved
    std::vector<std::uint8_t> bytes;
    PayloadKind suggested_kind = PayloadKind::RawAudio;
};

// True iff the head of `bytes` is a RIFF/WAVE container.
inline bool detect_riff(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
           std::memcmp(bytes.data() + 8, "WAVE", 4) == 0;
}

// ---- cue sheets ------------------------------------------------------------

namespace detail {

inline std::vector<std::string> cue_tokens(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        if (line[i] == '"') {
            std::size_t close = line.find('"', i + 1);
            if (close == std::string_view::npos) return {};  // unterminated quote
            out.emplace_back(line.substr(i + 1, close - i - 1));
            i = close + 1;
        } else {
            std::size_t end = i;
            while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
            out.emplace_back(line.substr(i, end - i));
            i = end;
        }
    }
    return out;
}

inline std::optional<std::uint64_t> parse_msf(std::string_view s) {
    unsigned m, sec, f;
    if (std::sscanf(std::string(s).c_str(), "%u:%u:%u", &m, &sec, &f) != 3) return std::nullopt;
    if (sec >= 60 || f >= kSectorsPerSecond) return std::nullopt;
    return static_cast<std::uint64_t>(m) * 60 * kSectorsPerSecond + sec * kSectorsPerSecond + f;
}

inline std::optional<SectorMode> cue_mode(std::string_view token) {
    std::string t = upper_ascii(token);
    if (t == "AUDIO") return SectorMode::Audio2352;
    if (t == "MODE1/2048") return SectorMode::Mode1_2048;
    if (t == "MODE1/2352") return SectorMode::Mode1_2352;
    if (t == "MODE2/2352") return SectorMode::Mode2_2352;
    return std::nullopt;
}

inline std::optional<std::string> cue_mode_token(SectorMode m) {
    switch (m) {
        case SectorMode::Audio2352: return "AUDIO";
        case SectorMode::Mode1_2048: return "MODE1/2048";
        case SectorMode::Mode1_2352: return "MODE1/2352";
        case SectorMode::Mode2_2352: return "MODE2/2352";
        case SectorMode::Mode2Form1_2352: return std::nullopt;  // no cue token exists
    }
    return std::nullopt;
}

}  // namespace detail

struct CueParseError : Error {
    CueParseError(int line_no, const std::string& what_arg)
        : Error("cue line " + std::to_string(line_no) + ": " + what_arg), line(line_no) {}
    explicit CueParseError(const std::string& what_arg) : Error(what_arg), line(0) {}
    int line;
};

// Parses a cue sheet. INDEX 01 positions become start sectors (relative to
// the owning FILE); a pregap is the INDEX 00 -> INDEX 01 distance or an
// explicit PREGAP command. Track lengths are left open for the last track of
// each file and resolved against the file size by split_tracks.
inline CueSheet parse_cue(std::string_view text) {
    CueSheet sheet;
    std::string current_file;
    struct Pending {
        TrackDescriptor desc;
        std::optional<std::uint64_t> index0;
        std::optional<std::uint64_t> index1;
        int line = 0;
    };
    std::optional<Pending> pending;

    auto flush_pending = [&] {
        if (!pending) return;
        if (!pending->index1)
            throw CueParseError(pending->line, "track " + std::to_string(pending->desc.number) + " has no INDEX 01");
        pending->desc.start_sector = *pending->index1;
        if (pending->index0) {
            if (*pending->index0 > *pending->index1)
                throw CueParseError(pending->line, "INDEX 00 after INDEX 01");
            pending->desc.pregap_sectors = *pending->index1 - *pending->index0;
        }
        sheet.tracks.push_back(pending->desc);
        pending.reset();
    };

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        auto tokens = detail::cue_tokens(line);
        if (tokens.empty()) {
            if (line.find('"') != std::string_view::npos)
                throw CueParseError(line_no, "unterminated quote");
            continue;
        }
        std::string keyword = upper_ascii(tokens[0]);
        if (keyword == "REM" || keyword == "CATALOG" || keyword == "CDTEXTFILE" || keyword == "TITLE" ||
            keyword == "PERFORMER" || keyword == "SONGWRITER" || keyword == "FLAGS" || keyword == "ISRC" ||
            keyword == "POSTGAP") {
            continue;
        }
        if (keyword == "FILE") {
            if (tokens.size() < 2) throw CueParseError(line_no, "FILE needs a name");
            flush_pending();
            current_file = tokens[1];
            if (std::find(sheet.source_files.begin(), sheet.source_files.end(), current_file) ==
                sheet.source_files.end())
                sheet.source_files.push_back(current_file);
            continue;
        }
        if (keyword == "TRACK") {
            if (tokens.size() < 3) throw CueParseError(line_no, "TRACK needs number and mode");
            if (current_file.empty()) throw CueParseError(line_no, "TRACK before any FILE");
            flush_pending();
            int number = 0;
            try {
                number = std::stoi(tokens[1]);
            } catch (...) {
                throw CueParseError(line_no, "bad track number '" + tokens[1] + "'");
            }
            if (number < 1 || number > 99) throw CueParseError(line_no, "track number out of range 1-99");
            for (const auto& t : sheet.tracks) {
                if (t.number == number)
                    throw CueParseError(line_no, "duplicate track number " + std::to_string(number));
            }
            if (!sheet.tracks.empty() && sheet.tracks.back().number > number)
                throw CueParseError(line_no, "track numbers must increase");
            auto mode = detail::cue_mode(tokens[2]);
            if (!mode) throw CueParseError(line_no, "unknown track mode token '" + tokens[2] + "'");
            Pending p;
            p.desc.number = number;
            p.desc.mode = *mode;
            p.desc.source_file = current_file;
            p.line = line_no;
            pending = p;
            continue;
        }
        if (keyword == "INDEX") {
            if (!pending) throw CueParseError(line_no, "INDEX before TRACK");
            if (tokens.size() < 3) throw CueParseError(line_no, "INDEX needs number and MM:SS:FF");
            auto msf = detail::parse_msf(tokens[2]);
            if (!msf) throw CueParseError(line_no, "bad MM:SS:FF position '" + tokens[2] + "'");
            if (tokens[1] == "00" || tokens[1] == "0") {
                if (pending->index0) throw CueParseError(line_no, "duplicate INDEX 00");
                pending->index0 = *msf;
            } else if (tokens[1] == "01" || tokens[1] == "1") {
                if (pending->index1) throw CueParseError(line_no, "duplicate INDEX 01");
                pending->index1 = *msf;
            }
            continue;  // higher indices are sub-track markers, not needed here
        }
        if (keyword == "PREGAP") {
            if (!pending) throw CueParseError(line_no, "PREGAP before TRACK");
            if (tokens.size() < 2) throw CueParseError(line_no, "PREGAP needs MM:SS:FF");
            auto msf = detail::parse_msf(tokens[1]);
            if (!msf) throw CueParseError(line_no, "bad MM:SS:FF position '" + tokens[1] + "'");
            pending->desc.pregap_sectors = *msf;
            continue;
        }
        throw CueParseError(line_no, "unrecognized keyword '" + tokens[0] + "'");
    }
    flush_pending();

    if (sheet.tracks.empty()) throw CueParseError("no tracks");

    // Resolve lengths where the next track of the same file pins them.
    for (std::size_t i = 0; i + 1 < sheet.tracks.size(); ++i) {
        auto& cur = sheet.tracks[i];
        const auto& next = sheet.tracks[i + 1];
        if (cur.source_file != next.source_file) continue;
        // Gap bytes between the next track's INDEX 00 and INDEX 01 are
        // preserved: they tile onto the end of the current track.
        std::uint64_t boundary = next.start_sector;
        if (boundary <= cur.start_sector)
            throw CueParseError("track " + std::to_string(next.number) + " starts before track " +
                                std::to_string(cur.number) + " ends");
        cur.length_sectors = boundary - cur.start_sector;
    }
    return sheet;
}

// Decodes cue sheet bytes (UTF-8, falling back to Latin-1) and parses them.
inline CueSheet parse_cue_bytes(std::span<const std::uint8_t> bytes) {
    return parse_cue(decode_text(bytes).text);
}

// ---- track splitting and framing -------------------------------------------

// Deframes every track of `cue` out of its source file bytes.
inline std::vector<TrackPayload> split_tracks(const CueSheet& cue,
                                              const std::map<std::string, std::vector<std::uint8_t>>& bin_bytes_by_file) {
    std::vector<TrackPayload> out;
    out.reserve(cue.tracks.size());
    for (const auto& track : cue.tracks) {
        auto it = bin_bytes_by_file.find(track.source_file);
        if (it == bin_bytes_by_file.end())
            throw Error("missing source file '" + track.source_file + "' for track " +
                        std::to_string(track.number));
        const auto& file = it->second;
        const std::size_t raw = raw_size(track.mode);
        if (file.size() % raw != 0)
            throw Error("track " + std::to_string(track.number) + ": size of '" + track.source_file +
                        "' (" + std::to_string(file.size()) + " bytes) is not sector-aligned; expected a multiple of " +
                        std::to_string(raw));
        const std::uint64_t file_sectors = file.size() / raw;
        const std::uint64_t length =
            track.length_sectors ? *track.length_sectors
                                 : (track.start_sector <= file_sectors ? file_sectors - track.start_sector : 0);
        if (length == 0 || track.start_sector + length > file_sectors)
            throw Error("track " + std::to_string(track.number) + " range exceeds file '" +
                        track.source_file + "' (" + std::to_string(file_sectors) + " sectors)");

        TrackPayload payload;
        payload.track = track;
        payload.track.length_sectors = length;
        const std::size_t user = user_data_size(track.mode);
        payload.bytes.reserve(length * user);
        const std::uint8_t* base = file.data() + track.start_sector * raw;
        std::size_t skip = 0;
        switch (track.mode) {
            case SectorMode::Audio2352:
            case SectorMode::Mode1_2048: skip = 0; break;
            case SectorMode::Mode1_2352: skip = 16; break;
            case SectorMode::Mode2_2352: skip = 16; break;
            case SectorMode::Mode2Form1_2352: skip = 24; break;
        }
        if (skip == 0 && user == raw) {
            payload.bytes.assign(base, base + length * raw);
        } else {
            for (std::uint64_t s = 0; s < length; ++s) {
                const std::uint8_t* sector = base + s * raw;
                payload.bytes.insert(payload.bytes.end(), sector + skip, sector + skip + user);
            }
        }
        if (is_audio_mode(track.mode)) {
            payload.suggested_kind =
                detect_riff(payload.bytes) ? PayloadKind::WavWrappedAudio : PayloadKind::RawAudio;
        } else {
            payload.suggested_kind = PayloadKind::IsoData;
        }
        out.push_back(std::move(payload));
    }
    return out;
}

// Frames user data into raw sectors (inverse of split_tracks for one track).
// EDC/ECC regions are zero filled. `first_lba` seeds the Mode 1/2 header MSF.
inline std::vector<std::uint8_t> frame_track(SectorMode mode, std::span<const std::uint8_t> payload,
                                             std::uint64_t first_lba = 0) {
    const std::size_t user = user_data_size(mode);
    if (payload.size() % user != 0)
        throw Error("payload not a multiple of " + std::to_string(user) + " bytes");
    const std::size_t raw = raw_size(mode);
    const std::size_t sectors = payload.size() / user;
    if (mode == SectorMode::Audio2352 || mode == SectorMode::Mode1_2048)
        return std::vector<std::uint8_t>(payload.begin(), payload.end());

    auto bcd = [](unsigned v) { return static_cast<std::uint8_t>(((v / 10) << 4) | (v % 10)); };
    std::vector<std::uint8_t> out(sectors * raw, 0);
    for (std::size_t s = 0; s < sectors; ++s) {
        std::uint8_t* sec = out.data() + s * raw;
        sec[0] = 0x00;
        std::memset(sec + 1, 0xff, 10);
        sec[11] = 0x00;
        const std::uint64_t abs = first_lba + s + 150;  // 2-second lead-in offset
        sec[12] = bcd(static_cast<unsigned>(abs / (60 * kSectorsPerSecond)));
        sec[13] = bcd(static_cast<unsigned>((abs / kSectorsPerSecond) % 60));
        sec[14] = bcd(static_cast<unsigned>(abs % kSectorsPerSecond));
        std::size_t data_at = 16;
        if (mode == SectorMode::Mode1_2352) {
            sec[15] = 0x01;
        } else {
            sec[15] = 0x02;
            if (mode == SectorMode::Mode2Form1_2352) {
                // XA sub-header, duplicated: file 0, channel 0, submode data
                sec[16] = sec[20] = 0x00;
                sec[17] = sec[21] = 0x00;
                sec[18] = sec[22] = 0x08;
                sec[19] = sec[23] = 0x00;
                data_at = 24;
            }
        }
        std::memcpy(sec + data_at, payload.data() + s * user, user);
    }
    return out;
}

// ---- WAV synthesis -----------------------------------------------------------

inline constexpr std::size_t kWavHeaderSize = 44;

// Wraps CD-DA PCM (16-bit, stereo, 44100 Hz, little-endian) in a canonical
// RIFF/WAVE header. Odd payloads get one zero pad byte that is counted in the
// RIFF chunk size but not in the data chunk size.
inline std::vector<std::uint8_t> wrap_wav(std::span<const std::uint8_t> pcm) {
    const std::size_t data_size = pcm.size();
    const std::size_t padded = data_size + (data_size & 1);
    std::vector<std::uint8_t> out(kWavHeaderSize + padded, 0);
    std::uint8_t* p = out.data();
    std::memcpy(p, "RIFF", 4);
    write_u32le(p + 4, static_cast<std::uint32_t>(36 + padded));
    std::memcpy(p + 8, "WAVE", 4);
    std::memcpy(p + 12, "fmt ", 4);
    write_u32le(p + 16, 16);        // PCM fmt chunk size
    write_u16le(p + 20, 1);         // format tag: PCM
    write_u16le(p + 22, 2);         // channels
    write_u32le(p + 24, 44100);     // sample rate
    write_u32le(p + 28, 176400);    // byte rate
    write_u16le(p + 32, 4);         // block align
    write_u16le(p + 34, 16);        // bits per sample
    std::memcpy(p + 36, "data", 4);
    write_u32le(p + 40, static_cast<std::uint32_t>(data_size));
    if (data_size) std::memcpy(p + kWavHeaderSize, pcm.data(), data_size);
    return out;
}

}  // namespace carrierforge
