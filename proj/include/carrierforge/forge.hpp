#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carrierforge/classify.hpp"
#include "carrierforge/sector_codec.hpp"
#include "carrierforge/util.hpp"

// Deterministic generator of synthetic carriers and corruptions: the test
// oracle for every parser and for the end-to-end pipeline. Images are the
// minimum standards-conformant shape our own detectors need, plus enough
// conformance (both-endian fields, path tables) that independent ISO readers
// open them. Pseudo-random payloads come from SplitMix64, chosen because its
// output is pinned by a published reference implementation and reproduces
// bit-for-bit across platforms.

namespace carrierforge {

struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    void fill(std::span<std::uint8_t> out) {
        std::size_t i = 0;
        while (i < out.size()) {
            std::uint64_t v = next();
            for (int k = 0; k < 8 && i < out.size(); ++k, ++i) {
                out[i] = static_cast<std::uint8_t>(v >> (k * 8));
            }
        }
    }
    std::vector<std::uint8_t> bytes(std::size_t n) {
        std::vector<std::uint8_t> out(n);
        fill(out);
        return out;
    }
};

struct ForgeFileSpec {
    std::string path;                          // forward slashes
    std::optional<std::uint64_t> random_size;  // seeded payload of this size
    std::optional<std::vector<std::uint8_t>> content;
};

struct ForgeTrackSpec {
    SectorMode mode = SectorMode::Audio2352;
    std::uint64_t sectors = 0;  // 0 for data tracks framing the tree image
    std::optional<std::vector<std::uint8_t>> payload;
};

struct ForgeSpec {
    CarrierClass kind = CarrierClass::IsoDataDisk;
    std::string volume_id = "FORGE";
    std::uint64_t seed = 1;
    bool joliet = false;
    bool hfsx = false;
    std::string nsr = "NSR02";       // UDF recognition version for bridge images
    std::uint64_t raw_sectors = 4;   // payload size for signature-only kinds
    std::vector<ForgeFileSpec> tree;
    std::vector<ForgeTrackSpec> tracks;

    nlohmann::json to_json() const;
    static ForgeSpec from_json(const nlohmann::json& j);
};

struct ForgeFile {
    std::string path;
    std::vector<std::uint8_t> bytes;
};

struct ForgeTrack {
    SectorMode mode;
    std::vector<std::uint8_t> payload;  // user data as split_tracks must recover it
};

struct Mutation {
    enum class Kind { BitFlip, Truncate, ZeroSector };
    Kind kind = Kind::BitFlip;
    std::uint64_t offset = 0;  // BitFlip: byte offset
    int bit = 0;               // BitFlip: bit index 0..7
    std::uint64_t length = 0;  // Truncate: resulting length
    std::uint64_t index = 0;   // ZeroSector: 2048-byte sector index

    static Mutation bit_flip(std::uint64_t offset, int bit = 0) {
        Mutation m;
        m.kind = Kind::BitFlip;
        m.offset = offset;
        m.bit = bit;
        return m;
    }
    static Mutation truncate(std::uint64_t length) {
        Mutation m;
        m.kind = Kind::Truncate;
        m.length = length;
        return m;
    }
    static Mutation zero_sector(std::uint64_t index) {
        Mutation m;
        m.kind = Kind::ZeroSector;
        m.index = index;
        return m;
    }
};

struct ForgeTruth {
    CarrierClass kind = CarrierClass::Unknown;
    std::string volume_id;
    std::vector<ForgeFile> tree;     // resolved file bytes (data kinds, mixed data track)
    std::vector<ForgeTrack> tracks;  // resolved per-track payloads (cue kinds)
    std::optional<CueSheet> cue_sheet;
    std::vector<std::string> mutations;
};

struct ForgeArtifact {
    std::vector<std::uint8_t> image;  // .iso / .bin / raw payload bytes
    std::optional<std::string> cue_text;
    std::string suggested_image_name = "image.iso";
    ForgeTruth truth;
};

// ---------------------------------------------------------------------------
// ISO 9660 image mastering (test fixtures only)
// ---------------------------------------------------------------------------

namespace forge_detail {

inline constexpr std::size_t kBlock = 2048;
// Fixed recording date for deterministic images: 2011-11-01 00:00:00 UTC.
inline constexpr std::uint8_t kDirDate[7] = {111, 11, 1, 0, 0, 0, 0};
inline constexpr char kVolDate[17] = {'2', '0', '1', '1', '1', '1', '0', '1', '0',
                                      '0', '0', '0', '0', '0', '0', '0', '\0'};

struct TreeNode {
    std::string name;  // source spelling
    bool is_dir = false;
    const std::vector<std::uint8_t>* bytes = nullptr;
    std::vector<std::unique_ptr<TreeNode>> children;
    TreeNode* parent = nullptr;

    std::string iso_id;     // primary-tree identifier, no version suffix
    std::string joliet_id;  // UCS-2BE encoded identifier
    std::uint32_t extent = 0;
    std::uint32_t iso_dir_size = 0;
    std::uint32_t joliet_extent = 0;
    std::uint32_t joliet_dir_size = 0;
};

inline bool valid_83(const std::string& upper, bool directory) {
    auto ok_char = [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    };
    const std::size_t dot = upper.find('.');
    if (directory || dot == std::string::npos) {
        if (upper.empty() || upper.size() > 8 || dot != std::string::npos) return false;
        return std::all_of(upper.begin(), upper.end(), ok_char);
    }
    const std::string name = upper.substr(0, dot), ext = upper.substr(dot + 1);
    if (name.empty() || name.size() > 8 || ext.size() > 3) return false;
    if (ext.find('.') != std::string::npos) return false;
    return std::all_of(name.begin(), name.end(), ok_char) &&
           std::all_of(ext.begin(), ext.end(), ok_char);
}

inline std::string mangle_83(const std::string& original, bool directory, int serial) {
    std::string up = upper_ascii(original);
    std::string name, ext;
    const std::size_t dot = directory ? std::string::npos : up.rfind('.');
    if (dot == std::string::npos) name = up;
    else {
        name = up.substr(0, dot);
        ext = up.substr(dot + 1);
    }
    auto filter = [](std::string& s) {
        std::string out;
        for (char c : s)
            if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_') out.push_back(c);
        s = out;
    };
    filter(name);
    filter(ext);
    if (name.empty()) name = "X";
    const std::string tag = std::to_string(serial);
    if (name.size() + tag.size() > 8) name.resize(8 - tag.size());
    name += tag;
    if (ext.size() > 3) ext.resize(3);
    return directory || ext.empty() ? name : name + "." + ext;
}

inline std::string ucs2be(const std::string& utf8ish) {
    // fixture names are ASCII; anything else was rejected earlier
    std::string out;
    for (unsigned char c : utf8ish) {
        out.push_back('\0');
        out.push_back(static_cast<char>(c));
    }
    return out;
}

inline std::size_t record_len(std::size_t id_len) {
    std::size_t len = 33 + id_len;
    if (id_len % 2 == 0) ++len;  // pad to even record length
    return len;
}

inline void append_dir_record(std::vector<std::uint8_t>& out, const std::string& id,
                              std::uint32_t extent, std::uint32_t size, bool directory) {
    const std::size_t len = record_len(id.size());
    std::vector<std::uint8_t> rec(len, 0);
    rec[0] = static_cast<std::uint8_t>(len);
    write_u32_both(rec.data() + 2, extent);
    write_u32_both(rec.data() + 10, size);
    std::memcpy(rec.data() + 18, kDirDate, 7);
    rec[25] = directory ? 0x02 : 0x00;
    write_u16_both(rec.data() + 28, 1);
    rec[32] = static_cast<std::uint8_t>(id.size());
    std::memcpy(rec.data() + 33, id.data(), id.size());
    out.insert(out.end(), rec.begin(), rec.end());
}

struct BuiltTree {
    std::unique_ptr<TreeNode> root;
    std::vector<TreeNode*> dirs;   // BFS order, root first
    std::vector<TreeNode*> files;  // traversal order
};

inline BuiltTree build_tree(const std::vector<ForgeFile>& files, bool joliet) {
    BuiltTree t;
    t.root = std::make_unique<TreeNode>();
    t.root->is_dir = true;
    for (const auto& f : files) {
        TreeNode* cur = t.root.get();
        std::string_view rest = f.path;
        while (true) {
            const std::size_t slash = rest.find('/');
            const std::string part(rest.substr(0, slash));
            if (part.empty() || part == "." || part == "..")
                throw Error("forge: bad tree path '" + f.path + "'");
            const bool leaf = slash == std::string_view::npos;
            TreeNode* child = nullptr;
            for (auto& c : cur->children)
                if (c->name == part) child = c.get();
            if (!child) {
                auto node = std::make_unique<TreeNode>();
                node->name = part;
                node->is_dir = !leaf;
                node->parent = cur;
                child = node.get();
                cur->children.push_back(std::move(node));
            } else if (leaf || !child->is_dir) {
                throw Error("forge: duplicate or conflicting tree path '" + f.path + "'");
            }
            if (leaf) {
                child->bytes = &f.bytes;
                break;
            }
            cur = child;
            rest = rest.substr(slash + 1);
        }
    }

    // identifiers + deterministic ordering
    struct Assign {
        bool joliet;
        void operator()(TreeNode* n) const {
            int serial = 0;
            for (auto& c : n->children) {
                std::string up = upper_ascii(c->name);
                if (valid_83(up, c->is_dir)) {
                    c->iso_id = up;
                } else if (joliet) {
                    c->iso_id = mangle_83(c->name, c->is_dir, serial++);
                } else {
                    throw Error("forge: name '" + c->name +
                                "' is not representable in 8.3 uppercase (enable joliet)");
                }
                c->joliet_id = ucs2be(c->name);
                if (c->joliet_id.size() > 220) throw Error("forge: name too long: '" + c->name + "'");
            }
            std::sort(n->children.begin(), n->children.end(),
                      [](const auto& a, const auto& b) { return a->iso_id < b->iso_id; });
            for (auto& c : n->children)
                if (c->is_dir) (*this)(c.get());
        }
    };
    Assign{joliet}(t.root.get());

    // BFS directory order for path tables
    t.dirs.push_back(t.root.get());
    for (std::size_t i = 0; i < t.dirs.size(); ++i) {
        for (auto& c : t.dirs[i]->children) {
            if (c->is_dir) t.dirs.push_back(c.get());
            else t.files.push_back(c.get());
        }
    }
    return t;
}

// Directory extent payload size, honoring the no-record-across-sector rule.
inline std::uint32_t dir_alloc_size(const TreeNode* dir, bool joliet) {
    std::size_t pos = 34 + 34;  // "." and ".." records
    for (const auto& c : dir->children) {
        std::string id = joliet ? c->joliet_id : c->iso_id;
        if (!c->is_dir) id += joliet ? ucs2be(";1") : ";1";
        const std::size_t len = record_len(id.size());
        if (pos % kBlock + len > kBlock) pos = (pos / kBlock + 1) * kBlock;
        pos += len;
    }
    return static_cast<std::uint32_t>(((pos + kBlock - 1) / kBlock) * kBlock);
}

inline std::vector<std::uint8_t> render_dir(const TreeNode* dir, bool joliet, std::uint32_t self_extent,
                                            std::uint32_t self_size, std::uint32_t parent_extent,
                                            std::uint32_t parent_size) {
    std::vector<std::uint8_t> out;
    append_dir_record(out, std::string(1, '\0'), self_extent, self_size, true);
    append_dir_record(out, std::string(1, '\x01'), parent_extent, parent_size, true);
    for (const auto& c : dir->children) {
        std::string id = joliet ? c->joliet_id : c->iso_id;
        if (!c->is_dir) id += joliet ? ucs2be(";1") : ";1";
        const std::size_t len = record_len(id.size());
        if (out.size() % kBlock + len > kBlock) out.resize((out.size() / kBlock + 1) * kBlock, 0);
        const std::uint32_t extent = joliet && c->is_dir ? c->joliet_extent : c->extent;
        const std::uint32_t size = c->is_dir ? (joliet ? c->joliet_dir_size : c->iso_dir_size)
                                             : static_cast<std::uint32_t>(c->bytes->size());
        append_dir_record(out, id, extent, size, c->is_dir);
    }
    out.resize(self_size, 0);
    return out;
}

inline std::vector<std::uint8_t> render_path_table(const std::vector<TreeNode*>& dirs, bool joliet,
                                                   bool big_endian) {
    std::vector<std::uint8_t> out;
    std::map<const TreeNode*, std::uint16_t> index;
    std::uint16_t n = 0;
    for (const TreeNode* d : dirs) index[d] = ++n;
    for (const TreeNode* d : dirs) {
        std::string id = d->parent ? (joliet ? d->joliet_id : d->iso_id) : std::string(1, '\0');
        std::vector<std::uint8_t> e(8 + id.size() + (id.size() % 2), 0);
        e[0] = static_cast<std::uint8_t>(id.size());
        const std::uint32_t extent = joliet ? d->joliet_extent : d->extent;
        const std::uint16_t parent = d->parent ? index[d->parent] : 1;
        if (big_endian) {
            write_u32be(e.data() + 2, extent);
            write_u16be(e.data() + 6, parent);
        } else {
            write_u32le(e.data() + 2, extent);
            write_u16le(e.data() + 6, parent);
        }
        std::memcpy(e.data() + 8, id.data(), id.size());
        out.insert(out.end(), e.begin(), e.end());
    }
    return out;
}

inline void render_volume_descriptor(std::vector<std::uint8_t>& image, std::size_t at, std::uint8_t type,
                                     const std::string& volume_id, std::uint32_t total_sectors,
                                     std::uint32_t pt_size, std::uint32_t pt_l_lba, std::uint32_t pt_m_lba,
                                     std::uint32_t root_extent, std::uint32_t root_size, bool joliet_escapes) {
    std::uint8_t* d = image.data() + at;
    d[0] = type;
    std::memcpy(d + 1, "CD001", 5);
    d[6] = 1;
    std::memset(d + 8, ' ', 32);  // system identifier
    std::string vid = joliet_escapes ? ucs2be(volume_id.substr(0, 16)) : volume_id;
    if (vid.size() > 32) vid.resize(32);
    if (joliet_escapes) {
        std::memset(d + 40, 0, 32);
    } else {
        std::memset(d + 40, ' ', 32);
    }
    std::memcpy(d + 40, vid.data(), vid.size());
    write_u32_both(d + 80, total_sectors);
    if (joliet_escapes) std::memcpy(d + 88, "%/E", 3);  // UCS-2 level 3
    write_u16_both(d + 120, 1);
    write_u16_both(d + 124, 1);
    write_u16_both(d + 128, kBlock);
    write_u32_both(d + 132, pt_size);
    write_u32le(d + 140, pt_l_lba);
    write_u32be(d + 148, pt_m_lba);
    // root directory record, fixed 34 bytes
    std::vector<std::uint8_t> rootrec;
    append_dir_record(rootrec, std::string(1, '\0'), root_extent, root_size, true);
    std::memcpy(d + 156, rootrec.data(), 34);
    std::memset(d + 190, joliet_escapes ? 0 : ' ', 128 * 4);  // set/publisher/preparer/application
    std::memset(d + 702, joliet_escapes ? 0 : ' ', 37 * 3);   // copyright/abstract/bibliographic
    std::memcpy(d + 813, kVolDate, 16);
    std::memcpy(d + 830, kVolDate, 16);
    std::memset(d + 847, '0', 16);  // expiration: not specified
    std::memcpy(d + 864, kVolDate, 16);
    d[881] = 1;  // file structure version
}

inline std::vector<std::uint8_t> build_iso(const std::vector<ForgeFile>& files, const std::string& volume_id,
                                           bool joliet, bool udf_bridge, const std::string& nsr) {
    BuiltTree tree = build_tree(files, joliet);

    // descriptor sectors
    std::uint32_t lba = 16;
    const std::uint32_t pvd_lba = lba++;
    const std::uint32_t svd_lba = joliet ? lba++ : 0;
    const std::uint32_t term_lba = lba++;
    std::uint32_t vrs_lba = 0;
    if (udf_bridge) {
        vrs_lba = lba;
        lba += 3;  // BEA01, NSRxx, TEA01
    }

    auto pt_l = render_path_table(tree.dirs, false, false);
    auto pt_m = render_path_table(tree.dirs, false, true);
    const std::uint32_t pt_lba_l = lba;
    lba += static_cast<std::uint32_t>((pt_l.size() + kBlock - 1) / kBlock);
    const std::uint32_t pt_lba_m = lba;
    lba += static_cast<std::uint32_t>((pt_m.size() + kBlock - 1) / kBlock);

    std::uint32_t jpt_lba_l = 0, jpt_lba_m = 0;
    std::vector<std::uint8_t> jpt_l, jpt_m;

    for (TreeNode* d : tree.dirs) {
        d->iso_dir_size = dir_alloc_size(d, false);
        d->extent = lba;
        lba += d->iso_dir_size / kBlock;
    }
    if (joliet) {
        for (TreeNode* d : tree.dirs) {
            d->joliet_dir_size = dir_alloc_size(d, true);
            d->joliet_extent = lba;
            lba += d->joliet_dir_size / kBlock;
        }
        jpt_l = render_path_table(tree.dirs, true, false);
        jpt_m = render_path_table(tree.dirs, true, true);
        jpt_lba_l = lba;
        lba += static_cast<std::uint32_t>((jpt_l.size() + kBlock - 1) / kBlock);
        jpt_lba_m = lba;
        lba += static_cast<std::uint32_t>((jpt_m.size() + kBlock - 1) / kBlock);
    }
    for (TreeNode* f : tree.files) {
        f->extent = lba;
        lba += static_cast<std::uint32_t>((f->bytes->size() + kBlock - 1) / kBlock);
    }
    const std::uint32_t total_sectors = lba;

    std::vector<std::uint8_t> image(static_cast<std::size_t>(total_sectors) * kBlock, 0);
    auto place = [&](std::uint32_t at_lba, std::span<const std::uint8_t> bytes) {
        std::memcpy(image.data() + static_cast<std::size_t>(at_lba) * kBlock, bytes.data(), bytes.size());
    };

    render_volume_descriptor(image, static_cast<std::size_t>(pvd_lba) * kBlock, 1, volume_id,
                             total_sectors, static_cast<std::uint32_t>(pt_l.size()), pt_lba_l, pt_lba_m,
                             tree.root->extent, tree.root->iso_dir_size, false);
    if (joliet)
        render_volume_descriptor(image, static_cast<std::size_t>(svd_lba) * kBlock, 2, volume_id,
                                 total_sectors, static_cast<std::uint32_t>(jpt_l.size()), jpt_lba_l,
                                 jpt_lba_m, tree.root->joliet_extent, tree.root->joliet_dir_size, true);
    {
        std::uint8_t* t = image.data() + static_cast<std::size_t>(term_lba) * kBlock;
        t[0] = 255;
        std::memcpy(t + 1, "CD001", 5);
        t[6] = 1;
    }
    if (udf_bridge) {
        const char* ids[3] = {"BEA01", nsr.c_str(), "TEA01"};
        for (int i = 0; i < 3; ++i) {
            std::uint8_t* v = image.data() + static_cast<std::size_t>(vrs_lba + i) * kBlock;
            v[0] = 0;
            std::memcpy(v + 1, ids[i], 5);
            v[6] = 1;
        }
    }
    // re-render now that directory extents are known (sizes were needed early)
    place(pt_lba_l, render_path_table(tree.dirs, false, false));
    place(pt_lba_m, render_path_table(tree.dirs, false, true));
    for (const TreeNode* d : tree.dirs) {
        const TreeNode* parent = d->parent ? d->parent : d;
        place(d->extent,
              render_dir(d, false, d->extent, d->iso_dir_size, parent->extent, parent->iso_dir_size));
    }
    if (joliet) {
        place(jpt_lba_l, jpt_l);
        place(jpt_lba_m, jpt_m);
        for (const TreeNode* d : tree.dirs) {
            const TreeNode* parent = d->parent ? d->parent : d;
            place(d->joliet_extent, render_dir(d, true, d->joliet_extent, d->joliet_dir_size,
                                               parent->joliet_extent, parent->joliet_dir_size));
        }
    }
    for (const TreeNode* f : tree.files)
        if (!f->bytes->empty()) place(f->extent, *f->bytes);
    return image;
}

}  // namespace forge_detail

// ---------------------------------------------------------------------------
// forge / corrupt
// ---------------------------------------------------------------------------

namespace forge_detail {

inline std::vector<ForgeFile> resolve_tree(const ForgeSpec& spec, SplitMix64& rng) {
    std::vector<ForgeFile> out;
    for (const auto& f : spec.tree) {
        ForgeFile file;
        file.path = f.path;
        if (f.content) file.bytes = *f.content;
        else file.bytes = rng.bytes(static_cast<std::size_t>(f.random_size.value_or(0)));
        out.push_back(std::move(file));
    }
    return out;
}

inline std::string msf_string(std::uint64_t sector) {
    const unsigned m = static_cast<unsigned>(sector / (60 * kSectorsPerSecond));
    const unsigned s = static_cast<unsigned>((sector / kSectorsPerSecond) % 60);
    const unsigned f = static_cast<unsigned>(sector % kSectorsPerSecond);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02u:%02u:%02u", m, s, f);
    return buf;
}

}  // namespace forge_detail

inline ForgeArtifact forge(const ForgeSpec& spec) {
    using namespace forge_detail;
    ForgeArtifact art;
    art.truth.kind = spec.kind;
    art.truth.volume_id = spec.volume_id;
    SplitMix64 rng(spec.seed);

    const bool cue_kind = spec.kind == CarrierClass::RedBookAudio ||
                          spec.kind == CarrierClass::MixedMode ||
                          spec.kind == CarrierClass::MalformedAudioWav;

    if (cue_kind) {
        if (spec.tracks.empty()) throw Error("forge: cue kinds need at least one track");
        art.truth.tree = resolve_tree(spec, rng);
        std::vector<std::uint8_t> inner_iso;
        if (spec.kind == CarrierClass::MixedMode) {
            if (art.truth.tree.empty()) throw Error("forge: MixedMode needs a tree for its data track");
            inner_iso = build_iso(art.truth.tree, spec.volume_id, spec.joliet, false, spec.nsr);
        }

        CueSheet cue;
        cue.source_files.push_back("image.bin");
        std::uint64_t position = 0;  // raw sectors into the bin
        std::string cue_text = "FILE \"image.bin\" BINARY\n";
        bool representable = true;
        int number = 0;
        for (const auto& ts : spec.tracks) {
            ++number;
            ForgeTrack track;
            track.mode = ts.mode;
            const std::size_t user = user_data_size(ts.mode);
            if (ts.payload) {
                track.payload = *ts.payload;
            } else if (!is_audio_mode(ts.mode)) {
                if (spec.kind != CarrierClass::MixedMode)
                    throw Error("forge: data tracks only make sense for MixedMode");
                track.payload = inner_iso;
            } else if (spec.kind == CarrierClass::MalformedAudioWav) {
                const std::uint64_t sectors = ts.sectors ? ts.sectors : 2;
                track.payload = wrap_wav(rng.bytes(static_cast<std::size_t>(sectors * kRawSector - kWavHeaderSize)));
            } else {
                const std::uint64_t sectors = ts.sectors ? ts.sectors : 2;
                track.payload = rng.bytes(static_cast<std::size_t>(sectors * kRawSector));
            }
            if (track.payload.size() % user != 0)
                throw Error("forge: track " + std::to_string(number) + " payload not a multiple of " +
                            std::to_string(user));
            if (spec.tracks.size() > 1 && raw_size(ts.mode) != kRawSector)
                throw Error("forge: multi-track cues must use 2352-byte raw modes");

            auto framed = frame_track(ts.mode, track.payload, position);
            const std::uint64_t sectors = framed.size() / raw_size(ts.mode);

            TrackDescriptor desc;
            desc.number = number;
            desc.mode = ts.mode;
            desc.source_file = "image.bin";
            desc.start_sector = position;
            desc.length_sectors = sectors;
            cue.tracks.push_back(desc);

            auto token = detail::cue_mode_token(ts.mode);
            if (token) {
                char head[32];
                std::snprintf(head, sizeof(head), "  TRACK %02d ", number);
                cue_text += head + *token + "\n";
                cue_text += "    INDEX 01 " + msf_string(position) + "\n";
            } else {
                representable = false;
            }

            art.image.insert(art.image.end(), framed.begin(), framed.end());
            position += sectors;
            art.truth.tracks.push_back(std::move(track));
        }
        art.truth.cue_sheet = cue;
        if (representable) art.cue_text = cue_text;
        art.suggested_image_name = "image.bin";
        return art;
    }

    switch (spec.kind) {
        case CarrierClass::IsoDataDisk:
        case CarrierClass::UdfDataDisk:
        case CarrierClass::DvdVideo: {
            art.truth.tree = resolve_tree(spec, rng);
            if (spec.kind == CarrierClass::DvdVideo) {
                const bool has_video = std::any_of(art.truth.tree.begin(), art.truth.tree.end(),
                                                   [](const ForgeFile& f) {
                                                       return f.path.rfind("VIDEO_TS/", 0) == 0;
                                                   });
                if (!has_video) {
                    art.truth.tree.push_back({"VIDEO_TS/VIDEO_TS.IFO", rng.bytes(2048)});
                    art.truth.tree.push_back({"VIDEO_TS/VTS_01_1.VOB", rng.bytes(4096)});
                }
            }
            const bool bridge = spec.kind != CarrierClass::IsoDataDisk;
            art.image = build_iso(art.truth.tree, spec.volume_id, spec.joliet, bridge, spec.nsr);
            art.suggested_image_name = "image.iso";
            return art;
        }
        case CarrierClass::HfsPlus: {
            art.image.assign(static_cast<std::size_t>(spec.raw_sectors) * 2048, 0);
            if (art.image.size() < 1536) art.image.resize(1536, 0);
            art.image[1024] = 'H';
            art.image[1025] = spec.hfsx ? 'X' : '+';
            art.image[1027] = spec.hfsx ? 5 : 4;  // big-endian version field
            // content region beyond the header stays deterministic
            auto noise = rng.bytes(art.image.size() - 1536);
            std::copy(noise.begin(), noise.end(), art.image.begin() + 1536);
            art.suggested_image_name = "image.img";
            return art;
        }
        case CarrierClass::MdsOpaque: {
            static constexpr char kSig[] = "MEDIA DESCRIPTOR";
            art.image = rng.bytes(static_cast<std::size_t>(spec.raw_sectors) * 2048);
            if (art.image.size() < 32) art.image.resize(32, 0);
            std::memcpy(art.image.data(), kSig, sizeof(kSig) - 1);
            art.suggested_image_name = "image.mds";
            return art;
        }
        case CarrierClass::Unknown: {
            art.image = rng.bytes(static_cast<std::size_t>(spec.raw_sectors) * 2048);
            if (art.image.size() >= 1026) art.image[1024] = art.image[1025] = 0;  // never HFS+
            art.suggested_image_name = "image.img";
            return art;
        }
        default:
            throw Error("forge: unhandled kind");
    }
}

// Returns a mutated copy; the input artifact is untouched and the mutation is
// recorded in the copy's ground truth.
inline ForgeArtifact corrupt(const ForgeArtifact& artifact, const Mutation& m) {
    ForgeArtifact out = artifact;
    switch (m.kind) {
        case Mutation::Kind::BitFlip:
            if (m.offset >= out.image.size() || m.bit < 0 || m.bit > 7)
                throw Error("corrupt: bit flip out of range");
            out.image[m.offset] ^= static_cast<std::uint8_t>(1u << m.bit);
            out.truth.mutations.push_back("bitflip@" + std::to_string(m.offset) + "." + std::to_string(m.bit));
            break;
        case Mutation::Kind::Truncate:
            if (m.length > out.image.size()) throw Error("corrupt: truncate length out of range");
            out.image.resize(m.length);
            out.truth.mutations.push_back("truncate@" + std::to_string(m.length));
            break;
        case Mutation::Kind::ZeroSector: {
            const std::uint64_t at = m.index * 2048;
            if (at + 2048 > out.image.size()) throw Error("corrupt: sector index out of range");
            std::fill_n(out.image.begin() + static_cast<std::ptrdiff_t>(at), 2048, 0);
            out.truth.mutations.push_back("zerosector@" + std::to_string(m.index));
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// spec (de)serialization + saving
// ---------------------------------------------------------------------------

inline nlohmann::json ForgeSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = carrierforge::to_string(kind);
    j["volume_id"] = volume_id;
    j["seed"] = seed;
    if (joliet) j["joliet"] = true;
    if (hfsx) j["hfsx"] = true;
    if (nsr != "NSR02") j["nsr"] = nsr;
    if (raw_sectors != 4) j["raw_sectors"] = raw_sectors;
    if (!tree.empty()) {
        j["tree"] = nlohmann::json::array();
        for (const auto& f : tree) {
            nlohmann::json e{{"path", f.path}};
            if (f.content) e["hex"] = to_hex(*f.content);
            else e["size"] = f.random_size.value_or(0);
            j["tree"].push_back(e);
        }
    }
    if (!tracks.empty()) {
        j["tracks"] = nlohmann::json::array();
        for (const auto& t : tracks) {
            nlohmann::json e{{"mode", carrierforge::to_string(t.mode)}};
            if (t.sectors) e["sectors"] = t.sectors;
            if (t.payload) e["hex"] = to_hex(*t.payload);
            j["tracks"].push_back(e);
        }
    }
    return j;
}

inline ForgeSpec ForgeSpec::from_json(const nlohmann::json& j) {
    ForgeSpec spec;
    auto kind = carrier_class_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error("forge spec: unknown kind " + j.at("kind").get<std::string>());
    spec.kind = *kind;
    spec.volume_id = j.value("volume_id", std::string("FORGE"));
    spec.seed = j.value("seed", std::uint64_t{1});
    spec.joliet = j.value("joliet", false);
    spec.hfsx = j.value("hfsx", false);
    spec.nsr = j.value("nsr", std::string("NSR02"));
    spec.raw_sectors = j.value("raw_sectors", std::uint64_t{4});
    auto parse_hex = [](const std::string& hex) {
        if (hex.size() % 2) throw Error("forge spec: odd hex literal");
        std::vector<std::uint8_t> out(hex.size() / 2);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<std::uint8_t>(std::stoi(hex.substr(i * 2, 2), nullptr, 16));
        return out;
    };
    for (const auto& e : j.value("tree", nlohmann::json::array())) {
        ForgeFileSpec f;
        f.path = e.at("path").get<std::string>();
        if (e.contains("hex")) f.content = parse_hex(e["hex"].get<std::string>());
        else if (e.contains("text")) {
            const auto s = e["text"].get<std::string>();
            f.content = std::vector<std::uint8_t>(s.begin(), s.end());
        } else f.random_size = e.value("size", std::uint64_t{0});
        spec.tree.push_back(std::move(f));
    }
    for (const auto& e : j.value("tracks", nlohmann::json::array())) {
        ForgeTrackSpec t;
        const std::string mode = e.at("mode").get<std::string>();
        if (mode == "Audio2352") t.mode = SectorMode::Audio2352;
        else if (mode == "Mode1_2048") t.mode = SectorMode::Mode1_2048;
        else if (mode == "Mode1_2352") t.mode = SectorMode::Mode1_2352;
        else if (mode == "Mode2_2352") t.mode = SectorMode::Mode2_2352;
        else if (mode == "Mode2Form1_2352") t.mode = SectorMode::Mode2Form1_2352;
        else throw Error("forge spec: unknown track mode " + mode);
        t.sectors = e.value("sectors", std::uint64_t{0});
        if (e.contains("hex")) t.payload = parse_hex(e["hex"].get<std::string>());
        spec.tracks.push_back(std::move(t));
    }
    return spec;
}

struct SavedArtifact {
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> cue_path;
};

inline SavedArtifact save_artifact(const ForgeArtifact& artifact, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    SavedArtifact saved;
    saved.image_path = dir / artifact.suggested_image_name;
    {
        std::ofstream out(saved.image_path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(artifact.image.data()),
                  static_cast<std::streamsize>(artifact.image.size()));
        if (!out) throw Error("cannot write " + saved.image_path.string());
    }
    if (artifact.cue_text) {
        saved.cue_path = dir / "image.cue";
        std::ofstream out(*saved.cue_path, std::ios::binary);
        out << *artifact.cue_text;
        if (!out) throw Error("cannot write " + saved.cue_path->string());
    }
    return saved;
}

}  // namespace carrierforge
