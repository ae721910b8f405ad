#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "carrierforge/classify.hpp"
#include "carrierforge/fixity.hpp"
#include "carrierforge/forge.hpp"
#include "carrierforge/ledger.hpp"
#include "carrierforge/pipeline.hpp"

// Operator-facing command surface. Each cmd_* function is the whole command:
// the CLI binary only parses argv and forwards here, so tests drive the same
// code paths. Exit codes: 0 success, 1 content/fixity failure, 2 usage or
// ledger error.

namespace carrierforge {

inline constexpr const char* kToolVersion = "carrierforge/0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitContentFailure = 1;
inline constexpr int kExitUsage = 2;

struct CliConfig {
    std::filesystem::path ledger_dir = "ledger";
    std::filesystem::path output_root = "out";
    int batch_size_limit = 30;
    int parallel_workers = 2;
    bool dry_run = false;
    bool json_output = false;
    std::string operator_name = "unknown";
    std::string hardware_note;
};

namespace cmd_detail {

inline int fail(const CliConfig& config, std::ostream& out, int code, const std::string& message) {
    if (config.json_output) out << nlohmann::json{{"error", message}}.dump() << "\n";
    else out << "error: " << message << "\n";
    return code;
}

inline std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("unreadable path: " + p.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

struct LoadedCarrier {
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> cue_path;
    std::vector<std::uint8_t> image;
    std::optional<CueSheet> cue;
};

// Resolves an operator-supplied path to (image, cue): .cue arguments pull in
// their first binary file; other files pick up a same-stem sidecar cue when
// one exists.
inline LoadedCarrier load_carrier(const std::filesystem::path& path,
                                  std::optional<std::filesystem::path> explicit_cue = {}) {
    namespace fs = std::filesystem;
    LoadedCarrier loaded;
    fs::path cue_path;
    if (explicit_cue) {
        cue_path = *explicit_cue;
        loaded.image_path = path;
    } else if (lower_ascii(path.extension().string()) == ".cue") {
        cue_path = path;
    } else {
        loaded.image_path = path;
        fs::path sidecar = path;
        sidecar.replace_extension(".cue");
        if (fs::exists(sidecar)) cue_path = sidecar;
    }
    if (!cue_path.empty()) {
        loaded.cue = parse_cue_bytes(slurp(cue_path));
        loaded.cue_path = cue_path;
        if (loaded.image_path.empty()) {
            if (loaded.cue->source_files.empty()) throw Error("cue lists no files");
            loaded.image_path = cue_path.parent_path() / loaded.cue->source_files.front();
        }
    }
    loaded.image = slurp(loaded.image_path);
    return loaded;
}

inline nlohmann::json plan_to_json(const ProcessingPlan& plan) {
    nlohmann::json steps = nlohmann::json::array();
    for (auto s : plan.steps) steps.push_back(to_string(s));
    return nlohmann::json{{"steps", steps}, {"rationale", plan.rationale}};
}

inline std::string plan_to_text(const ProcessingPlan& plan) {
    std::string out;
    for (auto s : plan.steps) {
        if (!out.empty()) out += " -> ";
        out += to_string(s);
    }
    return out;
}

}  // namespace cmd_detail

// ---- identify ------------------------------------------------------------------

inline int cmd_identify(const CliConfig& config, const std::vector<std::filesystem::path>& paths,
                        std::ostream& out) {
    nlohmann::json rows = nlohmann::json::array();
    try {
        for (const auto& path : paths) {
            auto loaded = cmd_detail::load_carrier(path);
            const CueSheet* cue = loaded.cue ? &*loaded.cue : nullptr;
            const CarrierClass cls = classify(loaded.image, cue);
            const ProcessingPlan plan = plan_for(cls);
            auto families = detect_all(loaded.image);
            nlohmann::json fam = nlohmann::json::array();
            std::string fam_text;
            for (const auto& f : families) {
                nlohmann::json one{{"family", to_string(f.family)}, {"detail", f.detail}};
                if (!f.volume_id.empty()) one["volume_id"] = f.volume_id;
                fam.push_back(one);
                if (!fam_text.empty()) fam_text += "+";
                fam_text += to_string(f.family);
            }
            if (cue) fam_text = fam_text.empty() ? "CueBin" : "CueBin+" + fam_text;
            rows.push_back({{"path", path.string()},
                            {"class", to_string(cls)},
                            {"families", fam},
                            {"cue", cue != nullptr},
                            {"plan", cmd_detail::plan_to_json(plan)}});
            if (!config.json_output) {
                out << path.string() << "  " << to_string(cls) << "  ["
                    << (fam_text.empty() ? "none" : fam_text) << "]  "
                    << cmd_detail::plan_to_text(plan) << "\n";
            }
        }
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
    if (config.json_output) out << rows.dump(2) << "\n";
    return kExitOk;
}

// ---- stabilize -------------------------------------------------------------------

struct BatchEntry {
    std::string carrier_id;
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> cue_path;
};

// Batch files are CSV: carrier_id,image_path[,cue_path]; relative paths are
// taken against the batch file's directory.
inline std::vector<BatchEntry> parse_batch_file(const std::filesystem::path& batch_csv) {
    auto bytes = cmd_detail::slurp(batch_csv);
    auto rows = csv_parse(decode_text(bytes).text);
    std::vector<BatchEntry> entries;
    const auto base = batch_csv.parent_path();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (!row.empty() && row[0] == "carrier_id") continue;  // optional header
        if (row.size() < 2 || row[0].empty() || row[1].empty())
            throw Error("batch file line " + std::to_string(i + 1) +
                        ": need carrier_id,image_path[,cue_path]");
        BatchEntry e;
        e.carrier_id = row[0];
        const std::filesystem::path image(row[1]);
        e.image_path = image.is_absolute() ? image : base / image;
        if (row.size() >= 3 && !row[2].empty()) {
            const std::filesystem::path cue(row[2]);
            e.cue_path = cue.is_absolute() ? cue : base / cue;
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

inline int cmd_stabilize(const CliConfig& config, const std::filesystem::path& batch_csv,
                         RobotOrder robot_order, std::ostream& out) {
    using clock = std::chrono::steady_clock;
    std::vector<BatchEntry> entries;
    try {
        entries = parse_batch_file(batch_csv);
        if (entries.empty()) throw Error("batch file lists no carriers");
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }

    struct CarrierResult {
        std::string carrier_id;
        std::string carrier_class;
        std::string status;
        std::vector<std::string> outputs;
        std::string error;
    };
    std::vector<CarrierResult> results(entries.size());

    try {
        if (config.dry_run) {
            nlohmann::json rows = nlohmann::json::array();
            Ledger ledger(config.ledger_dir, Ledger::Mode::ReadOnly);
            for (const auto& e : entries) {
                if (!ledger.find_carrier(e.carrier_id)) throw Error("unknown carrier '" + e.carrier_id + "'");
                auto loaded = cmd_detail::load_carrier(e.image_path, e.cue_path);
                const CueSheet* cue = loaded.cue ? &*loaded.cue : nullptr;
                const CarrierClass cls = classify(loaded.image, cue);
                rows.push_back({{"carrier_id", e.carrier_id},
                                {"class", to_string(cls)},
                                {"plan", cmd_detail::plan_to_json(plan_for(cls))}});
                if (!config.json_output)
                    out << e.carrier_id << "  " << to_string(cls) << "  "
                        << cmd_detail::plan_to_text(plan_for(cls)) << "  (dry run)\n";
            }
            if (config.json_output)
                out << nlohmann::json{{"dry_run", true}, {"carriers", rows}}.dump(2) << "\n";
            return kExitOk;
        }

        Ledger ledger(config.ledger_dir);
        std::map<std::string, std::string> project_of;
        for (const auto& e : entries) {
            const auto* rec = ledger.find_carrier(e.carrier_id);
            if (!rec) throw Error("unknown carrier '" + e.carrier_id + "'");
            project_of[e.carrier_id] = rec->project_id;
        }
        const std::string batch_id = batch_csv.stem().string();
        std::vector<std::string> ids;
        for (const auto& e : entries) ids.push_back(e.carrier_id);
        ledger.create_batch(batch_id, ids, robot_order,
                            static_cast<std::uint32_t>(config.batch_size_limit));

        // robot order decides processing order; entries stay addressable by id
        std::map<std::string, const BatchEntry*> by_id;
        for (const auto& e : entries) by_id[e.carrier_id] = &e;
        const auto order = processing_order(*ledger.find_batch(batch_id));

        std::mutex ledger_mutex;
        std::atomic<std::size_t> cursor{0};
        auto work = [&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= order.size()) return;
                const BatchEntry& entry = *by_id.at(order[i]);
                CarrierResult result;
                result.carrier_id = entry.carrier_id;
                const auto started = clock::now();
                StabilizationEvent event;
                event.carrier_id = entry.carrier_id;
                event.batch_id = batch_id;
                event.operator_name = config.operator_name;
                event.software = kToolVersion;
                event.hardware = config.hardware_note;
                try {
                    auto loaded = cmd_detail::load_carrier(entry.image_path, entry.cue_path);
                    const CueSheet* cue = loaded.cue ? &*loaded.cue : nullptr;
                    const CarrierClass cls = classify(loaded.image, cue);
                    result.carrier_class = to_string(cls);
                    const ProcessingPlan plan = plan_for(cls);
                    auto output = run_plan(project_of[entry.carrier_id], entry.carrier_id,
                                           entry.image_path, loaded.cue_path, plan,
                                           config.output_root);
                    std::uint64_t bytes = 0;
                    std::set<std::string> extensions;
                    auto note = [&](const std::filesystem::path& p) {
                        result.outputs.push_back(p.filename().string());
                        event.output_files.push_back(p.filename().string());
                        if (p.has_extension())
                            extensions.insert(p.extension().string().substr(1));
                        if (std::filesystem::is_regular_file(p)) bytes += std::filesystem::file_size(p);
                        else if (std::filesystem::is_directory(p)) {
                            for (const auto& f : std::filesystem::recursive_directory_iterator(p))
                                if (f.is_regular_file()) bytes += f.file_size();
                        }
                    };
                    for (const auto& p : output.master_image_paths) note(p);
                    for (const auto& p : output.derived_paths) note(p);
                    event.output_extensions.assign(extensions.begin(), extensions.end());
                    event.output_bytes = bytes;
                    event.status = StabilizationStatus::ClosedSuccessful;
                    event.comments = plan.rationale;
                    if (!output.notes.empty()) event.comments += "; " + output.notes;
                } catch (const std::exception& e) {
                    event.status = StabilizationStatus::OpenFailed;
                    event.comments = e.what();
                    result.error = e.what();
                }
                event.run_seconds =
                    std::chrono::duration<double>(clock::now() - started).count();
                {
                    std::lock_guard<std::mutex> guard(ledger_mutex);
                    ledger.record_event(event);
                }
                result.status = to_string(event.status);
                results[i] = std::move(result);
            }
        };
        const int workers = std::max(1, std::min<int>(config.parallel_workers,
                                                      static_cast<int>(order.size())));
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();

        auto manifest = manifest_create(config.output_root);
        const auto manifest_path = config.output_root / kManifestFileName;
        manifest_write(manifest, manifest_path);

        bool all_ok = true;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : results) {
            all_ok = all_ok && r.status == "ClosedSuccessful";
            rows.push_back({{"carrier_id", r.carrier_id},
                            {"class", r.carrier_class},
                            {"status", r.status},
                            {"outputs", r.outputs},
                            {"error", r.error}});
            if (!config.json_output)
                out << r.carrier_id << "  " << r.status
                    << (r.error.empty() ? "" : "  " + r.error) << "\n";
        }
        if (config.json_output)
            out << nlohmann::json{{"batch_id", batch_id},
                                  {"carriers", rows},
                                  {"manifest", manifest_path.string()}}
                       .dump(2)
                << "\n";
        else
            out << "manifest: " << manifest_path.string() << "\n";
        return all_ok ? kExitOk : kExitContentFailure;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

// ---- verify / bag / merge / dedupe ------------------------------------------------

inline int cmd_verify(const CliConfig& config, const std::filesystem::path& root, std::ostream& out) {
    try {
        VerificationReport report;
        if (is_bag(root)) {
            report = bag_verify(root);
        } else {
            const auto manifest_path = root / kManifestFileName;
            if (!std::filesystem::exists(manifest_path))
                return cmd_detail::fail(config, out, kExitUsage,
                                        "no manifest at " + manifest_path.string());
            report = manifest_verify(manifest_read(manifest_path), root);
        }
        if (config.json_output) {
            auto j = report.to_json();
            j["root"] = root.string();
            out << j.dump(2) << "\n";
        } else {
            out << "ok " << report.ok.size() << ", mismatched " << report.mismatched.size()
                << ", missing " << report.missing.size() << ", extra " << report.extra.size() << "\n";
            for (const auto& m : report.mismatched) out << "mismatched: " << m.path << "\n";
            for (const auto& p : report.missing) out << "missing: " << p << "\n";
            for (const auto& p : report.extra) out << "extra: " << p << "\n";
        }
        return report.clean() ? kExitOk : kExitContentFailure;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

inline int cmd_bag(const CliConfig& config, const std::filesystem::path& root,
                   const std::filesystem::path& destination, std::ostream& out) {
    try {
        if (config.dry_run) {
            const auto manifest = manifest_create(root);
            if (config.json_output)
                out << nlohmann::json{{"dry_run", true},
                                      {"files", manifest.entries.size()},
                                      {"destination", destination.string()}}
                           .dump()
                    << "\n";
            else
                out << "would pack " << manifest.entries.size() << " files into "
                    << destination.string() << "\n";
            return kExitOk;
        }
        auto bag = bag_pack(root, destination);
        if (config.json_output)
            out << nlohmann::json{{"bag", bag.string()}}.dump() << "\n";
        else
            out << "bag: " << bag.string() << "\n";
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

inline int cmd_merge(const CliConfig& config, const std::vector<std::filesystem::path>& batch_roots,
                     const std::filesystem::path& project_root, std::ostream& out) {
    try {
        if (config.dry_run) {
            // verification plus collision scan, no copies
            for (const auto& root : batch_roots) {
                const auto mf = root / kManifestFileName;
                if (!std::filesystem::exists(mf))
                    throw Error("unverified batch (no manifest): " + root.string());
                if (!manifest_verify(manifest_read(mf), root).clean())
                    throw Error("unverified batch (manifest stale): " + root.string());
            }
            if (config.json_output) out << nlohmann::json{{"dry_run", true}}.dump() << "\n";
            else out << "batches verified; dry run, nothing merged\n";
            return kExitOk;
        }
        auto report = merge_batches(batch_roots, project_root);
        if (config.json_output) out << report.to_json().dump(2) << "\n";
        else
            out << "merged " << report.files_copied << " files, "
                << report.identical_collisions.size() << " identical collisions\n";
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitContentFailure, e.what());
    }
}

inline int cmd_dedupe(const CliConfig& config, const std::filesystem::path& project_root, bool apply,
                      std::ostream& out) {
    try {
        const bool effective_apply = apply && !config.dry_run;
        auto records = dedupe(project_root, effective_apply);
        if (config.json_output) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : records) rows.push_back(r.to_json());
            out << nlohmann::json{{"applied", effective_apply}, {"groups", rows}}.dump(2) << "\n";
        } else {
            for (const auto& r : records) {
                out << "keep " << r.kept_path.string() << " <-";
                for (const auto& d : r.duplicate_paths) out << " " << d.string();
                out << "\n";
            }
            out << records.size() << " duplicate group(s)" << (effective_apply ? ", applied" : ", dry run")
                << "\n";
        }
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitContentFailure, e.what());
    }
}

// ---- ledger subcommands --------------------------------------------------------------

inline int cmd_ledger_register(const CliConfig& config, const std::string& project_id,
                               const std::string& proposed_id, const std::string& box_id,
                               std::optional<int> order_in_box, const std::string& custodian,
                               const std::string& metadata_ref, std::ostream& out) {
    try {
        Ledger ledger(config.ledger_dir);
        auto rec = ledger.register_carrier(project_id, proposed_id, box_id, order_in_box, custodian,
                                           metadata_ref);
        if (config.json_output)
            out << nlohmann::json{{"carrier_id", rec.carrier_id},
                                  {"disambiguation_suffix", rec.disambiguation_suffix}}
                       .dump()
                << "\n";
        else
            out << rec.carrier_id << "\n";
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

inline int cmd_ledger_event(const CliConfig& config, const std::string& carrier_id,
                            const std::optional<std::string>& status_name,
                            const std::vector<std::string>& outputs, std::uint64_t output_bytes,
                            const std::string& batch_id, const std::string& comments,
                            std::ostream& out) {
    try {
        if (!status_name) {  // query mode
            Ledger ledger(config.ledger_dir, Ledger::Mode::ReadOnly);
            const auto* rec = ledger.find_carrier(carrier_id);
            if (!rec) throw Error("unknown carrier '" + carrier_id + "'");
            auto events = ledger.events_for(carrier_id);
            if (config.json_output) {
                nlohmann::json history = nlohmann::json::array();
                for (const auto& e : events)
                    history.push_back({{"occurred_at", e.occurred_at},
                                       {"status", to_string(e.status)},
                                       {"attempt", e.attempt_number},
                                       {"comments", e.comments}});
                out << nlohmann::json{{"carrier_id", rec->carrier_id},
                                      {"status", to_string(rec->current_status)},
                                      {"location", to_string(rec->location)},
                                      {"events", history}}
                           .dump(2)
                    << "\n";
            } else {
                out << rec->carrier_id << "  " << to_string(rec->current_status) << "  "
                    << to_string(rec->location) << "\n";
                for (const auto& e : events)
                    out << "  attempt " << e.attempt_number << "  " << to_string(e.status) << "  "
                        << e.occurred_at << "\n";
            }
            return kExitOk;
        }
        auto status = status_from_string(*status_name);
        if (!status) throw Error("unknown status '" + *status_name + "'");
        Ledger ledger(config.ledger_dir);
        StabilizationEvent event;
        event.carrier_id = carrier_id;
        event.status = *status;
        event.output_files = outputs;
        for (const auto& f : outputs) {
            const auto dot = f.rfind('.');
            if (dot != std::string::npos && dot + 1 < f.size())
                event.output_extensions.push_back(f.substr(dot + 1));
        }
        event.output_bytes = output_bytes;
        event.batch_id = batch_id;
        event.comments = comments;
        event.operator_name = config.operator_name;
        event.software = kToolVersion;
        event.hardware = config.hardware_note;
        auto updated = ledger.record_event(event);
        if (config.json_output)
            out << nlohmann::json{{"carrier_id", carrier_id}, {"status", to_string(updated)}}.dump()
                << "\n";
        else
            out << carrier_id << "  " << to_string(updated) << "\n";
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

inline int cmd_ledger_batch(const CliConfig& config, const std::string& batch_id,
                            const std::vector<std::string>& carrier_ids, RobotOrder order,
                            std::ostream& out) {
    try {
        Ledger ledger(config.ledger_dir);
        auto batch = ledger.create_batch(batch_id, carrier_ids, order,
                                         static_cast<std::uint32_t>(config.batch_size_limit));
        if (config.json_output)
            out << nlohmann::json{{"batch_id", batch.batch_id},
                                  {"robot_order", to_string(batch.robot_order)},
                                  {"carriers", batch.carrier_ids}}
                       .dump()
                << "\n";
        else
            out << batch.batch_id << " (" << to_string(batch.robot_order) << ", "
                << batch.carrier_ids.size() << " carriers)\n";
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

inline int cmd_ledger_order(const CliConfig& config, const std::string& batch_id, std::ostream& out) {
    try {
        Ledger ledger(config.ledger_dir, Ledger::Mode::ReadOnly);
        const auto* batch = ledger.find_batch(batch_id);
        if (!batch) throw Error("unknown batch '" + batch_id + "'");
        auto order = processing_order(*batch);
        if (config.json_output)
            out << nlohmann::json{{"batch_id", batch_id}, {"order", order}}.dump() << "\n";
        else
            for (const auto& id : order) out << id << "\n";
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

// Candidate CSV columns: carrier_id,age_years,expected_bytes,demand_score.
inline int cmd_ledger_select(const CliConfig& config, const std::filesystem::path& candidates_csv,
                             const SelectionWeights& weights, std::ostream& out) {
    try {
        auto bytes = cmd_detail::slurp(candidates_csv);
        auto rows = csv_parse(decode_text(bytes).text);
        std::vector<CandidateCarrier> candidates;
        for (const auto& row : rows) {
            if (!row.empty() && row[0] == "carrier_id") continue;
            if (row.size() < 4) throw Error("candidates file needs 4 columns");
            candidates.push_back(
                {row[0], std::stod(row[1]), std::stod(row[2]), std::stod(row[3])});
        }
        auto ranked = select_candidates(candidates, weights);
        if (config.json_output) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : ranked)
                arr.push_back({{"carrier_id", r.carrier_id}, {"score", r.score}});
            out << arr.dump(2) << "\n";
        } else {
            for (const auto& r : ranked)
                out << r.carrier_id << "  " << std::fixed << std::setprecision(6) << r.score << "\n";
        }
        return kExitOk;
    } catch (const std::exception& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

inline int cmd_ledger_stats(const CliConfig& config, const std::string& from_iso,
                            const std::string& to_iso, std::ostream& out) {
    try {
        Ledger ledger(config.ledger_dir, Ledger::Mode::ReadOnly);
        auto stats = throughput_stats(ledger.all_events(), from_iso, to_iso);
        if (config.json_output) {
            nlohmann::json j{{"carriers_per_month", stats.carriers_per_month},
                             {"bytes_per_month", stats.bytes_per_month}};
            if (stats.avg_bytes_per_carrier) j["avg_bytes_per_carrier"] = *stats.avg_bytes_per_carrier;
            out << j.dump() << "\n";
        } else {
            out << "carriers/month: " << stats.carriers_per_month << "\n";
            out << "bytes/month: " << stats.bytes_per_month << "\n";
            if (stats.avg_bytes_per_carrier)
                out << "avg bytes/carrier: " << *stats.avg_bytes_per_carrier << "\n";
        }
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

inline int cmd_ledger_stage(const CliConfig& config, const std::string& project_id,
                            const std::string& stage_name, const std::string& tooling,
                            std::ostream& out) {
    try {
        auto stage = stage_from_string(stage_name);
        if (!stage) throw Error("unknown stage '" + stage_name + "'");
        Ledger ledger(config.ledger_dir);
        auto rec = ledger.advance_stage(project_id, *stage, tooling);
        if (config.json_output)
            out << nlohmann::json{{"project_id", rec.project_id},
                                  {"stage", to_string(rec.stage)},
                                  {"recorded_at", rec.recorded_at}}
                       .dump()
                << "\n";
        else
            out << rec.project_id << "  " << to_string(rec.stage) << "\n";
        return kExitOk;
    } catch (const Error& e) {
        return cmd_detail::fail(config, out, kExitUsage, e.what());
    }
}

}  // namespace carrierforge
