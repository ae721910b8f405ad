#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <sys/file.h>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "carrierforge/util.hpp"

// The stabilization-metadata store: carrier registry with duplicate
// detection, batches with FIFO/LIFO ordering, stabilization events with the
// seven-value status vocabulary, project stages, prioritization and
// throughput statistics.
//
// Persistence is an append-only events.jsonl plus derived CSV views
// (carriers.csv, batches.csv, stages.csv) that stay readable for curators.
// All mutating operations go through a single writer holding an exclusive
// lock on the ledger directory; reads work from immutable snapshots.

namespace carrierforge {

// ---- vocabulary -------------------------------------------------------------

enum class StabilizationStatus {
    NotAttempted,
    OpenFailed,
    OpenPartialClone,
    ClosedSuccessful,
    ClosedManualClone,
    ClosedPartialClone,
    ClosedFailed,
};

inline constexpr StabilizationStatus kAllStatuses[] = {
    StabilizationStatus::NotAttempted,      StabilizationStatus::OpenFailed,
    StabilizationStatus::OpenPartialClone,  StabilizationStatus::ClosedSuccessful,
    StabilizationStatus::ClosedManualClone, StabilizationStatus::ClosedPartialClone,
    StabilizationStatus::ClosedFailed,
};

inline const char* to_string(StabilizationStatus s) {
    switch (s) {
        case StabilizationStatus::NotAttempted: return "NotAttempted";
        case StabilizationStatus::OpenFailed: return "OpenFailed";
        case StabilizationStatus::OpenPartialClone: return "OpenPartialClone";
        case StabilizationStatus::ClosedSuccessful: return "ClosedSuccessful";
        case StabilizationStatus::ClosedManualClone: return "ClosedManualClone";
        case StabilizationStatus::ClosedPartialClone: return "ClosedPartialClone";
        case StabilizationStatus::ClosedFailed: return "ClosedFailed";
    }
    return "?";
}

inline std::optional<StabilizationStatus> status_from_string(std::string_view s) {
    for (auto v : kAllStatuses)
        if (s == to_string(v)) return v;
    return std::nullopt;
}

inline bool is_closed(StabilizationStatus s) {
    return s == StabilizationStatus::ClosedSuccessful || s == StabilizationStatus::ClosedManualClone ||
           s == StabilizationStatus::ClosedPartialClone || s == StabilizationStatus::ClosedFailed;
}

// The paper names the vocabulary; the transitions are this toolkit's rule:
// open statuses mark ongoing failure investigation, closed ones end it, and
// closed is terminal.
inline bool is_legal_transition(StabilizationStatus from, StabilizationStatus to) {
    using S = StabilizationStatus;
    if (is_closed(from)) return false;
    switch (from) {
        case S::NotAttempted:
            return to == S::OpenFailed || to == S::OpenPartialClone || to == S::ClosedSuccessful ||
                   to == S::ClosedFailed;
        case S::OpenFailed:
            return to == S::OpenFailed || to == S::ClosedManualClone || to == S::ClosedFailed;
        case S::OpenPartialClone:
            return to == S::OpenPartialClone || to == S::ClosedPartialClone ||
                   to == S::ClosedManualClone || to == S::ClosedFailed;
        default:
            return false;
    }
}

enum class CarrierLocation { Shelf, StabilizationStation, FailureInvestigation, WithCurator };

inline const char* to_string(CarrierLocation l) {
    switch (l) {
        case CarrierLocation::Shelf: return "Shelf";
        case CarrierLocation::StabilizationStation: return "StabilizationStation";
        case CarrierLocation::FailureInvestigation: return "FailureInvestigation";
        case CarrierLocation::WithCurator: return "WithCurator";
    }
    return "?";
}

inline std::optional<CarrierLocation> location_from_string(std::string_view s) {
    for (auto v : {CarrierLocation::Shelf, CarrierLocation::StabilizationStation,
                   CarrierLocation::FailureInvestigation, CarrierLocation::WithCurator})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

enum class RobotOrder { Fifo, Lifo };

inline const char* to_string(RobotOrder o) { return o == RobotOrder::Fifo ? "Fifo" : "Lifo"; }

enum class ProjectStageKind { Selected, Stabilized, CleanedUp, Extracted, Curated, ServiceCopies };

inline constexpr ProjectStageKind kStageOrder[] = {
    ProjectStageKind::Selected,  ProjectStageKind::Stabilized, ProjectStageKind::CleanedUp,
    ProjectStageKind::Extracted, ProjectStageKind::Curated,    ProjectStageKind::ServiceCopies,
};

inline const char* to_string(ProjectStageKind s) {
    switch (s) {
        case ProjectStageKind::Selected: return "Selected";
        case ProjectStageKind::Stabilized: return "Stabilized";
        case ProjectStageKind::CleanedUp: return "CleanedUp";
        case ProjectStageKind::Extracted: return "Extracted";
        case ProjectStageKind::Curated: return "Curated";
        case ProjectStageKind::ServiceCopies: return "ServiceCopies";
    }
    return "?";
}

inline std::optional<ProjectStageKind> stage_from_string(std::string_view s) {
    for (auto v : kStageOrder)
        if (s == to_string(v)) return v;
    return std::nullopt;
}

// ---- records ----------------------------------------------------------------

struct CarrierRecord {
    std::string carrier_id;  // unique after disambiguation
    std::string project_id;
    std::string box_id;
    std::optional<int> order_in_box;
    CarrierLocation location = CarrierLocation::Shelf;
    std::string custodian;
    std::string primary_metadata_ref;  // opaque: path or register key
    std::string disambiguation_suffix;
    StabilizationStatus current_status = StabilizationStatus::NotAttempted;
};

struct StabilizationEvent {
    std::string carrier_id;
    std::string occurred_at;  // ISO-8601 UTC
    std::string operator_name;
    std::string software;
    std::string hardware;
    StabilizationStatus status = StabilizationStatus::ClosedSuccessful;
    std::vector<std::string> output_files;
    std::vector<std::string> output_extensions;
    int attempt_number = 0;  // 0: assigned by the ledger
    std::optional<double> run_seconds;
    std::string batch_id;
    std::string comments;
    std::uint64_t output_bytes = 0;
};

struct Batch {
    std::string batch_id;
    std::vector<std::string> carrier_ids;  // load order
    RobotOrder robot_order = RobotOrder::Fifo;
    std::uint32_t size_limit = 30;
};

struct ProjectStage {
    std::string project_id;
    ProjectStageKind stage = ProjectStageKind::Selected;
    std::string recorded_at;
    std::string tooling;
};

// ---- pure operations ----------------------------------------------------------

// FIFO robots process in load order, LIFO robots in reverse.
inline std::vector<std::string> processing_order(const Batch& batch) {
    if (batch.carrier_ids.empty()) throw Error("empty batch");
    std::vector<std::string> out = batch.carrier_ids;
    if (batch.robot_order == RobotOrder::Lifo) std::reverse(out.begin(), out.end());
    return out;
}

struct CandidateCarrier {
    std::string carrier_id;
    double age_years = 0;
    double expected_bytes = 0;
    double demand_score = 0;  // [0,1]
};

struct SelectionWeights {
    double risk = 1.0 / 3.0;
    double gain = 1.0 / 3.0;
    double demand = 1.0 / 3.0;
};

struct RankedCandidate {
    std::string carrier_id;
    double score = 0;
};

// Ranks carriers by weighted risk (age), gain (bytes) and demand. Age and
// byte counts are normalized by the cohort maximum, so any common positive
// rescaling leaves the ranking unchanged.
inline std::vector<RankedCandidate> select_candidates(const std::vector<CandidateCarrier>& carriers,
                                                      const SelectionWeights& weights = {}) {
    const double sum = weights.risk + weights.gain + weights.demand;
    if (std::abs(sum - 1.0) > 1e-9) throw Error("selection weights must sum to 1");
    if (weights.risk < 0 || weights.gain < 0 || weights.demand < 0)
        throw Error("selection weights must be non-negative");
    double max_age = 0, max_bytes = 0;
    for (const auto& c : carriers) {
        if (c.age_years < 0 || c.expected_bytes < 0) throw Error("negative candidate inputs");
        if (c.demand_score < 0 || c.demand_score > 1)
            throw Error("demand score outside [0,1] for " + c.carrier_id);
        max_age = std::max(max_age, c.age_years);
        max_bytes = std::max(max_bytes, c.expected_bytes);
    }
    std::vector<RankedCandidate> out;
    out.reserve(carriers.size());
    for (const auto& c : carriers) {
        const double age_n = max_age > 0 ? c.age_years / max_age : 0;
        const double bytes_n = max_bytes > 0 ? c.expected_bytes / max_bytes : 0;
        out.push_back({c.carrier_id,
                       weights.risk * age_n + weights.gain * bytes_n + weights.demand * c.demand_score});
    }
    std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.carrier_id < b.carrier_id;
    });
    return out;
}

struct ThroughputStats {
    double carriers_per_month = 0;
    double bytes_per_month = 0;
    std::optional<double> avg_bytes_per_carrier;
};

inline constexpr double kSecondsPerMonth = 365.25 / 12.0 * 86400.0;

// Aggregates closed-successful events inside [from, to).
inline ThroughputStats throughput_stats(const std::vector<StabilizationEvent>& events,
                                        const std::string& from_iso, const std::string& to_iso) {
    auto from = parse_iso8601_utc(from_iso);
    auto to = parse_iso8601_utc(to_iso);
    if (!from || !to) throw Error("bad period timestamps");
    if (*to <= *from) throw Error("empty period");
    const double months = static_cast<double>(*to - *from) / kSecondsPerMonth;
    std::uint64_t carriers = 0, bytes = 0;
    for (const auto& e : events) {
        if (e.status != StabilizationStatus::ClosedSuccessful) continue;
        auto at = parse_iso8601_utc(e.occurred_at);
        if (!at || *at < *from || *at >= *to) continue;
        ++carriers;
        bytes += e.output_bytes;
    }
    ThroughputStats stats;
    stats.carriers_per_month = carriers / months;
    stats.bytes_per_month = static_cast<double>(bytes) / months;
    if (carriers > 0) stats.avg_bytes_per_carrier = static_cast<double>(bytes) / carriers;
    return stats;
}

// Staffing arithmetic: how many person-years a volume takes at a rate.
inline double staffing_person_years(double total_bytes, double bytes_per_year) {
    if (bytes_per_year <= 0) throw Error("rate must be positive");
    return total_bytes / bytes_per_year;
}

// ---- the persistent store -----------------------------------------------------

namespace detail {

inline nlohmann::json event_to_json(const StabilizationEvent& e) {
    return nlohmann::json{{"carrier_id", e.carrier_id},
                          {"occurred_at", e.occurred_at},
                          {"operator", e.operator_name},
                          {"software", e.software},
                          {"hardware", e.hardware},
                          {"status", to_string(e.status)},
                          {"output_files", e.output_files},
                          {"output_extensions", e.output_extensions},
                          {"attempt_number", e.attempt_number},
                          {"run_seconds", e.run_seconds ? nlohmann::json(*e.run_seconds) : nlohmann::json()},
                          {"batch_id", e.batch_id},
                          {"comments", e.comments},
                          {"output_bytes", e.output_bytes}};
}

inline StabilizationEvent event_from_json(const nlohmann::json& j) {
    StabilizationEvent e;
    e.carrier_id = j.value("carrier_id", "");
    e.occurred_at = j.value("occurred_at", "");
    e.operator_name = j.value("operator", "");
    e.software = j.value("software", "");
    e.hardware = j.value("hardware", "");
    e.status = status_from_string(j.value("status", "")).value_or(StabilizationStatus::NotAttempted);
    e.output_files = j.value("output_files", std::vector<std::string>{});
    e.output_extensions = j.value("output_extensions", std::vector<std::string>{});
    e.attempt_number = j.value("attempt_number", 0);
    if (j.contains("run_seconds") && !j["run_seconds"].is_null())
        e.run_seconds = j["run_seconds"].get<double>();
    e.batch_id = j.value("batch_id", "");
    e.comments = j.value("comments", "");
    e.output_bytes = j.value("output_bytes", std::uint64_t{0});
    return e;
}

}  // namespace detail

class Ledger {
public:
    enum class Mode { ReadOnly, ReadWrite };

    explicit Ledger(std::filesystem::path dir, Mode mode = Mode::ReadWrite)
        : dir_(std::move(dir)), mode_(mode) {
        namespace fs = std::filesystem;
        if (mode_ == Mode::ReadWrite) {
            fs::create_directories(dir_);
            lock_fd_ = ::open((dir_ / ".lock").c_str(), O_CREAT | O_RDWR, 0644);
            if (lock_fd_ < 0) throw Error("cannot open ledger lock file in " + dir_.string());
            if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
                ::close(lock_fd_);
                lock_fd_ = -1;
                throw Error("ledger locked: " + dir_.string());
            }
        } else if (!fs::exists(dir_)) {
            throw Error("ledger directory does not exist: " + dir_.string());
        }
        replay();
    }

    ~Ledger() {
        if (mode_ == Mode::ReadWrite && views_dirty_) {
            try {
                write_views();
            } catch (...) {
            }
        }
        if (lock_fd_ >= 0) {
            ::flock(lock_fd_, LOCK_UN);
            ::close(lock_fd_);
        }
    }

    // Regenerates the curator-facing CSV views from the current state. The
    // event log is the source of truth; views refresh here and on close.
    void flush_views() {
        require_writable();
        write_views();
        views_dirty_ = false;
    }
    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    const std::filesystem::path& dir() const { return dir_; }

    // Registers a carrier; a reused identifier triggers a recorded
    // duplicate-naming event and gets a "#N" disambiguation suffix.
    CarrierRecord register_carrier(const std::string& project_id, const std::string& proposed_id,
                                   const std::string& box_id = "", std::optional<int> order_in_box = {},
                                   const std::string& custodian = "",
                                   const std::string& primary_metadata_ref = "") {
        require_writable();
        if (proposed_id.empty()) throw Error("empty carrier identifier");
        if (project_id.empty()) throw Error("empty project identifier");
        CarrierRecord rec;
        rec.project_id = project_id;
        rec.box_id = box_id;
        rec.order_in_box = order_in_box;
        rec.custodian = custodian;
        rec.primary_metadata_ref = primary_metadata_ref;
        rec.carrier_id = proposed_id;
        if (carriers_.count(proposed_id)) {
            int n = 2;
            while (carriers_.count(proposed_id + "#" + std::to_string(n))) ++n;
            rec.disambiguation_suffix = "#" + std::to_string(n);
            rec.carrier_id = proposed_id + rec.disambiguation_suffix;
            append({{"type", "duplicate-naming"},
                    {"at", now_iso8601_utc()},
                    {"proposed", proposed_id},
                    {"assigned", rec.carrier_id},
                    {"project_id", project_id}});
        }
        append({{"type", "carrier-registered"}, {"at", now_iso8601_utc()}, {"carrier", carrier_to_json(rec)}});
        apply_carrier(rec);
        views_dirty_ = true;
        return rec;
    }

    // Creates a batch; a carrier may sit in at most one open batch and the
    // batch must respect its size limit.
    Batch create_batch(const std::string& batch_id, const std::vector<std::string>& carrier_ids,
                       RobotOrder order, std::uint32_t size_limit = 30) {
        require_writable();
        if (batch_id.empty()) throw Error("empty batch identifier");
        if (batches_.count(batch_id)) throw Error("batch '" + batch_id + "' already exists");
        if (size_limit == 0) throw Error("batch size limit must be positive");
        if (carrier_ids.size() > size_limit)
            throw Error("batch of " + std::to_string(carrier_ids.size()) + " exceeds size limit " +
                        std::to_string(size_limit));
        std::set<std::string> seen;
        for (const auto& id : carrier_ids) {
            if (!carriers_.count(id)) throw Error("unknown carrier '" + id + "'");
            if (!seen.insert(id).second) throw Error("carrier '" + id + "' listed twice");
            for (const auto& [other_id, other] : batches_) {
                if (batch_open(other) &&
                    std::find(other.carrier_ids.begin(), other.carrier_ids.end(), id) !=
                        other.carrier_ids.end())
                    throw Error("carrier '" + id + "' already in open batch '" + other_id + "'");
            }
        }
        Batch batch{batch_id, carrier_ids, order, size_limit};
        append({{"type", "batch-created"},
                {"at", now_iso8601_utc()},
                {"batch",
                 {{"batch_id", batch_id},
                  {"carrier_ids", carrier_ids},
                  {"robot_order", to_string(order)},
                  {"size_limit", size_limit}}}});
        batches_[batch_id] = batch;
        batch_order_.push_back(batch_id);
        views_dirty_ = true;
        return batch;
    }

    // Appends a stabilization event after checking the status machine. The
    // attempt number is assigned here; failures move the carrier to
    // failure investigation.
    StabilizationStatus record_event(StabilizationEvent event) {
        require_writable();
        auto it = carriers_.find(event.carrier_id);
        if (it == carriers_.end()) throw Error("unknown carrier '" + event.carrier_id + "'");
        CarrierRecord& carrier = it->second;
        if (!is_legal_transition(carrier.current_status, event.status))
            throw Error(std::string("illegal status transition ") + to_string(carrier.current_status) +
                        " -> " + to_string(event.status) + " for '" + event.carrier_id + "'");
        if (event.status == StabilizationStatus::ClosedSuccessful && event.output_files.empty())
            throw Error("ClosedSuccessful requires output files");
        if (!event.batch_id.empty() && !batches_.count(event.batch_id))
            throw Error("unknown batch '" + event.batch_id + "'");
        const int expected_attempt = static_cast<int>(events_by_carrier_[event.carrier_id].size()) + 1;
        if (event.attempt_number == 0) event.attempt_number = expected_attempt;
        else if (event.attempt_number != expected_attempt)
            throw Error("attempt number must be " + std::to_string(expected_attempt));
        if (event.occurred_at.empty()) event.occurred_at = now_iso8601_utc();

        append({{"type", "stabilization"}, {"at", now_iso8601_utc()}, {"event", detail::event_to_json(event)}});
        apply_event(event);
        views_dirty_ = true;
        return carrier.current_status;
    }

    // Records a project stage; only the immediate successor (or the same
    // stage again, with new tooling) is accepted.
    ProjectStage advance_stage(const std::string& project_id, ProjectStageKind stage,
                               const std::string& tooling) {
        require_writable();
        if (project_id.empty()) throw Error("empty project identifier");
        const auto current = current_stage(project_id);
        const int target = stage_index(stage);
        const int now = current ? stage_index(*current) : -1;
        if (target != now && target != now + 1)
            throw Error(std::string("stage skip: ") + (current ? to_string(*current) : "(none)") +
                        " -> " + to_string(stage));
        ProjectStage rec{project_id, stage, now_iso8601_utc(), tooling};
        append({{"type", "stage-advanced"},
                {"at", rec.recorded_at},
                {"stage",
                 {{"project_id", project_id},
                  {"stage", to_string(stage)},
                  {"recorded_at", rec.recorded_at},
                  {"tooling", tooling}}}});
        stages_.push_back(rec);
        views_dirty_ = true;
        return rec;
    }

    // ---- queries --------------------------------------------------------------

    const CarrierRecord* find_carrier(const std::string& id) const {
        auto it = carriers_.find(id);
        return it == carriers_.end() ? nullptr : &it->second;
    }

    std::vector<CarrierRecord> carriers() const {
        std::vector<CarrierRecord> out;
        for (const auto& id : carrier_order_) out.push_back(carriers_.at(id));
        return out;
    }

    const Batch* find_batch(const std::string& id) const {
        auto it = batches_.find(id);
        return it == batches_.end() ? nullptr : &it->second;
    }

    bool batch_open(const Batch& batch) const {
        for (const auto& id : batch.carrier_ids) {
            auto it = carriers_.find(id);
            if (it != carriers_.end() && !is_closed(it->second.current_status)) return true;
        }
        return false;
    }

    std::vector<StabilizationEvent> events_for(const std::string& carrier_id) const {
        auto it = events_by_carrier_.find(carrier_id);
        return it == events_by_carrier_.end() ? std::vector<StabilizationEvent>{} : it->second;
    }

    std::vector<StabilizationEvent> all_events() const {
        std::vector<StabilizationEvent> out;
        for (const auto& id : carrier_order_) {
            auto it = events_by_carrier_.find(id);
            if (it != events_by_carrier_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
        }
        return out;
    }

    std::optional<ProjectStageKind> current_stage(const std::string& project_id) const {
        std::optional<ProjectStageKind> latest;
        for (const auto& s : stages_)
            if (s.project_id == project_id) latest = s.stage;
        return latest;
    }

    std::vector<ProjectStage> stages() const { return stages_; }

private:
    static int stage_index(ProjectStageKind s) {
        int i = 0;
        for (auto v : kStageOrder) {
            if (v == s) return i;
            ++i;
        }
        return -1;
    }

    static nlohmann::json carrier_to_json(const CarrierRecord& r) {
        return nlohmann::json{
            {"carrier_id", r.carrier_id},
            {"project_id", r.project_id},
            {"box_id", r.box_id},
            {"order_in_box", r.order_in_box ? nlohmann::json(*r.order_in_box) : nlohmann::json()},
            {"location", to_string(r.location)},
            {"custodian", r.custodian},
            {"primary_metadata_ref", r.primary_metadata_ref},
            {"disambiguation_suffix", r.disambiguation_suffix}};
    }

    void require_writable() const {
        if (mode_ != Mode::ReadWrite) throw Error("ledger opened read-only");
    }

    void apply_carrier(const CarrierRecord& rec) {
        carriers_[rec.carrier_id] = rec;
        carrier_order_.push_back(rec.carrier_id);
    }

    void apply_event(const StabilizationEvent& event) {
        events_by_carrier_[event.carrier_id].push_back(event);
        auto it = carriers_.find(event.carrier_id);
        if (it == carriers_.end()) return;
        it->second.current_status = event.status;
        if (event.status == StabilizationStatus::OpenFailed ||
            event.status == StabilizationStatus::OpenPartialClone)
            it->second.location = CarrierLocation::FailureInvestigation;
    }

    void append(const nlohmann::json& line) {
        std::ofstream out(dir_ / "events.jsonl", std::ios::binary | std::ios::app);
        out << line.dump() << "\n";
        out.flush();
        if (!out) throw Error("cannot append to ledger event log");
    }

    void replay() {
        namespace fs = std::filesystem;
        const fs::path log = dir_ / "events.jsonl";
        if (!fs::exists(log)) return;
        std::ifstream in(log, std::ios::binary);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw Error("ledger log line " + std::to_string(line_no) + ": " + e.what());
            }
            const std::string type = j.value("type", "");
            if (type == "carrier-registered") {
                const auto& c = j["carrier"];
                CarrierRecord rec;
                rec.carrier_id = c.value("carrier_id", "");
                rec.project_id = c.value("project_id", "");
                rec.box_id = c.value("box_id", "");
                if (c.contains("order_in_box") && !c["order_in_box"].is_null())
                    rec.order_in_box = c["order_in_box"].get<int>();
                rec.location = location_from_string(c.value("location", "Shelf"))
                                   .value_or(CarrierLocation::Shelf);
                rec.custodian = c.value("custodian", "");
                rec.primary_metadata_ref = c.value("primary_metadata_ref", "");
                rec.disambiguation_suffix = c.value("disambiguation_suffix", "");
                apply_carrier(rec);
            } else if (type == "stabilization") {
                apply_event(detail::event_from_json(j["event"]));
            } else if (type == "batch-created") {
                const auto& b = j["batch"];
                Batch batch;
                batch.batch_id = b.value("batch_id", "");
                batch.carrier_ids = b.value("carrier_ids", std::vector<std::string>{});
                batch.robot_order = b.value("robot_order", "Fifo") == std::string("Lifo")
                                        ? RobotOrder::Lifo
                                        : RobotOrder::Fifo;
                batch.size_limit = b.value("size_limit", 30u);
                batches_[batch.batch_id] = batch;
                batch_order_.push_back(batch.batch_id);
            } else if (type == "stage-advanced") {
                const auto& s = j["stage"];
                stages_.push_back(ProjectStage{
                    s.value("project_id", ""),
                    stage_from_string(s.value("stage", "Selected")).value_or(ProjectStageKind::Selected),
                    s.value("recorded_at", ""), s.value("tooling", "")});
            }
            // duplicate-naming events carry no state beyond the log itself
        }
    }

    // Curator-facing CSV views, regenerated after every mutation.
    void write_views() const {
        {
            std::ofstream out(dir_ / "carriers.csv", std::ios::binary | std::ios::trunc);
            out << "carrier_id,project_id,box_id,order_in_box,location,custodian,status,"
                   "disambiguation_suffix\n";
            for (const auto& id : carrier_order_) {
                const auto& r = carriers_.at(id);
                out << csv_quote(r.carrier_id) << ',' << csv_quote(r.project_id) << ','
                    << csv_quote(r.box_id) << ','
                    << (r.order_in_box ? std::to_string(*r.order_in_box) : "") << ','
                    << to_string(r.location) << ',' << csv_quote(r.custodian) << ','
                    << to_string(r.current_status) << ',' << csv_quote(r.disambiguation_suffix)
                    << "\n";
            }
        }
        {
            std::ofstream out(dir_ / "batches.csv", std::ios::binary | std::ios::trunc);
            out << "batch_id,robot_order,size_limit,open,carrier_ids\n";
            for (const auto& id : batch_order_) {
                const auto& b = batches_.at(id);
                std::string ids;
                for (const auto& c : b.carrier_ids) {
                    if (!ids.empty()) ids += ';';
                    ids += c;
                }
                out << csv_quote(b.batch_id) << ',' << to_string(b.robot_order) << ','
                    << b.size_limit << ',' << (batch_open(b) ? "yes" : "no") << ','
                    << csv_quote(ids) << "\n";
            }
        }
        {
            std::ofstream out(dir_ / "stages.csv", std::ios::binary | std::ios::trunc);
            out << "project_id,stage,recorded_at,tooling\n";
            for (const auto& s : stages_)
                out << csv_quote(s.project_id) << ',' << to_string(s.stage) << ',' << s.recorded_at
                    << ',' << csv_quote(s.tooling) << "\n";
        }
    }

    std::filesystem::path dir_;
    Mode mode_;
    int lock_fd_ = -1;
    bool views_dirty_ = false;
    std::map<std::string, CarrierRecord> carriers_;
    std::vector<std::string> carrier_order_;
    std::map<std::string, Batch> batches_;
    std::vector<std::string> batch_order_;
    std::map<std::string, std::vector<StabilizationEvent>> events_by_carrier_;
    std::vector<ProjectStage> stages_;
};

}  // namespace carrierforge
