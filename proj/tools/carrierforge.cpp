// carrierforge: stabilize content from hand-held optical media.
//
// identify   classify disk images and show their processing plan
// stabilize  run a batch end to end: classify, extract, manifest, ledger
// verify     re-check a manifest or bag; nonzero exit on any discrepancy
// bag        pack a tree into a BagIt-style bag
// merge      unify verified batch trees under a project root
// dedupe     report (or apply) content de-duplication
// ledger     registry, events, ordering, selection, stats, stages

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carrierforge/commands.hpp"

using namespace carrierforge;

int main(int argc, char** argv) {
    CLI::App app{"carrierforge: data-carrier stabilization toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    CliConfig config;
    std::string ledger_dir = config.ledger_dir.string();
    std::string output_root = config.output_root.string();
    app.add_option("--ledger-dir", ledger_dir, "ledger directory (CARRIERFORGE_LEDGER overrides)");
    app.add_option("--output-root", output_root, "root for masters/ and derived/ trees");
    app.add_option("--workers", config.parallel_workers, "parallel carriers during stabilize")
        ->check(CLI::PositiveNumber);
    app.add_option("--batch-limit", config.batch_size_limit, "batch size limit")
        ->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", config.dry_run, "report without touching the filesystem");
    app.add_flag("--json", config.json_output, "machine-readable output");
    app.add_option("--operator", config.operator_name, "operator recorded in ledger events");
    app.add_option("--hardware", config.hardware_note, "hardware note recorded in ledger events");

    // identify
    std::vector<std::string> identify_paths;
    auto* identify = app.add_subcommand("identify", "detect families and classify carriers");
    identify->add_option("paths", identify_paths, "image or cue files")->required();

    // stabilize
    std::string batch_file;
    bool lifo = false;
    auto* stabilize = app.add_subcommand("stabilize", "run a batch of carriers");
    stabilize->add_option("batch", batch_file, "CSV: carrier_id,image_path[,cue_path]")->required();
    stabilize->add_flag("--lifo", lifo, "robot unloads last-in-first-out");

    // verify
    std::string verify_root;
    auto* verify = app.add_subcommand("verify", "verify a manifest or bag");
    verify->add_option("root", verify_root, "collection root or bag directory")->required();

    // bag
    std::string bag_root, bag_dest;
    auto* bag = app.add_subcommand("bag", "pack a tree into a bag");
    bag->add_option("root", bag_root, "payload root")->required();
    bag->add_option("destination", bag_dest, "bag directory to create")->required();

    // merge
    std::vector<std::string> merge_args;
    auto* merge = app.add_subcommand("merge", "merge verified batch roots into a project root");
    merge->add_option("roots", merge_args, "batch roots..., then the project root")
        ->required()
        ->expected(-2);

    // dedupe
    std::string dedupe_root;
    bool dedupe_apply = false;
    auto* dedupe_cmd = app.add_subcommand("dedupe", "group duplicate files by digest");
    dedupe_cmd->add_option("root", dedupe_root, "project root with a consolidated manifest")
        ->required();
    dedupe_cmd->add_flag("--apply", dedupe_apply, "replace duplicates with link records");

    // ledger
    auto* ledger_cmd = app.add_subcommand("ledger", "stabilization metadata store");
    ledger_cmd->require_subcommand(1);

    std::string reg_project, reg_id, reg_box, reg_custodian, reg_meta;
    std::optional<int> reg_order;
    auto* reg = ledger_cmd->add_subcommand("register", "register a carrier");
    reg->add_option("project", reg_project)->required();
    reg->add_option("carrier", reg_id)->required();
    reg->add_option("--box", reg_box);
    int reg_order_value = -1;
    reg->add_option("--order-in-box", reg_order_value);
    reg->add_option("--custodian", reg_custodian);
    reg->add_option("--metadata-ref", reg_meta);

    std::string ev_carrier, ev_status, ev_batch, ev_comments, ev_outputs;
    std::uint64_t ev_bytes = 0;
    auto* ev = ledger_cmd->add_subcommand("event", "record or query stabilization events");
    ev->add_option("carrier", ev_carrier)->required();
    ev->add_option("--status", ev_status, "record an event with this status");
    ev->add_option("--outputs", ev_outputs, "comma-separated output file names");
    ev->add_option("--bytes", ev_bytes);
    ev->add_option("--batch", ev_batch);
    ev->add_option("--comments", ev_comments);

    std::string batch_id;
    std::vector<std::string> batch_carriers;
    bool batch_lifo = false;
    auto* mkbatch = ledger_cmd->add_subcommand("batch", "create a batch");
    mkbatch->add_option("batch", batch_id)->required();
    mkbatch->add_option("carriers", batch_carriers)->required();
    mkbatch->add_flag("--lifo", batch_lifo);

    std::string order_batch;
    auto* order = ledger_cmd->add_subcommand("order", "print a batch's processing order");
    order->add_option("batch", order_batch)->required();

    std::string select_csv;
    SelectionWeights weights;
    auto* select = ledger_cmd->add_subcommand("select", "rank stabilization candidates");
    select->add_option("candidates", select_csv,
                       "CSV: carrier_id,age_years,expected_bytes,demand_score")
        ->required();
    select->add_option("--w-risk", weights.risk);
    select->add_option("--w-gain", weights.gain);
    select->add_option("--w-demand", weights.demand);

    std::string stats_from, stats_to;
    auto* stats = ledger_cmd->add_subcommand("stats", "throughput over a period");
    stats->add_option("--from", stats_from, "ISO-8601 UTC")->required();
    stats->add_option("--to", stats_to, "ISO-8601 UTC")->required();

    std::string stage_project, stage_name, stage_tooling;
    auto* stage = ledger_cmd->add_subcommand("stage", "advance a project stage");
    stage->add_option("project", stage_project)->required();
    stage->add_option("stage", stage_name)->required();
    stage->add_option("--tooling", stage_tooling);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    // the environment wins over the flag so wrapper scripts can pin a ledger
    if (const char* env = std::getenv("CARRIERFORGE_LEDGER")) ledger_dir = env;
    config.ledger_dir = ledger_dir;
    config.output_root = output_root;
    if (reg->count("--order-in-box")) reg_order = reg_order_value;

    std::ostream& out = std::cout;
    try {
        if (*identify) {
            std::vector<std::filesystem::path> paths(identify_paths.begin(), identify_paths.end());
            return cmd_identify(config, paths, out);
        }
        if (*stabilize)
            return cmd_stabilize(config, batch_file, lifo ? RobotOrder::Lifo : RobotOrder::Fifo, out);
        if (*verify) return cmd_verify(config, verify_root, out);
        if (*bag) return cmd_bag(config, bag_root, bag_dest, out);
        if (*merge) {
            std::vector<std::filesystem::path> roots(merge_args.begin(), merge_args.end() - 1);
            return cmd_merge(config, roots, merge_args.back(), out);
        }
        if (*dedupe_cmd) return cmd_dedupe(config, dedupe_root, dedupe_apply, out);
        if (*ledger_cmd) {
            if (*reg)
                return cmd_ledger_register(config, reg_project, reg_id, reg_box, reg_order,
                                           reg_custodian, reg_meta, out);
            if (*ev) {
                std::optional<std::string> status;
                if (ev->count("--status")) status = ev_status;
                std::vector<std::string> outputs;
                std::size_t at = 0;
                while (at < ev_outputs.size()) {
                    std::size_t comma = ev_outputs.find(',', at);
                    if (comma == std::string::npos) comma = ev_outputs.size();
                    if (comma > at) outputs.push_back(ev_outputs.substr(at, comma - at));
                    at = comma + 1;
                }
                return cmd_ledger_event(config, ev_carrier, status, outputs, ev_bytes, ev_batch,
                                        ev_comments, out);
            }
            if (*mkbatch)
                return cmd_ledger_batch(config, batch_id, batch_carriers,
                                        batch_lifo ? RobotOrder::Lifo : RobotOrder::Fifo, out);
            if (*order) return cmd_ledger_order(config, order_batch, out);
            if (*select) return cmd_ledger_select(config, select_csv, weights, out);
            if (*stats) return cmd_ledger_stats(config, stats_from, stats_to, out);
            if (*stage) return cmd_ledger_stage(config, stage_project, stage_name, stage_tooling, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
