// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train / split / eval-rank / standalone / report /
// ablate. Exit codes: 0 success, 2 config or usage error, 3 missing
// prerequisite artifact, 4 numeric failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "supernas/experiments.hpp"

using namespace supernas;

namespace {

ExperimentConfig load_cfg(const std::string& config_path, const std::string& out_override,
                          uint64_t seed_override, bool seed_given) {
    ExperimentConfig cfg = parse_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (seed_given) cfg.seed = seed_override;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Channel-searchable weight-sharing supernet training and ranking evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint_path, encodings_path, resume_path;
    std::string supernet_csv, standalone_csv;
    uint64_t seed_override = 0;
    bool seed_given = false;
    int stage = 1, checkpoint_every = 0, n_seeds = 1;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config file (JSON)");
        if (needs_config) opt->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--seed", seed_override, "global seed (overrides config)")
            ->each([&](const std::string&) { seed_given = true; });
    };

    auto* train = app.add_subcommand("train", "run warm-up and supernet training for one stage");
    add_common(train, true);
    train->add_option("--stage", stage, "progressive stage to train (1-3)")->check(CLI::Range(1, 3));
    train->add_option("--resume", resume_path, "partial checkpoint to continue from");
    train->add_option("--checkpoint-every", checkpoint_every, "emit a snapshot every N iterations");

    auto* split = app.add_subcommand("split", "duplicate weights into the next stage's branch groups");
    split->add_option("--checkpoint", checkpoint_path, "input checkpoint")->required();
    split->add_option("--out", out_dir, "output checkpoint path")->required();

    auto* evalrank = app.add_subcommand("eval-rank", "evaluate an encoding list against a checkpoint");
    add_common(evalrank, true);
    evalrank->add_option("--checkpoint", checkpoint_path, "supernet checkpoint")->required();
    evalrank->add_option("--encodings", encodings_path, "encoding list file (one per line)");

    auto* standalone = app.add_subcommand("standalone", "train ground-truth encodings from scratch");
    add_common(standalone, true);
    standalone->add_option("--encodings", encodings_path, "encoding list file (one per line)");

    auto* report = app.add_subcommand("report", "join accuracy tables into a ranking report");
    report->add_option("--supernet", supernet_csv, "supernet accuracy table");
    report->add_option("--standalone", standalone_csv, "stand-alone accuracy table");
    report->add_option("--out", out_dir, "output directory")->required();

    auto* ablate = app.add_subcommand("ablate", "run the base vs PReLU+OE grid over stages 1-3");
    add_common(ablate, true);
    ablate->add_option("--seeds", n_seeds, "number of supernet seeds")->check(CLI::Range(1, 16));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) {
            const ExperimentConfig cfg = load_cfg(config_path, out_dir, seed_override, seed_given);
            const auto art = run_train_stage(cfg, stage, cfg.output_dir, resume_path, checkpoint_every);
            std::cout << "stage " << art.stage << " done: " << art.checkpoint_path << " (lr_init "
                      << art.lr_init << ", metrics " << art.metrics_path << ")\n";
        } else if (split->parsed()) {
            run_split(checkpoint_path, out_dir);
            std::cout << "split checkpoint written to " << out_dir << "\n";
        } else if (evalrank->parsed()) {
            ExperimentConfig cfg = load_cfg(config_path, out_dir, seed_override, seed_given);
            if (!encodings_path.empty()) cfg.eval.encodings_path = encodings_path;
            const auto encs = resolve_eval_encodings(cfg);
            std::filesystem::create_directories(cfg.output_dir);
            const std::string csv = cfg.output_dir + "/supernet_acc.csv";
            run_eval_rank(cfg, checkpoint_path, encs, csv);
            std::cout << "evaluated " << encs.size() << " encodings -> " << csv << "\n";
        } else if (standalone->parsed()) {
            ExperimentConfig cfg = load_cfg(config_path, out_dir, seed_override, seed_given);
            if (!encodings_path.empty()) cfg.eval.encodings_path = encodings_path;
            const auto encs = resolve_eval_encodings(cfg);
            std::filesystem::create_directories(cfg.output_dir);
            const std::string csv = cfg.output_dir + "/standalone_acc.csv";
            run_standalone(cfg, encs, csv);
            std::cout << "trained " << encs.size() << " stand-alone encodings -> " << csv << "\n";
        } else if (report->parsed()) {
            if (supernet_csv.empty()) supernet_csv = out_dir + "/supernet_acc.csv";
            if (standalone_csv.empty()) standalone_csv = out_dir + "/standalone_acc.csv";
            const RankReport rep = run_report(supernet_csv, standalone_csv, out_dir);
            std::cout << "n=" << rep.n << " |pearson|=" << rep.pearson_abs << " spearman=" << rep.spearman
                      << " kendall=" << rep.kendall_tau << "\n";
        } else if (ablate->parsed()) {
            const ExperimentConfig cfg = load_cfg(config_path, out_dir, seed_override, seed_given);
            const AblateResult res = run_ablate(cfg, cfg.output_dir, n_seeds);
            std::cout << "model,supernet,stage,median_pearson_abs\n";
            for (const auto& c : res.medians)
                std::cout << c.model << "," << c.variant << "," << c.stage << "," << c.pearson_abs << "\n";
            std::cout << "full table: " << res.table_path << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing prerequisite: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
