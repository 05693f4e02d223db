#pragma once

// Experiment runner: builds one planted scene per seed, runs the scheduled
// forward pass, and aggregates recall / bottom-bias / FLOPS into result
// files. Seeds run on a bounded worker pool; output is identical for any
// worker count. VTPRUNE_WORKERS overrides the configured pool size.

#include "vtp-analysis.h"
#include "vtp-config.h"
#include "vtp-flops.h"

#include <string>
#include <vector>

namespace vtp {

struct seed_row {
    uint64_t seed = 0;
    int stage = 0;
    int layer = -1;          // stage layer; -1 for the no-op pseudo stage
    int retained = 0;
    double recall = 0.0;
    double bias = 0.5;
};

struct stage_stats {
    int stage = 0;
    int layer = -1;
    std::string criterion = "none";
    double mean_retained = 0.0;
    double mean_recall = 0.0;
    double std_recall = 0.0;
    double mean_bias = 0.0;
    double std_bias = 0.0;
};

struct run_result {
    std::string id;
    std::string schedule_desc;
    std::vector<seed_row> rows;        // (seed, stage) order
    std::vector<stage_stats> stages;
    std::vector<heatmap> heatmaps;     // one per reported stage
    double run_reduction = 0.0;        // analytic at run dims, mean over seeds
    flops_report reference;            // at the config's flops.* constants
    bool instrumented = false;
    double mean_macs = 0.0;

    std::string table() const;
};

int effective_workers(const experiment_config & cfg, int override_workers);

// Runs every seed; no files are written.
run_result run_experiment(const experiment_config & cfg, int workers_override = 0);

// results.csv, summary.csv (timestamp comment first), flops.json and
// per-stage heatmap_stage<i>.{txt,pgm} under out_dir.
void write_run_files(const run_result & res, const experiment_config & cfg,
                     const std::string & out_dir, bool heatmaps_only = false);

// Side-by-side table over configs sharing model, grid, seeds and flops
// constants (input_error otherwise). Reduction comes from the reference
// FLOPS report; recall/bias from the final reported stage.
std::string compare_experiments(const std::vector<experiment_config> & cfgs, int workers_override = 0);

} // namespace vtp
