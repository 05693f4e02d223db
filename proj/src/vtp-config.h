#pragma once

// Experiment configuration: a flat `key = value` file (# comments). Unknown
// keys are rejected; dump() prints every key in canonical form and re-parses
// to an identical run plan.

#include "vtp-model.h"
#include "vtp-schedule.h"

#include <cstdint>
#include <string>
#include <vector>

namespace vtp {

struct experiment_config {
    std::string id = "exp";

    model_config model;
    uint64_t model_seed = 1;

    int grid_rows = 12;
    int grid_cols = 12;
    int text_tokens = 4;
    double correlation = 0.9;

    // object rectangle: size fixed, position sampled per seed unless fixed
    int rect_rows = 4;
    int rect_cols = 4;
    bool rect_fixed = false;
    int rect_row = 0;
    int rect_col = 0;

    std::vector<uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7};

    // schedule
    std::string preset = "fastv"; // fastv | pyramiddrop | feather | none
    double ratio = 0.75;
    std::vector<int> stage_layers;     // empty: preset defaults
    std::vector<double> keep;          // pyramiddrop per-stage keep
    int stride = 3;
    int knn_k = 5;
    std::string agg = "mean";          // mean | sum | max
    std::string score = "post_softmax";
    std::string stage2_base = "original"; // original | remaining
    std::string placement = "in_llm";
    std::string stages_text;           // explicit "K:criterion:base=value; ..." overrides preset

    // constants for the reference FLOPS report
    int flops_layers = 32;
    uint64_t flops_hidden = 4096;
    uint64_t flops_ffn = 11008;
    int flops_grid_rows = 27;
    int flops_grid_cols = 27;

    std::string out_dir = "runs/out";
    bool instrument = false;
    int workers = 1;

    static experiment_config load_file(const std::string & path);
    static experiment_config parse_text(const std::string & text);

    // set one key; throws config_error naming the key
    void set(const std::string & key, const std::string & value);

    std::string dump() const;

    // full-plan validation (model dims, rect, schedule vs run and flops layers)
    void validate() const;

    prune_schedule resolve_schedule() const;
};

} // namespace vtp
