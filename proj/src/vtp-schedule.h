#pragma once

// Pruning schedules: stages, placement modes, and the FastV / PyramidDrop /
// FEATHER presets. A stage at layer K leaves layers 0..K-1 at full width,
// ranks tokens with layer K-1's attention row (K=0 probes layer 0 on the raw
// inputs), and drops losers before layer K runs.

#include "vtp-criteria.h"
#include "vtp-model.h"

#include <string>
#include <utility>
#include <vector>

namespace vtp {

enum class retention_base { fraction_of_original, fraction_of_alive, absolute_count };

struct retention_spec {
    retention_base base = retention_base::fraction_of_original;
    double value = 1.0;

    // resolved survivor count; throws budget_error if it exceeds `alive`
    int resolve(int n_original, int alive) const;
};

struct prune_stage {
    int layer = 0;
    criterion crit;
    retention_spec keep;
};

enum class placement_mode { in_llm, pre_llm, text_only };

const char * placement_name(placement_mode m);
placement_mode placement_from_name(const std::string & name);

struct prune_schedule {
    std::vector<prune_stage> stages; // strictly increasing layers
    placement_mode placement = placement_mode::in_llm;

    // throws config_error on bad layers / placement constraints
    void validate(int num_layers) const;

    std::string describe() const;
};

// One stage at `layer` ranking by original attention, keeping (1-ratio) of the
// original visual tokens.
prune_schedule preset_fastv(int layer = 3, double ratio = 0.75);

// Multi-stage original-attention pruning; each stage keeps the given fraction
// of the tokens alive at stage entry.
prune_schedule preset_pyramiddrop(const std::vector<int> & layers = {8, 16, 24},
                                  const std::vector<double> & keep = {0.5, 0.5, 0.5});

enum class feather_base { original_count, remaining_count };

// Stage 1: ensemble (top (1-ratio)·n by rope-free attention ∪ stride lattice)
// at k1. Stage 2: rope-free attention at k2 keeping (1-ratio)² of the original
// visual tokens (original_count) or of the stage-1 survivors (remaining_count).
prune_schedule preset_feather(int k1 = 8, int k2 = 16, double ratio = 0.75,
                              int stride = 3, feather_base base = feather_base::original_count);

// Resolve placement: in_llm passes through; pre_llm computes its single
// stage's selection from a probe of the unpruned model and physically
// truncates the sequence (position ids preserved); text_only drops every
// visual token. Returns the effective sequence and in-LLM stages.
std::pair<token_sequence, std::vector<prune_stage>>
apply_placement(const model_weights & w, const token_sequence & seq, const prune_schedule & schedule);

// The selection a single stage would make on this unpruned sequence.
std::vector<int> probe_stage_selection(const model_weights & w, const token_sequence & seq,
                                       const prune_stage & stage);

// Sequence with only the given visual tokens (sorted original indices) plus
// all text tokens; position ids preserved. The visual block no longer forms a
// full grid, so the result carries a synthetic 1 x |kept| layout.
token_sequence keep_visual_subset(const token_sequence & seq, const std::vector<int> & kept, int hidden_dim);

} // namespace vtp
