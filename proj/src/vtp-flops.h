#pragma once

// Analytic per-layer transformer cost C(n) = 4nd² + 2n²d + 2ndm and the
// schedule-aware reduction ratio 1 - Σ C(n_l) / (T·C(n)), counting visual
// tokens only. The instrumented multiply-accumulate counter in the forward
// pass is the desk-scale oracle for the same model (projections, score and
// value products, and MLP matrices; norms/softmax/rope excluded).

#include "vtp-model.h"
#include "vtp-schedule.h"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vtp {

uint64_t layer_cost(uint64_t n_tokens, uint64_t d, uint64_t m);

struct flops_report {
    int num_layers = 0;
    uint64_t hidden = 0;
    uint64_t ffn = 0;
    uint64_t n_visual = 0;                // unpruned visual token count
    std::vector<uint64_t> layer_tokens;   // visual tokens entering each layer
    uint64_t baseline_total = 0;          // T * C(n)
    uint64_t pruned_total = 0;            // Σ C(n_l)
    double reduction = 0.0;

    std::string table() const;
    std::string json() const;
};

flops_report make_flops_report(int num_layers, uint64_t d, uint64_t m, uint64_t n_visual,
                               std::span<const uint64_t> layer_tokens);

double reduction_ratio(int num_layers, uint64_t d, uint64_t m, uint64_t n_visual,
                       std::span<const uint64_t> layer_tokens);

// Analytic per-layer visual-token counts for a schedule (no forward pass).
// Ensemble stages use the expected union size round(b + L - bL/alive).
std::vector<uint64_t> resolve_layer_counts(const prune_schedule & schedule, int grid_h, int grid_w,
                                           int num_layers);

// Per-layer counts realized by a trace (visual tokens entering each layer).
std::vector<uint64_t> trace_layer_counts(const forward_trace & trace);

// Total multiply-accumulates of an instrumented trace; state_error otherwise.
uint64_t measured_multiply_accumulates(const forward_trace & trace);

// Closed form for what the counter tallies on an unpruned pass over n_total
// tokens: per layer 4nd² + n(n+1)d + 2ndm (causal score/value products).
uint64_t expected_macs_unpruned(const model_config & config, int n_total);

} // namespace vtp
