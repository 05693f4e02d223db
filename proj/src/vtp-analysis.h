#pragma once

// Retention heatmaps, the bottom-bias metric, synthetic planted-relevance
// scenes, and object recall — the measurement side of the harness.

#include "vtp-model.h"

#include <span>
#include <string>
#include <vector>

namespace vtp {

struct heatmap {
    int grid_h = 0;
    int grid_w = 0;
    std::vector<double> freq; // grid_h * grid_w retention frequencies in [0, 1]
    int samples = 0;

    double at(int r, int c) const { return freq[size_t(r) * grid_w + c]; }
};

// Per-cell frequency of membership in the given stage's retained set.
// input_error on mismatched grids or missing stage.
heatmap accumulate_heatmap(std::span<const forward_trace> traces, int stage_index);
heatmap heatmap_of(const retained_set & rs);

// Retention-mass-weighted mean of the normalized row index r/(grid_h-1):
// 0 = all mass on the top row, 1 = bottom, 0.5 = row-symmetric.
// undefined_value error when the map carries no mass.
double bottom_bias(const heatmap & hm);

// Grid rectangle [row0, row1) x [col0, col1).
struct grid_rect {
    int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
    int height() const { return row1 - row0; }
    int width() const { return col1 - col0; }
    bool contains(int r, int c) const { return r >= row0 && r < row1 && c >= col0 && c < col1; }
};

// Synthetic scene with ground-truth relevance: background tokens are
// isotropic noise, object tokens share a seeded unit direction u (plus
// noise), and the last text token is correlation·u + (1-correlation)·noise,
// so attention from the last text token can detect the object region.
struct planted_scene {
    token_sequence seq;
    grid_rect rect;
    uint64_t seed = 0;
    double correlation = 0.0;

    std::vector<int> object_indices() const;
};

planted_scene make_planted_scene(int grid_h, int grid_w, int text_len, const grid_rect & rect,
                                 uint64_t seed, double correlation, int hidden_dim);

// Identical-content probe: every token (visual and text) carries the same
// embedding, picked as the seeded candidate direction whose query/key images
// align at every layer. Content-identical keys make the rotary long-term
// decay the only source of score variation for the original criterion.
// A nonzero jitter adds position-independent content noise at that relative
// amplitude: small enough to leave the rotary ranking alone, it gives the
// rope-free criterion a content ordering instead of exact ties.
token_sequence make_constant_scene(const model_weights & w, int grid_h, int grid_w, int text_len,
                                   uint64_t seed, double jitter = 0.0);

// |retained ∩ object| / |object|
double object_recall(const retained_set & retained, const planted_scene & scene);

// Plain-text grid (one row per line) and binary 8-bit PGM exports.
void write_heatmap_txt(const heatmap & hm, const std::string & path);
void write_heatmap_pgm(const heatmap & hm, const std::string & path);

} // namespace vtp
