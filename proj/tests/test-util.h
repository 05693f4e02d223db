#pragma once

// Shared helpers for the unit and acceptance suites.

#include "vtp-model.h"
#include "vtp-rng.h"
#include "vtp-schedule.h"

#include <cstdint>
#include <vector>

namespace testutil {

inline vtp::model_config toy_config(int layers = 4, int hidden = 32, int heads = 4, int ffn = 64) {
    vtp::model_config cfg;
    cfg.num_layers = layers;
    cfg.hidden_dim = hidden;
    cfg.num_heads = heads;
    cfg.ffn_dim = ffn;
    return cfg;
}

// sequence with seeded random embeddings
inline vtp::token_sequence random_sequence(int grid_h, int grid_w, int text, int hidden, uint64_t seed) {
    vtp::token_sequence seq;
    seq.grid_h = grid_h;
    seq.grid_w = grid_w;
    seq.text_count = text;
    const int n = seq.total();
    seq.embeddings.resize(size_t(n) * hidden);
    vtp::rng_stream s = vtp::make_stream(seed, "test_seq");
    for (size_t i = 0; i < seq.embeddings.size(); ++i) {
        seq.embeddings[i] = s.gaussian(i) / std::sqrt(double(hidden));
    }
    seq.position_ids.resize(n);
    for (int i = 0; i < n; ++i) {
        seq.position_ids[i] = i;
    }
    return seq;
}

// random multi-stage schedule over the given model depth; fraction-of-alive
// retention keeps every stage within budget whatever the earlier stages kept
inline vtp::prune_schedule random_schedule(int num_layers, uint64_t seed) {
    vtp::rng_stream s = vtp::make_stream(seed, "test_schedule");
    vtp::prune_schedule sched;
    const int n_stages = 1 + int(s.uniform(0) * 2.999); // 1..3
    int next_layer = int(s.uniform(1) * 2.999);          // 0..2
    for (int i = 0; i < n_stages && next_layer < num_layers; ++i) {
        vtp::criterion crit;
        const double pick = s.uniform(20 + i);
        if (pick < 0.3) {
            crit.kind = vtp::criterion_kind::original;
        } else if (pick < 0.6) {
            crit.kind = vtp::criterion_kind::rope_free;
        } else if (pick < 0.75) {
            crit.kind = vtp::criterion_kind::knn_density;
            crit.knn_k = 1 + int(s.uniform(30 + i) * 2.999);
        } else if (pick < 0.9) {
            crit.kind = vtp::criterion_kind::ensemble;
            crit.stride = 2 + int(s.uniform(40 + i) * 1.999);
        } else {
            crit.kind = vtp::criterion_kind::uniform_stride;
            crit.stride = 2 + int(s.uniform(40 + i) * 1.999);
        }
        const double keep = 0.5 + 0.4 * s.uniform(50 + i);
        sched.stages.push_back({next_layer, crit, {vtp::retention_base::fraction_of_alive, keep}});
        next_layer += 1 + int(s.uniform(60 + i) * 2.999);
    }
    return sched;
}

} // namespace testutil
