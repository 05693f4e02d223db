#pragma once

// Toy decoder-only transformer: pre-RMSNorm blocks, causal attention with
// rotary position embeddings, SiLU MLP. Weights are deterministic in
// (config, seed) and immutable after init; forward passes are single-threaded
// and may run concurrently on shared weights.

#include "vtp-error.h"

#include <cstdint>
#include <span>
#include <vector>

namespace vtp {

struct prune_schedule; // vtp-schedule.h

struct model_config {
    int    num_layers = 6;
    int    hidden_dim = 64;
    int    num_heads  = 4;
    int    ffn_dim    = 128;
    double rope_base  = 10000.0;

    // Shared query/key component mixed into each layer's projections, ramping
    // linearly from floor (layer 0) to ceil (last layer). Entry marginals stay
    // Gaussian; the ramp is what makes attention increasingly content-matching
    // with depth, standing in for trained-attention behavior at toy scale.
    double qk_match_floor = 0.2;
    double qk_match_ceil  = 0.8;

    int head_dim() const { return num_heads > 0 ? hidden_dim / num_heads : 0; }
    double match_strength(int layer) const;

    // throws config_error on invalid dimensions
    void validate() const;
};

struct layer_weights {
    // d*d row-major (row = output index)
    std::vector<double> wq, wk, wv, wo;
    std::vector<double> w_up;    // m*d
    std::vector<double> w_down;  // d*m
    std::vector<double> norm_attn, norm_ffn; // d
};

struct model_weights {
    model_config config;
    uint64_t seed = 0;
    std::vector<layer_weights> layers;
    std::vector<double> norm_final; // d
};

model_weights init_model(const model_config & config, uint64_t seed);

// In-place rotation of one head vector: pair (v[2j], v[2j+1]) rotated by
// position * base^(-2j/head_dim). Norm-preserving; position 0 is the identity.
void apply_rope(std::span<double> head_vec, int64_t position, double rope_base);

// Rotate all heads of a packed d-vector.
void apply_rope_heads(std::span<double> vec, int num_heads, int64_t position, double rope_base);

// LM input: a row-major grid_h x grid_w block of visual embeddings followed by
// text embeddings, with one position id per token (strictly increasing when
// unpruned). Pruning keeps original position ids.
struct token_sequence {
    int grid_h = 0;
    int grid_w = 0;
    int text_count = 0;
    std::vector<double>  embeddings;   // (visual + text) x d
    std::vector<int64_t> position_ids; // per token

    int visual_count() const { return grid_h * grid_w; }
    int total() const { return visual_count() + text_count; }

    const double * token(int i, int d) const { return embeddings.data() + size_t(i) * d; }

    void validate(const model_config & config) const;
};

// Alive-token view used inside a forward pass. Rows keep the original
// sequence order: alive visual tokens first, then text.
struct sequence_state {
    std::vector<double>  x;          // alive x d
    std::vector<int64_t> pos;        // alive
    std::vector<int>     visual_ids; // original grid index per alive visual row
    int visual_alive = 0;
    int text_count   = 0;

    int total() const { return visual_alive + text_count; }
};

enum class head_agg  { mean, sum, max };
enum class score_kind { post_softmax, pre_softmax };

struct score_options {
    bool       use_rope = true;
    head_agg   agg      = head_agg::mean;
    score_kind kind     = score_kind::post_softmax;
};

// Attention row of the last text token for layer `layer_index`, computed from
// the states entering that layer and restricted to alive visual columns
// (post-softmax values come from the full causal row, no renormalization).
// With use_rope=false queries/keys stay unrotated for this computation only.
std::vector<double> last_token_attention(const model_weights & w, const sequence_state & enter,
                                         int layer_index, const score_options & opt);

// Full causal row (visual + text columns) of one query token; query_row = -1
// selects the last token. Rows are lower-triangular: columns stop at the query.
std::vector<double> attention_row(const model_weights & w, const sequence_state & enter,
                                  int layer_index, const score_options & opt, int query_row = -1);

// Visual tokens surviving one stage, as sorted original grid indices.
struct retained_set {
    int stage  = 0;
    int grid_h = 0;
    int grid_w = 0;
    std::vector<int> indices;
};

struct forward_trace {
    std::vector<retained_set> stages;
    std::vector<double> final_hidden;            // last text token, post final norm
    std::vector<int> tokens_per_layer;           // alive (visual+text) entering each layer
    std::vector<int> visual_per_layer;           // alive visual entering each layer
    std::vector<std::vector<double>> attn_rows;  // per-layer last-token rows when captured
    bool instrumented = false;
    uint64_t macs = 0;
};

struct forward_options {
    bool instrument   = false;
    bool capture_rows = false;   // record every layer's last-token attention row
    score_options row_options;   // options for the captured rows
    int  stop_after_stages = -1; // >=0: stop once this many stages applied (trace has no final_hidden)
};

forward_trace forward(const model_weights & w, const token_sequence & seq,
                      const prune_schedule & schedule, const forward_options & opt = {});

} // namespace vtp
