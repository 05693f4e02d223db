#include "vtp-model.h"

#include "vtp-rng.h"
#include "vtp-schedule.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <tuple>

namespace vtp {

const char * status_name(status s) {
    switch (s) {
        case status::ok:              return "ok";
        case status::config_error:    return "config_error";
        case status::budget_error:    return "budget_error";
        case status::input_error:     return "input_error";
        case status::state_error:     return "state_error";
        case status::undefined_value: return "undefined_value";
        case status::io_error:        return "io_error";
        case status::runtime_error:   return "runtime_error";
    }
    return "unknown";
}

double model_config::match_strength(int layer) const {
    if (num_layers <= 1) {
        return qk_match_floor;
    }
    double t = double(layer) / double(num_layers - 1);
    return qk_match_floor + (qk_match_ceil - qk_match_floor) * t;
}

void model_config::validate() const {
    if (num_layers < 1) {
        fail(status::config_error, "num_layers must be >= 1, got " + std::to_string(num_layers));
    }
    if (hidden_dim < 1 || hidden_dim % 2 != 0) {
        fail(status::config_error, "hidden_dim must be a positive even integer, got " + std::to_string(hidden_dim));
    }
    if (num_heads < 1 || hidden_dim % num_heads != 0) {
        fail(status::config_error, "num_heads must divide hidden_dim (" + std::to_string(hidden_dim) +
                                   " % " + std::to_string(num_heads) + " != 0)");
    }
    if (head_dim() % 2 != 0) {
        fail(status::config_error, "head_dim must be even for rotary pairing, got " + std::to_string(head_dim()));
    }
    if (ffn_dim < 1) {
        fail(status::config_error, "ffn_dim must be >= 1, got " + std::to_string(ffn_dim));
    }
    if (!(rope_base > 0.0)) {
        fail(status::config_error, "rope_base must be positive");
    }
    if (qk_match_floor < 0.0 || qk_match_floor > 1.0 || qk_match_ceil < 0.0 || qk_match_ceil > 1.0) {
        fail(status::config_error, "qk_match_floor/ceil must lie in [0, 1]");
    }
}

namespace {

std::vector<double> gaussian_matrix(uint64_t seed, const std::string & name, uint64_t layer,
                                    size_t count, double scale) {
    rng_stream s = make_stream(seed, name, layer);
    std::vector<double> out(count);
    for (size_t i = 0; i < count; ++i) {
        out[i] = scale * s.gaussian(i);
    }
    return out;
}

} // namespace

model_weights init_model(const model_config & config, uint64_t seed) {
    config.validate();

    const size_t d  = config.hidden_dim;
    const size_t m  = config.ffn_dim;
    const double sigma = 0.02 / std::sqrt(double(config.num_layers));

    // shared query/key component, one draw per model
    rng_stream match = make_stream(seed, "qk_match");
    std::vector<double> shared(d * d);
    for (size_t i = 0; i < shared.size(); ++i) {
        shared[i] = match.gaussian(i);
    }

    model_weights w;
    w.config = config;
    w.seed = seed;
    w.layers.resize(config.num_layers);

    for (int l = 0; l < config.num_layers; ++l) {
        layer_weights & lw = w.layers[l];
        const double a = config.match_strength(l);
        const double b = std::sqrt(std::max(0.0, 1.0 - a * a));

        lw.wq = gaussian_matrix(seed, "wq", l, d * d, sigma);
        lw.wk = gaussian_matrix(seed, "wk", l, d * d, sigma);
        for (size_t i = 0; i < d * d; ++i) {
            lw.wq[i] = b * lw.wq[i] + a * sigma * shared[i];
            lw.wk[i] = b * lw.wk[i] + a * sigma * shared[i];
        }
        lw.wv     = gaussian_matrix(seed, "wv", l, d * d, sigma);
        lw.wo     = gaussian_matrix(seed, "wo", l, d * d, sigma);
        lw.w_up   = gaussian_matrix(seed, "w_up", l, m * d, sigma);
        lw.w_down = gaussian_matrix(seed, "w_down", l, d * m, sigma);
        lw.norm_attn.assign(d, 1.0);
        lw.norm_ffn.assign(d, 1.0);
    }
    w.norm_final.assign(d, 1.0);
    return w;
}

void apply_rope(std::span<double> head_vec, int64_t position, double rope_base) {
    const int hd = int(head_vec.size());
    if (hd % 2 != 0) {
        fail(status::config_error, "rope requires an even head dimension, got " + std::to_string(hd));
    }
    if (position < 0) {
        fail(status::input_error, "rope position must be non-negative");
    }
    for (int j = 0; j < hd / 2; ++j) {
        const double theta = std::pow(rope_base, -2.0 * j / double(hd));
        const double angle = double(position) * theta;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x0 = head_vec[2 * j];
        const double x1 = head_vec[2 * j + 1];
        head_vec[2 * j]     = x0 * c - x1 * s;
        head_vec[2 * j + 1] = x0 * s + x1 * c;
    }
}

void apply_rope_heads(std::span<double> vec, int num_heads, int64_t position, double rope_base) {
    const int hd = int(vec.size()) / num_heads;
    for (int h = 0; h < num_heads; ++h) {
        apply_rope(vec.subspan(size_t(h) * hd, hd), position, rope_base);
    }
}

void token_sequence::validate(const model_config & config) const {
    const int d = config.hidden_dim;
    if (grid_h < 0 || grid_w < 0 || (grid_h == 0) != (grid_w == 0)) {
        fail(status::input_error, "grid dimensions must both be positive or both zero");
    }
    if (text_count < 1) {
        fail(status::input_error, "sequence needs at least one text token");
    }
    if (embeddings.size() != size_t(total()) * d) {
        fail(status::input_error, "embedding buffer size does not match token count * hidden_dim");
    }
    if (position_ids.size() != size_t(total())) {
        fail(status::input_error, "position_ids size does not match token count");
    }
    for (size_t i = 0; i < position_ids.size(); ++i) {
        if (position_ids[i] < 0) {
            fail(status::input_error, "position_ids must be non-negative");
        }
        if (i > 0 && position_ids[i] <= position_ids[i - 1]) {
            fail(status::input_error, "position_ids must be strictly increasing");
        }
    }
}

namespace {

constexpr double k_norm_eps = 1e-8;

void rms_norm(const double * x, const double * gamma, int d, double * out) {
    double ss = 0.0;
    for (int i = 0; i < d; ++i) {
        ss += x[i] * x[i];
    }
    const double inv = 1.0 / std::sqrt(ss / d + k_norm_eps);
    for (int i = 0; i < d; ++i) {
        out[i] = x[i] * inv * gamma[i];
    }
}

// y = W x, W row-major (rows x cols)
void mat_vec(const double * W, const double * x, int rows, int cols, double * y) {
    for (int r = 0; r < rows; ++r) {
        const double * row = W + size_t(r) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) {
            acc += row[c] * x[c];
        }
        y[r] = acc;
    }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

struct scratch {
    std::vector<double> normed, q, k, v, attn, proj, ffn_mid;
};

// One block over the alive tokens; counts MACs for projections, score/value
// products and the MLP when macs != nullptr.
void run_layer(const model_weights & w, int layer, sequence_state & st, scratch & sc, uint64_t * macs) {
    const model_config & cfg = w.config;
    const int d  = cfg.hidden_dim;
    const int m  = cfg.ffn_dim;
    const int nh = cfg.num_heads;
    const int hd = cfg.head_dim();
    const int n  = st.total();
    const layer_weights & lw = w.layers[layer];

    sc.normed.resize(size_t(n) * d);
    sc.q.resize(size_t(n) * d);
    sc.k.resize(size_t(n) * d);
    sc.v.resize(size_t(n) * d);
    sc.attn.resize(size_t(n) * d);
    sc.proj.resize(d);
    sc.ffn_mid.resize(m);

    for (int i = 0; i < n; ++i) {
        double * xi = st.x.data() + size_t(i) * d;
        double * ni = sc.normed.data() + size_t(i) * d;
        rms_norm(xi, lw.norm_attn.data(), d, ni);
        mat_vec(lw.wq.data(), ni, d, d, sc.q.data() + size_t(i) * d);
        mat_vec(lw.wk.data(), ni, d, d, sc.k.data() + size_t(i) * d);
        mat_vec(lw.wv.data(), ni, d, d, sc.v.data() + size_t(i) * d);
        apply_rope_heads({sc.q.data() + size_t(i) * d, size_t(d)}, nh, st.pos[i], cfg.rope_base);
        apply_rope_heads({sc.k.data() + size_t(i) * d, size_t(d)}, nh, st.pos[i], cfg.rope_base);
    }
    if (macs) {
        *macs += uint64_t(3) * n * d * d; // q, k, v
    }

    const double inv_scale = 1.0 / std::sqrt(double(hd));
    std::vector<double> logits;
    for (int i = 0; i < n; ++i) {
        double * out = sc.attn.data() + size_t(i) * d;
        std::fill(out, out + d, 0.0);
        logits.resize(i + 1);
        for (int h = 0; h < nh; ++h) {
            const double * qh = sc.q.data() + size_t(i) * d + size_t(h) * hd;
            double lmax = -1e300;
            for (int j = 0; j <= i; ++j) {
                const double * kh = sc.k.data() + size_t(j) * d + size_t(h) * hd;
                double acc = 0.0;
                for (int t = 0; t < hd; ++t) {
                    acc += qh[t] * kh[t];
                }
                logits[j] = acc * inv_scale;
                lmax = std::max(lmax, logits[j]);
            }
            double denom = 0.0;
            for (int j = 0; j <= i; ++j) {
                logits[j] = std::exp(logits[j] - lmax);
                denom += logits[j];
            }
            double * oh = out + size_t(h) * hd;
            for (int j = 0; j <= i; ++j) {
                const double wgt = logits[j] / denom;
                const double * vh = sc.v.data() + size_t(j) * d + size_t(h) * hd;
                for (int t = 0; t < hd; ++t) {
                    oh[t] += wgt * vh[t];
                }
            }
        }
        if (macs) {
            *macs += uint64_t(2) * (i + 1) * d; // logits + value mix across heads
        }
    }

    for (int i = 0; i < n; ++i) {
        mat_vec(lw.wo.data(), sc.attn.data() + size_t(i) * d, d, d, sc.proj.data());
        double * xi = st.x.data() + size_t(i) * d;
        for (int t = 0; t < d; ++t) {
            xi[t] += sc.proj[t];
        }

        double * ni = sc.normed.data() + size_t(i) * d;
        rms_norm(xi, lw.norm_ffn.data(), d, ni);
        mat_vec(lw.w_up.data(), ni, m, d, sc.ffn_mid.data());
        for (int t = 0; t < m; ++t) {
            sc.ffn_mid[t] = silu(sc.ffn_mid[t]);
        }
        mat_vec(lw.w_down.data(), sc.ffn_mid.data(), d, m, sc.proj.data());
        for (int t = 0; t < d; ++t) {
            xi[t] += sc.proj[t];
        }
    }
    if (macs) {
        *macs += uint64_t(n) * d * d;           // output projection
        *macs += uint64_t(2) * n * d * m;       // mlp up + down
    }
}

sequence_state make_state(const token_sequence & seq, int d) {
    sequence_state st;
    st.x = seq.embeddings;
    st.pos = seq.position_ids;
    st.visual_alive = seq.visual_count();
    st.text_count = seq.text_count;
    st.visual_ids.resize(st.visual_alive);
    for (int i = 0; i < st.visual_alive; ++i) {
        st.visual_ids[i] = i;
    }
    (void) d;
    return st;
}

// drop visual rows not in `kept` (sorted original indices)
void compact_state(sequence_state & st, const std::vector<int> & kept, int d) {
    std::vector<double>  x;
    std::vector<int64_t> pos;
    std::vector<int>     ids;
    x.reserve((kept.size() + st.text_count) * d);

    size_t ki = 0;
    for (int row = 0; row < st.visual_alive; ++row) {
        if (ki < kept.size() && st.visual_ids[row] == kept[ki]) {
            const double * src = st.x.data() + size_t(row) * d;
            x.insert(x.end(), src, src + d);
            pos.push_back(st.pos[row]);
            ids.push_back(st.visual_ids[row]);
            ++ki;
        }
    }
    if (ki != kept.size()) {
        fail(status::runtime_error, "stage selection contains tokens that are not alive");
    }
    for (int row = st.visual_alive; row < st.total(); ++row) {
        const double * src = st.x.data() + size_t(row) * d;
        x.insert(x.end(), src, src + d);
        pos.push_back(st.pos[row]);
    }
    st.x = std::move(x);
    st.pos = std::move(pos);
    st.visual_ids = std::move(ids);
    st.visual_alive = int(kept.size());
}

} // namespace

std::vector<double> attention_row(const model_weights & w, const sequence_state & enter,
                                  int layer_index, const score_options & opt, int query_row) {
    const model_config & cfg = w.config;
    if (layer_index < 0 || layer_index >= cfg.num_layers) {
        fail(status::config_error, "layer index " + std::to_string(layer_index) + " out of range [0, " +
                                   std::to_string(cfg.num_layers) + ")");
    }
    if (enter.text_count < 1) {
        fail(status::input_error, "scoring requires at least one alive text token");
    }

    const int d  = cfg.hidden_dim;
    const int nh = cfg.num_heads;
    const int hd = cfg.head_dim();
    const int query = query_row < 0 ? enter.total() - 1 : query_row;
    if (query >= enter.total()) {
        fail(status::input_error, "query row out of range");
    }
    const int n = query + 1; // causal: columns stop at the query
    const layer_weights & lw = w.layers[layer_index];

    std::vector<double> normed(d), q(d), k(size_t(n) * d);
    rms_norm(enter.x.data() + size_t(query) * d, lw.norm_attn.data(), d, normed.data());
    mat_vec(lw.wq.data(), normed.data(), d, d, q.data());
    if (opt.use_rope) {
        apply_rope_heads({q.data(), size_t(d)}, nh, enter.pos[query], cfg.rope_base);
    }
    for (int j = 0; j < n; ++j) {
        rms_norm(enter.x.data() + size_t(j) * d, lw.norm_attn.data(), d, normed.data());
        mat_vec(lw.wk.data(), normed.data(), d, d, k.data() + size_t(j) * d);
        if (opt.use_rope) {
            apply_rope_heads({k.data() + size_t(j) * d, size_t(d)}, nh, enter.pos[j], cfg.rope_base);
        }
    }

    const double inv_scale = 1.0 / std::sqrt(double(hd));
    std::vector<double> scores(n, 0.0);
    std::vector<double> row(n);
    bool first_head = true;
    for (int h = 0; h < nh; ++h) {
        const double * qh = q.data() + size_t(h) * hd;
        double lmax = -1e300;
        for (int j = 0; j < n; ++j) {
            const double * kh = k.data() + size_t(j) * d + size_t(h) * hd;
            double acc = 0.0;
            for (int t = 0; t < hd; ++t) {
                acc += qh[t] * kh[t];
            }
            row[j] = acc * inv_scale;
            lmax = std::max(lmax, row[j]);
        }
        if (opt.kind == score_kind::post_softmax) {
            double denom = 0.0;
            for (int j = 0; j < n; ++j) {
                row[j] = std::exp(row[j] - lmax);
                denom += row[j];
            }
            for (int j = 0; j < n; ++j) {
                row[j] /= denom;
            }
        }
        for (int j = 0; j < n; ++j) {
            switch (opt.agg) {
                case head_agg::mean:
                case head_agg::sum:
                    scores[j] += row[j];
                    break;
                case head_agg::max:
                    scores[j] = first_head ? row[j] : std::max(scores[j], row[j]);
                    break;
            }
        }
        first_head = false;
    }
    if (opt.agg == head_agg::mean) {
        for (double & s : scores) {
            s /= nh;
        }
    }
    return scores;
}

std::vector<double> last_token_attention(const model_weights & w, const sequence_state & enter,
                                         int layer_index, const score_options & opt) {
    std::vector<double> full = attention_row(w, enter, layer_index, opt, -1);
    full.resize(enter.visual_alive); // restrict to visual columns, no renormalization
    return full;
}

forward_trace forward(const model_weights & w, const token_sequence & input,
                      const prune_schedule & schedule, const forward_options & opt) {
    const model_config & cfg = w.config;
    input.validate(cfg);
    schedule.validate(cfg.num_layers);

    forward_trace trace;
    trace.instrumented = opt.instrument;

    token_sequence seq;
    std::vector<prune_stage> stages;
    if (schedule.placement == placement_mode::pre_llm) {
        // the placement's selection is the run's single stage
        std::vector<int> kept = probe_stage_selection(w, input, schedule.stages.at(0));
        trace.stages.push_back({0, input.grid_h, input.grid_w, kept});
        seq = keep_visual_subset(input, kept, cfg.hidden_dim);
        if (opt.stop_after_stages >= 0 && int(trace.stages.size()) >= opt.stop_after_stages) {
            return trace;
        }
    } else {
        std::tie(seq, stages) = apply_placement(w, input, schedule);
    }
    const int d = cfg.hidden_dim;
    const int n_original = seq.visual_count();

    uint64_t * macs = opt.instrument ? &trace.macs : nullptr;

    sequence_state state = make_state(seq, d);
    sequence_state enter_prev; // states entering the previous layer
    scratch sc;
    size_t stage_i = 0;

    for (int l = 0; l < cfg.num_layers; ++l) {
        if (stage_i < stages.size() && stages[stage_i].layer == l) {
            const prune_stage & stage = stages[stage_i];
            const int scoring_layer = l == 0 ? 0 : l - 1;
            const sequence_state & scoring_state = l == 0 ? state : enter_prev;
            score_context ctx{&w, &scoring_state, scoring_layer, &seq};
            const int budget = stage.keep.resolve(n_original, state.visual_alive);
            std::vector<int> kept = select(stage.crit, ctx, budget);
            compact_state(state, kept, d);
            trace.stages.push_back({int(stage_i), seq.grid_h, seq.grid_w, std::move(kept)});
            ++stage_i;
            if (opt.stop_after_stages >= 0 && int(trace.stages.size()) >= opt.stop_after_stages) {
                return trace;
            }
        }

        trace.tokens_per_layer.push_back(state.total());
        trace.visual_per_layer.push_back(state.visual_alive);
        if (opt.capture_rows) {
            trace.attn_rows.push_back(attention_row(w, state, l, opt.row_options));
        }

        enter_prev = state;
        run_layer(w, l, state, sc, macs);
    }

    const int last = state.total() - 1;
    trace.final_hidden.resize(d);
    rms_norm(state.x.data() + size_t(last) * d, w.norm_final.data(), d, trace.final_hidden.data());
    return trace;
}

} // namespace vtp
