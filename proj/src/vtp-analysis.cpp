#include "vtp-analysis.h"

#include "vtp-rng.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace vtp {

heatmap heatmap_of(const retained_set & rs) {
    heatmap hm;
    hm.grid_h = rs.grid_h;
    hm.grid_w = rs.grid_w;
    hm.freq.assign(size_t(rs.grid_h) * rs.grid_w, 0.0);
    hm.samples = 1;
    for (int idx : rs.indices) {
        hm.freq.at(idx) = 1.0;
    }
    return hm;
}

heatmap accumulate_heatmap(std::span<const forward_trace> traces, int stage_index) {
    heatmap hm;
    std::vector<int64_t> counts;
    for (const forward_trace & tr : traces) {
        if (stage_index < 0 || stage_index >= int(tr.stages.size())) {
            fail(status::input_error, "trace has no stage " + std::to_string(stage_index));
        }
        const retained_set & rs = tr.stages[stage_index];
        if (hm.samples == 0) {
            hm.grid_h = rs.grid_h;
            hm.grid_w = rs.grid_w;
            counts.assign(size_t(rs.grid_h) * rs.grid_w, 0);
        } else if (rs.grid_h != hm.grid_h || rs.grid_w != hm.grid_w) {
            fail(status::input_error, "traces disagree on grid dimensions");
        }
        for (int idx : rs.indices) {
            counts.at(idx) += 1;
        }
        hm.samples += 1;
    }
    hm.freq.assign(counts.size(), 0.0);
    for (size_t i = 0; i < counts.size(); ++i) {
        hm.freq[i] = hm.samples > 0 ? double(counts[i]) / hm.samples : 0.0;
    }
    return hm;
}

double bottom_bias(const heatmap & hm) {
    double mass = 0.0;
    double weighted = 0.0;
    for (int r = 0; r < hm.grid_h; ++r) {
        double row_mass = 0.0;
        for (int c = 0; c < hm.grid_w; ++c) {
            row_mass += hm.at(r, c);
        }
        mass += row_mass;
        if (hm.grid_h > 1) {
            weighted += row_mass * (double(r) / (hm.grid_h - 1));
        }
    }
    if (mass <= 0.0) {
        fail(status::undefined_value, "bottom_bias needs a heatmap with retained mass");
    }
    if (hm.grid_h <= 1) {
        return 0.5; // a single row is its own vertical mirror
    }
    return weighted / mass;
}

std::vector<int> planted_scene::object_indices() const {
    std::vector<int> out;
    for (int r = rect.row0; r < rect.row1; ++r) {
        for (int c = rect.col0; c < rect.col1; ++c) {
            out.push_back(r * seq.grid_w + c);
        }
    }
    return out;
}

planted_scene make_planted_scene(int grid_h, int grid_w, int text_len, const grid_rect & rect,
                                 uint64_t seed, double correlation, int hidden_dim) {
    if (grid_h < 1 || grid_w < 1 || text_len < 1) {
        fail(status::input_error, "scene needs a non-empty grid and at least one text token");
    }
    if (rect.row0 < 0 || rect.col0 < 0 || rect.row1 > grid_h || rect.col1 > grid_w ||
        rect.height() < 1 || rect.width() < 1) {
        fail(status::input_error, "object rectangle is degenerate or outside the grid");
    }
    if (correlation < 0.0 || correlation > 1.0) {
        fail(status::input_error, "correlation must lie in [0, 1]");
    }
    const int d = hidden_dim;
    const int n = grid_h * grid_w;

    // unit object direction
    rng_stream u_stream = make_stream(seed, "scene_u");
    std::vector<double> u(d);
    double norm = 0.0;
    for (int t = 0; t < d; ++t) {
        u[t] = u_stream.gaussian(t);
        norm += u[t] * u[t];
    }
    norm = std::sqrt(norm);
    for (double & v : u) {
        v /= norm;
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
    const double object_noise = 0.35;

    planted_scene scene;
    scene.rect = rect;
    scene.seed = seed;
    scene.correlation = correlation;
    scene.seq.grid_h = grid_h;
    scene.seq.grid_w = grid_w;
    scene.seq.text_count = text_len;
    scene.seq.embeddings.resize(size_t(n + text_len) * d);
    scene.seq.position_ids.resize(n + text_len);

    rng_stream noise = make_stream(seed, "scene_noise");
    for (int i = 0; i < n; ++i) {
        const int r = i / grid_w;
        const int c = i % grid_w;
        double * x = scene.seq.embeddings.data() + size_t(i) * d;
        const bool is_object = rect.contains(r, c);
        for (int t = 0; t < d; ++t) {
            const double g = noise.gaussian(uint64_t(i) * d + t) * inv_sqrt_d;
            x[t] = is_object ? u[t] + object_noise * g : g;
        }
    }

    rng_stream text = make_stream(seed, "scene_text");
    for (int i = 0; i < text_len; ++i) {
        double * x = scene.seq.embeddings.data() + size_t(n + i) * d;
        const bool is_query = i == text_len - 1;
        for (int t = 0; t < d; ++t) {
            const double g = text.gaussian(uint64_t(i) * d + t) * inv_sqrt_d;
            x[t] = is_query ? correlation * u[t] + (1.0 - correlation) * g : g;
        }
    }

    for (int i = 0; i < n + text_len; ++i) {
        scene.seq.position_ids[i] = i;
    }
    return scene;
}

token_sequence make_constant_scene(const model_weights & w, int grid_h, int grid_w, int text_len,
                                   uint64_t seed, double jitter) {
    if (grid_h < 1 || grid_w < 1 || text_len < 1) {
        fail(status::input_error, "scene needs a non-empty grid and at least one text token");
    }
    const model_config & cfg = w.config;
    const int d = cfg.hidden_dim;

    // candidate search: the direction whose query/key images stay positively
    // aligned at every layer, so rotary decay acts on a coherent peak
    constexpr int n_candidates = 48;
    std::vector<double> best(d);
    double best_score = -1e300;
    std::vector<double> cand(d), normed(d), q(d), k(d);
    for (int ci = 0; ci < n_candidates; ++ci) {
        rng_stream s = make_stream(seed, "constant_scene", ci);
        double norm = 0.0;
        for (int t = 0; t < d; ++t) {
            cand[t] = s.gaussian(t);
            norm += cand[t] * cand[t];
        }
        norm = std::sqrt(norm);
        for (double & v : cand) {
            v = v / norm;
        }

        double worst = 1e300;
        for (int l = 0; l < cfg.num_layers; ++l) {
            const layer_weights & lw = w.layers[l];
            double ss = 0.0;
            for (int t = 0; t < d; ++t) {
                ss += cand[t] * cand[t];
            }
            const double inv = 1.0 / std::sqrt(ss / d + 1e-8);
            for (int t = 0; t < d; ++t) {
                normed[t] = cand[t] * inv * lw.norm_attn[t];
            }
            for (int r = 0; r < d; ++r) {
                double aq = 0.0, ak = 0.0;
                for (int t = 0; t < d; ++t) {
                    aq += lw.wq[size_t(r) * d + t] * normed[t];
                    ak += lw.wk[size_t(r) * d + t] * normed[t];
                }
                q[r] = aq;
                k[r] = ak;
            }
            double align = 0.0;
            for (int r = 0; r < d; ++r) {
                align += q[r] * k[r];
            }
            worst = std::min(worst, align);
        }
        if (worst > best_score) {
            best_score = worst;
            best = cand;
        }
    }

    const int n = grid_h * grid_w;
    token_sequence seq;
    seq.grid_h = grid_h;
    seq.grid_w = grid_w;
    seq.text_count = text_len;
    seq.embeddings.resize(size_t(n + text_len) * d);
    seq.position_ids.resize(n + text_len);
    rng_stream js = make_stream(seed, "const_jitter");
    for (int i = 0; i < n + text_len; ++i) {
        double * x = seq.embeddings.data() + size_t(i) * d;
        for (int t = 0; t < d; ++t) {
            // same content everywhere; scale is irrelevant under rms norm
            x[t] = best[t] + jitter * js.gaussian(uint64_t(i) * d + t);
        }
        seq.position_ids[i] = i;
    }
    return seq;
}

double object_recall(const retained_set & retained, const planted_scene & scene) {
    const std::vector<int> object = scene.object_indices();
    if (object.empty()) {
        fail(status::input_error, "scene has no object tokens");
    }
    size_t hits = 0;
    // retained.indices is sorted
    for (int idx : object) {
        if (std::binary_search(retained.indices.begin(), retained.indices.end(), idx)) {
            ++hits;
        }
    }
    return double(hits) / double(object.size());
}

void write_heatmap_txt(const heatmap & hm, const std::string & path) {
    std::ofstream out(path);
    if (!out) {
        fail(status::io_error, "cannot open " + path + " for writing");
    }
    char buf[32];
    for (int r = 0; r < hm.grid_h; ++r) {
        for (int c = 0; c < hm.grid_w; ++c) {
            std::snprintf(buf, sizeof(buf), "%.6f", hm.at(r, c));
            out << (c ? " " : "") << buf;
        }
        out << "\n";
    }
}

void write_heatmap_pgm(const heatmap & hm, const std::string & path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(status::io_error, "cannot open " + path + " for writing");
    }
    out << "P5\n" << hm.grid_w << " " << hm.grid_h << "\n255\n";
    for (int r = 0; r < hm.grid_h; ++r) {
        for (int c = 0; c < hm.grid_w; ++c) {
            const double v = std::clamp(hm.at(r, c), 0.0, 1.0);
            out.put(char(int(std::lround(v * 255.0))));
        }
    }
}

} // namespace vtp
