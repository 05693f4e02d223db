#pragma once

// Independent reference implementations used only by tests.
//
// masked_forward: full-length forward pass that never removes tokens; pruned
// tokens keep their rows but their key/value columns are masked out of every
// softmax from their pruning layer on (equivalent to forcing the attention
// weight to zero and renormalizing). Written from the model description, not
// from the engine's forward path.
//
// brute_knn: all-pairs density-peak scores, the oracle the criteria module
// must match exactly.

#include "vtp-model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

struct knn_result {
    std::vector<double> rho, delta, importance;
};

inline knn_result brute_knn(const std::vector<double> & feats, int n, int dim, int k) {
    auto d2 = [&](int a, int b) {
        double acc = 0.0;
        for (int t = 0; t < dim; ++t) {
            const double diff = feats[size_t(a) * dim + t] - feats[size_t(b) * dim + t];
            acc += diff * diff;
        }
        return acc;
    };

    std::vector<double> mean_d(n, 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> others;
        for (int j = 0; j < n; ++j) {
            if (j != i) {
                others.push_back({d2(i, j), j});
            }
        }
        std::sort(others.begin(), others.end());
        double acc = 0.0;
        for (int t = 0; t < k; ++t) {
            acc += others[t].first;
        }
        mean_d[i] = acc / k;
    }

    std::vector<double> sorted = mean_d;
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    knn_result r;
    r.rho.resize(n);
    r.delta.resize(n);
    r.importance.resize(n);
    for (int i = 0; i < n; ++i) {
        r.rho[i] = median > 0.0 ? std::exp(-mean_d[i] / median) : 1.0;
    }
    for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        double far = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            far = std::max(far, d2(i, j));
            if (r.rho[j] > r.rho[i]) {
                best = std::min(best, d2(i, j));
            }
        }
        r.delta[i] = std::isinf(best) ? far : best;
        r.importance[i] = r.rho[i] * r.delta[i];
    }
    return r;
}

// ---- masking-oracle forward ----

inline void o_rmsnorm(const std::vector<double> & x, size_t off, const std::vector<double> & g,
                      int d, std::vector<double> & out) {
    double ss = 0.0;
    for (int i = 0; i < d; ++i) {
        ss += x[off + i] * x[off + i];
    }
    const double r = 1.0 / std::sqrt(ss / d + 1e-8);
    out.resize(d);
    for (int i = 0; i < d; ++i) {
        out[i] = x[off + i] * r * g[i];
    }
}

inline void o_rope(std::vector<double> & v, int num_heads, int64_t pos, double base) {
    const int d = int(v.size());
    const int hd = d / num_heads;
    for (int h = 0; h < num_heads; ++h) {
        for (int j = 0; j < hd / 2; ++j) {
            const double ang = double(pos) * std::pow(base, -2.0 * j / hd);
            const double c = std::cos(ang), s = std::sin(ang);
            double & a = v[size_t(h) * hd + 2 * j];
            double & b = v[size_t(h) * hd + 2 * j + 1];
            const double a0 = a, b0 = b;
            a = a0 * c - b0 * s;
            b = a0 * s + b0 * c;
        }
    }
}

inline std::vector<double> o_matvec(const std::vector<double> & W, const std::vector<double> & x,
                                    int rows, int cols) {
    std::vector<double> y(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            y[r] += W[size_t(r) * cols + c] * x[c];
        }
    }
    return y;
}

// masked_from[i]: first layer in which token i no longer contributes keys or
// values (text/survivors: num_layers). Returns the final-norm hidden state of
// the last token.
inline std::vector<double> masked_forward(const vtp::model_weights & w,
                                          const vtp::token_sequence & seq,
                                          const std::vector<int> & masked_from) {
    const vtp::model_config & cfg = w.config;
    const int d = cfg.hidden_dim;
    const int nh = cfg.num_heads;
    const int hd = d / nh;
    const int m = cfg.ffn_dim;
    const int n = seq.total();

    std::vector<double> x = seq.embeddings;
    std::vector<double> normed;

    for (int layer = 0; layer < cfg.num_layers; ++layer) {
        const vtp::layer_weights & lw = w.layers[layer];

        std::vector<std::vector<double>> q(n), k(n), v(n);
        for (int i = 0; i < n; ++i) {
            o_rmsnorm(x, size_t(i) * d, lw.norm_attn, d, normed);
            q[i] = o_matvec(lw.wq, normed, d, d);
            k[i] = o_matvec(lw.wk, normed, d, d);
            v[i] = o_matvec(lw.wv, normed, d, d);
            o_rope(q[i], nh, seq.position_ids[i], cfg.rope_base);
            o_rope(k[i], nh, seq.position_ids[i], cfg.rope_base);
        }

        std::vector<double> delta(size_t(n) * d, 0.0);
        for (int i = 0; i < n; ++i) {
            if (layer >= masked_from[i]) {
                continue; // pruned rows are frozen; nothing downstream reads them
            }
            std::vector<double> heads(d, 0.0);
            for (int h = 0; h < nh; ++h) {
                std::vector<double> wgt(i + 1, 0.0);
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j <= i; ++j) {
                    if (layer >= masked_from[j]) {
                        continue;
                    }
                    double acc = 0.0;
                    for (int t = 0; t < hd; ++t) {
                        acc += q[i][size_t(h) * hd + t] * k[j][size_t(h) * hd + t];
                    }
                    wgt[j] = acc / std::sqrt(double(hd));
                    mx = std::max(mx, wgt[j]);
                }
                double denom = 0.0;
                for (int j = 0; j <= i; ++j) {
                    if (layer >= masked_from[j]) {
                        wgt[j] = 0.0; // forced to zero; renormalized below
                    } else {
                        wgt[j] = std::exp(wgt[j] - mx);
                        denom += wgt[j];
                    }
                }
                for (int j = 0; j <= i; ++j) {
                    if (wgt[j] == 0.0) {
                        continue;
                    }
                    const double p = wgt[j] / denom;
                    for (int t = 0; t < hd; ++t) {
                        heads[size_t(h) * hd + t] += p * v[j][size_t(h) * hd + t];
                    }
                }
            }
            const std::vector<double> proj = o_matvec(lw.wo, heads, d, d);
            for (int t = 0; t < d; ++t) {
                delta[size_t(i) * d + t] = proj[t];
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int t = 0; t < d; ++t) {
                x[size_t(i) * d + t] += delta[size_t(i) * d + t];
            }
        }

        for (int i = 0; i < n; ++i) {
            if (layer >= masked_from[i]) {
                continue;
            }
            o_rmsnorm(x, size_t(i) * d, lw.norm_ffn, d, normed);
            std::vector<double> up = o_matvec(lw.w_up, normed, m, d);
            for (int t = 0; t < m; ++t) {
                up[t] = up[t] / (1.0 + std::exp(-up[t]));
            }
            const std::vector<double> down = o_matvec(lw.w_down, up, d, m);
            for (int t = 0; t < d; ++t) {
                x[size_t(i) * d + t] += down[t];
            }
        }
    }

    std::vector<double> out;
    o_rmsnorm(x, size_t(n - 1) * d, w.norm_final, d, out);
    return out;
}

// masked_from built from a trace's retained sets under the given schedule
inline std::vector<int> masked_from_of(const vtp::token_sequence & seq,
                                       const std::vector<int> & stage_layers,
                                       const std::vector<vtp::retained_set> & stages,
                                       int num_layers) {
    std::vector<int> masked(seq.total(), num_layers);
    std::vector<bool> alive(seq.visual_count(), true);
    for (size_t s = 0; s < stages.size(); ++s) {
        std::vector<bool> keep(seq.visual_count(), false);
        for (int idx : stages[s].indices) {
            keep[idx] = true;
        }
        for (int i = 0; i < seq.visual_count(); ++i) {
            if (alive[i] && !keep[i]) {
                masked[i] = stage_layers[s];
                alive[i] = false;
            }
        }
    }
    return masked;
}

inline double rel_l2(const std::vector<double> & a, const std::vector<double> & b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(1e-300, std::sqrt(den));
}

} // namespace oracle
