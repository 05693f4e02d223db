#include "vtp-criteria.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vtp {

const char * criterion_kind_name(criterion_kind k) {
    switch (k) {
        case criterion_kind::original:       return "original";
        case criterion_kind::rope_free:      return "rope_free";
        case criterion_kind::uniform_stride: return "uniform_stride";
        case criterion_kind::knn_density:    return "knn_density";
        case criterion_kind::ensemble:       return "ensemble";
    }
    return "unknown";
}

criterion_kind criterion_kind_from_name(const std::string & name) {
    if (name == "original")       return criterion_kind::original;
    if (name == "rope_free")      return criterion_kind::rope_free;
    if (name == "uniform_stride") return criterion_kind::uniform_stride;
    if (name == "knn_density")    return criterion_kind::knn_density;
    if (name == "ensemble")       return criterion_kind::ensemble;
    fail(status::config_error, "unknown criterion '" + name + "'");
}

std::vector<int> uniform_indices(int grid_h, int grid_w, int stride) {
    if (stride < 1) {
        fail(status::config_error, "stride must be >= 1, got " + std::to_string(stride));
    }
    std::vector<int> out;
    out.reserve(size_t((grid_h + stride - 1) / stride) * ((grid_w + stride - 1) / stride));
    for (int r = 0; r < grid_h; r += stride) {
        for (int c = 0; c < grid_w; c += stride) {
            out.push_back(r * grid_w + c);
        }
    }
    return out;
}

std::vector<density_score> knn_scores(const double * features, int n, int dim, int k) {
    if (n < 2) {
        fail(status::input_error, "knn_scores needs at least 2 tokens, got " + std::to_string(n));
    }
    if (k < 1 || k >= n) {
        fail(status::config_error, "knn neighbor count must satisfy 1 <= k < n, got k=" +
                                   std::to_string(k) + ", n=" + std::to_string(n));
    }

    std::vector<double> dist2(size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double acc = 0.0;
            const double * zi = features + size_t(i) * dim;
            const double * zj = features + size_t(j) * dim;
            for (int t = 0; t < dim; ++t) {
                const double diff = zi[t] - zj[t];
                acc += diff * diff;
            }
            dist2[size_t(i) * n + j] = acc;
            dist2[size_t(j) * n + i] = acc;
        }
    }

    // mean squared distance to the k nearest neighbors (self excluded,
    // distance ties broken by lower index)
    std::vector<double> mean_knn(n, 0.0);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) {
        order.resize(0);
        for (int j = 0; j < n; ++j) {
            if (j != i) {
                order.push_back(j);
            }
        }
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double da = dist2[size_t(i) * n + a];
            const double db = dist2[size_t(i) * n + b];
            return da != db ? da < db : a < b;
        });
        double acc = 0.0;
        for (int t = 0; t < k; ++t) {
            acc += dist2[size_t(i) * n + order[t]];
        }
        mean_knn[i] = acc / k;
    }

    // exponent normalized by the median neighborhood size; keeps the induced
    // ranking invariant under global rescaling of the features (0/0 := 0)
    std::vector<double> sorted = mean_knn;
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    std::vector<density_score> out(n);
    for (int i = 0; i < n; ++i) {
        out[i].rho = median > 0.0 ? std::exp(-mean_knn[i] / median) : 1.0;
    }
    for (int i = 0; i < n; ++i) {
        double best = -1.0;
        bool denser_exists = false;
        double max_all = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            max_all = std::max(max_all, dist2[size_t(i) * n + j]);
            if (out[j].rho > out[i].rho) {
                const double d2 = dist2[size_t(i) * n + j];
                if (!denser_exists || d2 < best) {
                    best = d2;
                }
                denser_exists = true;
            }
        }
        out[i].delta = denser_exists ? best : max_all;
        out[i].importance = out[i].rho * out[i].delta;
    }
    return out;
}

std::vector<double> score_attention(const score_context & ctx, bool rope_free, head_agg agg, score_kind kind) {
    score_options opt;
    opt.use_rope = !rope_free;
    opt.agg = agg;
    opt.kind = kind;
    return last_token_attention(*ctx.model, *ctx.enter, ctx.scoring_layer, opt);
}

namespace {

// top `budget` alive tokens by score, ties to the lower original index
std::vector<int> top_by_score(const std::vector<double> & scores, const std::vector<int> & ids, int budget) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
    });
    order.resize(std::min<size_t>(budget, order.size()));
    std::vector<int> out;
    out.reserve(order.size());
    for (int row : order) {
        out.push_back(ids[row]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> lattice_alive(const score_context & ctx, int stride) {
    const std::vector<int> lattice = uniform_indices(ctx.seq->grid_h, ctx.seq->grid_w, stride);
    const std::vector<int> & alive = ctx.enter->visual_ids;
    std::vector<int> out;
    std::set_intersection(lattice.begin(), lattice.end(), alive.begin(), alive.end(),
                          std::back_inserter(out));
    return out;
}

} // namespace

std::vector<int> select(const criterion & crit, const score_context & ctx, int budget) {
    const std::vector<int> & alive = ctx.enter->visual_ids;
    const int n_alive = int(alive.size());
    if (budget > n_alive) {
        fail(status::budget_error, "budget " + std::to_string(budget) +
                                   " exceeds alive visual tokens " + std::to_string(n_alive));
    }

    switch (crit.kind) {
        case criterion_kind::original:
        case criterion_kind::rope_free: {
            auto scores = score_attention(ctx, crit.kind == criterion_kind::rope_free, crit.agg, crit.score);
            return top_by_score(scores, alive, budget);
        }
        case criterion_kind::uniform_stride:
            return lattice_alive(ctx, crit.stride);
        case criterion_kind::knn_density: {
            // features are the adapter-level embeddings of the alive tokens
            const int d = ctx.model->config.hidden_dim;
            std::vector<double> feats(size_t(n_alive) * d);
            for (int i = 0; i < n_alive; ++i) {
                const double * src = ctx.seq->token(alive[i], d);
                std::copy(src, src + d, feats.begin() + size_t(i) * d);
            }
            auto dens = knn_scores(feats.data(), n_alive, d, crit.knn_k);
            std::vector<double> scores(n_alive);
            for (int i = 0; i < n_alive; ++i) {
                scores[i] = dens[i].importance;
            }
            return top_by_score(scores, alive, budget);
        }
        case criterion_kind::ensemble: {
            auto scores = score_attention(ctx, true, crit.agg, crit.score);
            std::vector<int> top = top_by_score(scores, alive, budget);
            std::vector<int> lat = lattice_alive(ctx, crit.stride);
            std::vector<int> out;
            std::set_union(top.begin(), top.end(), lat.begin(), lat.end(), std::back_inserter(out));
            return out;
        }
    }
    fail(status::runtime_error, "unreachable criterion kind");
}

} // namespace vtp
