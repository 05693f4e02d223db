#pragma once

// Token-ranking criteria: last-token attention with and without rotary
// embeddings, uniform grid sampling, kNN density peaks, and the
// attention+uniform ensemble. All pure functions over immutable inputs.

#include "vtp-model.h"

#include <vector>

namespace vtp {

enum class criterion_kind { original, rope_free, uniform_stride, knn_density, ensemble };

struct criterion {
    criterion_kind kind = criterion_kind::original;
    int stride = 3;   // uniform_stride / ensemble lattice
    int knn_k  = 5;   // knn_density
    head_agg   agg   = head_agg::mean;
    score_kind score = score_kind::post_softmax;
};

const char * criterion_kind_name(criterion_kind k);
criterion_kind criterion_kind_from_name(const std::string & name);

// Row-major indices of grid cells (r, c) with r % s == 0 and c % s == 0.
std::vector<int> uniform_indices(int grid_h, int grid_w, int stride);

struct density_score {
    double rho        = 0.0; // local density
    double delta      = 0.0; // squared distance to the nearest denser token
    double importance = 0.0; // rho * delta
};

// Density-peak scores over n feature vectors of dimension dim.
// rho_i = exp(-D_i / median(D)) with D_i the mean squared distance to the k
// nearest neighbors (self excluded, distance ties to the lower index);
// delta_i per the min-over-denser / max-over-all rule. Requires n >= 2, k < n.
std::vector<density_score> knn_scores(const double * features, int n, int dim, int k);

// Everything a criterion needs to rank the currently-alive visual tokens.
struct score_context {
    const model_weights  * model = nullptr;
    const sequence_state * enter = nullptr;  // states entering the scoring layer
    int scoring_layer = 0;
    const token_sequence * seq = nullptr;    // original sequence (kNN features)
};

// Per-alive-visual-token attention score (delegates to last_token_attention).
std::vector<double> score_attention(const score_context & ctx, bool rope_free,
                                    head_agg agg = head_agg::mean,
                                    score_kind kind = score_kind::post_softmax);

// Selected original grid indices under the budget, sorted ascending.
// Score ties break to the lower token index. uniform_stride ignores the
// budget; ensemble returns union(top-budget by rope-free attention, lattice).
std::vector<int> select(const criterion & crit, const score_context & ctx, int budget);

} // namespace vtp
