#include "vtp-flops.h"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <sstream>

namespace vtp {

uint64_t layer_cost(uint64_t n, uint64_t d, uint64_t m) {
    return 4 * n * d * d + 2 * n * n * d + 2 * n * d * m;
}

double reduction_ratio(int num_layers, uint64_t d, uint64_t m, uint64_t n_visual,
                       std::span<const uint64_t> layer_tokens) {
    if (int(layer_tokens.size()) != num_layers) {
        fail(status::input_error, "need one token count per layer");
    }
    const uint64_t full = layer_cost(n_visual, d, m);
    if (full == 0) {
        return 0.0;
    }
    long double pruned = 0.0;
    for (uint64_t c : layer_tokens) {
        pruned += layer_cost(c, d, m);
    }
    const long double baseline = (long double) full * num_layers;
    return double(1.0L - pruned / baseline);
}

flops_report make_flops_report(int num_layers, uint64_t d, uint64_t m, uint64_t n_visual,
                               std::span<const uint64_t> layer_tokens) {
    flops_report r;
    r.num_layers = num_layers;
    r.hidden = d;
    r.ffn = m;
    r.n_visual = n_visual;
    r.layer_tokens.assign(layer_tokens.begin(), layer_tokens.end());
    r.baseline_total = uint64_t(num_layers) * layer_cost(n_visual, d, m);
    r.pruned_total = 0;
    for (uint64_t c : layer_tokens) {
        r.pruned_total += layer_cost(c, d, m);
    }
    r.reduction = reduction_ratio(num_layers, d, m, n_visual, layer_tokens);
    return r;
}

std::vector<uint64_t> resolve_layer_counts(const prune_schedule & schedule, int grid_h, int grid_w,
                                           int num_layers) {
    schedule.validate(num_layers);
    const int n_visual = grid_h * grid_w;
    std::vector<uint64_t> counts(num_layers, uint64_t(n_visual));
    if (schedule.placement == placement_mode::text_only) {
        std::fill(counts.begin(), counts.end(), 0);
        return counts;
    }

    int alive = n_visual;
    for (const prune_stage & st : schedule.stages) {
        const int lattice = int(uniform_indices(grid_h, grid_w, st.crit.stride).size());
        // lattice cells surviving earlier stages, under uniform thinning
        const int lattice_alive = n_visual > 0
            ? std::min(alive, int(std::lround(double(lattice) * alive / n_visual)))
            : 0;
        int kept = 0;
        switch (st.crit.kind) {
            case criterion_kind::uniform_stride:
                kept = lattice_alive;
                break;
            case criterion_kind::ensemble: {
                const int b = st.keep.resolve(n_visual, alive);
                const double expected = alive > 0
                    ? b + lattice_alive - double(b) * lattice_alive / alive
                    : 0.0;
                kept = std::min(alive, int(std::lround(expected)));
                break;
            }
            default:
                kept = st.keep.resolve(n_visual, alive);
                break;
        }
        alive = kept;
        const int from = schedule.placement == placement_mode::pre_llm ? 0 : st.layer;
        for (int l = from; l < num_layers; ++l) {
            counts[l] = uint64_t(alive);
        }
    }
    return counts;
}

std::vector<uint64_t> trace_layer_counts(const forward_trace & trace) {
    std::vector<uint64_t> out;
    out.reserve(trace.visual_per_layer.size());
    for (int c : trace.visual_per_layer) {
        out.push_back(uint64_t(c));
    }
    return out;
}

uint64_t measured_multiply_accumulates(const forward_trace & trace) {
    if (!trace.instrumented) {
        fail(status::state_error, "trace was produced without instrumentation");
    }
    return trace.macs;
}

uint64_t expected_macs_unpruned(const model_config & config, int n_total) {
    const uint64_t n = n_total;
    const uint64_t d = config.hidden_dim;
    const uint64_t m = config.ffn_dim;
    const uint64_t per_layer = 4 * n * d * d + n * (n + 1) * d + 2 * n * d * m;
    return per_layer * config.num_layers;
}

std::string flops_report::table() const {
    std::ostringstream os;
    os << "layers " << num_layers << "  d " << hidden << "  m " << ffn << "  visual tokens " << n_visual << "\n";
    os << std::left << std::setw(8) << "layer" << std::setw(10) << "tokens" << "cost\n";
    for (size_t l = 0; l < layer_tokens.size(); ++l) {
        os << std::left << std::setw(8) << l << std::setw(10) << layer_tokens[l]
           << layer_cost(layer_tokens[l], hidden, ffn) << "\n";
    }
    os << "baseline total  " << baseline_total << "\n";
    os << "scheduled total " << pruned_total << "\n";
    os << "reduction       " << std::fixed << std::setprecision(4) << reduction << "\n";
    return os.str();
}

std::string flops_report::json() const {
    nlohmann::json j;
    j["num_layers"] = num_layers;
    j["hidden_dim"] = hidden;
    j["ffn_dim"] = ffn;
    j["n_visual"] = n_visual;
    j["layer_tokens"] = layer_tokens;
    j["baseline_total"] = baseline_total;
    j["scheduled_total"] = pruned_total;
    j["reduction"] = reduction;
    return j.dump(2);
}

} // namespace vtp
