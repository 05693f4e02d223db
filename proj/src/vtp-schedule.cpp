#include "vtp-schedule.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vtp {

int retention_spec::resolve(int n_original, int alive) const {
    int count = 0;
    switch (base) {
        case retention_base::fraction_of_original:
            count = int(std::floor(value * n_original));
            break;
        case retention_base::fraction_of_alive:
            count = int(std::floor(value * alive));
            break;
        case retention_base::absolute_count:
            count = int(value);
            break;
    }
    if (count < 0) {
        fail(status::config_error, "retention resolves to a negative count");
    }
    if (count > alive) {
        fail(status::budget_error, "retention of " + std::to_string(count) +
                                   " tokens exceeds the " + std::to_string(alive) + " alive at stage entry");
    }
    return count;
}

const char * placement_name(placement_mode m) {
    switch (m) {
        case placement_mode::in_llm:    return "in_llm";
        case placement_mode::pre_llm:   return "pre_llm";
        case placement_mode::text_only: return "text_only";
    }
    return "unknown";
}

placement_mode placement_from_name(const std::string & name) {
    if (name == "in_llm")    return placement_mode::in_llm;
    if (name == "pre_llm")   return placement_mode::pre_llm;
    if (name == "text_only") return placement_mode::text_only;
    fail(status::config_error, "unknown placement '" + name + "'");
}

void prune_schedule::validate(int num_layers) const {
    for (size_t i = 0; i < stages.size(); ++i) {
        const prune_stage & st = stages[i];
        if (st.layer < 0 || st.layer >= num_layers) {
            fail(status::config_error, "stage layer " + std::to_string(st.layer) +
                                       " outside [0, " + std::to_string(num_layers) + ")");
        }
        if (i > 0 && stages[i - 1].layer >= st.layer) {
            fail(status::config_error, "stage layers must be strictly increasing");
        }
        if (st.keep.base != retention_base::absolute_count && (st.keep.value <= 0.0 || st.keep.value > 1.0)) {
            fail(status::config_error, "retention fraction must lie in (0, 1]");
        }
        if (st.crit.stride < 1) {
            fail(status::config_error, "criterion stride must be >= 1");
        }
        if (st.crit.knn_k < 1) {
            fail(status::config_error, "criterion knn_k must be >= 1");
        }
    }
    if (placement == placement_mode::pre_llm && stages.size() != 1) {
        fail(status::config_error, "pre_llm placement requires exactly one stage");
    }
    if (placement == placement_mode::text_only && !stages.empty()) {
        fail(status::config_error, "text_only placement requires zero stages");
    }
}

std::string prune_schedule::describe() const {
    std::ostringstream os;
    os << placement_name(placement);
    if (stages.empty()) {
        os << " no-op";
        return os.str();
    }
    for (const prune_stage & st : stages) {
        os << " [K=" << st.layer << " " << criterion_kind_name(st.crit.kind) << " keep=";
        switch (st.keep.base) {
            case retention_base::fraction_of_original: os << st.keep.value << " of original"; break;
            case retention_base::fraction_of_alive:    os << st.keep.value << " of alive"; break;
            case retention_base::absolute_count:       os << int(st.keep.value) << " tokens"; break;
        }
        os << "]";
    }
    return os.str();
}

prune_schedule preset_fastv(int layer, double ratio) {
    if (ratio < 0.0 || ratio >= 1.0) {
        fail(status::config_error, "fastv ratio must lie in [0, 1)");
    }
    prune_schedule s;
    criterion crit;
    crit.kind = criterion_kind::original;
    s.stages.push_back({layer, crit, {retention_base::fraction_of_original, 1.0 - ratio}});
    return s;
}

prune_schedule preset_pyramiddrop(const std::vector<int> & layers, const std::vector<double> & keep) {
    if (layers.size() != keep.size()) {
        fail(status::config_error, "pyramiddrop needs one keep fraction per stage layer");
    }
    prune_schedule s;
    for (size_t i = 0; i < layers.size(); ++i) {
        if (keep[i] <= 0.0 || keep[i] > 1.0) {
            fail(status::config_error, "pyramiddrop keep fractions must lie in (0, 1]");
        }
        criterion crit;
        crit.kind = criterion_kind::original;
        s.stages.push_back({layers[i], crit, {retention_base::fraction_of_alive, keep[i]}});
    }
    return s;
}

prune_schedule preset_feather(int k1, int k2, double ratio, int stride, feather_base base) {
    if (ratio <= 0.0 || ratio >= 1.0) {
        fail(status::config_error, "feather ratio must lie in (0, 1)");
    }
    prune_schedule s;
    criterion c1;
    c1.kind = criterion_kind::ensemble;
    c1.stride = stride;
    s.stages.push_back({k1, c1, {retention_base::fraction_of_original, 1.0 - ratio}});

    criterion c2;
    c2.kind = criterion_kind::rope_free;
    const double second = (1.0 - ratio) * (1.0 - ratio);
    const retention_base rb = base == feather_base::original_count
                                  ? retention_base::fraction_of_original
                                  : retention_base::fraction_of_alive;
    s.stages.push_back({k2, c2, {rb, second}});
    return s;
}

std::vector<int> probe_stage_selection(const model_weights & w, const token_sequence & seq,
                                       const prune_stage & stage) {
    prune_schedule probe;
    probe.stages.push_back(stage);
    forward_options opt;
    opt.stop_after_stages = 1;
    forward_trace trace = forward(w, seq, probe, opt);
    return trace.stages.at(0).indices;
}

std::pair<token_sequence, std::vector<prune_stage>>
apply_placement(const model_weights & w, const token_sequence & seq, const prune_schedule & schedule) {
    schedule.validate(w.config.num_layers);
    const int d = w.config.hidden_dim;

    switch (schedule.placement) {
        case placement_mode::in_llm:
            return {seq, schedule.stages};

        case placement_mode::text_only: {
            token_sequence out;
            out.grid_h = 0;
            out.grid_w = 0;
            out.text_count = seq.text_count;
            const int n = seq.visual_count();
            out.embeddings.assign(seq.embeddings.begin() + size_t(n) * d, seq.embeddings.end());
            out.position_ids.assign(seq.position_ids.begin() + n, seq.position_ids.end());
            return {std::move(out), {}};
        }

        case placement_mode::pre_llm: {
            const std::vector<int> kept = probe_stage_selection(w, seq, schedule.stages.at(0));
            return {keep_visual_subset(seq, kept, d), {}};
        }
    }
    fail(status::runtime_error, "unreachable placement");
}

token_sequence keep_visual_subset(const token_sequence & seq, const std::vector<int> & kept, int hidden_dim) {
    const int d = hidden_dim;
    token_sequence out;
    out.grid_h = kept.empty() ? 0 : 1;
    out.grid_w = int(kept.size());
    out.text_count = seq.text_count;
    for (int idx : kept) {
        const double * src = seq.token(idx, d);
        out.embeddings.insert(out.embeddings.end(), src, src + d);
        out.position_ids.push_back(seq.position_ids[idx]);
    }
    const int n = seq.visual_count();
    for (int i = n; i < seq.total(); ++i) {
        const double * src = seq.token(i, d);
        out.embeddings.insert(out.embeddings.end(), src, src + d);
        out.position_ids.push_back(seq.position_ids[i]);
    }
    return out;
}

} // namespace vtp
