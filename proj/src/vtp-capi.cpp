#include "vtprune.h"

#include "vtp-analysis.h"
#include "vtp-config.h"
#include "vtp-flops.h"
#include "vtp-harness.h"

#include <cstring>
#include <string>

namespace {

thread_local std::string g_last_error;

int status_to_c(vtp::status s) {
    switch (s) {
        case vtp::status::ok:              return VTP_OK;
        case vtp::status::config_error:    return VTP_ERR_CONFIG;
        case vtp::status::budget_error:    return VTP_ERR_BUDGET;
        case vtp::status::input_error:     return VTP_ERR_INPUT;
        case vtp::status::state_error:     return VTP_ERR_STATE;
        case vtp::status::undefined_value: return VTP_ERR_RUNTIME;
        case vtp::status::io_error:        return VTP_ERR_IO;
        case vtp::status::runtime_error:   return VTP_ERR_RUNTIME;
    }
    return VTP_ERR_RUNTIME;
}

// runs fn, capturing errors into the thread-local message
template <typename F>
int guard(F && fn) {
    try {
        fn();
        g_last_error.clear();
        return VTP_OK;
    } catch (const vtp::error & e) {
        g_last_error = e.what();
        return status_to_c(e.code);
    } catch (const std::exception & e) {
        g_last_error = e.what();
        return VTP_ERR_RUNTIME;
    }
}

char * dup_string(const std::string & s) {
    char * out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

struct vtp_config   { vtp::experiment_config cfg; };
struct vtp_model    { vtp::model_weights w; };
struct vtp_scene    { vtp::token_sequence seq; };
struct vtp_schedule { vtp::prune_schedule s; };
struct vtp_trace    { vtp::forward_trace t; };
struct vtp_result   { vtp::run_result r; };
struct vtp_flops    { vtp::flops_report f; };

extern "C" {

const char * vtp_version(void) { return "0.1.0"; }

const char * vtp_status_name(int status) {
    switch (status) {
        case VTP_OK:          return "ok";
        case VTP_ERR_CONFIG:  return "config_error";
        case VTP_ERR_BUDGET:  return "budget_error";
        case VTP_ERR_INPUT:   return "input_error";
        case VTP_ERR_STATE:   return "state_error";
        case VTP_ERR_IO:      return "io_error";
        case VTP_ERR_RUNTIME: return "runtime_error";
    }
    return "unknown";
}

const char * vtp_last_error(void) { return g_last_error.c_str(); }

void vtp_string_free(char * s) { delete[] s; }

/* ---- configuration ---- */

vtp_config * vtp_config_new(void) { return new vtp_config{}; }

vtp_config * vtp_config_load(const char * path) {
    vtp_config * out = nullptr;
    guard([&] { out = new vtp_config{vtp::experiment_config::load_file(path ? path : "")}; });
    return out;
}

int vtp_config_set(vtp_config * cfg, const char * key, const char * value) {
    if (!cfg || !key || !value) {
        g_last_error = "null argument";
        return VTP_ERR_INPUT;
    }
    return guard([&] { cfg->cfg.set(key, value); });
}

int vtp_config_validate(const vtp_config * cfg) {
    if (!cfg) {
        g_last_error = "null config";
        return VTP_ERR_INPUT;
    }
    return guard([&] { cfg->cfg.validate(); });
}

char * vtp_config_dump(const vtp_config * cfg) {
    if (!cfg) {
        g_last_error = "null config";
        return nullptr;
    }
    return dup_string(cfg->cfg.dump());
}

void vtp_config_free(vtp_config * cfg) { delete cfg; }

/* ---- experiments ---- */

vtp_result * vtp_run(const vtp_config * cfg, int workers) {
    if (!cfg) {
        g_last_error = "null config";
        return nullptr;
    }
    vtp_result * out = nullptr;
    guard([&] { out = new vtp_result{vtp::run_experiment(cfg->cfg, workers)}; });
    return out;
}

int vtp_result_write(const vtp_result * res, const vtp_config * cfg,
                     const char * out_dir, int heatmaps_only) {
    if (!res || !cfg || !out_dir) {
        g_last_error = "null argument";
        return VTP_ERR_INPUT;
    }
    return guard([&] { vtp::write_run_files(res->r, cfg->cfg, out_dir, heatmaps_only != 0); });
}

char * vtp_result_table(const vtp_result * res) {
    return res ? dup_string(res->r.table()) : nullptr;
}

int vtp_result_stage_count(const vtp_result * res) {
    return res ? int(res->r.stages.size()) : -1;
}

double vtp_result_reduction(const vtp_result * res) {
    return res ? res->r.reference.reduction : -1.0;
}

double vtp_result_run_reduction(const vtp_result * res) {
    return res ? res->r.run_reduction : -1.0;
}

double vtp_result_mean_recall(const vtp_result * res, int stage) {
    if (!res || stage < 0 || stage >= int(res->r.stages.size())) {
        g_last_error = "stage out of range";
        return -1.0;
    }
    return res->r.stages[stage].mean_recall;
}

double vtp_result_mean_bias(const vtp_result * res, int stage) {
    if (!res || stage < 0 || stage >= int(res->r.stages.size())) {
        g_last_error = "stage out of range";
        return -1.0;
    }
    return res->r.stages[stage].mean_bias;
}

void vtp_result_free(vtp_result * res) { delete res; }

char * vtp_compare(const vtp_config * const * cfgs, size_t count, int workers) {
    if (!cfgs || count == 0) {
        g_last_error = "null configs";
        return nullptr;
    }
    std::vector<vtp::experiment_config> list;
    list.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        if (!cfgs[i]) {
            g_last_error = "null config in list";
            return nullptr;
        }
        list.push_back(cfgs[i]->cfg);
    }
    char * out = nullptr;
    guard([&] { out = dup_string(vtp::compare_experiments(list, workers)); });
    return out;
}

/* ---- FLOPS model ---- */

uint64_t vtp_layer_cost(uint64_t n_tokens, uint64_t d, uint64_t m) {
    return vtp::layer_cost(n_tokens, d, m);
}

vtp_flops * vtp_flops_from_config(const vtp_config * cfg) {
    if (!cfg) {
        g_last_error = "null config";
        return nullptr;
    }
    vtp_flops * out = nullptr;
    guard([&] {
        const vtp::experiment_config & c = cfg->cfg;
        c.validate();
        const vtp::prune_schedule s = c.resolve_schedule();
        const auto counts = vtp::resolve_layer_counts(s, c.flops_grid_rows, c.flops_grid_cols, c.flops_layers);
        out = new vtp_flops{vtp::make_flops_report(c.flops_layers, c.flops_hidden, c.flops_ffn,
                                                   uint64_t(c.flops_grid_rows) * c.flops_grid_cols, counts)};
    });
    return out;
}

double vtp_flops_reduction(const vtp_flops * report) {
    return report ? report->f.reduction : -1.0;
}

char * vtp_flops_table(const vtp_flops * report) {
    return report ? dup_string(report->f.table()) : nullptr;
}

char * vtp_flops_json(const vtp_flops * report) {
    return report ? dup_string(report->f.json()) : nullptr;
}

void vtp_flops_free(vtp_flops * report) { delete report; }

/* ---- engine primitives ---- */

vtp_model * vtp_model_new(int layers, int hidden, int heads, int ffn,
                          double rope_base, uint64_t seed) {
    vtp_model * out = nullptr;
    guard([&] {
        vtp::model_config cfg;
        cfg.num_layers = layers;
        cfg.hidden_dim = hidden;
        cfg.num_heads = heads;
        cfg.ffn_dim = ffn;
        cfg.rope_base = rope_base;
        out = new vtp_model{vtp::init_model(cfg, seed)};
    });
    return out;
}

vtp_model * vtp_model_from_config(const vtp_config * cfg) {
    if (!cfg) {
        g_last_error = "null config";
        return nullptr;
    }
    vtp_model * out = nullptr;
    guard([&] { out = new vtp_model{vtp::init_model(cfg->cfg.model, cfg->cfg.model_seed)}; });
    return out;
}

void vtp_model_free(vtp_model * model) { delete model; }

vtp_scene * vtp_scene_planted(int grid_h, int grid_w, int text_len,
                              int row0, int col0, int row1, int col1,
                              double correlation, uint64_t seed, int hidden_dim) {
    vtp_scene * out = nullptr;
    guard([&] {
        vtp::planted_scene scene = vtp::make_planted_scene(
            grid_h, grid_w, text_len, {row0, col0, row1, col1}, seed, correlation, hidden_dim);
        out = new vtp_scene{std::move(scene.seq)};
    });
    return out;
}

vtp_scene * vtp_scene_constant(const vtp_model * model, int grid_h, int grid_w,
                               int text_len, uint64_t seed) {
    if (!model) {
        g_last_error = "null model";
        return nullptr;
    }
    vtp_scene * out = nullptr;
    guard([&] {
        out = new vtp_scene{vtp::make_constant_scene(model->w, grid_h, grid_w, text_len, seed)};
    });
    return out;
}

void vtp_scene_free(vtp_scene * scene) { delete scene; }

vtp_schedule * vtp_schedule_preset(const char * name, double ratio,
                                   const int * layers, size_t n_layers) {
    if (!name) {
        g_last_error = "null preset name";
        return nullptr;
    }
    vtp_schedule * out = nullptr;
    guard([&] {
        const std::string preset = name;
        vtp::prune_schedule s;
        if (preset == "none") {
            // empty schedule
        } else if (preset == "fastv") {
            s = vtp::preset_fastv(layers && n_layers >= 1 ? layers[0] : 3, ratio);
        } else if (preset == "feather") {
            const int k1 = layers && n_layers >= 1 ? layers[0] : 8;
            const int k2 = layers && n_layers >= 2 ? layers[1] : 16;
            s = vtp::preset_feather(k1, k2, ratio);
        } else if (preset == "pyramiddrop") {
            std::vector<int> ls = layers && n_layers > 0 ? std::vector<int>(layers, layers + n_layers)
                                                         : std::vector<int>{8, 16, 24};
            s = vtp::preset_pyramiddrop(ls, std::vector<double>(ls.size(), 0.5));
        } else {
            vtp::fail(vtp::status::config_error, "unknown preset '" + preset + "'");
        }
        out = new vtp_schedule{std::move(s)};
    });
    return out;
}

void vtp_schedule_free(vtp_schedule * schedule) { delete schedule; }

vtp_trace * vtp_forward(const vtp_model * model, const vtp_scene * scene,
                        const vtp_schedule * schedule, int instrument) {
    if (!model || !scene || !schedule) {
        g_last_error = "null argument";
        return nullptr;
    }
    vtp_trace * out = nullptr;
    guard([&] {
        vtp::forward_options opt;
        opt.instrument = instrument != 0;
        out = new vtp_trace{vtp::forward(model->w, scene->seq, schedule->s, opt)};
    });
    return out;
}

int vtp_trace_stage_count(const vtp_trace * trace) {
    return trace ? int(trace->t.stages.size()) : -1;
}

int vtp_trace_retained(const vtp_trace * trace, int stage, int * out, size_t capacity) {
    if (!trace || stage < 0 || stage >= int(trace->t.stages.size())) {
        g_last_error = "stage out of range";
        return -1;
    }
    const auto & idx = trace->t.stages[stage].indices;
    if (out) {
        if (capacity < idx.size()) {
            g_last_error = "buffer too small";
            return -1;
        }
        std::copy(idx.begin(), idx.end(), out);
    }
    return int(idx.size());
}

int vtp_trace_hidden(const vtp_trace * trace, double * out, size_t capacity) {
    if (!trace) {
        g_last_error = "null trace";
        return -1;
    }
    const auto & h = trace->t.final_hidden;
    if (out) {
        if (capacity < h.size()) {
            g_last_error = "buffer too small";
            return -1;
        }
        std::copy(h.begin(), h.end(), out);
    }
    return int(h.size());
}

uint64_t vtp_trace_macs(const vtp_trace * trace) {
    return trace && trace->t.instrumented ? trace->t.macs : 0;
}

void vtp_trace_free(vtp_trace * trace) { delete trace; }

} // extern "C"
