#include "vtp-config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vtp {

namespace {

std::string trim(const std::string & s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string & s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    if (out.size() == 1 && out[0].empty()) {
        out.clear();
    }
    return out;
}

long long parse_int(const std::string & key, const std::string & v) {
    long long x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) {
        fail(status::config_error, "key '" + key + "': expected an integer, got '" + v + "'");
    }
    return x;
}

double parse_double(const std::string & key, const std::string & v) {
    double x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) {
        fail(status::config_error, "key '" + key + "': expected a number, got '" + v + "'");
    }
    return x;
}

bool parse_bool(const std::string & key, const std::string & v) {
    if (v == "true" || v == "1") {
        return true;
    }
    if (v == "false" || v == "0") {
        return false;
    }
    fail(status::config_error, "key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void) ec;
    return std::string(buf, p);
}

std::string fmt_u64(uint64_t v) { return std::to_string(v); }

template <typename T, typename F>
std::string join(const std::vector<T> & xs, F fmt) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) {
            out += ",";
        }
        out += fmt(xs[i]);
    }
    return out;
}

} // namespace

void experiment_config::set(const std::string & key, const std::string & value) {
    if (key == "experiment.id") { id = value; return; }

    if (key == "model.layers")         { model.num_layers = int(parse_int(key, value)); return; }
    if (key == "model.hidden")         { model.hidden_dim = int(parse_int(key, value)); return; }
    if (key == "model.heads")          { model.num_heads = int(parse_int(key, value)); return; }
    if (key == "model.ffn")            { model.ffn_dim = int(parse_int(key, value)); return; }
    if (key == "model.rope_base")      { model.rope_base = parse_double(key, value); return; }
    if (key == "model.qk_match_floor") { model.qk_match_floor = parse_double(key, value); return; }
    if (key == "model.qk_match_ceil")  { model.qk_match_ceil = parse_double(key, value); return; }
    if (key == "model.seed")           { model_seed = uint64_t(parse_int(key, value)); return; }

    if (key == "grid.rows")         { grid_rows = int(parse_int(key, value)); return; }
    if (key == "grid.cols")         { grid_cols = int(parse_int(key, value)); return; }
    if (key == "scene.text_tokens") { text_tokens = int(parse_int(key, value)); return; }
    if (key == "scene.correlation") { correlation = parse_double(key, value); return; }
    if (key == "scene.rect_rows")   { rect_rows = int(parse_int(key, value)); return; }
    if (key == "scene.rect_cols")   { rect_cols = int(parse_int(key, value)); return; }
    if (key == "scene.rect_mode") {
        if (value != "random" && value != "fixed") {
            fail(status::config_error, "key 'scene.rect_mode': expected random|fixed, got '" + value + "'");
        }
        rect_fixed = value == "fixed";
        return;
    }
    if (key == "scene.rect_row") { rect_row = int(parse_int(key, value)); return; }
    if (key == "scene.rect_col") { rect_col = int(parse_int(key, value)); return; }

    if (key == "seeds") {
        seeds.clear();
        // a bare count N expands to seeds 0..N-1; anything with a comma is an
        // explicit list (a single seed can be written as "5,")
        if (value.find(',') == std::string::npos) {
            const long long n = parse_int(key, trim(value));
            if (n < 1) {
                fail(status::config_error, "key 'seeds': count must be >= 1");
            }
            for (long long i = 0; i < n; ++i) {
                seeds.push_back(uint64_t(i));
            }
            return;
        }
        for (const auto & p : split(value, ',')) {
            if (!p.empty()) {
                seeds.push_back(uint64_t(parse_int(key, p)));
            }
        }
        if (seeds.empty()) {
            fail(status::config_error, "key 'seeds': needs a count or a comma list");
        }
        return;
    }

    if (key == "schedule.preset") {
        if (value != "fastv" && value != "pyramiddrop" && value != "feather" && value != "none") {
            fail(status::config_error, "key 'schedule.preset': expected fastv|pyramiddrop|feather|none, got '" + value + "'");
        }
        preset = value;
        return;
    }
    if (key == "schedule.ratio") { ratio = parse_double(key, value); return; }
    if (key == "schedule.layers") {
        stage_layers.clear();
        for (const auto & p : split(value, ',')) {
            stage_layers.push_back(int(parse_int(key, p)));
        }
        return;
    }
    if (key == "schedule.keep") {
        keep.clear();
        for (const auto & p : split(value, ',')) {
            keep.push_back(parse_double(key, p));
        }
        return;
    }
    if (key == "schedule.stride") { stride = int(parse_int(key, value)); return; }
    if (key == "schedule.knn_k")  { knn_k = int(parse_int(key, value)); return; }
    if (key == "schedule.head_agg") {
        if (value != "mean" && value != "sum" && value != "max") {
            fail(status::config_error, "key 'schedule.head_agg': expected mean|sum|max, got '" + value + "'");
        }
        agg = value;
        return;
    }
    if (key == "schedule.score") {
        if (value != "post_softmax" && value != "pre_softmax") {
            fail(status::config_error, "key 'schedule.score': expected post_softmax|pre_softmax, got '" + value + "'");
        }
        score = value;
        return;
    }
    if (key == "schedule.stage2_base") {
        if (value != "original" && value != "remaining") {
            fail(status::config_error, "key 'schedule.stage2_base': expected original|remaining, got '" + value + "'");
        }
        stage2_base = value;
        return;
    }
    if (key == "schedule.placement") { placement_from_name(value); placement = value; return; }
    if (key == "schedule.stages")    { stages_text = value; return; }

    if (key == "flops.layers")    { flops_layers = int(parse_int(key, value)); return; }
    if (key == "flops.hidden")    { flops_hidden = uint64_t(parse_int(key, value)); return; }
    if (key == "flops.ffn")       { flops_ffn = uint64_t(parse_int(key, value)); return; }
    if (key == "flops.grid_rows") { flops_grid_rows = int(parse_int(key, value)); return; }
    if (key == "flops.grid_cols") { flops_grid_cols = int(parse_int(key, value)); return; }

    if (key == "out.dir")    { out_dir = value; return; }
    if (key == "instrument") { instrument = parse_bool(key, value); return; }
    if (key == "workers")    { workers = int(parse_int(key, value)); return; }

    fail(status::config_error, "unknown key '" + key + "'");
}

experiment_config experiment_config::parse_text(const std::string & text) {
    experiment_config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            fail(status::config_error, "line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

experiment_config experiment_config::load_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        fail(status::config_error, "cannot open config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

std::string experiment_config::dump() const {
    std::ostringstream os;
    os << "experiment.id = " << id << "\n";
    os << "model.layers = " << model.num_layers << "\n";
    os << "model.hidden = " << model.hidden_dim << "\n";
    os << "model.heads = " << model.num_heads << "\n";
    os << "model.ffn = " << model.ffn_dim << "\n";
    os << "model.rope_base = " << fmt_double(model.rope_base) << "\n";
    os << "model.qk_match_floor = " << fmt_double(model.qk_match_floor) << "\n";
    os << "model.qk_match_ceil = " << fmt_double(model.qk_match_ceil) << "\n";
    os << "model.seed = " << model_seed << "\n";
    os << "grid.rows = " << grid_rows << "\n";
    os << "grid.cols = " << grid_cols << "\n";
    os << "scene.text_tokens = " << text_tokens << "\n";
    os << "scene.correlation = " << fmt_double(correlation) << "\n";
    os << "scene.rect_rows = " << rect_rows << "\n";
    os << "scene.rect_cols = " << rect_cols << "\n";
    os << "scene.rect_mode = " << (rect_fixed ? "fixed" : "random") << "\n";
    os << "scene.rect_row = " << rect_row << "\n";
    os << "scene.rect_col = " << rect_col << "\n";

    bool contiguous = true;
    for (size_t i = 0; i < seeds.size(); ++i) {
        if (seeds[i] != i) {
            contiguous = false;
            break;
        }
    }
    std::string seeds_text;
    if (contiguous && !seeds.empty()) {
        seeds_text = std::to_string(seeds.size());
    } else {
        seeds_text = join(seeds, fmt_u64);
        if (seeds.size() == 1) {
            seeds_text += ","; // keep a lone seed parsing as a list, not a count
        }
    }
    os << "seeds = " << seeds_text << "\n";

    os << "schedule.preset = " << preset << "\n";
    os << "schedule.ratio = " << fmt_double(ratio) << "\n";
    os << "schedule.layers = " << join(stage_layers, [](int v) { return std::to_string(v); }) << "\n";
    os << "schedule.keep = " << join(keep, fmt_double) << "\n";
    os << "schedule.stride = " << stride << "\n";
    os << "schedule.knn_k = " << knn_k << "\n";
    os << "schedule.head_agg = " << agg << "\n";
    os << "schedule.score = " << score << "\n";
    os << "schedule.stage2_base = " << stage2_base << "\n";
    os << "schedule.placement = " << placement << "\n";
    os << "schedule.stages = " << stages_text << "\n";
    os << "flops.layers = " << flops_layers << "\n";
    os << "flops.hidden = " << flops_hidden << "\n";
    os << "flops.ffn = " << flops_ffn << "\n";
    os << "flops.grid_rows = " << flops_grid_rows << "\n";
    os << "flops.grid_cols = " << flops_grid_cols << "\n";
    os << "out.dir = " << out_dir << "\n";
    os << "instrument = " << (instrument ? "true" : "false") << "\n";
    os << "workers = " << workers << "\n";
    return os.str();
}

namespace {

head_agg agg_from_name(const std::string & v) {
    if (v == "mean") return head_agg::mean;
    if (v == "sum")  return head_agg::sum;
    return head_agg::max;
}

score_kind score_from_name(const std::string & v) {
    return v == "pre_softmax" ? score_kind::pre_softmax : score_kind::post_softmax;
}

// "K:criterion:base=value" with base in {orig, alive, count}
prune_stage parse_stage(const std::string & text, const experiment_config & cfg) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) {
        fail(status::config_error, "schedule.stages: expected 'K:criterion:base=value', got '" + text + "'");
    }
    prune_stage st;
    st.layer = int(parse_int("schedule.stages", parts[0]));
    st.crit.kind = criterion_kind_from_name(parts[1]);
    st.crit.stride = cfg.stride;
    st.crit.knn_k = cfg.knn_k;
    st.crit.agg = agg_from_name(cfg.agg);
    st.crit.score = score_from_name(cfg.score);

    const size_t eq = parts[2].find('=');
    if (eq == std::string::npos) {
        fail(status::config_error, "schedule.stages: retention must be base=value, got '" + parts[2] + "'");
    }
    const std::string base = trim(parts[2].substr(0, eq));
    const std::string val = trim(parts[2].substr(eq + 1));
    if (base == "orig") {
        st.keep = {retention_base::fraction_of_original, parse_double("schedule.stages", val)};
    } else if (base == "alive") {
        st.keep = {retention_base::fraction_of_alive, parse_double("schedule.stages", val)};
    } else if (base == "count") {
        st.keep = {retention_base::absolute_count, double(parse_int("schedule.stages", val))};
    } else {
        fail(status::config_error, "schedule.stages: retention base must be orig|alive|count, got '" + base + "'");
    }
    return st;
}

} // namespace

prune_schedule experiment_config::resolve_schedule() const {
    prune_schedule s;
    s.placement = placement_from_name(placement);

    if (!stages_text.empty()) {
        for (const auto & part : split(stages_text, ';')) {
            s.stages.push_back(parse_stage(part, *this));
        }
        return s;
    }

    if (preset == "none") {
        return s;
    }
    if (preset == "fastv") {
        if (stage_layers.size() > 1) {
            fail(status::config_error, "schedule.layers: fastv takes a single stage layer");
        }
        const int layer = stage_layers.empty() ? 3 : stage_layers[0];
        prune_schedule p = preset_fastv(layer, ratio);
        p.placement = s.placement;
        s = p;
    } else if (preset == "pyramiddrop") {
        std::vector<int> layers = stage_layers.empty() ? std::vector<int>{8, 16, 24} : stage_layers;
        std::vector<double> k = keep.empty() ? std::vector<double>(layers.size(), 0.5) : keep;
        prune_schedule p = preset_pyramiddrop(layers, k);
        p.placement = s.placement;
        s = p;
    } else if (preset == "feather") {
        if (!stage_layers.empty() && stage_layers.size() != 2) {
            fail(status::config_error, "schedule.layers: feather takes exactly two stage layers");
        }
        const int k1 = stage_layers.empty() ? 8 : stage_layers[0];
        const int k2 = stage_layers.empty() ? 16 : stage_layers[1];
        prune_schedule p = preset_feather(k1, k2, ratio, stride,
                                          stage2_base == "original" ? feather_base::original_count
                                                                    : feather_base::remaining_count);
        p.placement = s.placement;
        s = p;
    }

    for (prune_stage & st : s.stages) {
        st.crit.stride = stride;
        st.crit.knn_k = knn_k;
        st.crit.agg = agg_from_name(agg);
        st.crit.score = score_from_name(score);
    }
    return s;
}

void experiment_config::validate() const {
    model.validate();
    if (grid_rows < 1 || grid_cols < 1) {
        fail(status::config_error, "grid.rows/grid.cols must be positive");
    }
    if (text_tokens < 1) {
        fail(status::config_error, "scene.text_tokens must be >= 1");
    }
    if (correlation < 0.0 || correlation > 1.0) {
        fail(status::config_error, "scene.correlation must lie in [0, 1]");
    }
    if (rect_rows < 1 || rect_cols < 1 || rect_rows > grid_rows || rect_cols > grid_cols) {
        fail(status::config_error, "scene.rect_rows/rect_cols must fit inside the grid");
    }
    if (rect_fixed && (rect_row < 0 || rect_col < 0 || rect_row + rect_rows > grid_rows ||
                       rect_col + rect_cols > grid_cols)) {
        fail(status::config_error, "fixed object rectangle lies outside the grid");
    }
    if (seeds.empty()) {
        fail(status::config_error, "seeds must not be empty");
    }
    if (workers < 1) {
        fail(status::config_error, "workers must be >= 1");
    }
    if (flops_layers < 1 || flops_grid_rows < 1 || flops_grid_cols < 1) {
        fail(status::config_error, "flops.* constants must be positive");
    }

    const prune_schedule s = resolve_schedule();
    s.validate(model.num_layers);
    // the reference FLOPS report resolves the same stages at flops.layers
    if (!s.stages.empty() && s.stages.back().layer >= flops_layers) {
        fail(status::config_error, "stage layer " + std::to_string(s.stages.back().layer) +
                                   " does not fit the flops.layers=" + std::to_string(flops_layers) +
                                   " reference model");
    }
}

} // namespace vtp
