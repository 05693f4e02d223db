#include "vtp-harness.h"

#include "vtp-rng.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace vtp {

namespace {

std::string fmt_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void) ec;
    return std::string(buf, p);
}

grid_rect rect_for_seed(const experiment_config & cfg, uint64_t seed) {
    grid_rect r;
    if (cfg.rect_fixed) {
        r.row0 = cfg.rect_row;
        r.col0 = cfg.rect_col;
    } else {
        rng_stream s = make_stream(seed, "rect");
        r.row0 = int(s.uniform(0) * (cfg.grid_rows - cfg.rect_rows + 1));
        r.col0 = int(s.uniform(1) * (cfg.grid_cols - cfg.rect_cols + 1));
    }
    r.row1 = r.row0 + cfg.rect_rows;
    r.col1 = r.col0 + cfg.rect_cols;
    return r;
}

// what the result files report per stage
struct stage_desc {
    int layer = -1;
    std::string criterion = "none";
};

std::vector<stage_desc> reported_stages(const prune_schedule & schedule) {
    std::vector<stage_desc> out;
    if (schedule.placement == placement_mode::text_only || schedule.stages.empty()) {
        out.push_back({-1, schedule.placement == placement_mode::text_only ? "text_only" : "none"});
        return out;
    }
    for (const prune_stage & st : schedule.stages) {
        out.push_back({st.layer, criterion_kind_name(st.crit.kind)});
    }
    return out;
}

struct seed_outcome {
    std::vector<seed_row> rows;
    std::vector<retained_set> sets;
    double reduction = 0.0;
    uint64_t macs = 0;
};

seed_outcome run_one_seed(const experiment_config & cfg, const model_weights & weights,
                          const prune_schedule & schedule, const std::vector<stage_desc> & stages,
                          uint64_t seed) {
    planted_scene scene = make_planted_scene(cfg.grid_rows, cfg.grid_cols, cfg.text_tokens,
                                             rect_for_seed(cfg, seed), seed, cfg.correlation,
                                             cfg.model.hidden_dim);
    forward_options opt;
    opt.instrument = cfg.instrument;
    forward_trace trace = forward(weights, scene.seq, schedule, opt);

    seed_outcome out;
    out.macs = trace.macs;
    out.reduction = reduction_ratio(cfg.model.num_layers, cfg.model.hidden_dim, cfg.model.ffn_dim,
                                    uint64_t(scene.seq.visual_count()), trace_layer_counts(trace));

    const bool pseudo = trace.stages.empty();
    for (size_t si = 0; si < stages.size(); ++si) {
        retained_set rs;
        if (pseudo) {
            rs.grid_h = cfg.grid_rows;
            rs.grid_w = cfg.grid_cols;
            rs.stage = 0;
            if (schedule.placement != placement_mode::text_only) {
                rs.indices.resize(scene.seq.visual_count());
                std::iota(rs.indices.begin(), rs.indices.end(), 0);
            }
        } else {
            rs = trace.stages.at(si);
        }

        seed_row row;
        row.seed = seed;
        row.stage = int(si);
        row.layer = stages[si].layer;
        row.retained = int(rs.indices.size());
        row.recall = object_recall(rs, scene);
        row.bias = rs.indices.empty() ? std::nan("") : bottom_bias(heatmap_of(rs));
        out.rows.push_back(row);
        out.sets.push_back(std::move(rs));
    }
    return out;
}

double mean_of(const std::vector<double> & xs) {
    if (xs.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (double x : xs) {
        acc += x;
    }
    return acc / double(xs.size());
}

double std_of(const std::vector<double> & xs, double mean) {
    if (xs.size() < 2) {
        return 0.0;
    }
    double acc = 0.0;
    for (double x : xs) {
        acc += (x - mean) * (x - mean);
    }
    return std::sqrt(acc / double(xs.size() - 1));
}

std::string timestamp_utc() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

int effective_workers(const experiment_config & cfg, int override_workers) {
    if (const char * env = std::getenv("VTPRUNE_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) {
            return n;
        }
    }
    if (override_workers >= 1) {
        return override_workers;
    }
    return cfg.workers;
}

run_result run_experiment(const experiment_config & cfg, int workers_override) {
    cfg.validate();
    const model_weights weights = init_model(cfg.model, cfg.model_seed);
    const prune_schedule schedule = cfg.resolve_schedule();
    const std::vector<stage_desc> stages = reported_stages(schedule);
    const int workers = effective_workers(cfg, workers_override);

    std::vector<seed_outcome> outcomes(cfg.seeds.size());
    std::exception_ptr first_error;
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};

    auto work = [&]() {
        while (!failed.load()) {
            const size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) {
                return;
            }
            try {
                outcomes[i] = run_one_seed(cfg, weights, schedule, stages, cfg.seeds[i]);
            } catch (...) {
                if (!failed.exchange(true)) {
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        const int n = std::min<int>(workers, int(cfg.seeds.size()));
        pool.reserve(n);
        for (int t = 0; t < n; ++t) {
            pool.emplace_back(work);
        }
        for (auto & th : pool) {
            th.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    run_result res;
    res.id = cfg.id;
    res.schedule_desc = schedule.describe();
    res.instrumented = cfg.instrument;

    std::vector<double> reductions, macs;
    for (const seed_outcome & oc : outcomes) {
        reductions.push_back(oc.reduction);
        macs.push_back(double(oc.macs));
        for (const seed_row & row : oc.rows) {
            res.rows.push_back(row);
        }
    }
    res.run_reduction = mean_of(reductions);
    res.mean_macs = cfg.instrument ? mean_of(macs) : 0.0;

    for (size_t si = 0; si < stages.size(); ++si) {
        std::vector<double> recalls, biases, retained;
        std::vector<retained_set> sets;
        for (const seed_outcome & oc : outcomes) {
            const seed_row & row = oc.rows.at(si);
            recalls.push_back(row.recall);
            if (!std::isnan(row.bias)) {
                biases.push_back(row.bias);
            }
            retained.push_back(double(row.retained));
            sets.push_back(oc.sets.at(si));
        }

        stage_stats st;
        st.stage = int(si);
        st.layer = stages[si].layer;
        st.criterion = stages[si].criterion;
        st.mean_retained = mean_of(retained);
        st.mean_recall = mean_of(recalls);
        st.std_recall = std_of(recalls, st.mean_recall);
        st.mean_bias = biases.empty() ? std::nan("") : mean_of(biases);
        st.std_bias = biases.empty() ? 0.0 : std_of(biases, st.mean_bias);
        res.stages.push_back(st);

        // integer membership counts make accumulation order-independent
        heatmap hm;
        hm.grid_h = cfg.grid_rows;
        hm.grid_w = cfg.grid_cols;
        std::vector<int64_t> counts(size_t(cfg.grid_rows) * cfg.grid_cols, 0);
        for (const retained_set & rs : sets) {
            for (int idx : rs.indices) {
                counts.at(idx) += 1;
            }
        }
        hm.samples = int(sets.size());
        hm.freq.resize(counts.size());
        for (size_t i = 0; i < counts.size(); ++i) {
            hm.freq[i] = hm.samples > 0 ? double(counts[i]) / hm.samples : 0.0;
        }
        res.heatmaps.push_back(std::move(hm));
    }

    const std::vector<uint64_t> ref_counts =
        resolve_layer_counts(schedule, cfg.flops_grid_rows, cfg.flops_grid_cols, cfg.flops_layers);
    res.reference = make_flops_report(cfg.flops_layers, cfg.flops_hidden, cfg.flops_ffn,
                                      uint64_t(cfg.flops_grid_rows) * cfg.flops_grid_cols, ref_counts);
    return res;
}

std::string run_result::table() const {
    std::ostringstream os;
    os << "experiment " << id << "\n";
    os << "schedule   " << schedule_desc << "\n";
    os << std::left << std::setw(7) << "stage" << std::setw(7) << "layer" << std::setw(16) << "criterion"
       << std::setw(12) << "retained" << std::setw(22) << "recall (mean/std)" << "bias (mean/std)\n";
    for (const stage_stats & st : stages) {
        std::ostringstream rec, bias;
        rec << std::fixed << std::setprecision(4) << st.mean_recall << " / " << st.std_recall;
        bias << std::fixed << std::setprecision(4) << st.mean_bias << " / " << st.std_bias;
        os << std::left << std::setw(7) << st.stage << std::setw(7) << st.layer << std::setw(16) << st.criterion
           << std::setw(12) << std::fixed << std::setprecision(1) << st.mean_retained
           << std::setw(22) << rec.str() << bias.str() << "\n";
    }
    os << "run reduction (own dims)  " << std::fixed << std::setprecision(4) << run_reduction << "\n";
    os << "reference reduction       " << std::fixed << std::setprecision(4) << reference.reduction << "\n";
    if (instrumented) {
        os << "mean multiply-accumulates " << uint64_t(mean_macs) << "\n";
    }
    return os.str();
}

void write_run_files(const run_result & res, const experiment_config & cfg,
                     const std::string & out_dir, bool heatmaps_only) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        fail(status::io_error, "cannot create output directory '" + out_dir + "': " + ec.message());
    }
    const fs::path base(out_dir);

    for (size_t si = 0; si < res.heatmaps.size(); ++si) {
        const std::string stem = "heatmap_stage" + std::to_string(si);
        write_heatmap_txt(res.heatmaps[si], (base / (stem + ".txt")).string());
        write_heatmap_pgm(res.heatmaps[si], (base / (stem + ".pgm")).string());
    }
    if (heatmaps_only) {
        return;
    }

    {
        // the resolved plan that produced this run
        std::ofstream out(base / "config.txt");
        out << cfg.dump();
    }

    {
        std::ofstream out(base / "results.csv");
        if (!out) {
            fail(status::io_error, "cannot write results.csv under '" + out_dir + "'");
        }
        out << "experiment,seed,stage,layer,retained,recall,bottom_bias\n";
        for (const seed_row & row : res.rows) {
            out << res.id << "," << row.seed << "," << row.stage << "," << row.layer << ","
                << row.retained << "," << fmt_double(row.recall) << "," << fmt_double(row.bias) << "\n";
        }
    }
    {
        std::ofstream out(base / "summary.csv");
        out << "# generated_at=" << timestamp_utc() << "\n";
        out << "experiment,schedule,stage,layer,criterion,mean_retained,mean_recall,std_recall,"
               "mean_bias,std_bias,run_reduction,reference_reduction\n";
        for (const stage_stats & st : res.stages) {
            out << res.id << ",\"" << res.schedule_desc << "\"," << st.stage << "," << st.layer << ","
                << st.criterion << "," << fmt_double(st.mean_retained) << "," << fmt_double(st.mean_recall)
                << "," << fmt_double(st.std_recall) << "," << fmt_double(st.mean_bias) << ","
                << fmt_double(st.std_bias) << "," << fmt_double(res.run_reduction) << ","
                << fmt_double(res.reference.reduction) << "\n";
        }
    }
    {
        std::ofstream out(base / "flops.json");
        out << res.reference.json() << "\n";
    }
}

std::string compare_experiments(const std::vector<experiment_config> & cfgs, int workers_override) {
    if (cfgs.size() < 2) {
        fail(status::input_error, "compare needs at least two configurations");
    }
    const experiment_config & first = cfgs.front();
    for (const experiment_config & c : cfgs) {
        if (c.seeds != first.seeds) {
            fail(status::input_error, "compared configs must share the same seed list");
        }
        if (c.grid_rows != first.grid_rows || c.grid_cols != first.grid_cols ||
            c.text_tokens != first.text_tokens) {
            fail(status::input_error, "compared configs must share the same grid and text length");
        }
        if (c.model.num_layers != first.model.num_layers || c.model.hidden_dim != first.model.hidden_dim ||
            c.model.num_heads != first.model.num_heads || c.model.ffn_dim != first.model.ffn_dim ||
            c.model.rope_base != first.model.rope_base || c.model_seed != first.model_seed) {
            fail(status::input_error, "compared configs must share the same model");
        }
        if (c.flops_layers != first.flops_layers || c.flops_hidden != first.flops_hidden ||
            c.flops_ffn != first.flops_ffn || c.flops_grid_rows != first.flops_grid_rows ||
            c.flops_grid_cols != first.flops_grid_cols) {
            fail(status::input_error, "compared configs must share the same flops constants");
        }
    }

    std::ostringstream os;
    os << std::left << std::setw(16) << "experiment" << std::setw(44) << "schedule"
       << std::setw(12) << "reduction" << std::setw(12) << "recall" << "bottom_bias\n";
    for (const experiment_config & cfg : cfgs) {
        const run_result res = run_experiment(cfg, workers_override);
        const stage_stats & last = res.stages.back();
        os << std::left << std::setw(16) << res.id << std::setw(44) << res.schedule_desc
           << std::setw(12) << std::fixed << std::setprecision(4) << res.reference.reduction
           << std::setw(12) << std::fixed << std::setprecision(4) << last.mean_recall
           << std::fixed << std::setprecision(4) << last.mean_bias << "\n";
    }
    return os.str();
}

} // namespace vtp
