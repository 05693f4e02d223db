// vtprune command line front end. Talks to the engine exclusively through the
// C API in vtprune.h. Exit codes: 0 success, 2 configuration error,
// 3 runtime/budget error.

#include <vtprune.h>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

namespace {

struct config_deleter { void operator()(vtp_config * c) const { vtp_config_free(c); } };
using config_ptr = std::unique_ptr<vtp_config, config_deleter>;

struct common_flags {
    std::string config_path;
    std::string preset;
    std::string ratio;
    std::string layers;
    std::string seeds;
    std::string out_dir;
    bool instrument = false;
    bool dump_config = false;
};

void add_common(CLI::App * cmd, common_flags & f, bool with_run_flags) {
    cmd->add_option("--config", f.config_path, "experiment config file");
    cmd->add_option("--preset", f.preset, "schedule preset: fastv|pyramiddrop|feather|none");
    cmd->add_option("--ratio", f.ratio, "pruning ratio R");
    cmd->add_option("--layers", f.layers, "stage layers, comma separated");
    if (with_run_flags) {
        cmd->add_option("--seeds", f.seeds, "seed count N or comma list");
        cmd->add_option("--out", f.out_dir, "output directory");
        cmd->add_flag("--instrument", f.instrument, "count multiply-accumulates");
        cmd->add_flag("--dump-config", f.dump_config, "print the resolved config and exit");
    }
}

int exit_code_for(int status) {
    switch (status) {
        case VTP_OK:
            return 0;
        case VTP_ERR_CONFIG:
        case VTP_ERR_INPUT:
            return 2;
        default:
            return 3;
    }
}

int fail_with(int status) {
    std::fprintf(stderr, "error (%s): %s\n", vtp_status_name(status), vtp_last_error());
    return exit_code_for(status);
}

// builds a config from file (or defaults) plus flag overrides
config_ptr build_config(const common_flags & f, int & err) {
    config_ptr cfg(f.config_path.empty() ? vtp_config_new() : vtp_config_load(f.config_path.c_str()));
    if (!cfg) {
        err = VTP_ERR_CONFIG;
        return nullptr;
    }
    auto set = [&](const char * key, const std::string & value) {
        if (err == VTP_OK && !value.empty()) {
            err = vtp_config_set(cfg.get(), key, value.c_str());
        }
    };
    err = VTP_OK;
    set("schedule.preset", f.preset);
    set("schedule.ratio", f.ratio);
    set("schedule.layers", f.layers);
    set("seeds", f.seeds);
    set("out.dir", f.out_dir);
    if (err == VTP_OK && f.instrument) {
        err = vtp_config_set(cfg.get(), "instrument", "true");
    }
    if (err != VTP_OK) {
        return nullptr;
    }
    return cfg;
}

std::string config_out_dir(const vtp_config * cfg) {
    char * text = vtp_config_dump(cfg);
    std::string out = "runs/out";
    std::string s(text ? text : "");
    vtp_string_free(text);
    const std::string key = "out.dir = ";
    const size_t at = s.find(key);
    if (at != std::string::npos) {
        const size_t end = s.find('\n', at);
        out = s.substr(at + key.size(), end - at - key.size());
    }
    return out;
}

int cmd_run(const common_flags & f, bool heatmaps_only) {
    int err = VTP_OK;
    config_ptr cfg = build_config(f, err);
    if (!cfg) {
        return fail_with(err);
    }
    if (f.dump_config) {
        err = vtp_config_validate(cfg.get());
        if (err != VTP_OK) {
            return fail_with(err);
        }
        char * text = vtp_config_dump(cfg.get());
        std::fputs(text, stdout);
        vtp_string_free(text);
        return 0;
    }

    vtp_result * res = vtp_run(cfg.get(), 0);
    if (!res) {
        return fail_with(VTP_ERR_RUNTIME);
    }
    const std::string out_dir = config_out_dir(cfg.get());
    err = vtp_result_write(res, cfg.get(), out_dir.c_str(), heatmaps_only ? 1 : 0);
    if (err != VTP_OK) {
        vtp_result_free(res);
        return fail_with(err);
    }
    char * table = vtp_result_table(res);
    std::fputs(table, stdout);
    vtp_string_free(table);
    std::printf("wrote %s\n", out_dir.c_str());
    vtp_result_free(res);
    return 0;
}

int cmd_flops(const common_flags & f) {
    int err = VTP_OK;
    config_ptr cfg = build_config(f, err);
    if (!cfg) {
        return fail_with(err);
    }
    vtp_flops * report = vtp_flops_from_config(cfg.get());
    if (!report) {
        return fail_with(VTP_ERR_CONFIG);
    }
    char * table = vtp_flops_table(report);
    std::fputs(table, stdout);
    vtp_string_free(table);
    char * json = vtp_flops_json(report);
    std::fputs(json, stdout);
    std::fputs("\n", stdout);
    vtp_string_free(json);
    vtp_flops_free(report);
    return 0;
}

int cmd_compare(const std::vector<std::string> & paths) {
    std::vector<config_ptr> owned;
    std::vector<const vtp_config *> raw;
    for (const std::string & path : paths) {
        config_ptr cfg(vtp_config_load(path.c_str()));
        if (!cfg) {
            return fail_with(VTP_ERR_CONFIG);
        }
        raw.push_back(cfg.get());
        owned.push_back(std::move(cfg));
    }
    char * table = vtp_compare(raw.data(), raw.size(), 0);
    if (!table) {
        return fail_with(VTP_ERR_INPUT);
    }
    std::fputs(table, stdout);
    vtp_string_free(table);
    return 0;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"visual-token pruning experiments on a toy decoder transformer"};
    app.require_subcommand(1);

    common_flags run_flags, heat_flags, flops_flags;
    std::vector<std::string> compare_paths;

    CLI::App * run = app.add_subcommand("run", "run an experiment and write result files");
    add_common(run, run_flags, true);

    CLI::App * compare = app.add_subcommand("compare", "run several configs and print a comparison table");
    compare->add_option("configs", compare_paths, "config files")->required()->expected(2, -1);

    CLI::App * flops = app.add_subcommand("flops", "print the analytic FLOPS report for a schedule");
    add_common(flops, flops_flags, false);

    CLI::App * heatmap = app.add_subcommand("heatmap", "run an experiment and write only heatmap files");
    add_common(heatmap, heat_flags, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        app.exit(e);
        return 2;
    }

    if (run->parsed()) {
        return cmd_run(run_flags, false);
    }
    if (compare->parsed()) {
        return cmd_compare(compare_paths);
    }
    if (flops->parsed()) {
        return cmd_flops(flops_flags);
    }
    if (heatmap->parsed()) {
        return cmd_run(heat_flags, true);
    }
    return 2;
}
