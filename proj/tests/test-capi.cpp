// Exercises the shared-library surface the way an external consumer would:
// opaque handles, status codes, caller-owned strings.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vtprune.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

namespace {

std::string take(char * s) {
    std::string out = s ? s : "";
    vtp_string_free(s);
    return out;
}

} // namespace

TEST_CASE("version and status names") {
    CHECK(std::string(vtp_version()) == "0.1.0");
    CHECK(std::string(vtp_status_name(VTP_OK)) == "ok");
    CHECK(std::string(vtp_status_name(VTP_ERR_BUDGET)) == "budget_error");
}

TEST_CASE("config lifecycle, dump round-trip, error reporting") {
    vtp_config * cfg = vtp_config_new();
    REQUIRE(cfg != nullptr);

    CHECK(vtp_config_set(cfg, "model.layers", "4") == VTP_OK);
    CHECK(vtp_config_set(cfg, "grid.rows", "6") == VTP_OK);
    CHECK(vtp_config_set(cfg, "grid.cols", "6") == VTP_OK);
    CHECK(vtp_config_set(cfg, "scene.rect_rows", "2") == VTP_OK);
    CHECK(vtp_config_set(cfg, "scene.rect_cols", "2") == VTP_OK);
    CHECK(vtp_config_set(cfg, "schedule.layers", "1") == VTP_OK);
    CHECK(vtp_config_set(cfg, "seeds", "2") == VTP_OK);
    CHECK(vtp_config_validate(cfg) == VTP_OK);

    const int bad = vtp_config_set(cfg, "no.such.key", "1");
    CHECK(bad == VTP_ERR_CONFIG);
    CHECK(std::string(vtp_last_error()).find("no.such.key") != std::string::npos);

    const std::string dumped = take(vtp_config_dump(cfg));
    CHECK(dumped.find("model.layers = 4") != std::string::npos);

    vtp_config_free(cfg);
}

TEST_CASE("layer cost and flops report through the C surface") {
    CHECK(vtp_layer_cost(729, 4096, 11008) == 119015350272ull);
    CHECK(vtp_layer_cost(0, 4096, 11008) == 0);

    vtp_config * cfg = vtp_config_new();
    REQUIRE(vtp_config_set(cfg, "model.layers", "5") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "schedule.layers", "3") == VTP_OK);
    vtp_flops * report = vtp_flops_from_config(cfg);
    REQUIRE(report != nullptr);
    CHECK(std::abs(vtp_flops_reduction(report) - 0.68) <= 0.01);
    const std::string table = take(vtp_flops_table(report));
    CHECK(table.find("reduction") != std::string::npos);
    const std::string json = take(vtp_flops_json(report));
    CHECK(json.find("\"reduction\"") != std::string::npos);
    vtp_flops_free(report);
    vtp_config_free(cfg);
}

TEST_CASE("model, scene, schedule, trace lifecycle") {
    vtp_model * model = vtp_model_new(4, 32, 4, 64, 10000.0, 7);
    REQUIRE(model != nullptr);

    // invalid dims surface as config errors
    CHECK(vtp_model_new(4, 63, 4, 64, 10000.0, 7) == nullptr);
    CHECK(std::string(vtp_last_error()).find("hidden_dim") != std::string::npos);

    vtp_scene * scene = vtp_scene_planted(6, 6, 3, 1, 1, 4, 4, 0.8, 11, 32);
    REQUIRE(scene != nullptr);

    int layers[] = {1};
    vtp_schedule * schedule = vtp_schedule_preset("fastv", 0.5, layers, 1);
    REQUIRE(schedule != nullptr);
    CHECK(vtp_schedule_preset("bogus", 0.5, nullptr, 0) == nullptr);

    vtp_trace * trace = vtp_forward(model, scene, schedule, 1);
    REQUIRE(trace != nullptr);
    CHECK(vtp_trace_stage_count(trace) == 1);

    const int retained = vtp_trace_retained(trace, 0, nullptr, 0);
    CHECK(retained == 18); // floor(0.5 * 36)
    std::vector<int> idx(retained);
    CHECK(vtp_trace_retained(trace, 0, idx.data(), idx.size()) == retained);
    for (int i = 1; i < retained; ++i) {
        CHECK(idx[i] > idx[i - 1]);
    }
    CHECK(vtp_trace_retained(trace, 5, nullptr, 0) == -1);

    const int d = vtp_trace_hidden(trace, nullptr, 0);
    CHECK(d == 32);
    std::vector<double> hidden(d);
    CHECK(vtp_trace_hidden(trace, hidden.data(), hidden.size()) == d);
    CHECK(vtp_trace_macs(trace) > 0);

    vtp_trace_free(trace);
    vtp_schedule_free(schedule);
    vtp_scene_free(scene);

    vtp_scene * constant = vtp_scene_constant(model, 5, 5, 2, 3);
    REQUIRE(constant != nullptr);
    vtp_scene_free(constant);
    vtp_model_free(model);
}

TEST_CASE("experiment run and file output through the C surface") {
    vtp_config * cfg = vtp_config_new();
    REQUIRE(vtp_config_set(cfg, "model.layers", "4") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "model.hidden", "32") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "grid.rows", "6") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "grid.cols", "6") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "scene.rect_rows", "2") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "scene.rect_cols", "2") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "schedule.layers", "1") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "seeds", "2") == VTP_OK);
    REQUIRE(vtp_config_set(cfg, "experiment.id", "capi") == VTP_OK);

    vtp_result * res = vtp_run(cfg, 0);
    REQUIRE(res != nullptr);
    CHECK(vtp_result_stage_count(res) == 1);
    CHECK(vtp_result_mean_recall(res, 0) >= 0.0);
    CHECK(vtp_result_mean_recall(res, 0) <= 1.0);
    CHECK(vtp_result_mean_bias(res, 0) >= 0.0);
    CHECK(vtp_result_reduction(res) > 0.0);
    CHECK(vtp_result_run_reduction(res) > 0.0);
    CHECK(vtp_result_mean_recall(res, 9) == -1.0);

    const std::string table = take(vtp_result_table(res));
    CHECK(table.find("capi") != std::string::npos);

    const std::string dir = "vtp-test-out/capi";
    std::filesystem::remove_all(dir);
    CHECK(vtp_result_write(res, cfg, dir.c_str(), 0) == VTP_OK);
    CHECK(std::filesystem::exists(dir + "/results.csv"));
    CHECK(std::filesystem::exists(dir + "/summary.csv"));
    CHECK(std::filesystem::exists(dir + "/flops.json"));
    CHECK(std::filesystem::exists(dir + "/heatmap_stage0.pgm"));

    vtp_result_free(res);

    // a budget error propagates as its status code
    REQUIRE(vtp_config_set(cfg, "schedule.stages", "1:rope_free:count=10; 2:rope_free:count=30") == VTP_OK);
    CHECK(vtp_run(cfg, 0) == nullptr);
    CHECK(std::string(vtp_last_error()).find("exceeds") != std::string::npos);

    vtp_config_free(cfg);
}

TEST_CASE("compare through the C surface") {
    vtp_config * a = vtp_config_new();
    vtp_config * b = vtp_config_new();
    for (vtp_config * c : {a, b}) {
        REQUIRE(vtp_config_set(c, "model.layers", "4") == VTP_OK);
        REQUIRE(vtp_config_set(c, "model.hidden", "32") == VTP_OK);
        REQUIRE(vtp_config_set(c, "grid.rows", "6") == VTP_OK);
        REQUIRE(vtp_config_set(c, "grid.cols", "6") == VTP_OK);
        REQUIRE(vtp_config_set(c, "scene.rect_rows", "2") == VTP_OK);
        REQUIRE(vtp_config_set(c, "scene.rect_cols", "2") == VTP_OK);
        REQUIRE(vtp_config_set(c, "seeds", "2") == VTP_OK);
    }
    REQUIRE(vtp_config_set(a, "experiment.id", "left") == VTP_OK);
    REQUIRE(vtp_config_set(a, "schedule.preset", "none") == VTP_OK);
    REQUIRE(vtp_config_set(b, "experiment.id", "right") == VTP_OK);
    REQUIRE(vtp_config_set(b, "schedule.layers", "1") == VTP_OK);

    const vtp_config * list[] = {a, b};
    const std::string table = take(vtp_compare(list, 2, 0));
    CHECK(table.find("left") != std::string::npos);
    CHECK(table.find("right") != std::string::npos);

    vtp_config_free(a);
    vtp_config_free(b);
}
