#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test-util.h"

#include "vtp-flops.h"

#include <cmath>

using namespace vtp;

namespace {

// reference large-model constants
constexpr int      kT = 32;
constexpr uint64_t kD = 4096;
constexpr uint64_t kM = 11008;
constexpr uint64_t kN = 729;

std::vector<uint64_t> counts_for(int full_layers, uint64_t after, int total_layers = kT,
                                 uint64_t before = kN) {
    std::vector<uint64_t> c(total_layers, before);
    for (int l = full_layers; l < total_layers; ++l) {
        c[l] = after;
    }
    return c;
}

} // namespace

TEST_CASE("layer_cost: hand values and the frozen golden") {
    CHECK(layer_cost(0, 64, 128) == 0);
    CHECK(layer_cost(1, 2, 3) == 32); // 4*1*4 + 2*1*2 + 2*1*2*3
    CHECK(layer_cost(kN, kD, kM) == 119015350272ull);
}

TEST_CASE("reduction_ratio reproduces the published anchors") {
    // one-stage original criterion
    CHECK(reduction_ratio(kT, kD, kM, kN, counts_for(3, 182)) == doctest::Approx(0.68).epsilon(0.015));
    CHECK(reduction_ratio(kT, kD, kM, kN, counts_for(8, 182)) == doctest::Approx(0.56).epsilon(0.02));
    // 196-token geometric / density selections
    CHECK(reduction_ratio(kT, kD, kM, kN, counts_for(3, 196)) == doctest::Approx(0.66).epsilon(0.02));
    CHECK(reduction_ratio(kT, kD, kM, kN, counts_for(8, 196)) == doctest::Approx(0.55).epsilon(0.02));
    // ensemble with the expected union of 243
    CHECK(reduction_ratio(kT, kD, kM, kN, counts_for(3, 243)) == doctest::Approx(0.61).epsilon(0.02));
    CHECK(reduction_ratio(kT, kD, kM, kN, counts_for(8, 243)) == doctest::Approx(0.50).epsilon(0.02));

    // two-stage 729 -> 243 -> 45
    std::vector<uint64_t> feather(kT, kN);
    for (int l = 8; l < 16; ++l) feather[l] = 243;
    for (int l = 16; l < kT; ++l) feather[l] = 45;
    CHECK(reduction_ratio(kT, kD, kM, kN, feather) == doctest::Approx(0.64).epsilon(0.016));

    CHECK(reduction_ratio(kT, kD, kM, kN, counts_for(0, kN)) == 0.0);
}

TEST_CASE("resolve_layer_counts matches the presets") {
    const auto fastv = resolve_layer_counts(preset_fastv(3, 0.75), 27, 27, kT);
    CHECK(fastv == counts_for(3, 182));

    const auto feather = resolve_layer_counts(preset_feather(8, 16, 0.75), 27, 27, kT);
    std::vector<uint64_t> want(kT, kN);
    for (int l = 8; l < 16; ++l) want[l] = 243; // expected ensemble union
    for (int l = 16; l < kT; ++l) want[l] = 45;
    CHECK(feather == want);

    const auto pd = resolve_layer_counts(preset_pyramiddrop(), 27, 27, kT);
    std::vector<uint64_t> want_pd(kT, kN);
    for (int l = 8; l < 16; ++l) want_pd[l] = 364;
    for (int l = 16; l < 24; ++l) want_pd[l] = 182;
    for (int l = 24; l < kT; ++l) want_pd[l] = 91;
    CHECK(pd == want_pd);
    // our computed value for the default keep fractions; reported, not a paper gate
    CHECK(reduction_ratio(kT, kD, kM, kN, pd) == doctest::Approx(0.5365).epsilon(0.001));

    // uniform stride-2 stage resolves to the lattice count
    prune_schedule uni;
    criterion crit;
    crit.kind = criterion_kind::uniform_stride;
    crit.stride = 2;
    uni.stages.push_back({3, crit, {retention_base::fraction_of_original, 1.0}});
    CHECK(resolve_layer_counts(uni, 27, 27, kT) == counts_for(3, 196));
}

TEST_CASE("reduction_ratio monotonicity and range") {
    rng_stream s = make_stream(31, "flops_prop");
    for (uint64_t trial = 0; trial < 50; ++trial) {
        const int full = 1 + int(s.uniform(trial) * 20);
        const uint64_t after = 1 + uint64_t(s.uniform(100 + trial) * (kN - 1));
        const double base = reduction_ratio(kT, kD, kM, kN, counts_for(full, after));
        CHECK(base >= 0.0);
        CHECK(base < 1.0);

        // pruning more never decreases the ratio
        if (after > 1) {
            const double more = reduction_ratio(kT, kD, kM, kN, counts_for(full, after - 1));
            CHECK(more >= base);
        }
        // delaying the stage never increases the ratio
        const double later = reduction_ratio(kT, kD, kM, kN, counts_for(full + 1, after));
        CHECK(later <= base);
    }
}

TEST_CASE("instrumented counter matches the closed form on an unpruned pass") {
    const model_config cfg = testutil::toy_config(4, 64, 4, 128);
    const model_weights w = init_model(cfg, 5);
    const token_sequence seq = testutil::random_sequence(6, 6, 4, cfg.hidden_dim, 5);

    forward_options opt;
    opt.instrument = true;
    const forward_trace tr = forward(w, seq, {}, opt);
    CHECK(measured_multiply_accumulates(tr) == expected_macs_unpruned(cfg, seq.total()));

    // pruning strictly reduces the measured count
    prune_schedule half;
    criterion crit;
    crit.kind = criterion_kind::rope_free;
    half.stages.push_back({1, crit, {retention_base::fraction_of_original, 0.5}});
    const forward_trace pruned = forward(w, seq, half, opt);
    CHECK(measured_multiply_accumulates(pruned) < measured_multiply_accumulates(tr));

    const forward_trace plain = forward(w, seq, {});
    CHECK_THROWS_AS(measured_multiply_accumulates(plain), error);
    try {
        measured_multiply_accumulates(plain);
    } catch (const error & e) {
        CHECK(e.code == status::state_error);
    }
}

TEST_CASE("analytic model tracks the instrumented counter within 5% (visual+text counting)") {
    const model_config cfg = testutil::toy_config(4, 64, 4, 128);
    const model_weights w = init_model(cfg, 5);
    const token_sequence seq = testutil::random_sequence(6, 6, 4, cfg.hidden_dim, 5);

    forward_options opt;
    opt.instrument = true;

    prune_schedule sched;
    criterion crit;
    crit.kind = criterion_kind::rope_free;
    sched.stages.push_back({1, crit, {retention_base::fraction_of_original, 0.25}});

    const forward_trace pruned = forward(w, seq, sched, opt);
    const forward_trace full = forward(w, seq, {}, opt);
    const double measured = 1.0 - double(pruned.macs) / double(full.macs);

    // analytic reduction over visual+text token counts
    std::vector<uint64_t> counts;
    for (int c : pruned.tokens_per_layer) {
        counts.push_back(uint64_t(c));
    }
    const double analytic = reduction_ratio(cfg.num_layers, cfg.hidden_dim, cfg.ffn_dim,
                                            uint64_t(seq.total()), counts);
    CHECK(std::abs(measured - analytic) <= 0.05 * std::abs(analytic));
}

TEST_CASE("flops_report carries consistent totals and serializes") {
    const auto counts = counts_for(3, 182);
    const flops_report r = make_flops_report(kT, kD, kM, kN, counts);
    CHECK(r.baseline_total == uint64_t(kT) * layer_cost(kN, kD, kM));
    uint64_t total = 0;
    for (uint64_t c : counts) {
        total += layer_cost(c, kD, kM);
    }
    CHECK(r.pruned_total == total);
    CHECK(r.reduction == doctest::Approx(1.0 - double(total) / double(r.baseline_total)).epsilon(1e-12));
    CHECK(r.table().find("reduction") != std::string::npos);
    CHECK(r.json().find("\"reduction\"") != std::string::npos);
}
