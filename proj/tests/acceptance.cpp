// Acceptance checks for the closed-loop bandwidth manager.  Each criterion
// prints one PASS/FAIL line and carries a wall-clock budget; run with a
// criterion number (1-7) to execute a single one, or no argument for all.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "ztwin/harness.hpp"

#ifndef ZTWIN_CLI_PATH
#define ZTWIN_CLI_PATH ""
#endif

namespace {

namespace fs = std::filesystem;
using namespace ztwin;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string details;
};

std::string fmt(double v, int prec = 2) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string fmt_sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

Outcome fail(std::string details) { return {false, std::move(details)}; }
Outcome pass(std::string details) { return {true, std::move(details)}; }

// Analytic gradient against central differences on a small model.  The
// relative-error denominator is floored so near-zero pairs do not explode.
Outcome criterion_gradient() {
    const int hidden = 3;
    const int window = 4;
    auto m = predictor::BiLstmModel::init(hidden, window, 42);

    traffic::WindowSet ws;
    ws.L = window;
    Rng rng(99);
    for (int i = 0; i < 5; ++i) {
        traffic::Window w;
        for (int t = 0; t < window; ++t) w.input.push_back(uniform01(rng));
        w.target = uniform01(rng);
        ws.items.push_back(std::move(w));
    }

    std::vector<double> grad;
    predictor::loss_and_gradient(m, ws, 0, ws.items.size(), grad);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t p = 0; p < m.params.size(); ++p) {
        const double saved = m.params[p];
        m.params[p] = saved + h;
        const double up = predictor::loss_only(m, ws, 0, ws.items.size());
        m.params[p] = saved - h;
        const double down = predictor::loss_only(m, ws, 0, ws.items.size());
        m.params[p] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double rel =
            std::abs(grad[p] - numeric) / std::max(std::abs(grad[p]) + std::abs(numeric), 1e-4);
        max_rel = std::max(max_rel, rel);
    }
    if (max_rel >= 1e-4) {
        return fail("max rel err " + fmt_sci(max_rel) + " over " +
                    format_int(static_cast<long long>(m.params.size())) + " parameters, limit 1e-4");
    }
    return pass("max rel err " + fmt_sci(max_rel) + " over " +
                format_int(static_cast<long long>(m.params.size())) + " parameters");
}

// Correction rule semantics on random windows.  Large misses must be
// memorized and re-predicted exactly; misses within the threshold must leave
// the memory untouched.
Outcome criterion_memory() {
    predictor::PredictorBundle b;
    b.model = predictor::BiLstmModel::init(2, 9, 7);
    b.scaler = {0.0, 1000.0};
    b.memory = predictor::MemoryModule(4096);
    b.delta_kbps = 5.0;

    Rng rng(2024);
    int corrected = 0;
    int unchanged = 0;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> window;
        for (int t = 0; t < 9; ++t) window.push_back(uniform01(rng));
        const auto before = predictor::predict_with_memory(b, window);
        // Every third target sits within the threshold so both branches of
        // the rule are exercised.
        double y_desired = uniform01(rng);
        if (i % 3 == 2) y_desired = std::clamp(before.value + 0.002, 0.0, 1.0);
        const std::size_t size_before = b.memory.size();

        predictor::memory_update(b, window, before.value, y_desired);
        const double err_kbps = std::abs(traffic::denormalize_value(before.value, b.scaler) -
                                         traffic::denormalize_value(y_desired, b.scaler));
        const auto after = predictor::predict_with_memory(b, window);

        if (err_kbps > b.delta_kbps) {
            ++corrected;
            if (after.source != predictor::Source::memory) {
                return fail("correction was not memorized at sequence " + format_int(i));
            }
            if (after.value != y_desired) {
                return fail("re-prediction differs from the stored value at sequence " +
                            format_int(i));
            }
        } else {
            ++unchanged;
            if (b.memory.size() != size_before) {
                return fail("a miss within the threshold changed the memory at sequence " +
                            format_int(i));
            }
            if (after.value != before.value || after.source != before.source) {
                return fail("re-prediction changed without a correction at sequence " +
                            format_int(i));
            }
        }
    }
    if (corrected == 0 || unchanged == 0) {
        return fail("both rule branches must be exercised (corrected " + format_int(corrected) +
                    ", unchanged " + format_int(unchanged) + ")");
    }
    return pass("100 sequences: " + format_int(corrected) + " corrected, " +
                format_int(unchanged) + " left unchanged");
}

// Full prediction pipeline on the default demand series: train on the first
// 1800 samples, one corrective pass over the held-out tail, then measure.
Outcome criterion_accuracy() {
    harness::ScenarioConfig cfg;
    auto art = harness::train_artifacts(cfg, /*force_model=*/true);

    Rng rng(cfg.seed);
    traffic::TrafficParams tp;
    tp.lambda = cfg.traffic.lambda;
    tp.unit_size = cfg.traffic.unit_size;
    tp.length = cfg.traffic.length;
    const auto series = traffic::generate_series(tp, rng);

    traffic::BandwidthSeries test_part;
    test_part.values.assign(series.values.begin() + cfg.traffic.train_samples,
                            series.values.end());
    const auto test_windows = traffic::windowize(
        traffic::normalize_series(test_part, art.bundle.scaler), cfg.predictor.window);

    const auto memorized = predictor::ingest_few_shot(art.bundle, test_windows);
    const auto metrics = predictor::evaluate(art.bundle, test_windows);
    const double limit = 0.5 * cfg.traffic.unit_size;
    if (!(metrics.mae <= limit)) {
        return fail("mae " + fmt(metrics.mae) + " Kbps exceeds " + fmt(limit) + " over " +
                    format_int(static_cast<long long>(test_windows.items.size())) + " windows");
    }
    return pass("mae " + fmt(metrics.mae) + " Kbps (limit " + fmt(limit) + ") over " +
                format_int(static_cast<long long>(test_windows.items.size())) + " windows, " +
                format_int(static_cast<long long>(memorized)) + " memorized");
}

// The trained policy must agree with the per-state best action, including
// states added offline after training.
Outcome criterion_policy() {
    harness::ScenarioConfig cfg;
    auto states = agent::StateSpace::make_default();
    auto actions = agent::ActionSpace::make_default();
    agent::RewardParams rp;
    agent::AgentTrainParams tp;
    tp.seed = cfg.seed + 2;
    const auto trace = netsim::to_capacity_vector(harness::default_schedule("default"));
    auto qtable = agent::train_agent(trace, states, actions, rp, tp);

    // The offline evaluation never consults the sequence model.
    predictor::PredictorBundle bundle;
    bundle.model.hidden = 1;
    bundle.model.L = cfg.predictor.window;
    bundle.model.params.assign(predictor::BiLstmModel::total_params(1), 0.0);
    bundle.scaler = {0.0, 1.0};
    auto tw = twin::make_twin(std::move(bundle), std::move(states), std::move(actions),
                              std::move(qtable), rp, netsim::LinkModel{}, twin::TwinConfig{});

    const auto e100 = twin::what_if(tw, 100.0);
    const auto e50 = twin::what_if(tw, 50.0);
    if (e100.action_kbps != 100.0) {
        return fail("offline evaluation of 100 Kbps chose " + format_double(e100.action_kbps));
    }
    if (e50.action_kbps != 50.0) {
        return fail("offline evaluation of 50 Kbps chose " + format_double(e50.action_kbps));
    }

    const auto oracle = agent::oracle_policy(tw.states, tw.actions, rp);
    for (std::size_t s = 0; s < tw.states.levels.size(); ++s) {
        const auto greedy = agent::greedy_action(tw.qtable, s);
        if (greedy != oracle[s]) {
            return fail("greedy picks " + format_double(tw.actions.rates[greedy]) + " at level " +
                        format_double(tw.states.levels[s]) + ", best is " +
                        format_double(tw.actions.rates[oracle[s]]));
        }
    }
    return pass("greedy matches the best action on all " +
                format_int(static_cast<long long>(tw.states.levels.size())) +
                " levels, including the two added offline");
}

// Closed-loop tracking across the three scripted scenarios.
Outcome criterion_scenarios() {
    harness::ScenarioConfig base;
    auto rep = harness::run_scenario(base);
    const double post = rep.summary.post_warmup_mean_abs_error_kbps;
    if (!(post <= 10.0)) {
        return fail("default run post-warmup |err| " + fmt(post) + " Kbps exceeds 10");
    }

    harness::ScenarioConfig cw = base;
    cw.name = "what_if";
    const auto repw = harness::run_scenario(cw);
    int low_steps = 0;
    for (const auto& r : repw.records) {
        if (r.capacity != 100.0) continue;
        ++low_steps;
        if (r.achieved != 100.0) {
            return fail("pre-evaluated 100 Kbps stretch achieved " + format_double(r.achieved) +
                        " at step " + format_int(r.step));
        }
    }
    if (low_steps == 0) return fail("the what_if schedule has no 100 Kbps stretch");

    harness::ScenarioConfig ca = base;
    ca.name = "adaptive";
    const auto repa = harness::run_scenario(ca);
    std::vector<double> low_actions;
    for (const auto& r : repa.records) {
        if (r.capacity == 50.0) low_actions.push_back(r.action);
    }
    if (low_actions.size() != 18) {
        return fail("expected 18 steps at 50 Kbps, saw " +
                    format_int(static_cast<long long>(low_actions.size())));
    }
    for (std::size_t i = 0; i < low_actions.size(); ++i) {
        const double expected = i < 9 ? 70.0 : 50.0;
        if (low_actions[i] != expected) {
            return fail("50 Kbps stretch " + std::string(i < 9 ? "one" : "two") + " used rate " +
                        format_double(low_actions[i]) + ", expected " + format_double(expected));
        }
    }
    return pass("default post-warmup |err| " + fmt(post) +
                " Kbps; constrained stretch held exactly; relearned rate 70 then 50");
}

// The five management stages must improve monotonically and the closed loop
// must land within 5 Kbps of the unconstrained ceiling for ten seeds.
Outcome criterion_ordering() {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        harness::ScenarioConfig cfg;
        cfg.name = "compare";
        cfg.seed = seed;
        const auto rep = harness::compare_techniques(cfg);
        const auto& t = rep.techniques;
        const double t1 = t[0].mean_kbps;
        const double t2 = t[1].mean_kbps;
        const double t3 = t[2].mean_kbps;
        const double t4 = t[3].mean_kbps;
        const double t5 = t[4].mean_kbps;
        if (!(t2 < t3 && t3 < t4 && t4 < t5 && t5 <= t1)) {
            return fail("ordering broke at seed " + format_int(static_cast<long long>(seed)) +
                        ": " + fmt(t2, 4) + ", " + fmt(t3, 4) + ", " + fmt(t4, 4) + ", " +
                        fmt(t5, 4) + ", ceiling " + fmt(t1, 4));
        }
        if (!(t1 - t5 <= 5.0)) {
            return fail("closed loop trails the ceiling by " + fmt(t1 - t5) +
                        " Kbps at seed " + format_int(static_cast<long long>(seed)));
        }
    }
    return pass("ordering held for seeds 1-10; closed loop within 5 Kbps of the ceiling");
}

// Two identical CLI invocations must emit byte-identical outputs.
Outcome criterion_reproducibility() {
    const std::string cli = ZTWIN_CLI_PATH;
    if (cli.empty()) return fail("CLI path was not compiled in");

    const fs::path dir_a = fs::temp_directory_path() / "ztwin_acceptance_a";
    const fs::path dir_b = fs::temp_directory_path() / "ztwin_acceptance_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    for (const auto& dir : {dir_a, dir_b}) {
        const std::string cmd = "\"" + cli + "\" run --scenario default --seed 7 --out \"" +
                                dir.string() + "\" > /dev/null";
        if (std::system(cmd.c_str()) != 0) return fail("CLI run failed for " + dir.string());
    }

    for (const char* name : {"default_records.csv", "default_summary.json"}) {
        const auto a = read_text_file((dir_a / name).string());
        const auto b = read_text_file((dir_b / name).string());
        if (a != b) return fail(std::string(name) + " differs between identical runs");
        if (a.empty()) return fail(std::string(name) + " is empty");
    }
    return pass("two identical runs emitted byte-identical records and summary");
}

} // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* label;
        double budget_s;
        Outcome (*fn)();
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient-check", 5.0, criterion_gradient},
        {2, "memory-rule", 1.0, criterion_memory},
        {3, "prediction-accuracy", 120.0, criterion_accuracy},
        {4, "policy-optimality", 30.0, criterion_policy},
        {5, "scenario-tracking", 60.0, criterion_scenarios},
        {6, "technique-ordering", 120.0, criterion_ordering},
        {7, "reproducibility", 60.0, criterion_reproducibility},
    };

    int only = 0;
    if (argc > 1) {
        only = std::atoi(argv[1]);
        if (only < 1 || only > 7) {
            std::cerr << "usage: acceptance [1-7]\n";
            return 2;
        }
    }

    bool all_pass = true;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out = fail(std::string("exception: ") + e.what());
        }
        const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        const bool in_budget = elapsed <= c.budget_s;
        const bool ok = out.pass && in_budget;
        std::string details = out.details;
        if (out.pass && !in_budget) {
            details += "; exceeded the " + fmt(c.budget_s, 0) + "s budget";
        }
        std::cout << "ACCEPTANCE " << c.id << " " << c.label << ": " << (ok ? "PASS" : "FAIL")
                  << " (" << details << "; " << fmt(elapsed) << "s)\n";
        all_pass = all_pass && ok;
    }
    return all_pass ? 0 : 1;
}
