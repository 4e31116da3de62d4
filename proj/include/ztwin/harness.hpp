#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ztwin/agent.hpp"
#include "ztwin/bilstm.hpp"
#include "ztwin/csv.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/json_io.hpp"
#include "ztwin/netsim.hpp"
#include "ztwin/num.hpp"
#include "ztwin/predictor.hpp"
#include "ztwin/svg.hpp"
#include "ztwin/traffic.hpp"
#include "ztwin/twin.hpp"

namespace ztwin::harness {

// Steps excluded from the tracking-error summary while the loop's first
// predictions settle.
inline constexpr int kWarmupSteps = 10;

// Unpaced senders burst around their requirement; the paired offsets keep the
// long-run demand mean exactly on it.
inline constexpr double kDemandSwingKbps = 60.0;

struct TrafficSection {
    double lambda = 4.0;
    double unit_size = 100.0;
    int length = 2500;
    int train_samples = 1800;
};

struct PredictorSection {
    int hidden = 32;
    int window = 9;
    double delta_kbps = 5.0;
    bool train_model = true;
    int epochs = 40;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int memory_capacity = 4096;
};

struct AgentSection {
    int episodes = 500;
    double alpha = 0.3;
    double gamma = 0.9;
    double epsilon_start = 1.0;
    double epsilon_end = 0.01;
};

struct TwinSection {
    int whatif_episodes = 200;
    int whatif_steps = 50;
};

struct ActionRange {
    double min = 10.0;
    double max = 600.0;
    double step = 10.0;
};

struct StatesSection {
    std::vector<double> levels = {150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0};
    double step = 50.0;
};

struct PathsSection {
    std::string bundle = "bundle.json";
    std::string qtable = "qtable.csv";
    std::string db = "db.json";
};

struct ScenarioConfig {
    std::string name = "default";
    std::uint64_t seed = 7;
    std::string out_dir = "out";
    bool charts = true;
    double required_kbps = 310.0;
    double offered_kbps = 600.0;
    TrafficSection traffic;
    PredictorSection predictor;
    AgentSection agent;
    TwinSection twin;
    StatesSection states;
    ActionRange actions;
    double overshoot_penalty = 2.0;
    double congestion_beta = 0.25;
    std::optional<netsim::VariationSchedule> schedule;
    PathsSection paths;

    void validate() const;
};

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"default", "what_if", "adaptive", "compare"};
    return names;
}

inline void ScenarioConfig::validate() const {
    if (std::find(scenario_names().begin(), scenario_names().end(), name) ==
        scenario_names().end()) {
        throw ConfigError("name must be one of default, what_if, adaptive, compare");
    }
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (required_kbps <= 0.0) throw ConfigError("required_kbps must be > 0");
    if (offered_kbps <= 0.0) throw ConfigError("offered_kbps must be > 0");
    if (traffic.lambda <= 0.0) throw ConfigError("traffic.lambda must be > 0");
    if (traffic.unit_size <= 0.0) throw ConfigError("traffic.unit_size must be > 0");
    if (traffic.length < 2) throw ConfigError("traffic.length must be >= 2");
    if (traffic.train_samples < 2 || traffic.train_samples > traffic.length) {
        throw ConfigError("traffic.train_samples must be in [2, traffic.length]");
    }
    if (predictor.hidden < 1) throw ConfigError("predictor.hidden must be >= 1");
    if (predictor.window < 1) throw ConfigError("predictor.window must be >= 1");
    if (predictor.delta_kbps < 0.0) throw ConfigError("predictor.delta_kbps must be >= 0");
    if (predictor.epochs < 1) throw ConfigError("predictor.epochs must be >= 1");
    if (predictor.batch_size < 1) throw ConfigError("predictor.batch_size must be >= 1");
    if (predictor.learning_rate <= 0.0) throw ConfigError("predictor.learning_rate must be > 0");
    if (predictor.memory_capacity < 1) throw ConfigError("predictor.memory_capacity must be >= 1");
    if (predictor.train_model && traffic.train_samples <= predictor.window) {
        throw ConfigError("traffic.train_samples must exceed predictor.window");
    }
    if (agent.episodes < 1) throw ConfigError("agent.episodes must be >= 1");
    if (agent.alpha <= 0.0 || agent.alpha > 1.0) throw ConfigError("agent.alpha must be in (0,1]");
    if (agent.gamma < 0.0 || agent.gamma >= 1.0) throw ConfigError("agent.gamma must be in [0,1)");
    if (agent.epsilon_start < 0.0 || agent.epsilon_start > 1.0) {
        throw ConfigError("agent.epsilon_start must be in [0,1]");
    }
    if (agent.epsilon_end < 0.0 || agent.epsilon_end > 1.0) {
        throw ConfigError("agent.epsilon_end must be in [0,1]");
    }
    if (twin.whatif_episodes < 1) throw ConfigError("twin.whatif_episodes must be >= 1");
    if (twin.whatif_steps < 1) throw ConfigError("twin.whatif_steps must be >= 1");
    if (states.levels.empty()) throw ConfigError("states.levels must not be empty");
    for (std::size_t i = 0; i < states.levels.size(); ++i) {
        if (states.levels[i] <= 0.0) throw ConfigError("states.levels must be > 0");
        if (i > 0 && states.levels[i] <= states.levels[i - 1]) {
            throw ConfigError("states.levels must be strictly increasing");
        }
    }
    if (states.step <= 0.0) throw ConfigError("states.step must be > 0");
    if (actions.min <= 0.0) throw ConfigError("actions.min must be > 0");
    if (actions.step <= 0.0) throw ConfigError("actions.step must be > 0");
    if (actions.max < actions.min) throw ConfigError("actions.max must be >= actions.min");
    if (overshoot_penalty < 1.0) throw ConfigError("overshoot_penalty must be >= 1");
    if (congestion_beta < 0.0 || congestion_beta >= 1.0) {
        throw ConfigError("congestion_beta must be in [0,1)");
    }
    if (paths.bundle.empty() || paths.qtable.empty() || paths.db.empty()) {
        throw ConfigError("paths entries must not be empty");
    }
    if (schedule) {
        try {
            schedule->validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("schedule: ") + e.what());
        }
        if (schedule->total_steps < predictor.window) {
            throw ConfigError("schedule.total_steps must be >= predictor.window");
        }
    }
}

// ---------------------------------------------------------------------------
// Built-in capacity schedules.
//
// All four walk the eight known levels first, in an order that keeps the big
// jumps at the ends of the cycle.  The exact-tracking scenarios then append
// window-length segments so that no plateau is long enough to make its own
// history ambiguous where the checks look.

namespace detail {

inline netsim::VariationSchedule blocks(const std::vector<std::pair<double, int>>& parts) {
    netsim::VariationSchedule s;
    int at = 0;
    for (const auto& [kbps, steps] : parts) {
        s.segments.push_back({at, kbps});
        at += steps;
    }
    s.total_steps = at;
    s.validate();
    return s;
}

inline const std::vector<std::pair<double, int>>& known_blocks() {
    static const std::vector<std::pair<double, int>> parts = {
        {500.0, 10}, {150.0, 10}, {200.0, 10}, {250.0, 10},
        {300.0, 10}, {350.0, 10}, {400.0, 10}, {450.0, 10},
    };
    return parts;
}

} // namespace detail

inline netsim::VariationSchedule default_schedule(const std::string& name) {
    using parts_t = std::vector<std::pair<double, int>>;
    if (name == "default") return detail::blocks(detail::known_blocks());
    if (name == "what_if") {
        parts_t parts = detail::known_blocks();
        parts.push_back({480.0, 9});
        parts.push_back({100.0, 9});
        return detail::blocks(parts);
    }
    if (name == "adaptive") {
        parts_t parts = detail::known_blocks();
        parts.push_back({480.0, 9});
        parts.push_back({50.0, 9});
        parts.push_back({430.0, 9});
        parts.push_back({50.0, 9});
        parts.push_back({500.0, 10});
        return detail::blocks(parts);
    }
    if (name == "compare") {
        const parts_t parts = {
            {500.0, 9}, {420.0, 9}, {360.0, 9}, {300.0, 9}, {440.0, 9}, {380.0, 9},
            {290.0, 9}, {460.0, 9}, {350.0, 9}, {295.0, 9}, {430.0, 9}, {390.0, 9},
            {285.0, 9}, {410.0, 9}, {450.0, 9}, {470.0, 9}, {480.0, 9}, {490.0, 9},
        };
        return detail::blocks(parts);
    }
    throw ConfigError("name must be one of default, what_if, adaptive, compare");
}

// ---------------------------------------------------------------------------
// Config JSON: one document with per-module sections.  Absent fields keep
// their defaults; unknown fields are rejected so typos cannot silently turn
// into defaults.

namespace detail {

using nlohmann::json;

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + " must be a number");
    return v.get<double>();
}

inline long long as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError(path + " must be an integer");
    }
    return v.get<long long>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path + " must be a boolean");
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path + " must be a string");
    return v.get<std::string>();
}

inline void require_object(const json& v, const std::string& path) {
    if (!v.is_object()) throw ConfigError(path + " must be an object");
}

inline void parse_traffic(const json& j, TrafficSection& s) {
    require_object(j, "traffic");
    for (const auto& [k, v] : j.items()) {
        if (k == "lambda") s.lambda = as_number(v, "traffic.lambda");
        else if (k == "unit_size") s.unit_size = as_number(v, "traffic.unit_size");
        else if (k == "length") s.length = static_cast<int>(as_integer(v, "traffic.length"));
        else if (k == "train_samples") s.train_samples = static_cast<int>(as_integer(v, "traffic.train_samples"));
        else throw ConfigError("unknown config field: traffic." + k);
    }
}

inline void parse_predictor(const json& j, PredictorSection& s) {
    require_object(j, "predictor");
    for (const auto& [k, v] : j.items()) {
        if (k == "hidden") s.hidden = static_cast<int>(as_integer(v, "predictor.hidden"));
        else if (k == "window") s.window = static_cast<int>(as_integer(v, "predictor.window"));
        else if (k == "delta_kbps") s.delta_kbps = as_number(v, "predictor.delta_kbps");
        else if (k == "train_model") s.train_model = as_bool(v, "predictor.train_model");
        else if (k == "epochs") s.epochs = static_cast<int>(as_integer(v, "predictor.epochs"));
        else if (k == "batch_size") s.batch_size = static_cast<int>(as_integer(v, "predictor.batch_size"));
        else if (k == "learning_rate") s.learning_rate = as_number(v, "predictor.learning_rate");
        else if (k == "memory_capacity") s.memory_capacity = static_cast<int>(as_integer(v, "predictor.memory_capacity"));
        else throw ConfigError("unknown config field: predictor." + k);
    }
}

inline void parse_agent(const json& j, AgentSection& s) {
    require_object(j, "agent");
    for (const auto& [k, v] : j.items()) {
        if (k == "episodes") s.episodes = static_cast<int>(as_integer(v, "agent.episodes"));
        else if (k == "alpha") s.alpha = as_number(v, "agent.alpha");
        else if (k == "gamma") s.gamma = as_number(v, "agent.gamma");
        else if (k == "epsilon_start") s.epsilon_start = as_number(v, "agent.epsilon_start");
        else if (k == "epsilon_end") s.epsilon_end = as_number(v, "agent.epsilon_end");
        else throw ConfigError("unknown config field: agent." + k);
    }
}

inline void parse_twin(const json& j, TwinSection& s) {
    require_object(j, "twin");
    for (const auto& [k, v] : j.items()) {
        if (k == "whatif_episodes") s.whatif_episodes = static_cast<int>(as_integer(v, "twin.whatif_episodes"));
        else if (k == "whatif_steps") s.whatif_steps = static_cast<int>(as_integer(v, "twin.whatif_steps"));
        else throw ConfigError("unknown config field: twin." + k);
    }
}

inline void parse_states(const json& j, StatesSection& s) {
    require_object(j, "states");
    for (const auto& [k, v] : j.items()) {
        if (k == "levels") {
            if (!v.is_array() || v.empty()) throw ConfigError("states.levels must be a non-empty array");
            s.levels.clear();
            for (const auto& e : v) s.levels.push_back(as_number(e, "states.levels"));
        } else if (k == "step") {
            s.step = as_number(v, "states.step");
        } else {
            throw ConfigError("unknown config field: states." + k);
        }
    }
}

inline void parse_actions(const json& j, ActionRange& s) {
    require_object(j, "actions");
    for (const auto& [k, v] : j.items()) {
        if (k == "min") s.min = as_number(v, "actions.min");
        else if (k == "max") s.max = as_number(v, "actions.max");
        else if (k == "step") s.step = as_number(v, "actions.step");
        else throw ConfigError("unknown config field: actions." + k);
    }
}

inline void parse_paths(const json& j, PathsSection& s) {
    require_object(j, "paths");
    for (const auto& [k, v] : j.items()) {
        if (k == "bundle") s.bundle = as_string(v, "paths.bundle");
        else if (k == "qtable") s.qtable = as_string(v, "paths.qtable");
        else if (k == "db") s.db = as_string(v, "paths.db");
        else throw ConfigError("unknown config field: paths." + k);
    }
}

} // namespace detail

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["charts"] = c.charts;
    j["required_kbps"] = c.required_kbps;
    j["offered_kbps"] = c.offered_kbps;
    j["traffic"] = {{"lambda", c.traffic.lambda},
                    {"unit_size", c.traffic.unit_size},
                    {"length", c.traffic.length},
                    {"train_samples", c.traffic.train_samples}};
    j["predictor"] = {{"hidden", c.predictor.hidden},
                      {"window", c.predictor.window},
                      {"delta_kbps", c.predictor.delta_kbps},
                      {"train_model", c.predictor.train_model},
                      {"epochs", c.predictor.epochs},
                      {"batch_size", c.predictor.batch_size},
                      {"learning_rate", c.predictor.learning_rate},
                      {"memory_capacity", c.predictor.memory_capacity}};
    j["agent"] = {{"episodes", c.agent.episodes},
                  {"alpha", c.agent.alpha},
                  {"gamma", c.agent.gamma},
                  {"epsilon_start", c.agent.epsilon_start},
                  {"epsilon_end", c.agent.epsilon_end}};
    j["twin"] = {{"whatif_episodes", c.twin.whatif_episodes},
                 {"whatif_steps", c.twin.whatif_steps}};
    j["states"] = {{"levels", c.states.levels}, {"step", c.states.step}};
    j["actions"] = {{"min", c.actions.min}, {"max", c.actions.max}, {"step", c.actions.step}};
    j["overshoot_penalty"] = c.overshoot_penalty;
    j["congestion_beta"] = c.congestion_beta;
    j["schedule"] = c.schedule ? netsim::schedule_to_json(*c.schedule) : nlohmann::json(nullptr);
    j["paths"] = {{"bundle", c.paths.bundle}, {"qtable", c.paths.qtable}, {"db", c.paths.db}};
    return j;
}

inline ScenarioConfig config_from_json(const nlohmann::json& root) {
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    ScenarioConfig c;
    for (const auto& [k, v] : root.items()) {
        if (k == "name") c.name = detail::as_string(v, "name");
        else if (k == "seed") {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                throw ConfigError("seed must be a non-negative integer");
            }
            c.seed = v.get<std::uint64_t>();
        }
        else if (k == "out_dir") c.out_dir = detail::as_string(v, "out_dir");
        else if (k == "charts") c.charts = detail::as_bool(v, "charts");
        else if (k == "required_kbps") c.required_kbps = detail::as_number(v, "required_kbps");
        else if (k == "offered_kbps") c.offered_kbps = detail::as_number(v, "offered_kbps");
        else if (k == "traffic") detail::parse_traffic(v, c.traffic);
        else if (k == "predictor") detail::parse_predictor(v, c.predictor);
        else if (k == "agent") detail::parse_agent(v, c.agent);
        else if (k == "twin") detail::parse_twin(v, c.twin);
        else if (k == "states") detail::parse_states(v, c.states);
        else if (k == "actions") detail::parse_actions(v, c.actions);
        else if (k == "overshoot_penalty") c.overshoot_penalty = detail::as_number(v, "overshoot_penalty");
        else if (k == "congestion_beta") c.congestion_beta = detail::as_number(v, "congestion_beta");
        else if (k == "schedule") {
            if (v.is_null()) {
                c.schedule.reset();
            } else {
                try {
                    c.schedule = netsim::schedule_from_json(v);
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("schedule: ") + e.what());
                }
            }
        }
        else if (k == "paths") detail::parse_paths(v, c.paths);
        else throw ConfigError("unknown config field: " + k);
    }
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config file not found: " + path);
    }
    nlohmann::json j;
    try {
        j = read_json_file(path);
    } catch (const Error& e) {
        throw ConfigError(std::string("config file ") + path + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Scenario pipeline.

struct ScenarioSummary {
    std::string scenario;
    int steps = 0;
    double mean_achieved_kbps = 0.0;
    double mean_abs_error_kbps = 0.0;
    double post_warmup_mean_abs_error_kbps = 0.0;
    int warmup_steps = kWarmupSteps;
};

struct ScenarioReport {
    ScenarioConfig config;
    netsim::VariationSchedule schedule;
    std::vector<twin::ClosedLoopRecord> records;
    ScenarioSummary summary;
    predictor::PredictorBundle bundle;
    agent::StateSpace states;
    agent::ActionSpace actions;
    agent::QTable qtable;
    twin::ActionDatabase db;
    std::vector<double> loss_history;  // per-epoch training MSE, empty when not trained
};

inline ScenarioSummary summarize_records(const std::string& scenario,
                                         const std::vector<twin::ClosedLoopRecord>& records,
                                         int warmup_steps = kWarmupSteps) {
    if (records.empty()) throw InsufficientData("no records to summarize");
    ScenarioSummary s;
    s.scenario = scenario;
    s.steps = static_cast<int>(records.size());
    s.warmup_steps = warmup_steps;
    double post_sum = 0.0;
    int post_n = 0;
    for (const auto& r : records) {
        const double err = std::abs(r.achieved - r.capacity);
        s.mean_achieved_kbps += r.achieved;
        s.mean_abs_error_kbps += err;
        if (r.step >= warmup_steps) {
            post_sum += err;
            ++post_n;
        }
    }
    s.mean_achieved_kbps /= s.steps;
    s.mean_abs_error_kbps /= s.steps;
    s.post_warmup_mean_abs_error_kbps = post_n > 0 ? post_sum / post_n : 0.0;
    return s;
}

namespace detail {

inline agent::StateSpace to_state_space(const StatesSection& s) {
    return agent::StateSpace{s.levels, s.step};
}

inline bool is_known_level(const agent::StateSpace& states, double kbps) {
    double best = 1e300;
    for (double level : states.levels) best = std::min(best, std::abs(kbps - level));
    return best <= states.step / 2.0;
}

inline agent::QTable train_policy(const std::vector<double>& capacities,
                                  const agent::StateSpace& states,
                                  const agent::ActionSpace& actions,
                                  const agent::RewardParams& rp, const ScenarioConfig& cfg) {
    agent::AgentTrainParams tp;
    tp.episodes = cfg.agent.episodes;
    tp.alpha = cfg.agent.alpha;
    tp.gamma = cfg.agent.gamma;
    tp.epsilon_start = cfg.agent.epsilon_start;
    tp.epsilon_end = cfg.agent.epsilon_end;
    tp.seed = cfg.seed + 2;
    return agent::train_agent(capacities, states, actions, rp, tp);
}

// Seeds the database with the trained policy so the run's resolution path is
// inspectable before the loop ever executes.
inline void seed_known_entries(twin::TwinState& tw) {
    for (std::size_t i = 0; i < tw.states.levels.size(); ++i) {
        twin::DbEntry e;
        e.state_kbps = tw.states.levels[i];
        e.action_kbps = tw.actions.rates[agent::greedy_action(tw.qtable, i)];
        e.origin = twin::ActionOrigin::known;
        e.occurrences = 1;
        tw.db.entries[twin::level_key(e.state_kbps)] = e;
    }
}

// The run begins with the schedule tail as its history, so the windows that
// wrap from the tail into the head are taught ahead of time.  The pure tail
// window (k = 0) is left alone: it would overwrite the in-trace value of the
// final plateau with the head capacity and poison the last in-run step.
inline void sync_cyclic(twin::TwinState& tw, const std::vector<double>& trace) {
    twin::sync(tw, trace);
    const auto L = static_cast<std::size_t>(tw.bundle.model.L);
    const std::size_t n = trace.size();
    std::vector<double> window(L);
    for (std::size_t k = 1; k < L; ++k) {
        for (std::size_t i = 0; i < L; ++i) {
            window[i] = traffic::normalize_value(trace[(n - L + k + i) % n], tw.bundle.scaler);
        }
        const double target = traffic::normalize_value(trace[k], tw.bundle.scaler);
        const auto pred = predictor::predict_with_memory(tw.bundle, window);
        predictor::memory_update(tw.bundle, window, pred.value, target);
    }
}

} // namespace detail

// Everything the closed loop consumes that is produced by training: the
// predictor bundle (scaler fit over the full demand series) and the policy
// table over the known levels.  `force_model` trains the sequence model even
// when the config would skip it, for the standalone training entry point.
struct TrainedArtifacts {
    predictor::PredictorBundle bundle;
    agent::StateSpace states;
    agent::ActionSpace actions;
    agent::QTable qtable;
    std::vector<double> loss_history;  // per-epoch training MSE, empty when not trained
};

inline TrainedArtifacts train_artifacts(const ScenarioConfig& cfg, bool force_model = false) {
    cfg.validate();

    Rng series_rng(cfg.seed);
    traffic::TrafficParams tp;
    tp.lambda = cfg.traffic.lambda;
    tp.unit_size = cfg.traffic.unit_size;
    tp.length = cfg.traffic.length;
    const auto series = traffic::generate_series(tp, series_rng);
    const auto scaler = traffic::fit_scaler(series);

    predictor::BiLstmModel model;
    std::vector<double> loss_history;
    if (force_model || cfg.predictor.train_model) {
        model = predictor::BiLstmModel::init(cfg.predictor.hidden, cfg.predictor.window,
                                             cfg.seed + 1);
        traffic::BandwidthSeries train_part;
        train_part.values.assign(series.values.begin(),
                                 series.values.begin() + cfg.traffic.train_samples);
        const auto windows =
            traffic::windowize(traffic::normalize_series(train_part, scaler), cfg.predictor.window);
        predictor::TrainConfig tc;
        tc.epochs = cfg.predictor.epochs;
        tc.batch_size = cfg.predictor.batch_size;
        tc.learning_rate = cfg.predictor.learning_rate;
        loss_history = predictor::train(model, windows, tc);
    } else {
        model.hidden = cfg.predictor.hidden;
        model.L = cfg.predictor.window;
        model.params.assign(predictor::BiLstmModel::total_params(cfg.predictor.hidden), 0.0);
    }

    TrainedArtifacts art;
    art.bundle.model = std::move(model);
    art.bundle.scaler = scaler;
    art.bundle.memory =
        predictor::MemoryModule(static_cast<std::size_t>(cfg.predictor.memory_capacity));
    art.bundle.delta_kbps = cfg.predictor.delta_kbps;
    art.states = detail::to_state_space(cfg.states);
    art.actions = agent::ActionSpace::make_range(cfg.actions.min, cfg.actions.max,
                                                 cfg.actions.step);
    agent::RewardParams rp;
    rp.overshoot_penalty = cfg.overshoot_penalty;

    // The policy is trained on the known levels; a custom schedule stands in
    // for them when one is supplied.
    const auto known_trace =
        netsim::to_capacity_vector(cfg.schedule ? *cfg.schedule : default_schedule("default"));
    art.qtable = detail::train_policy(known_trace, art.states, art.actions, rp, cfg);
    art.loss_history = std::move(loss_history);
    return art;
}

inline ScenarioReport run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    if (cfg.name == "compare") {
        throw ConfigError("name: compare runs through compare_techniques");
    }
    const netsim::VariationSchedule schedule =
        cfg.schedule ? *cfg.schedule : default_schedule(cfg.name);
    const auto trace = netsim::to_capacity_vector(schedule);
    if (trace.size() < static_cast<std::size_t>(cfg.predictor.window)) {
        throw ConfigError("schedule.total_steps must be >= predictor.window");
    }

    auto art = train_artifacts(cfg);
    agent::RewardParams rp;
    rp.overshoot_penalty = cfg.overshoot_penalty;
    netsim::LinkModel link;
    link.congestion_beta = cfg.congestion_beta;
    twin::TwinConfig tc;
    tc.whatif_episodes = cfg.twin.whatif_episodes;
    tc.whatif_steps = cfg.twin.whatif_steps;

    auto tw = twin::make_twin(std::move(art.bundle), std::move(art.states), std::move(art.actions),
                              std::move(art.qtable), rp, link, tc);
    detail::seed_known_entries(tw);

    // The what-if scenario evaluates upcoming unknown levels before the run.
    if (cfg.name == "what_if") {
        std::vector<double> pre;
        for (const auto& seg : schedule.segments) {
            if (!detail::is_known_level(tw.states, seg.kbps) &&
                std::find(pre.begin(), pre.end(), seg.kbps) == pre.end()) {
                pre.push_back(seg.kbps);
            }
        }
        for (double kbps : pre) twin::what_if(tw, kbps);
    }

    detail::sync_cyclic(tw, trace);

    ScenarioReport rep;
    rep.records = twin::closed_loop_run(tw, schedule, cfg.offered_kbps);
    rep.summary = summarize_records(cfg.name, rep.records);
    rep.config = cfg;
    rep.schedule = schedule;
    rep.bundle = std::move(tw.bundle);
    rep.states = std::move(tw.states);
    rep.actions = std::move(tw.actions);
    rep.qtable = std::move(tw.qtable);
    rep.db = std::move(tw.db);
    rep.loss_history = std::move(art.loss_history);
    return rep;
}

// ---------------------------------------------------------------------------
// Technique comparison.  Five management stages share one link and one
// requirement; each one reports its mean achieved rate over the schedule.
//
// The unshaped stages model an unpaced sender whose bursts straddle the
// requirement; the shaped stages pace the sender to the lower of requirement
// and shaper rate.  Stage five never trains the sequence model: after a full
// synchronization pass its memory alone pins every prediction.

struct TechniqueResult {
    std::string name;
    double mean_kbps = 0.0;
};

struct CompareReport {
    double required_kbps = 0.0;
    netsim::VariationSchedule schedule;
    std::vector<TechniqueResult> techniques;
};

namespace detail {

inline std::vector<double> alternating_demand(double required_kbps, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = (i % 2 == 0) ? required_kbps - kDemandSwingKbps : required_kbps + kDemandSwingKbps;
    }
    return v;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace detail

inline CompareReport compare_techniques(const ScenarioConfig& cfg) {
    cfg.validate();
    const netsim::VariationSchedule schedule =
        cfg.schedule ? *cfg.schedule : default_schedule("compare");
    const auto caps = netsim::to_capacity_vector(schedule);
    if (caps.size() < static_cast<std::size_t>(cfg.predictor.window)) {
        throw ConfigError("schedule.total_steps must be >= predictor.window");
    }
    const std::size_t n = caps.size();
    const double req = cfg.required_kbps;
    netsim::LinkModel link;
    link.congestion_beta = cfg.congestion_beta;
    const auto demand = detail::alternating_demand(req, n);

    // Stage 1: fixed capacity, no shaping.  The lone capacity is set above
    // any burst so the demand always fits.
    std::vector<double> t1(n);
    {
        const double cap = req + kDemandSwingKbps + 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            t1[i] = netsim::step(demand[i], {}, cap, link).achieved;
        }
    }

    // Stage 2: capacity varies, still unshaped.
    std::vector<double> t2(n);
    for (std::size_t i = 0; i < n; ++i) {
        t2[i] = netsim::step(demand[i], {}, caps[i], link).achieved;
    }

    // Stage 3: static shaper at the requirement.
    std::vector<double> t3(n);
    {
        netsim::ShaperConfig shaper;
        shaper.rate = req;
        for (std::size_t i = 0; i < n; ++i) {
            t3[i] = netsim::step(req, shaper, caps[i], link).achieved;
        }
    }

    const auto states = detail::to_state_space(cfg.states);
    const auto actions = agent::ActionSpace::make_range(cfg.actions.min, cfg.actions.max,
                                                        cfg.actions.step);
    agent::RewardParams rp;
    rp.overshoot_penalty = cfg.overshoot_penalty;
    const auto known_trace = netsim::to_capacity_vector(default_schedule("default"));
    const auto qtable = detail::train_policy(known_trace, states, actions, rp, cfg);

    // Stage 4: the policy reacts to the previous step's measured capacity.
    // Readings outside the known levels fall back to the static rate.
    std::vector<double> t4(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rate = req;
        if (i > 0 && detail::is_known_level(states, caps[i - 1])) {
            const auto s = agent::quantize_state(caps[i - 1], states);
            rate = actions.rates[agent::greedy_action(qtable, s)];
        }
        netsim::ShaperConfig shaper;
        shaper.rate = rate;
        t4[i] = netsim::step(std::min(req, rate), shaper, caps[i], link).achieved;
    }

    // Stage 5: the shaper follows the twin's closed loop.
    std::vector<double> t5(n);
    {
        predictor::PredictorBundle bundle;
        bundle.model.hidden = cfg.predictor.hidden;
        bundle.model.L = cfg.predictor.window;
        bundle.model.params.assign(predictor::BiLstmModel::total_params(cfg.predictor.hidden), 0.0);
        traffic::BandwidthSeries cap_series;
        cap_series.values = caps;
        bundle.scaler = traffic::fit_scaler(cap_series);
        bundle.memory =
            predictor::MemoryModule(static_cast<std::size_t>(cfg.predictor.memory_capacity));
        bundle.delta_kbps = cfg.predictor.delta_kbps;
        netsim::LinkModel twlink = link;
        twin::TwinConfig tc;
        tc.whatif_episodes = cfg.twin.whatif_episodes;
        tc.whatif_steps = cfg.twin.whatif_steps;
        auto tw = twin::make_twin(std::move(bundle), states, actions, qtable, rp, twlink, tc);
        detail::seed_known_entries(tw);
        detail::sync_cyclic(tw, caps);
        const auto records = twin::closed_loop_run(tw, schedule, req);
        for (std::size_t i = 0; i < n; ++i) t5[i] = records[i].achieved;
    }

    CompareReport rep;
    rep.required_kbps = req;
    rep.schedule = schedule;
    rep.techniques = {{"no_variation", detail::mean(t1)},
                      {"variation", detail::mean(t2)},
                      {"variation_ts", detail::mean(t3)},
                      {"variation_ts_ztn", detail::mean(t4)},
                      {"variation_ts_ztn_dt", detail::mean(t5)}};
    return rep;
}

// ---------------------------------------------------------------------------
// Report emission.

inline nlohmann::json summary_to_json(const ScenarioSummary& s) {
    nlohmann::json j;
    j["scenario"] = s.scenario;
    j["steps"] = s.steps;
    j["mean_achieved_kbps"] = s.mean_achieved_kbps;
    j["mean_abs_error_kbps"] = s.mean_abs_error_kbps;
    j["post_warmup_mean_abs_error_kbps"] = s.post_warmup_mean_abs_error_kbps;
    j["warmup_steps"] = s.warmup_steps;
    return j;
}

inline std::string compare_to_csv(const CompareReport& rep) {
    std::string out = "technique,mean_kbps\n";
    for (const auto& t : rep.techniques) {
        out += t.name + "," + format_double(t.mean_kbps) + "\n";
    }
    return out;
}

inline CompareReport compare_from_csv(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines.front() != "technique,mean_kbps") {
        throw IoError("bad comparison header");
    }
    CompareReport rep;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 2) throw IoError("bad comparison row");
        rep.techniques.push_back({cells[0], parse_double(cells[1])});
    }
    return rep;
}

// Writes every scenario artifact under the configured directory.  Refuses an
// empty run before touching the filesystem so a failed run cannot leave a
// half-written report behind.
inline void emit_scenario_report(const ScenarioReport& rep, std::ostream& text) {
    if (rep.records.empty()) throw StateError("refusing to emit an empty report");
    namespace fs = std::filesystem;
    const fs::path dir(rep.config.out_dir);
    fs::create_directories(dir);
    const std::string& name = rep.summary.scenario;

    write_text_file((dir / (name + "_records.csv")).string(), twin::records_to_csv(rep.records));
    write_json_file(summary_to_json(rep.summary), (dir / (name + "_summary.json")).string());
    predictor::save_bundle(rep.bundle, (dir / rep.config.paths.bundle).string());
    agent::save_qtable((dir / rep.config.paths.qtable).string(), rep.states, rep.actions,
                       rep.qtable);
    twin::save_db(rep.db, (dir / rep.config.paths.db).string());
    if (!rep.loss_history.empty()) {
        std::string csv = "epoch,mse\n";
        for (std::size_t i = 0; i < rep.loss_history.size(); ++i) {
            csv += format_int(static_cast<long long>(i + 1)) + "," +
                   format_double(rep.loss_history[i]) + "\n";
        }
        write_text_file((dir / "training_loss.csv").string(), csv);
    }
    if (rep.config.charts) {
        std::vector<svg::LineSeries> series(3);
        series[0] = {"capacity", "#888888", {}};
        series[1] = {"achieved", "#2a7f2a", {}};
        series[2] = {"predicted", "#c04040", {}};
        for (const auto& r : rep.records) {
            series[0].values.push_back(r.capacity);
            series[1].values.push_back(r.achieved);
            series[2].values.push_back(r.predicted);
        }
        write_text_file((dir / (name + "_chart.svg")).string(),
                        svg::line_chart("closed loop: " + name, "Kbps", series));
    }

    text << "scenario                " << name << "\n";
    text << "steps                   " << rep.summary.steps << "\n";
    text << "mean achieved (Kbps)    " << format_double(rep.summary.mean_achieved_kbps) << "\n";
    text << "mean |err| (Kbps)       " << format_double(rep.summary.mean_abs_error_kbps) << "\n";
    text << "post-warmup |err|       "
         << format_double(rep.summary.post_warmup_mean_abs_error_kbps) << "\n";
}

inline void emit_compare_report(const CompareReport& rep, const ScenarioConfig& cfg,
                                std::ostream& text) {
    if (rep.techniques.empty()) throw StateError("refusing to emit an empty report");
    namespace fs = std::filesystem;
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    write_text_file((dir / "compare.csv").string(), compare_to_csv(rep));
    nlohmann::json j;
    j["required_kbps"] = rep.required_kbps;
    j["techniques"] = nlohmann::json::array();
    for (const auto& t : rep.techniques) {
        j["techniques"].push_back({{"name", t.name}, {"mean_kbps", t.mean_kbps}});
    }
    write_json_file(j, (dir / "compare_summary.json").string());
    if (cfg.charts) {
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& t : rep.techniques) {
            labels.push_back(t.name);
            values.push_back(t.mean_kbps);
        }
        write_text_file((dir / "compare_chart.svg").string(),
                        svg::bar_chart("mean achieved rate by technique", "Kbps", labels, values));
    }

    text << "technique             mean Kbps\n";
    for (const auto& t : rep.techniques) {
        std::string row = t.name;
        row.resize(22, ' ');
        text << row << format_double(t.mean_kbps) << "\n";
    }
}

} // namespace ztwin::harness
