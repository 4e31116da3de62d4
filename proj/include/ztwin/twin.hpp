#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ztwin/agent.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/json_io.hpp"
#include "ztwin/netsim.hpp"
#include "ztwin/num.hpp"
#include "ztwin/predictor.hpp"

namespace ztwin::twin {

enum class ActionOrigin { known, what_if, adaptive };
enum class Provenance { optimal, what_if, suboptimal };

inline std::string origin_name(ActionOrigin o) {
    switch (o) {
        case ActionOrigin::known: return "known";
        case ActionOrigin::what_if: return "what_if";
        default: return "adaptive";
    }
}

inline ActionOrigin origin_from_name(const std::string& s) {
    if (s == "known") return ActionOrigin::known;
    if (s == "what_if") return ActionOrigin::what_if;
    if (s == "adaptive") return ActionOrigin::adaptive;
    throw IoError("unknown action origin: " + s);
}

inline std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::optimal: return "optimal";
        case Provenance::what_if: return "what_if";
        default: return "suboptimal";
    }
}

inline Provenance provenance_from_name(const std::string& s) {
    if (s == "optimal") return Provenance::optimal;
    if (s == "what_if") return Provenance::what_if;
    if (s == "suboptimal") return Provenance::suboptimal;
    throw IoError("unknown provenance: " + s);
}

struct DbEntry {
    double state_kbps = 0.0;
    double action_kbps = 0.0;
    ActionOrigin origin = ActionOrigin::known;
    long occurrences = 1;
};

// State levels are keyed at milli-Kbps resolution so float noise cannot
// split a level into two entries.
inline long long level_key(double kbps) { return std::llround(kbps * 1000.0); }

struct ActionDatabase {
    std::map<long long, DbEntry> entries;

    const DbEntry* find(double state_kbps) const {
        auto it = entries.find(level_key(state_kbps));
        return it == entries.end() ? nullptr : &it->second;
    }
};

struct ClosedLoopRecord {
    int step = 0;
    double capacity = 0.0;
    double predicted = 0.0;  // Kbps
    double action = 0.0;     // shaper rate, Kbps
    double achieved = 0.0;
    Provenance provenance = Provenance::optimal;
};

struct TwinConfig {
    int whatif_episodes = 200;
    int whatif_steps = 50;
    std::uint64_t whatif_seed = 1000003;  // base; offset per level keeps runs independent

    void validate() const {
        if (whatif_episodes < 1) throw ParameterError("twin.whatif_episodes must be >= 1");
        if (whatif_steps < 1) throw ParameterError("twin.whatif_steps must be >= 1");
    }
};

struct TwinState {
    predictor::PredictorBundle bundle;
    agent::StateSpace states;
    agent::ActionSpace actions;
    agent::QTable qtable;
    agent::RewardParams reward_params;
    netsim::LinkModel link;
    ActionDatabase db;
    std::map<long long, long> seen_states;     // occurrence counts per level
    std::map<long long, bool> trained_levels;  // levels the Q-table was trained on
    std::vector<double> history;               // observed capacities, Kbps
    TwinConfig cfg;
};

inline TwinState make_twin(predictor::PredictorBundle bundle, agent::StateSpace states,
                           agent::ActionSpace actions, agent::QTable qtable,
                           agent::RewardParams reward_params, netsim::LinkModel link,
                           TwinConfig cfg = {}) {
    states.validate();
    actions.validate();
    reward_params.validate();
    link.validate();
    cfg.validate();
    if (qtable.values.size() != states.levels.size()) {
        throw ShapeError("Q-table rows do not match the state space");
    }
    for (const auto& row : qtable.values) {
        if (row.size() != actions.rates.size()) {
            throw ShapeError("Q-table columns do not match the action space");
        }
    }
    TwinState t;
    t.bundle = std::move(bundle);
    t.states = std::move(states);
    t.actions = std::move(actions);
    t.qtable = std::move(qtable);
    t.reward_params = reward_params;
    t.link = link;
    t.cfg = cfg;
    for (double level : t.states.levels) t.trained_levels[level_key(level)] = true;
    return t;
}

// Mirrors observed telemetry into the twin: appends to history and runs the
// correction rule over every in-window prediction so unseen behavior is
// memorized.
inline std::size_t sync(TwinState& twin, const std::vector<double>& telemetry_kbps) {
    const auto L = static_cast<std::size_t>(twin.bundle.model.L);
    if (telemetry_kbps.size() < L) throw InsufficientData("telemetry shorter than one window");
    std::size_t updates = 0;
    for (std::size_t i = 0; i + L < telemetry_kbps.size(); ++i) {
        std::vector<double> window(L);
        for (std::size_t k = 0; k < L; ++k) {
            window[k] = traffic::normalize_value(telemetry_kbps[i + k], twin.bundle.scaler);
        }
        const double target = traffic::normalize_value(telemetry_kbps[i + L], twin.bundle.scaler);
        const auto pred = predictor::predict_with_memory(twin.bundle, window);
        const std::size_t before = twin.bundle.memory.size();
        predictor::memory_update(twin.bundle, window, pred.value, target);
        if (twin.bundle.memory.size() != before) ++updates;
    }
    twin.history.insert(twin.history.end(), telemetry_kbps.begin(), telemetry_kbps.end());
    return updates;
}

// Rounds the prediction up to the action grid, then adds a two-step safety
// margin.  The first encounter of an unknown state deliberately overshoots a
// little rather than risk starving the application.
inline double suboptimal_fallback(double predicted_kbps, const agent::ActionSpace& actions) {
    if (predicted_kbps <= 0.0) throw ParameterError("predicted state must be > 0");
    std::size_t idx = actions.rates.size() - 1;
    for (std::size_t a = 0; a < actions.rates.size(); ++a) {
        if (actions.rates[a] >= predicted_kbps - 1e-9) {
            idx = a;
            break;
        }
    }
    idx = std::min(idx + 2, actions.rates.size() - 1);
    return actions.rates[idx];
}

// A predicted bandwidth within half a quantization step of a known level
// maps onto that level; anything farther is a new level snapped to the
// action grid, added to the state space with an untrained Q row.
inline double level_for_prediction(TwinState& twin, double predicted_kbps) {
    const std::size_t nearest = agent::quantize_state(predicted_kbps, twin.states);
    if (std::abs(predicted_kbps - twin.states.levels[nearest]) <= twin.states.step / 2.0) {
        return twin.states.levels[nearest];
    }
    const double grid =
        twin.actions.rates.size() > 1 ? twin.actions.rates[1] - twin.actions.rates[0] : 10.0;
    double level = std::round(predicted_kbps / grid) * grid;
    level = std::max(level, grid);
    const auto pos = std::lower_bound(twin.states.levels.begin(), twin.states.levels.end(), level);
    if (pos != twin.states.levels.end() && *pos == level) return level;  // seen earlier this run
    const auto idx = static_cast<std::size_t>(pos - twin.states.levels.begin());
    twin.states.levels.insert(pos, level);
    twin.qtable.values.insert(twin.qtable.values.begin() + static_cast<std::ptrdiff_t>(idx),
                              std::vector<double>(twin.actions.rates.size(), 0.0));
    return level;
}

// Three-way resolution: database verdicts first (what-if results keep their
// provenance), then the trained policy, and a safety fallback for states the
// twin has never simulated.
inline std::pair<double, Provenance> resolve_action(const TwinState& twin, double level_kbps) {
    if (const DbEntry* entry = twin.db.find(level_kbps)) {
        const Provenance p = entry->origin == ActionOrigin::what_if ? Provenance::what_if
                                                                    : Provenance::optimal;
        return {entry->action_kbps, p};
    }
    if (twin.trained_levels.count(level_key(level_kbps))) {
        const auto it =
            std::lower_bound(twin.states.levels.begin(), twin.states.levels.end(), level_kbps);
        const auto s = static_cast<std::size_t>(it - twin.states.levels.begin());
        return {twin.actions.rates[agent::greedy_action(twin.qtable, s)], Provenance::optimal};
    }
    return {suboptimal_fallback(level_kbps, twin.actions), Provenance::suboptimal};
}

// Simulates a hypothetical constant-capacity bandwidth state inside the
// twin, trains a cloned single-state agent on it, and merges the learned row
// and the resulting action into the database.  The physical side (schedules,
// history, records) is never touched.
inline DbEntry what_if(TwinState& twin, double state_kbps) {
    if (state_kbps <= 0.0) throw ParameterError("what-if state must be > 0");
    const long long key = level_key(state_kbps);
    auto existing = twin.db.entries.find(key);
    if (existing != twin.db.entries.end()) {
        existing->second.occurrences += 1;
        return existing->second;
    }

    agent::StateSpace one{{state_kbps}, twin.states.step};
    agent::AgentTrainParams tp;
    tp.episodes = twin.cfg.whatif_episodes;
    tp.alpha = twin.qtable.alpha;
    tp.gamma = twin.qtable.gamma;
    tp.seed = twin.cfg.whatif_seed + static_cast<std::uint64_t>(key);
    const std::vector<double> caps(static_cast<std::size_t>(twin.cfg.whatif_steps), state_kbps);
    const auto trained = agent::train_agent(caps, one, twin.actions, twin.reward_params, tp);
    const std::size_t best = agent::greedy_action(trained, 0);

    // A state beyond half a step of every known level becomes a new level,
    // mirroring loop-side detection; the simulated row then lands in the
    // live table when the state matches a level exactly.
    const std::size_t nearest = agent::quantize_state(state_kbps, twin.states);
    if (std::abs(state_kbps - twin.states.levels[nearest]) > twin.states.step / 2.0) {
        level_for_prediction(twin, state_kbps);
    }
    const auto it = std::lower_bound(twin.states.levels.begin(), twin.states.levels.end(), state_kbps);
    if (it != twin.states.levels.end() && *it == state_kbps) {
        const auto idx = static_cast<std::size_t>(it - twin.states.levels.begin());
        twin.qtable.values[idx] = trained.values[0];
    }

    DbEntry entry;
    entry.state_kbps = state_kbps;
    entry.action_kbps = twin.actions.rates[best];
    const auto seen = twin.seen_states.find(key);
    entry.origin = (seen != twin.seen_states.end() && seen->second > 0) ? ActionOrigin::adaptive
                                                                        : ActionOrigin::what_if;
    entry.occurrences = 1;
    twin.db.entries[key] = entry;
    return entry;
}

// One full closed loop over a capacity schedule: predict the next state from
// the trailing window of observed capacities, resolve an action, shape, step
// the link, then learn from the prediction error.  An action is pinned for
// the whole occurrence (maximal run of one resolved level), and a
// suboptimal first occurrence schedules a what-if that runs before the next
// step so later occurrences resolve optimally.
inline std::vector<ClosedLoopRecord> closed_loop_run(TwinState& twin,
                                                     const netsim::VariationSchedule& schedule,
                                                     double offered_kbps) {
    schedule.validate();
    const auto& model = twin.bundle.model;
    if (model.hidden < 1 || model.L < 1 ||
        model.params.size() != predictor::BiLstmModel::total_params(model.hidden)) {
        throw StateError("predictor is not trained");
    }
    const auto L = static_cast<std::size_t>(model.L);
    if (twin.history.size() < L) throw StateError("twin not synchronized: history shorter than L");

    std::vector<ClosedLoopRecord> records;
    records.reserve(static_cast<std::size_t>(schedule.total_steps));
    std::vector<double> pending_whatif;
    double occurrence_level = -1.0;
    double pinned_action = 0.0;
    Provenance pinned_prov = Provenance::optimal;

    std::vector<double> window(L);
    for (int t = 0; t < schedule.total_steps; ++t) {
        for (double level : pending_whatif) what_if(twin, level);
        pending_whatif.clear();

        for (std::size_t k = 0; k < L; ++k) {
            window[k] = traffic::normalize_value(twin.history[twin.history.size() - L + k],
                                                 twin.bundle.scaler);
        }
        const auto pred = predictor::predict_with_memory(twin.bundle, window);
        const double pred_kbps = traffic::denormalize_value(pred.value, twin.bundle.scaler);
        const double level = level_for_prediction(twin, pred_kbps);

        if (records.empty() || level != occurrence_level) {
            occurrence_level = level;
            twin.seen_states[level_key(level)] += 1;
            const auto resolved = resolve_action(twin, level);
            pinned_action = resolved.first;
            pinned_prov = resolved.second;
            if (pinned_prov == Provenance::suboptimal) pending_whatif.push_back(level);
        }

        const double cap = netsim::capacity_at(schedule, t);
        const auto res = netsim::step(offered_kbps, netsim::ShaperConfig{pinned_action}, cap, twin.link);
        predictor::memory_update(twin.bundle, window, pred.value,
                                 traffic::normalize_value(cap, twin.bundle.scaler));
        twin.history.push_back(cap);

        ClosedLoopRecord rec;
        rec.step = t;
        rec.capacity = cap;
        rec.predicted = pred_kbps;
        rec.action = pinned_action;
        rec.achieved = res.achieved;
        rec.provenance = pinned_prov;
        records.push_back(rec);
    }
    return records;
}

inline nlohmann::json db_to_json(const ActionDatabase& db) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& [key, e] : db.entries) {
        j["entries"].push_back({{"state_kbps", e.state_kbps},
                                {"action_kbps", e.action_kbps},
                                {"origin", origin_name(e.origin)},
                                {"occurrences", e.occurrences}});
    }
    return j;
}

inline ActionDatabase db_from_json(const nlohmann::json& j) {
    try {
        ActionDatabase db;
        for (const auto& e : j.at("entries")) {
            DbEntry entry;
            entry.state_kbps = e.at("state_kbps").get<double>();
            entry.action_kbps = e.at("action_kbps").get<double>();
            entry.origin = origin_from_name(e.at("origin").get<std::string>());
            entry.occurrences = e.at("occurrences").get<long>();
            if (entry.occurrences < 1) throw IoError("db entry occurrences must be >= 1");
            db.entries[level_key(entry.state_kbps)] = entry;
        }
        return db;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed action database: ") + e.what());
    }
}

inline void save_db(const ActionDatabase& db, const std::string& path) {
    write_json_file(db_to_json(db), path);
}

inline ActionDatabase load_db(const std::string& path) {
    return db_from_json(read_json_file(path));
}

inline std::string records_to_csv(const std::vector<ClosedLoopRecord>& records) {
    std::string out = "step,capacity,predicted,action,achieved,provenance\n";
    for (const auto& r : records) {
        out += format_int(r.step);
        out += ",";
        out += format_double(r.capacity);
        out += ",";
        out += format_double(r.predicted);
        out += ",";
        out += format_double(r.action);
        out += ",";
        out += format_double(r.achieved);
        out += ",";
        out += provenance_name(r.provenance);
        out += "\n";
    }
    return out;
}

inline std::vector<ClosedLoopRecord> records_from_csv(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "step,capacity,predicted,action,achieved,provenance") {
        throw IoError("closed-loop records file is missing its header");
    }
    std::vector<ClosedLoopRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 6) throw IoError("closed-loop record row must have 6 columns");
        ClosedLoopRecord r;
        r.step = static_cast<int>(parse_int(cells[0]));
        r.capacity = parse_double(cells[1]);
        r.predicted = parse_double(cells[2]);
        r.action = parse_double(cells[3]);
        r.achieved = parse_double(cells[4]);
        r.provenance = provenance_from_name(cells[5]);
        out.push_back(r);
    }
    return out;
}

} // namespace ztwin::twin
