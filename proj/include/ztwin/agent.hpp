#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ztwin/csv.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/num.hpp"
#include "ztwin/rng.hpp"

namespace ztwin::agent {

struct StateSpace {
    std::vector<double> levels;  // Kbps, strictly increasing
    double step = 50.0;          // quantization granularity, Kbps

    void validate() const {
        if (levels.empty()) throw ParameterError("state space must not be empty");
        if (step <= 0.0) throw ParameterError("state step must be > 0");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (levels[i] <= 0.0) throw ParameterError("state levels must be > 0");
            if (i > 0 && levels[i] <= levels[i - 1]) {
                throw ParameterError("state levels must be strictly increasing");
            }
        }
    }

    static StateSpace make_default() {
        return {{150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0}, 50.0};
    }
};

struct ActionSpace {
    std::vector<double> rates;  // Kbps, strictly increasing

    void validate() const {
        if (rates.empty()) throw ParameterError("action space must not be empty");
        for (std::size_t i = 0; i < rates.size(); ++i) {
            if (rates[i] <= 0.0) throw ParameterError("action rates must be > 0");
            if (i > 0 && rates[i] <= rates[i - 1]) {
                throw ParameterError("action rates must be strictly increasing");
            }
        }
    }

    static ActionSpace make_range(double lo, double hi, double step) {
        ActionSpace a;
        for (double r = lo; r <= hi + 1e-9; r += step) a.rates.push_back(r);
        a.validate();
        return a;
    }

    static ActionSpace make_default() { return make_range(10.0, 600.0, 10.0); }
};

struct RewardParams {
    double overshoot_penalty = 2.0;

    void validate() const {
        if (overshoot_penalty < 1.0) throw ParameterError("reward.overshoot_penalty must be >= 1");
    }
};

struct QTable {
    std::vector<std::vector<double>> values;  // [state][action]
    double alpha = 0.3;
    double gamma = 0.9;
    double epsilon = 0.01;

    static QTable zeros(std::size_t n_states, std::size_t n_actions) {
        QTable q;
        q.values.assign(n_states, std::vector<double>(n_actions, 0.0));
        return q;
    }

    void validate() const {
        if (values.empty() || values.front().empty()) throw ParameterError("Q-table must not be empty");
        if (alpha <= 0.0 || alpha > 1.0) throw ParameterError("q.alpha must be in (0,1]");
        if (gamma < 0.0 || gamma >= 1.0) throw ParameterError("q.gamma must be in [0,1)");
        if (epsilon < 0.0 || epsilon > 1.0) throw ParameterError("q.epsilon must be in [0,1]");
    }
};

// Nearest level, ties toward the lower one, clamped at the extremes.
inline std::size_t quantize_state(double bandwidth_kbps, const StateSpace& space) {
    std::size_t best = 0;
    double best_dist = std::abs(bandwidth_kbps - space.levels[0]);
    for (std::size_t i = 1; i < space.levels.size(); ++i) {
        const double d = std::abs(bandwidth_kbps - space.levels[i]);
        if (d < best_dist) {
            best = i;
            best_dist = d;
        }
    }
    return best;
}

// Zero at a perfect match; linear under-use cost; overshoot costs more so
// the best action never exceeds capacity.
inline double reward(double action_rate_kbps, double capacity_kbps, const RewardParams& params) {
    if (action_rate_kbps <= capacity_kbps) return -(capacity_kbps - action_rate_kbps);
    return -params.overshoot_penalty * (action_rate_kbps - capacity_kbps);
}

inline std::size_t greedy_action(const QTable& q, std::size_t s) {
    if (s >= q.values.size()) throw IndexError("state index out of range");
    const auto& row = q.values[s];
    std::size_t best = 0;
    for (std::size_t a = 1; a < row.size(); ++a) {
        if (row[a] > row[best]) best = a;
    }
    return best;
}

inline void q_update(QTable& q, std::size_t s, std::size_t a, double r, std::size_t s_next) {
    if (s >= q.values.size() || s_next >= q.values.size()) throw IndexError("state index out of range");
    if (a >= q.values[s].size()) throw IndexError("action index out of range");
    const auto& next_row = q.values[s_next];
    double best_next = next_row[0];
    for (double v : next_row) best_next = std::max(best_next, v);
    q.values[s][a] += q.alpha * (r + q.gamma * best_next - q.values[s][a]);
}

inline std::size_t select_action(const QTable& q, std::size_t s, Rng& rng, bool greedy) {
    if (s >= q.values.size()) throw IndexError("state index out of range");
    if (!greedy && uniform01(rng) < q.epsilon) {
        return uniform_int(rng, q.values[s].size());
    }
    return greedy_action(q, s);
}

struct AgentTrainParams {
    int episodes = 500;
    double alpha = 0.3;
    double gamma = 0.9;
    double epsilon_start = 1.0;
    double epsilon_end = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (episodes < 0) throw ParameterError("agent.episodes must be >= 0");
        if (alpha <= 0.0 || alpha > 1.0) throw ParameterError("agent.alpha must be in (0,1]");
        if (gamma < 0.0 || gamma >= 1.0) throw ParameterError("agent.gamma must be in [0,1)");
        if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0) {
            throw ParameterError("agent.epsilon must be in [0,1]");
        }
    }
};

// Episodic tabular Q-learning over a fixed capacity schedule.  The
// environment is exogenous: capacities do not react to actions, so each
// episode replays the schedule and epsilon decays linearly across episodes.
inline QTable train_agent(const std::vector<double>& capacities, const StateSpace& states,
                          const ActionSpace& actions, const RewardParams& rp,
                          const AgentTrainParams& tp) {
    states.validate();
    actions.validate();
    rp.validate();
    tp.validate();
    if (capacities.empty()) throw InsufficientData("capacity schedule must not be empty");

    QTable q = QTable::zeros(states.levels.size(), actions.rates.size());
    q.alpha = tp.alpha;
    q.gamma = tp.gamma;
    Rng rng(tp.seed);
    const std::size_t n = capacities.size();
    for (int e = 0; e < tp.episodes; ++e) {
        const double frac =
            (tp.episodes > 1) ? static_cast<double>(e) / static_cast<double>(tp.episodes - 1) : 0.0;
        q.epsilon = tp.epsilon_start + (tp.epsilon_end - tp.epsilon_start) * frac;
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t s = quantize_state(capacities[t], states);
            const std::size_t a = select_action(q, s, rng, false);
            const double r = reward(actions.rates[a], capacities[t], rp);
            const std::size_t s_next = quantize_state(capacities[(t + 1) % n], states);
            q_update(q, s, a, r, s_next);
        }
    }
    q.epsilon = tp.epsilon_end;
    return q;
}

// Ground truth for this environment: rewards depend only on the current
// state, so the optimal action is the per-state immediate-reward argmax.
inline std::vector<std::size_t> oracle_policy(const StateSpace& states, const ActionSpace& actions,
                                              const RewardParams& rp) {
    std::vector<std::size_t> policy;
    policy.reserve(states.levels.size());
    for (double level : states.levels) {
        std::size_t best = 0;
        double best_r = reward(actions.rates[0], level, rp);
        for (std::size_t a = 1; a < actions.rates.size(); ++a) {
            const double r = reward(actions.rates[a], level, rp);
            if (r > best_r) {
                best = a;
                best_r = r;
            }
        }
        policy.push_back(best);
    }
    return policy;
}

// CSV layout: one row naming state levels, one naming action rates, then
// the N x M value matrix.
inline std::string qtable_to_csv(const StateSpace& states, const ActionSpace& actions,
                                 const QTable& q) {
    if (q.values.size() != states.levels.size()) throw ShapeError("Q rows != state count");
    std::string out = "states";
    for (double s : states.levels) out += "," + format_double(s);
    out += "\nactions";
    for (double a : actions.rates) out += "," + format_double(a);
    out += "\n";
    for (const auto& row : q.values) {
        if (row.size() != actions.rates.size()) throw ShapeError("Q columns != action count");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out += ",";
            out += format_double(row[i]);
        }
        out += "\n";
    }
    return out;
}

struct QTableFile {
    StateSpace states;
    ActionSpace actions;
    QTable q;
};

inline QTableFile qtable_from_csv(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.size() < 3) throw IoError("Q-table file is truncated");
    const auto srow = split_csv_line(lines[0]);
    const auto arow = split_csv_line(lines[1]);
    if (srow.empty() || srow[0] != "states" || arow.empty() || arow[0] != "actions") {
        throw IoError("Q-table file is missing its header rows");
    }
    QTableFile f;
    for (std::size_t i = 1; i < srow.size(); ++i) f.states.levels.push_back(parse_double(srow[i]));
    for (std::size_t i = 1; i < arow.size(); ++i) f.actions.rates.push_back(parse_double(arow[i]));
    f.states.validate();
    f.actions.validate();
    if (lines.size() - 2 != f.states.levels.size()) throw IoError("Q-table row count mismatch");
    for (std::size_t r = 2; r < lines.size(); ++r) {
        const auto cells = split_csv_line(lines[r]);
        if (cells.size() != f.actions.rates.size()) throw IoError("Q-table column count mismatch");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c));
        f.q.values.push_back(std::move(row));
    }
    return f;
}

inline void save_qtable(const std::string& path, const StateSpace& states,
                        const ActionSpace& actions, const QTable& q) {
    write_text_file(path, qtable_to_csv(states, actions, q));
}

inline QTableFile load_qtable(const std::string& path) {
    return qtable_from_csv(read_text_file(path));
}

} // namespace ztwin::agent
