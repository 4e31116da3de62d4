#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ztwin/bilstm.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/json_io.hpp"
#include "ztwin/memory.hpp"
#include "ztwin/traffic.hpp"

namespace ztwin::predictor {

enum class Source { memory, model };

struct Prediction {
    double value = 0.0;  // normalized
    Source source = Source::model;
};

// Everything the twin needs to predict the next bandwidth state.
struct PredictorBundle {
    BiLstmModel model;
    traffic::Scaler scaler;
    MemoryModule memory;
    double delta_kbps = 5.0;  // correction threshold, raw Kbps
};

// Memory first, model second.  Model output is clamped to [0,1] because the
// downstream state quantizer works on the normalized range.
inline Prediction predict_with_memory(const MemoryModule& memory, const BiLstmModel& model,
                                      const std::vector<double>& window) {
    if (window.size() != static_cast<std::size_t>(model.L)) {
        throw ShapeError("window length does not match the model");
    }
    double stored = 0.0;
    if (memory.lookup(window, stored)) return {stored, Source::memory};
    const double raw = model.forward(window);
    return {std::clamp(raw, 0.0, 1.0), Source::model};
}

inline Prediction predict_with_memory(const PredictorBundle& b, const std::vector<double>& window) {
    return predict_with_memory(b.memory, b.model, window);
}

// Few-shot correction: when the denormalized prediction misses the desired
// value by more than delta Kbps, the desired value is memorized and becomes
// the corrected prediction.  Returns the corrected normalized prediction.
inline double memory_update(MemoryModule& memory, const std::vector<double>& window, double y_hat,
                            double y_desired, double delta_kbps, const traffic::Scaler& scaler) {
    const double err =
        std::abs(traffic::denormalize_value(y_hat, scaler) - traffic::denormalize_value(y_desired, scaler));
    if (err > delta_kbps) {
        memory.put(window, y_desired);
        return y_desired;
    }
    return y_hat;
}

inline double memory_update(PredictorBundle& b, const std::vector<double>& window, double y_hat,
                            double y_desired) {
    return memory_update(b.memory, window, y_hat, y_desired, b.delta_kbps, b.scaler);
}

struct Metrics {
    double mse = 0.0;  // Kbps^2
    double mae = 0.0;  // Kbps
};

// Denormalized prediction error over a window set.
inline Metrics evaluate(const PredictorBundle& b, const traffic::WindowSet& windows) {
    if (windows.items.empty()) throw InsufficientData("no evaluation windows");
    double se = 0.0;
    double ae = 0.0;
    for (const auto& w : windows.items) {
        const Prediction p = predict_with_memory(b, w.input);
        const double err = traffic::denormalize_value(p.value, b.scaler) -
                           traffic::denormalize_value(w.target, b.scaler);
        se += err * err;
        ae += std::abs(err);
    }
    const auto n = static_cast<double>(windows.items.size());
    return {se / n, ae / n};
}

// One pass of the correction rule over windows in order, as the twin does
// while observing live telemetry.  Returns the number of memorized windows.
inline std::size_t ingest_few_shot(PredictorBundle& b, const traffic::WindowSet& windows) {
    std::size_t updates = 0;
    for (const auto& w : windows.items) {
        const Prediction p = predict_with_memory(b, w.input);
        const double before = b.memory.size();
        memory_update(b, w.input, p.value, w.target);
        if (b.memory.size() != before) ++updates;
    }
    return updates;
}

namespace detail {

inline nlohmann::json gate_json(const BiLstmModel& m, int dir, int gate) {
    const auto h = static_cast<std::size_t>(m.hidden);
    nlohmann::json j;
    j["wx"] = std::vector<double>(m.params.begin() + m.wx_at(dir, gate),
                                  m.params.begin() + m.wx_at(dir, gate) + h);
    j["u"] = std::vector<double>(m.params.begin() + m.u_at(dir, gate),
                                 m.params.begin() + m.u_at(dir, gate) + h * h);
    j["b"] = std::vector<double>(m.params.begin() + m.b_at(dir, gate),
                                 m.params.begin() + m.b_at(dir, gate) + h);
    return j;
}

inline void load_gate(BiLstmModel& m, int dir, int gate, const nlohmann::json& j) {
    const auto h = static_cast<std::size_t>(m.hidden);
    const auto wx = j.at("wx").get<std::vector<double>>();
    const auto u = j.at("u").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (wx.size() != h || u.size() != h * h || b.size() != h) {
        throw IoError("bundle weight array size does not match hidden_size");
    }
    std::copy(wx.begin(), wx.end(), m.params.begin() + m.wx_at(dir, gate));
    std::copy(u.begin(), u.end(), m.params.begin() + m.u_at(dir, gate));
    std::copy(b.begin(), b.end(), m.params.begin() + m.b_at(dir, gate));
}

} // namespace detail

inline constexpr int kBundleFormatVersion = 1;

inline nlohmann::json bundle_to_json(const PredictorBundle& b) {
    nlohmann::json j;
    j["format_version"] = kBundleFormatVersion;
    j["hidden_size"] = b.model.hidden;
    j["L"] = b.model.L;
    j["scaler"] = {{"b_min", b.scaler.b_min}, {"b_max", b.scaler.b_max}};
    j["delta_kbps"] = b.delta_kbps;
    const char* dirs[2] = {"forward", "backward"};
    const char* gates[4] = {"input", "forget", "cell", "output"};
    for (int d = 0; d < 2; ++d) {
        for (int g = 0; g < 4; ++g) {
            j["weights"][dirs[d]][gates[g]] = detail::gate_json(b.model, d, g);
        }
    }
    const auto h = static_cast<std::size_t>(b.model.hidden);
    j["weights"]["dense"]["w"] = std::vector<double>(
        b.model.params.begin() + b.model.dense_w_at(),
        b.model.params.begin() + b.model.dense_w_at() + 2 * h);
    j["weights"]["dense"]["b"] = b.model.params[b.model.dense_b_at()];
    j["memory"] = nlohmann::json::array();
    j["memory_capacity"] = b.memory.capacity();
    for (const auto& [key, value] : b.memory.entries()) {
        j["memory"].push_back({{"key", key}, {"value", value}});
    }
    return j;
}

inline PredictorBundle bundle_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kBundleFormatVersion) throw IoError("unsupported bundle format_version");
        PredictorBundle b;
        b.model.hidden = j.at("hidden_size").get<int>();
        b.model.L = j.at("L").get<int>();
        if (b.model.hidden < 1 || b.model.L < 1) throw IoError("bundle has invalid model shape");
        b.model.params.assign(BiLstmModel::total_params(b.model.hidden), 0.0);
        b.scaler.b_min = j.at("scaler").at("b_min").get<double>();
        b.scaler.b_max = j.at("scaler").at("b_max").get<double>();
        b.delta_kbps = j.at("delta_kbps").get<double>();
        const char* dirs[2] = {"forward", "backward"};
        const char* gates[4] = {"input", "forget", "cell", "output"};
        for (int d = 0; d < 2; ++d) {
            for (int g = 0; g < 4; ++g) {
                detail::load_gate(b.model, d, g, j.at("weights").at(dirs[d]).at(gates[g]));
            }
        }
        const auto h = static_cast<std::size_t>(b.model.hidden);
        const auto dense_w = j.at("weights").at("dense").at("w").get<std::vector<double>>();
        if (dense_w.size() != 2 * h) throw IoError("bundle dense width does not match hidden_size");
        std::copy(dense_w.begin(), dense_w.end(), b.model.params.begin() + b.model.dense_w_at());
        b.model.params[b.model.dense_b_at()] = j.at("weights").at("dense").at("b").get<double>();
        b.memory = MemoryModule(j.value("memory_capacity", std::size_t{4096}));
        for (const auto& e : j.at("memory")) {
            b.memory.put_key(e.at("key").get<std::string>(), e.at("value").get<double>());
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed bundle: ") + e.what());
    }
}

inline void save_bundle(const PredictorBundle& b, const std::string& path) {
    write_json_file(bundle_to_json(b), path);
}

inline PredictorBundle load_bundle(const std::string& path) {
    return bundle_from_json(read_json_file(path));
}

} // namespace ztwin::predictor
