#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ztwin/csv.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/json_io.hpp"
#include "ztwin/num.hpp"

namespace ztwin::netsim {

struct Segment {
    int start = 0;       // first step of this segment
    double kbps = 0.0;   // link capacity until the next segment
};

// Step-function capacity over discrete time.
struct VariationSchedule {
    int total_steps = 0;
    std::vector<Segment> segments;

    void validate() const {
        if (total_steps < 1) throw ParameterError("schedule.total_steps must be >= 1");
        if (segments.empty()) throw ParameterError("schedule needs at least one segment");
        if (segments.front().start != 0) throw ParameterError("schedule must start at step 0");
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (segments[i].kbps <= 0.0) throw ParameterError("segment capacity must be > 0");
            if (i > 0 && segments[i].start <= segments[i - 1].start) {
                throw ParameterError("segment starts must be strictly increasing");
            }
        }
        if (segments.back().start >= total_steps) {
            throw ParameterError("segment start beyond total_steps");
        }
    }
};

inline double capacity_at(const VariationSchedule& schedule, int step) {
    if (step < 0 || step >= schedule.total_steps) throw IndexError("step outside the schedule");
    double cap = schedule.segments.front().kbps;
    for (const auto& seg : schedule.segments) {
        if (seg.start > step) break;
        cap = seg.kbps;
    }
    return cap;
}

inline std::vector<double> to_capacity_vector(const VariationSchedule& schedule) {
    schedule.validate();
    std::vector<double> caps;
    caps.reserve(static_cast<std::size_t>(schedule.total_steps));
    for (int t = 0; t < schedule.total_steps; ++t) caps.push_back(capacity_at(schedule, t));
    return caps;
}

struct ShaperConfig {
    std::optional<double> rate;  // Kbps; unset = pass through

    void validate() const {
        if (rate && *rate <= 0.0) throw ParameterError("shaper.rate must be > 0 when set");
    }
};

// Offered load above capacity does not just clip: the overloaded link loses
// goodput in proportion to the relative overload, scaled by beta.  Shaping
// to at most the capacity avoids the loss entirely.
struct LinkModel {
    double congestion_beta = 0.25;

    void validate() const {
        if (congestion_beta < 0.0 || congestion_beta >= 1.0) {
            throw ParameterError("link.congestion_beta must be in [0,1)");
        }
    }
};

struct StepResult {
    int step = 0;
    double offered = 0.0;
    double shaped = 0.0;
    double capacity = 0.0;
    double achieved = 0.0;
};

inline StepResult step(double offered, const ShaperConfig& shaper, double capacity,
                       const LinkModel& link) {
    StepResult r;
    r.offered = offered;
    r.capacity = capacity;
    r.shaped = shaper.rate ? std::min(offered, *shaper.rate) : offered;
    if (r.shaped <= capacity) {
        r.achieved = r.shaped;
    } else {
        const double overload = (r.shaped - capacity) / r.shaped;
        r.achieved = capacity * (1.0 - link.congestion_beta * overload);
    }
    return r;
}

// Mean achieved rate over the trailing `window` steps.
inline double measure_throughput(const std::vector<StepResult>& results, std::size_t window) {
    if (window == 0 || window > results.size()) {
        throw InsufficientData("measurement window exceeds available steps");
    }
    double sum = 0.0;
    for (std::size_t i = results.size() - window; i < results.size(); ++i) {
        sum += results[i].achieved;
    }
    return sum / static_cast<double>(window);
}

inline nlohmann::json schedule_to_json(const VariationSchedule& schedule) {
    nlohmann::json j;
    j["total_steps"] = schedule.total_steps;
    j["segments"] = nlohmann::json::array();
    for (const auto& seg : schedule.segments) {
        j["segments"].push_back({{"start", seg.start}, {"kbps", seg.kbps}});
    }
    return j;
}

inline VariationSchedule schedule_from_json(const nlohmann::json& j) {
    try {
        VariationSchedule s;
        s.total_steps = j.at("total_steps").get<int>();
        for (const auto& seg : j.at("segments")) {
            s.segments.push_back({seg.at("start").get<int>(), seg.at("kbps").get<double>()});
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed schedule: ") + e.what());
    }
}

inline VariationSchedule load_schedule(const std::string& path) {
    return schedule_from_json(read_json_file(path));
}

inline void save_schedule(const VariationSchedule& schedule, const std::string& path) {
    write_json_file(schedule_to_json(schedule), path);
}

inline std::string step_results_to_csv(const std::vector<StepResult>& results) {
    std::string out = "step,offered,shaped,capacity,achieved\n";
    for (const auto& r : results) {
        out += format_int(r.step);
        out += ",";
        out += format_double(r.offered);
        out += ",";
        out += format_double(r.shaped);
        out += ",";
        out += format_double(r.capacity);
        out += ",";
        out += format_double(r.achieved);
        out += "\n";
    }
    return out;
}

inline std::vector<StepResult> step_results_from_csv(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "step,offered,shaped,capacity,achieved") {
        throw IoError("step results file is missing its header");
    }
    std::vector<StepResult> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 5) throw IoError("step results row must have 5 columns");
        StepResult r;
        r.step = static_cast<int>(parse_int(cells[0]));
        r.offered = parse_double(cells[1]);
        r.shaped = parse_double(cells[2]);
        r.capacity = parse_double(cells[3]);
        r.achieved = parse_double(cells[4]);
        out.push_back(r);
    }
    return out;
}

} // namespace ztwin::netsim
