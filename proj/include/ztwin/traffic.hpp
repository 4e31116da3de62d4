#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ztwin/csv.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/num.hpp"
#include "ztwin/rng.hpp"

namespace ztwin::traffic {

struct TrafficParams {
    double lambda = 4.0;     // mean packet count per second
    double unit_size = 100.0; // Kbps contributed by one packet
    int length = 1800;       // samples to generate

    void validate() const {
        if (lambda < 0.0) throw ParameterError("traffic.lambda must be >= 0");
        if (unit_size <= 0.0) throw ParameterError("traffic.unit_size must be > 0");
        if (length < 1) throw ParameterError("traffic.length must be >= 1");
    }
};

// Bandwidth demand per one-second step, in Kbps.
struct BandwidthSeries {
    std::vector<double> values;
};

struct Scaler {
    double b_min = 0.0;
    double b_max = 1.0;

    void validate() const {
        if (!(b_max > b_min)) throw DegenerateRange("scaler needs b_max > b_min");
    }
};

struct NormalizedSeries {
    std::vector<double> values;
};

struct Window {
    std::vector<double> input; // L consecutive normalized values
    double target = 0.0;       // the value that follows them
};

struct WindowSet {
    int L = 0;
    std::vector<Window> items;
};

// Poisson draw by inversion with sequential search.  Exact for the rates this
// simulation uses; rates above 30 are split into independent chunks summed
// together, which preserves the distribution and keeps the CDF walk short.
inline int sample_poisson(double lambda, Rng& rng) {
    if (lambda < 0.0) throw ParameterError("poisson rate must be >= 0");
    int total = 0;
    while (lambda > 30.0) {
        double chunk = 30.0;
        double p = std::exp(-chunk);
        double cdf = p;
        double u = uniform01(rng);
        int k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= chunk / k;
            cdf += p;
        }
        total += k;
        lambda -= chunk;
    }
    if (lambda == 0.0) return total;
    double p = std::exp(-lambda);
    double cdf = p;
    double u = uniform01(rng);
    int k = 0;
    while (u > cdf && k < 1000) {
        ++k;
        p *= lambda / k;
        cdf += p;
    }
    return total + k;
}

// b_t = packet count * unit size.
inline BandwidthSeries generate_series(const TrafficParams& params, Rng& rng) {
    params.validate();
    BandwidthSeries series;
    series.values.reserve(static_cast<std::size_t>(params.length));
    for (int t = 0; t < params.length; ++t) {
        series.values.push_back(params.unit_size * sample_poisson(params.lambda, rng));
    }
    return series;
}

inline double normalize_value(double v, const Scaler& s) {
    return (v - s.b_min) / (s.b_max - s.b_min);
}

inline double denormalize_value(double v, const Scaler& s) {
    return s.b_min + v * (s.b_max - s.b_min);
}

inline Scaler fit_scaler(const BandwidthSeries& series) {
    if (series.values.empty()) throw InsufficientData("cannot normalize an empty series");
    auto [lo, hi] = std::minmax_element(series.values.begin(), series.values.end());
    Scaler scaler{*lo, *hi};
    if (!(scaler.b_max > scaler.b_min)) {
        throw DegenerateRange("all series values are equal; min-max scale undefined");
    }
    return scaler;
}

inline NormalizedSeries normalize_series(const BandwidthSeries& series, const Scaler& scaler) {
    scaler.validate();
    NormalizedSeries out;
    out.values.reserve(series.values.size());
    for (double v : series.values) out.values.push_back(normalize_value(v, scaler));
    return out;
}

// Min-max scaling over the whole series.
inline std::pair<NormalizedSeries, Scaler> fit_normalize(const BandwidthSeries& series) {
    const Scaler scaler = fit_scaler(series);
    return {normalize_series(series, scaler), scaler};
}

inline BandwidthSeries inverse_normalize(const NormalizedSeries& series, const Scaler& scaler) {
    scaler.validate();
    BandwidthSeries out;
    out.values.reserve(series.values.size());
    for (double v : series.values) out.values.push_back(denormalize_value(v, scaler));
    return out;
}

// Sliding windows of length L paired with the next value as target.
// A series of N values yields N - L windows.
inline WindowSet windowize(const NormalizedSeries& series, int L) {
    if (L < 1) throw ParameterError("window length must be >= 1");
    const std::size_t n = series.values.size();
    if (n <= static_cast<std::size_t>(L)) {
        throw InsufficientData("need more than L values to build windows");
    }
    WindowSet set;
    set.L = L;
    set.items.reserve(n - static_cast<std::size_t>(L));
    for (std::size_t i = 0; i + static_cast<std::size_t>(L) < n; ++i) {
        Window w;
        w.input.assign(series.values.begin() + static_cast<std::ptrdiff_t>(i),
                       series.values.begin() + static_cast<std::ptrdiff_t>(i) + L);
        w.target = series.values[i + static_cast<std::size_t>(L)];
        set.items.push_back(std::move(w));
    }
    return set;
}

// Two-column CSV: header "t,kbps", t counted from 1.
inline std::string series_to_csv(const BandwidthSeries& series) {
    std::string out = "t,kbps\n";
    for (std::size_t i = 0; i < series.values.size(); ++i) {
        out += format_int(static_cast<std::int64_t>(i) + 1);
        out += ',';
        out += format_double(series.values[i]);
        out += '\n';
    }
    return out;
}

inline void write_series_csv(const std::string& path, const BandwidthSeries& series) {
    write_text_file(path, series_to_csv(series));
}

inline BandwidthSeries read_series_csv(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty() || lines[0] != "t,kbps") {
        throw IoError("series csv must start with 't,kbps' header: " + path);
    }
    BandwidthSeries series;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto cells = split_csv_line(lines[i]);
        if (cells.size() != 2) throw IoError("bad series row in " + path);
        series.values.push_back(parse_double(cells[1]));
    }
    return series;
}

} // namespace ztwin::traffic
