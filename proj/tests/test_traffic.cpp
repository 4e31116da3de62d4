#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>

#include "ztwin/traffic.hpp"

using namespace ztwin;
using namespace ztwin::traffic;

TEST_CASE("poisson sampler rejects negative rates", "[traffic]") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_poisson(-0.1, rng), ParameterError);
    TrafficParams p;
    p.lambda = -1.0;
    CHECK_THROWS_AS(generate_series(p, rng), ParameterError);
}

TEST_CASE("poisson sampler at rate zero always returns zero", "[traffic]") {
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) CHECK(sample_poisson(0.0, rng) == 0);
}

TEST_CASE("poisson empirical mass at zero matches closed form", "[traffic]") {
    // Oracle: P(T=0) = e^-lambda from the pmf directly.
    Rng rng(42);
    const double lambda = 5.0;
    const int n = 100000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        if (sample_poisson(lambda, rng) == 0) ++zeros;
    }
    double empirical = static_cast<double>(zeros) / n;
    CHECK(std::abs(empirical - std::exp(-lambda)) <= 0.002);
}

TEST_CASE("poisson empirical mean and variance match the rate", "[traffic]") {
    Rng rng(7);
    const double lambda = 4.0;
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = sample_poisson(lambda, rng);
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean - lambda) <= 0.05);
    CHECK(std::abs(var - lambda) <= 0.15);
}

TEST_CASE("chunked sampler keeps the mean for large rates", "[traffic]") {
    Rng rng(11);
    const double lambda = 75.0;
    const int n = 20000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_poisson(lambda, rng);
    CHECK(std::abs(sum / n - lambda) <= 0.5);
}

TEST_CASE("generated series is the packet count times unit size", "[traffic]") {
    TrafficParams p;
    p.lambda = 4.0;
    p.unit_size = 100.0;
    p.length = 1800;
    Rng rng(123);
    auto series = generate_series(p, rng);
    REQUIRE(series.values.size() == 1800);
    double sum = 0.0;
    for (double v : series.values) {
        CHECK(v >= 0.0);
        CHECK(std::fmod(v, p.unit_size) == 0.0);
        sum += v;
    }
    // Mean demand sits near lambda * unit_size.
    CHECK(std::abs(sum / 1800.0 - 400.0) <= 10.0);
}

TEST_CASE("generation is bit-reproducible for a fixed seed", "[traffic]") {
    TrafficParams p;
    p.length = 500;
    Rng a(99), b(99);
    auto s1 = generate_series(p, a);
    auto s2 = generate_series(p, b);
    CHECK(s1.values == s2.values);
}

TEST_CASE("length one series is allowed", "[traffic]") {
    TrafficParams p;
    p.length = 1;
    Rng rng(5);
    CHECK(generate_series(p, rng).values.size() == 1);
}

TEST_CASE("min-max normalization maps extremes to 0 and 1", "[traffic]") {
    BandwidthSeries s{{100.0, 200.0, 300.0}};
    auto [norm, scaler] = fit_normalize(s);
    CHECK(scaler.b_min == 100.0);
    CHECK(scaler.b_max == 300.0);
    REQUIRE(norm.values.size() == 3);
    CHECK(norm.values[0] == 0.0);
    CHECK(norm.values[1] == 0.5);
    CHECK(norm.values[2] == 1.0);
}

TEST_CASE("constant series cannot be normalized", "[traffic]") {
    BandwidthSeries s{{250.0, 250.0, 250.0}};
    CHECK_THROWS_AS(fit_normalize(s), DegenerateRange);
    CHECK_THROWS_AS(fit_normalize(BandwidthSeries{}), InsufficientData);
}

TEST_CASE("normalization round-trips within 1e-9", "[traffic]") {
    TrafficParams p;
    p.length = 400;
    Rng rng(17);
    auto series = generate_series(p, rng);
    auto [norm, scaler] = fit_normalize(series);
    for (double v : norm.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    auto back = inverse_normalize(norm, scaler);
    REQUIRE(back.values.size() == series.values.size());
    for (std::size_t i = 0; i < back.values.size(); ++i) {
        CHECK(std::abs(back.values[i] - series.values[i]) <= 1e-9);
    }
}

TEST_CASE("windowize pairs each window with the following value", "[traffic]") {
    NormalizedSeries s{{0.1, 0.2, 0.3, 0.4}};
    auto set = windowize(s, 3);
    REQUIRE(set.items.size() == 1);
    CHECK(set.items[0].input == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(set.items[0].target == 0.4);
}

TEST_CASE("windowize yields N minus L windows", "[traffic]") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        int L = 1 + static_cast<int>(uniform_int(rng, 12));
        int n = L + 1 + static_cast<int>(uniform_int(rng, 50));
        NormalizedSeries s;
        for (int i = 0; i < n; ++i) s.values.push_back(uniform01(rng));
        auto set = windowize(s, L);
        CHECK(set.items.size() == static_cast<std::size_t>(n - L));
        for (const auto& w : set.items) CHECK(w.input.size() == static_cast<std::size_t>(L));
    }
}

TEST_CASE("windowize boundary conditions", "[traffic]") {
    NormalizedSeries nine{{0, 0, 0, 0, 0, 0, 0, 0, 0}};
    CHECK_THROWS_AS(windowize(nine, 9), InsufficientData);
    CHECK_THROWS_AS(windowize(nine, 0), ParameterError);
    NormalizedSeries ten{{0, 0, 0, 0, 0, 0, 0, 0, 0, 0.5}};
    CHECK(windowize(ten, 9).items.size() == 1);
}

TEST_CASE("series csv round-trips exactly", "[traffic]") {
    TrafficParams p;
    p.length = 64;
    Rng rng(77);
    auto series = generate_series(p, rng);
    auto path = std::string("traffic_roundtrip.csv");
    write_series_csv(path, series);
    auto back = read_series_csv(path);
    CHECK(back.values == series.values);
    std::remove(path.c_str());
}

TEST_CASE("series csv requires the header", "[traffic]") {
    auto path = std::string("traffic_badheader.csv");
    write_text_file(path, "1,400\n2,300\n");
    CHECK_THROWS_AS(read_series_csv(path), IoError);
    std::remove(path.c_str());
}
