#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "koopkit/dynamics.hpp"
#include "koopkit/kernels.hpp"

namespace koopkit {

enum class RunMode { eigen, df, kaf, analog, patterns, autocorr, pod };

std::string to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);
bool is_forecast_mode(RunMode mode);

/// Observable whose autocorrelation is reported by the autocorr mode.
struct CorrelationObservable {
    enum class Kind { response, phase };  // phase(i): exp(i * w_i)
    Kind kind = Kind::response;
    std::size_t index = 0;

    static CorrelationObservable parse(std::string_view text);
    std::string to_string() const;
};

struct ExperimentConfig {
    RunMode mode = RunMode::eigen;

    SystemSpec system = SystemSpec::lorenz63_default();
    CovariateMap covariate = CovariateMap::identity();
    ResponseMap response = ResponseMap::coordinate(0);

    KernelSpec kernel;
    bool epsilon_from_median = true;
    double epsilon_scale = 1.0;
    bool normalization_explicit = false;

    std::size_t basis_size = 100;
    std::size_t delay_Q = 1;

    std::vector<std::size_t> leads{0, 2, 5, 10, 20, 40, 60, 80, 100, 140, 200};
    double test_split_fraction = 0.2;
    std::size_t analog_neighbors = 15;

    std::size_t residual_q = 1;
    std::size_t pattern_count = 4;
    std::size_t coherence_max_lag = 20;
    std::size_t random_trials = 100;

    std::size_t autocorr_max_lag = 200;
    CorrelationObservable autocorr_observable;
    bool autocorr_center = true;

    std::size_t pod_rank = 0;  // 0: min(basis size, covariate dimension)

    std::filesystem::path output_dir = "koopkit_out";
    std::uint64_t seed = 0;

    /// Cross-field checks; names the offending key.
    void validate() const;

    /// Sizes of the trailing test segment and the training segment for forecast modes.
    std::size_t test_count() const;
    std::size_t train_count() const;

    /// Resolved settings as (key, value) pairs in a fixed order.
    std::vector<std::pair<std::string, std::string>> describe() const;
};

ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

}  // namespace koopkit
