#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "koopkit/config.hpp"
#include "koopkit/pipeline.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel and Koopman-operator learning for ergodic dynamical systems"};
    std::string mode;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;

    app.add_option("mode", mode, "eigen | df | kaf | analog | patterns | autocorr | pod")->required();
    app.add_option("--config", config_path, "configuration file (section.key = value lines)")->required();
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides run.output_dir)");
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides run.seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        koopkit::ExperimentConfig config = koopkit::parse_config(config_path);
        config.mode = koopkit::parse_run_mode(mode);
        if (*out_opt) config.output_dir = out_dir;
        if (*seed_opt) config.seed = seed;
        const auto written = koopkit::run(config);
        for (const auto& path : written) std::cout << path.string() << '\n';
        return 0;
    } catch (const koopkit::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const koopkit::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
