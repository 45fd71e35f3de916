#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "koopkit/config.hpp"
#include "koopkit/csv.hpp"
#include "koopkit/pipeline.hpp"

using namespace koopkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("koopkit_test_" + std::to_string(::getpid()) + "_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(KOOPKIT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string error_for(std::string_view text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
    const ExperimentConfig c = parse_config_text("");
    EXPECT_EQ(c.system.model, ModelId::lorenz63);
    EXPECT_EQ(c.system.dt, 0.05);
    EXPECT_EQ(c.system.n_samples, 2000u);
    EXPECT_EQ(c.kernel.family, KernelFamily::gaussian);
    EXPECT_EQ(c.kernel.normalization, Normalization::markov);
    EXPECT_EQ(c.basis_size, 100u);
    EXPECT_EQ(c.mode, RunMode::eigen);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, TorusModelDefaults) {
    const ExperimentConfig c = parse_config_text("# torus\nsystem.model = torus_rotation\n");
    EXPECT_EQ(c.system.model, ModelId::torus_rotation);
    ASSERT_EQ(c.system.parameters.size(), 2u);
    EXPECT_EQ(c.system.parameters[0], 1.0);
    EXPECT_DOUBLE_EQ(c.system.parameters[1], std::sqrt(2.0));
    EXPECT_EQ(c.covariate, CovariateMap::torus_embedding());
}

TEST(Config, OverridesAndComments) {
    const ExperimentConfig c = parse_config_text(
        "system.n_samples = 500   # shorter run\n"
        "kernel.normalization = symmetric\n"
        "kernel.epsilon = 2.5\n"
        "basis.size = 20\n"
        "embedding.delays = 3\n"
        "forecast.leads = 0:10:5\n"
        "run.mode = kaf\n");
    EXPECT_EQ(c.system.n_samples, 500u);
    EXPECT_EQ(c.kernel.normalization, Normalization::symmetric);
    EXPECT_FALSE(c.epsilon_from_median);
    EXPECT_EQ(c.kernel.epsilon, 2.5);
    EXPECT_EQ(c.basis_size, 20u);
    EXPECT_EQ(c.delay_Q, 3u);
    EXPECT_EQ(c.leads, (std::vector<std::size_t>{0, 5, 10}));
    EXPECT_EQ(c.mode, RunMode::kaf);
}

TEST(Config, InvalidValueNamesKeyAndLine) {
    const std::string msg = error_for("system.n_samples = 400\n\nkernel.epsilon = -1\n");
    EXPECT_NE(msg.find("kernel.epsilon"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, UnknownDuplicateAndMalformedLines) {
    EXPECT_NE(error_for("kernel.bandwidth = 1\n").find("kernel.bandwidth"), std::string::npos);
    EXPECT_NE(error_for("basis.size = 10\nbasis.size = 20\n").find("line 2"), std::string::npos);
    EXPECT_FALSE(error_for("basis.size\n").empty());
    EXPECT_FALSE(error_for("basis.size = \n").empty());
    EXPECT_FALSE(error_for("basis.size = ten\n").empty());
    EXPECT_THROW(parse_config("/nonexistent/koopkit.cfg"), ConfigError);
}

TEST(Config, ValidationOfCrossFieldConstraints) {
    ExperimentConfig c = parse_config_text("run.mode = kaf\nsystem.n_samples = 500\n");
    EXPECT_EQ(c.test_count(), 100u);
    EXPECT_EQ(c.train_count(), 400u);
    c.leads = {0, 100};
    EXPECT_THROW(c.validate(), ConfigError);
    c.leads = {0, 99};
    EXPECT_NO_THROW(c.validate());
    c.test_split_fraction = 0.7;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ResultTableTest, SerializesRectangularCsv) {
    ResultTable t({"j", "value"});
    t.add_row(std::vector<double>{0.0, 0.1});
    t.add_row(std::vector<std::string>{"1", "a,b"});
    EXPECT_EQ(t.to_string(), "j,value\n0,0.10000000000000001\n1,\"a,b\"\n");
    EXPECT_THROW(t.add_row(std::vector<double>{1.0}), std::invalid_argument);
    EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
    EXPECT_EQ(std::stod(format_double(-1.0 / 3.0)), -1.0 / 3.0);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch_dir("exit");
    const fs::path good = write_file(dir / "good.cfg", "system.n_samples = 200\nbasis.size = 5\n");
    const fs::path bad = write_file(dir / "bad.cfg", "kernel.epsilon = -1\n");
    const fs::path diverge = write_file(dir / "diverge.cfg", "system.dt = 10\nsystem.substeps = 1\n");

    EXPECT_EQ(run_cli("eigen --config " + good.string() + " --out " + (dir / "o1").string(), dir / "log1"), 0);
    EXPECT_EQ(run_cli("eigen --config " + bad.string() + " --out " + (dir / "o2").string(), dir / "log2"), 1);
    EXPECT_NE(read_file(dir / "log2").find("kernel.epsilon"), std::string::npos);
    EXPECT_EQ(run_cli("eigen --config " + (dir / "missing.cfg").string(), dir / "log3"), 1);
    EXPECT_EQ(run_cli("bogus --config " + good.string() + " --out " + (dir / "o4").string(), dir / "log4"), 1);
    EXPECT_EQ(run_cli("eigen --config " + diverge.string() + " --out " + (dir / "o5").string(), dir / "log5"), 2);
    EXPECT_NE(read_file(dir / "log5").find("simulat"), std::string::npos) << read_file(dir / "log5");
    EXPECT_EQ(run_cli("eigen", dir / "log6"), 1);
    fs::remove_all(dir);
}

TEST(Cli, EigenModeLeadingEigenvalueIsOne) {
    const fs::path dir = scratch_dir("eigen");
    const fs::path cfg = write_file(dir / "c.cfg", "");
    ASSERT_EQ(run_cli("eigen --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "log"), 0);
    const auto rows = read_csv(dir / "out" / "eigenvalues.csv");
    ASSERT_GE(rows.size(), 2u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"j", "lambda"}));
    EXPECT_NEAR(std::stod(rows[1][1]), 1.0, 1e-10);
    EXPECT_EQ(rows.size(), 101u);
    const auto phi = read_csv(dir / "out" / "eigenfunctions.csv");
    EXPECT_EQ(phi.size(), 2001u);
    EXPECT_EQ(phi[0].size(), 102u);
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.csv"));
    fs::remove_all(dir);
}

TEST(Cli, TorusPatternsRecoverBaseFrequency) {
    const fs::path dir = scratch_dir("patterns");
    const fs::path cfg = write_file(dir / "torus.cfg", "system.model = torus_rotation\nbasis.size = 15\n");
    ASSERT_EQ(run_cli("patterns --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "log"), 0)
        << read_file(dir / "log");
    const auto rows = read_csv(dir / "out" / "generator.csv");
    ASSERT_GT(rows.size(), 1u);
    const auto& header = rows[0];
    const auto col = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    const std::size_t alpha = col("alpha"), energy = col("dirichlet");
    ASSERT_LT(alpha, header.size());
    ASSERT_LT(energy, header.size());
    std::size_t seen = 0;
    bool found = false;
    double previous = 0.0;
    for (std::size_t r = 1; r < rows.size() && seen < 3; ++r) {
        const double d = std::stod(rows[r][energy]);
        EXPECT_GE(d, previous);
        previous = d;
        const double a = std::abs(std::stod(rows[r][alpha]));
        if (a < 1e-8) continue;
        ++seen;
        if (std::abs(a - 1.0) <= 0.05) found = true;
    }
    EXPECT_TRUE(found);
    EXPECT_TRUE(fs::exists(dir / "out" / "pattern_timeseries.csv"));
    fs::remove_all(dir);
}

TEST(Cli, RunsAreByteIdentical) {
    const fs::path dir = scratch_dir("determinism");
    const fs::path cfg = write_file(dir / "c.cfg",
                                    "system.n_samples = 400\nbasis.size = 10\nforecast.leads = 0:20:5\n"
                                    "patterns.random_trials = 20\n");
    for (const std::string mode : {"kaf", "patterns"}) {
        ASSERT_EQ(run_cli(mode + " --config " + cfg.string() + " --seed 7 --out " + (dir / "a").string(), dir / "la"), 0);
        ASSERT_EQ(run_cli(mode + " --config " + cfg.string() + " --seed 7 --out " + (dir / "b").string(), dir / "lb"), 0);
        std::size_t compared = 0;
        for (const auto& entry : fs::directory_iterator(dir / "a")) {
            const fs::path other = dir / "b" / entry.path().filename();
            ASSERT_TRUE(fs::exists(other)) << other;
            EXPECT_EQ(read_file(entry.path()), read_file(other)) << entry.path().filename();
            ++compared;
        }
        EXPECT_GE(compared, 3u);
        fs::remove_all(dir / "a");
        fs::remove_all(dir / "b");
    }
    fs::remove_all(dir);
}

TEST(Pipeline, TestSegmentNeverReachesTheModel) {
    const fs::path dir = scratch_dir("canary");
    ExperimentConfig c = parse_config_text(
        "system.n_samples = 500\nbasis.size = 20\nembedding.delays = 2\nforecast.leads = 0:40:10\n");
    for (RunMode mode : {RunMode::kaf, RunMode::df}) {
        c.mode = mode;
        const TrajectoryDataset clean = simulate_configured(c);
        TrajectoryDataset poisoned = clean;
        const auto n_test = static_cast<Eigen::Index>(c.test_count());
        ASSERT_EQ(n_test, 100);
        poisoned.responses.tail(n_test).array() += 1000.0;
        poisoned.covariates.bottomRows(n_test).array() *= -3.0;
        poisoned.states.bottomRows(n_test).array() *= -3.0;

        c.output_dir = dir / "clean";
        run(c, clean);
        c.output_dir = dir / "poisoned";
        run(c, poisoned);
        EXPECT_EQ(read_file(dir / "clean" / "model.csv"), read_file(dir / "poisoned" / "model.csv"));
        EXPECT_NE(read_file(dir / "clean" / "forecast.csv"), read_file(dir / "poisoned" / "forecast.csv"));
        fs::remove_all(dir / "clean");
        fs::remove_all(dir / "poisoned");
    }
    fs::remove_all(dir);
}
