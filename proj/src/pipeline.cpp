#include "koopkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "koopkit/csv.hpp"
#include "koopkit/forecast.hpp"
#include "koopkit/generator.hpp"
#include "koopkit/kernels.hpp"
#include "koopkit/spectral.hpp"

namespace koopkit {

namespace {

namespace fs = std::filesystem;

template <class F>
auto stage(const std::string& name, F&& fn) {
    try {
        return fn();
    } catch (const IntegrationDivergence& e) {
        throw IntegrationDivergence(e.step(), name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(name + ": " + e.what());
    }
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(Eigen::Index v) { return std::to_string(v); }

struct Trained {
    DelayEmbedding embedding;
    KernelMatrix kernel;
    std::shared_ptr<const EigenBasis> basis;
    Vector responses;
    double epsilon = 0.0;
};

struct RunContext {
    const ExperimentConfig& config;
    const TrajectoryDataset& data;
    Normalization normalization;
    std::size_t n_train;
    std::size_t n_test;
    std::vector<std::pair<std::string, std::string>> resolved;
    std::vector<std::string> warnings;
    std::vector<fs::path> written;

    void write(const ResultTable& table, const std::string& name) {
        const fs::path path = config.output_dir / name;
        table.write(path);
        written.push_back(path);
    }

    double time_of(std::size_t sample) const { return static_cast<double>(sample) * data.dt; }
};

Trained train(RunContext& ctx) {
    const ExperimentConfig& c = ctx.config;
    Trained t;
    t.embedding = delay_embed(Matrix(ctx.data.covariates.topRows(static_cast<Eigen::Index>(ctx.n_train))), c.delay_Q);

    KernelSpec spec = c.kernel;
    spec.normalization = ctx.normalization;
    KernelMatrix raw = stage("kernel", [&] {
        if (spec.family == KernelFamily::covariance) {
            return covariance_kernel(spec, t.embedding.rows, t.embedding.base_index_offset);
        }
        Matrix d = pairwise_sqdist(t.embedding);
        spec.epsilon = c.epsilon_from_median ? median_bandwidth(d) * c.epsilon_scale : c.kernel.epsilon;
        return kernel_eval(spec, std::move(d), t.embedding.base_index_offset);
    });
    t.epsilon = spec.epsilon;
    t.kernel = stage("normalize", [&] { return normalize(raw, ctx.normalization, c.kernel.alpha); });
    raw = KernelMatrix{};
    t.basis = stage("eigenbasis", [&] { return std::make_shared<const EigenBasis>(eigenbasis(t.kernel, c.basis_size)); });
    for (const auto& w : t.basis->warnings) ctx.warnings.push_back("eigenbasis: " + w);

    t.responses = ctx.data.responses.segment(static_cast<Eigen::Index>(c.delay_Q - 1),
                                             static_cast<Eigen::Index>(t.embedding.size()));
    ctx.resolved.emplace_back("resolved.epsilon", fmt(t.epsilon));
    ctx.resolved.emplace_back("resolved.basis_size", fmt(t.basis->size()));
    return t;
}

ResultTable eigenvalue_table(const EigenBasis& basis) {
    ResultTable table({"j", "lambda"});
    for (std::size_t j = 0; j < basis.size(); ++j) {
        table.add_row({fmt(j), fmt(basis.eigenvalues(static_cast<Eigen::Index>(j)))});
    }
    return table;
}

void run_eigen(RunContext& ctx) {
    const Trained t = train(ctx);
    const EigenBasis& basis = *t.basis;
    ctx.write(eigenvalue_table(basis), "eigenvalues.csv");

    std::vector<std::string> header{"n", "t"};
    for (std::size_t j = 0; j < basis.size(); ++j) header.push_back("phi_" + std::to_string(j));
    ResultTable table(header);
    for (std::size_t r = 0; r < basis.samples(); ++r) {
        const std::size_t n = r + t.embedding.base_index_offset;
        std::vector<std::string> row{fmt(n), fmt(ctx.time_of(n))};
        for (std::size_t j = 0; j < basis.size(); ++j) {
            row.push_back(fmt(basis.phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j))));
        }
        table.add_row(std::move(row));
    }
    ctx.write(table, "eigenfunctions.csv");
}

// ---------------------------------------------------------------------------
// Forecast modes
// ---------------------------------------------------------------------------

struct Climatology {
    double mean = 0.0;
    double std = 0.0;
};

Climatology climatology(const Vector& y) {
    const double mean = y.mean();
    return {mean, std::sqrt((y.array() - mean).square().mean())};
}

void write_forecast(RunContext& ctx, const ForecastSeries& series, const Climatology& clim) {
    ResultTable summary({"lead", "lead_time", "rmse", "mean_sigma", "climatology", "count"});
    for (std::size_t l = 0; l < series.leads.size(); ++l) {
        const auto i = static_cast<Eigen::Index>(l);
        summary.add_row({fmt(series.leads[l]), fmt(series.lead_times(i)), fmt(series.rmse(i)),
                         fmt(series.mean_sigma(i)), fmt(clim.std), fmt(series.counts[l])});
    }
    ctx.write(summary, "forecast.csv");

    ResultTable traj({"point", "sample", "lead", "lead_time", "prediction", "sigma", "truth", "fallback"});
    std::size_t fallbacks = 0;
    for (const ForecastRecord& r : series.records) {
        traj.add_row({fmt(r.point), fmt(ctx.n_train + r.point), fmt(r.q), fmt(static_cast<double>(r.q) * ctx.data.dt),
                      fmt(r.prediction), fmt(r.sigma), fmt(r.truth), r.fallback ? "1" : "0"});
        if (r.fallback) ++fallbacks;
    }
    ctx.write(traj, "trajectories.csv");
    if (fallbacks > 0) {
        ctx.warnings.push_back("forecast: " + std::to_string(fallbacks) +
                               " predictions fell back to climatology (query outside the training domain)");
    }
}

Vector test_query(const RunContext& ctx, std::size_t point) {
    return delay_vector(ctx.data.covariates, ctx.n_train + point, ctx.config.delay_Q);
}

TruthSource truth_source(const RunContext& ctx) {
    return [&ctx](std::size_t point, std::size_t q) -> std::optional<double> {
        const std::size_t s = ctx.n_train + point + q;
        if (s >= ctx.data.size()) return std::nullopt;
        return ctx.data.responses(static_cast<Eigen::Index>(s));
    };
}

void add_model_rows(ResultTable& model, const std::string& kind, std::size_t index, std::size_t q, double value) {
    model.add_row({kind, fmt(index), fmt(q), fmt(value)});
}

void run_df(RunContext& ctx) {
    const ExperimentConfig& c = ctx.config;
    const Trained t = train(ctx);
    const EigenBasis& basis = *t.basis;
    const auto L = static_cast<Eigen::Index>(basis.size());
    const Climatology clim = climatology(t.responses);
    const double range = t.responses.maxCoeff() - t.responses.minCoeff();

    const Vector y_hat = response_coefficients(basis, t.responses);
    const Vector y2_hat = response_coefficients(basis, t.responses.array().square().matrix());

    std::vector<Matrix> shifts;
    for (std::size_t q : c.leads) shifts.push_back(stage("shift", [&] { return shift_matrix(basis, q, c.system.dt).entries; }));

    const KernelFeatureMap features(t.kernel, t.embedding);
    std::vector<Vector> rho(ctx.n_test);
    std::vector<char> ood(ctx.n_test, 0);
    stage("forecast", [&] {
        for (std::size_t p = 0; p < ctx.n_test; ++p) {
            const Vector x = test_query(ctx, p);
            const OutOfSampleRow row = features.density_row(as_span(x));
            rho[p] = density_coefficients(basis, row.values);
            ood[p] = row.out_of_domain ? 1 : 0;
        }
        return 0;
    });

    const Forecaster forecaster = [&](std::size_t p, std::size_t q) {
        const auto it = std::find(c.leads.begin(), c.leads.end(), q);
        const Matrix& u = shifts[static_cast<std::size_t>(it - c.leads.begin())];
        const Vector uy = u * y_hat;
        Prediction out;
        out.mean = rho[p].dot(uy);
        const double second = rho[p].dot(u * y2_hat);
        out.sigma = std::min(std::sqrt(std::max(0.0, second - out.mean * out.mean)), range);
        out.fallback = ood[p] != 0;
        return out;
    };
    const ForecastSeries series = stage("forecast", [&] {
        return rmse_curve(forecaster, truth_source(ctx), ctx.n_test, c.leads, c.system.dt);
    });
    write_forecast(ctx, series, clim);

    ResultTable model({"kind", "index", "q", "value"});
    for (Eigen::Index j = 0; j < L; ++j) add_model_rows(model, "eigenvalue", j, 0, basis.eigenvalues(j));
    for (Eigen::Index j = 0; j < L; ++j) add_model_rows(model, "response_coeff", j, 0, y_hat(j));
    for (Eigen::Index j = 0; j < L; ++j) add_model_rows(model, "response_sq_coeff", j, 0, y2_hat(j));
    add_model_rows(model, "climatology_mean", 0, 0, clim.mean);
    add_model_rows(model, "climatology_std", 0, 0, clim.std);
    ctx.write(model, "model.csv");
}

void run_kaf(RunContext& ctx) {
    const ExperimentConfig& c = ctx.config;
    const Trained t = train(ctx);
    const std::size_t q_max = *std::max_element(c.leads.begin(), c.leads.end());
    const KAFModel model =
        stage("kaf_fit", [&] { return kaf_fit(t.basis, t.responses, q_max, t.basis->size()); });
    const KernelFeatureMap features(t.kernel, t.embedding);

    std::vector<KAFFeatures> cache(ctx.n_test);
    stage("forecast", [&] {
        for (std::size_t p = 0; p < ctx.n_test; ++p) {
            const Vector x = test_query(ctx, p);
            cache[p] = kaf_features(model, features, as_span(x));
        }
        return 0;
    });
    const Forecaster forecaster = [&](std::size_t p, std::size_t q) { return kaf_predict(model, cache[p], q); };
    const ForecastSeries series = stage("forecast", [&] {
        return rmse_curve(forecaster, truth_source(ctx), ctx.n_test, c.leads, c.system.dt);
    });
    write_forecast(ctx, series, {model.response_mean, model.response_std});

    ResultTable table({"kind", "index", "q", "value"});
    for (std::size_t j = 0; j < model.L; ++j) {
        add_model_rows(table, "eigenvalue", j, 0, t.basis->eigenvalues(static_cast<Eigen::Index>(j)));
    }
    for (std::size_t q : c.leads) {
        for (std::size_t j = 0; j < model.L; ++j) {
            const auto qi = static_cast<Eigen::Index>(q);
            const auto ji = static_cast<Eigen::Index>(j);
            add_model_rows(table, "coeff", j, q, model.coeffs(qi, ji));
            add_model_rows(table, "coeff_sq", j, q, model.coeffs_sq(qi, ji));
        }
    }
    add_model_rows(table, "climatology_mean", 0, 0, model.response_mean);
    add_model_rows(table, "climatology_std", 0, 0, model.response_std);
    ctx.write(table, "model.csv");
}

void run_analog(RunContext& ctx) {
    const ExperimentConfig& c = ctx.config;
    const DelayEmbedding embedding =
        delay_embed(Matrix(ctx.data.covariates.topRows(static_cast<Eigen::Index>(ctx.n_train))), c.delay_Q);
    const Vector y = ctx.data.responses.segment(static_cast<Eigen::Index>(c.delay_Q - 1),
                                                static_cast<Eigen::Index>(embedding.size()));
    const Climatology clim = climatology(y);

    const Forecaster forecaster = [&](std::size_t p, std::size_t q) {
        const Vector x = test_query(ctx, p);
        return analog_forecast(embedding.rows, y, as_span(x), q, c.analog_neighbors);
    };
    const ForecastSeries series = stage("forecast", [&] {
        return rmse_curve(forecaster, truth_source(ctx), ctx.n_test, c.leads, c.system.dt);
    });
    write_forecast(ctx, series, clim);

    ResultTable model({"kind", "index", "q", "value"});
    add_model_rows(model, "training_samples", 0, 0, static_cast<double>(embedding.size()));
    add_model_rows(model, "climatology_mean", 0, 0, clim.mean);
    add_model_rows(model, "climatology_std", 0, 0, clim.std);
    ctx.write(model, "model.csv");
}

// ---------------------------------------------------------------------------
// Coherent patterns
// ---------------------------------------------------------------------------

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void run_patterns(RunContext& ctx) {
    const ExperimentConfig& c = ctx.config;
    const Trained t = train(ctx);
    const EigenBasis& basis = *t.basis;
    const double dt = c.system.dt;
    const GeneratorModel gen = stage("generator", [&] { return build_generator(basis, dt); });
    const auto L = static_cast<Eigen::Index>(gen.L);

    std::vector<std::size_t> order(gen.L);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return gen.dirichlet_energies(static_cast<Eigen::Index>(a)) < gen.dirichlet_energies(static_cast<Eigen::Index>(b));
    });

    const KoopmanMatrix u = stage("shift", [&] { return shift_matrix(basis, c.residual_q, dt); });
    ResultTable table({"rank", "j", "alpha", "dirichlet", "residual", "optimal_residual"});
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto j = static_cast<Eigen::Index>(order[r]);
        const CVector z = gen.eigvec_coeffs.col(j);
        table.add_row({fmt(r), fmt(order[r]), fmt(gen.frequencies(j)), fmt(gen.dirichlet_energies(j)),
                       fmt(approx_eigen_residual(u, z, gen.frequencies(j))), fmt(optimal_eigen_residual(u, z))});
    }
    ctx.write(table, "generator.csv");

    ResultTable fd({"k", "frequency"});
    for (Eigen::Index k = 0; k < gen.fd_frequencies.size(); ++k) fd.add_row({fmt(k), fmt(gen.fd_frequencies(k))});
    ctx.write(fd, "fd_frequencies.csv");

    // Lowest-Dirichlet modes with positive frequency (one member per conjugate pair).
    std::vector<std::size_t> selected;
    for (std::size_t j : order) {
        if (selected.size() == c.pattern_count) break;
        if (gen.frequencies(static_cast<Eigen::Index>(j)) > 0.0) selected.push_back(j);
    }
    if (selected.empty()) {
        ctx.warnings.push_back("patterns: no mode with nonzero frequency");
        return;
    }

    std::vector<std::string> header{"n", "t"};
    std::vector<CVector> series;
    for (std::size_t j : selected) {
        header.push_back("re_" + std::to_string(j));
        header.push_back("im_" + std::to_string(j));
        series.push_back(eigenfunction_timeseries(gen, basis, j));
    }
    ResultTable ts(header);
    for (std::size_t r = 0; r < basis.samples(); ++r) {
        const std::size_t n = r + t.embedding.base_index_offset;
        std::vector<std::string> row{fmt(n), fmt(ctx.time_of(n))};
        for (const CVector& z : series) {
            const Complex v = z(static_cast<Eigen::Index>(r));
            row.push_back(fmt(v.real()));
            row.push_back(fmt(v.imag()));
        }
        ts.add_row(std::move(row));
    }
    ctx.write(ts, "pattern_timeseries.csv");

    // Residual of the leading pattern against random unit vectors over a range of lags.
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<CVector> trials(c.random_trials);
    for (CVector& z : trials) {
        z.resize(L);
        for (Eigen::Index i = 0; i < L; ++i) {
            const double re = normal(rng);
            const double im = normal(rng);
            z(i) = Complex(re, im);
        }
        z.normalize();
    }
    const CVector lead_mode = gen.eigvec_coeffs.col(static_cast<Eigen::Index>(selected.front()));
    ResultTable coherence({"q", "t", "mode", "mode_residual", "random_median", "random_min"});
    for (std::size_t q = 1; q <= c.coherence_max_lag; ++q) {
        const KoopmanMatrix uq = stage("shift", [&] { return shift_matrix(basis, q, dt); });
        std::vector<double> res;
        res.reserve(trials.size());
        for (const CVector& z : trials) res.push_back(optimal_eigen_residual(uq, z));
        const double lo = *std::min_element(res.begin(), res.end());
        coherence.add_row({fmt(q), fmt(static_cast<double>(q) * dt), fmt(selected.front()),
                           fmt(optimal_eigen_residual(uq, lead_mode)), fmt(median(std::move(res))), fmt(lo)});
    }
    ctx.write(coherence, "coherence.csv");
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

void run_autocorr(RunContext& ctx) {
    const ExperimentConfig& c = ctx.config;
    const auto n = static_cast<Eigen::Index>(ctx.data.size());
    CVector f(n);
    if (c.autocorr_observable.kind == CorrelationObservable::Kind::response) {
        f = ctx.data.responses.cast<Complex>();
    } else {
        const auto i = static_cast<Eigen::Index>(c.autocorr_observable.index);
        if (i >= ctx.data.states.cols()) throw ConfigError("autocorr.observable: state index out of range");
        for (Eigen::Index k = 0; k < n; ++k) f(k) = std::polar(1.0, ctx.data.states(k, i));
    }
    const CVector corr = stage("autocorrelation", [&] { return autocorrelation(f, c.autocorr_max_lag, c.autocorr_center); });
    ResultTable table({"q", "t", "re", "im", "abs"});
    for (Eigen::Index q = 0; q < corr.size(); ++q) {
        table.add_row({fmt(q), fmt(static_cast<double>(q) * ctx.data.dt), fmt(corr(q).real()), fmt(corr(q).imag()),
                       fmt(std::abs(corr(q)))});
    }
    ctx.write(table, "correlation.csv");
}

void run_pod(RunContext& ctx) {
    const ExperimentConfig& c = ctx.config;
    const Matrix& x = ctx.data.covariates;
    const auto m = static_cast<std::size_t>(x.cols());
    const std::size_t rank =
        c.pod_rank > 0 ? c.pod_rank : std::min({c.basis_size, m, static_cast<std::size_t>(x.rows())});
    if (rank > m) throw ConfigError("pod.rank: exceeds the covariate dimension " + std::to_string(m));
    const PODResult r = stage("pod", [&] { return pod(x, rank); });
    ctx.resolved.emplace_back("resolved.pod_rank", fmt(rank));

    std::vector<std::string> header{"j", "singular_value"};
    for (std::size_t i = 0; i < m; ++i) header.push_back("eof_" + std::to_string(i));
    ResultTable table(header);
    for (std::size_t j = 0; j < rank; ++j) {
        const auto ji = static_cast<Eigen::Index>(j);
        std::vector<std::string> row{fmt(j), fmt(r.singular_values(ji))};
        for (std::size_t i = 0; i < m; ++i) row.push_back(fmt(r.eofs(static_cast<Eigen::Index>(i), ji)));
        table.add_row(std::move(row));
    }
    ctx.write(table, "pod.csv");

    std::vector<std::string> pc_header{"n", "t"};
    for (std::size_t j = 0; j < rank; ++j) pc_header.push_back("pc_" + std::to_string(j));
    ResultTable pcs(pc_header);
    for (Eigen::Index n = 0; n < r.pcs.rows(); ++n) {
        std::vector<std::string> row{fmt(n), fmt(ctx.time_of(static_cast<std::size_t>(n)))};
        for (Eigen::Index j = 0; j < r.pcs.cols(); ++j) row.push_back(fmt(r.pcs(n, j)));
        pcs.add_row(std::move(row));
    }
    ctx.write(pcs, "pod_pcs.csv");
}

}  // namespace

TrajectoryDataset simulate_configured(const ExperimentConfig& config) {
    return stage("simulate", [&] { return simulate(config.system, config.covariate, config.response); });
}

std::vector<fs::path> run(const ExperimentConfig& config) {
    config.validate();
    const TrajectoryDataset data = simulate_configured(config);
    return run(config, data);
}

std::vector<fs::path> run(const ExperimentConfig& config, const TrajectoryDataset& dataset) {
    config.validate();
    if (dataset.size() != config.system.n_samples) {
        throw ConfigError("dataset has " + std::to_string(dataset.size()) + " samples, config expects " +
                          std::to_string(config.system.n_samples));
    }

    Normalization normalization = config.kernel.normalization;
    if ((config.mode == RunMode::kaf || config.mode == RunMode::patterns) && !config.normalization_explicit) {
        normalization = Normalization::symmetric;
    }

    RunContext ctx{config, dataset, normalization, config.train_count(), config.test_count(), {}, {}, {}};
    ctx.resolved.emplace_back("resolved.normalization", to_string(normalization));
    ctx.resolved.emplace_back("resolved.train_samples", fmt(ctx.n_train));
    ctx.resolved.emplace_back("resolved.test_samples", fmt(ctx.n_test));

    fs::create_directories(config.output_dir);
    switch (config.mode) {
        case RunMode::eigen: run_eigen(ctx); break;
        case RunMode::df: run_df(ctx); break;
        case RunMode::kaf: run_kaf(ctx); break;
        case RunMode::analog: run_analog(ctx); break;
        case RunMode::patterns: run_patterns(ctx); break;
        case RunMode::autocorr: run_autocorr(ctx); break;
        case RunMode::pod: run_pod(ctx); break;
    }

    ResultTable manifest({"key", "value"});
    for (const auto& [k, v] : config.describe()) manifest.add_row({k, v});
    for (const auto& [k, v] : ctx.resolved) manifest.add_row({k, v});
    for (std::size_t i = 0; i < ctx.warnings.size(); ++i) manifest.add_row({"warning." + fmt(i), ctx.warnings[i]});
    for (std::size_t i = 0; i < ctx.written.size(); ++i) {
        manifest.add_row({"artifact." + fmt(i), ctx.written[i].filename().string()});
    }
    ctx.write(manifest, "manifest.csv");
    return ctx.written;
}

}  // namespace koopkit
