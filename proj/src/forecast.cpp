#include "koopkit/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace koopkit {

Vector density_coefficients(const EigenBasis& basis, const Vector& density) {
    if (static_cast<std::size_t>(density.size()) != basis.samples()) {
        throw ConfigError("density length differs from the basis sample count");
    }
    return basis.phi.transpose() * density / static_cast<double>(basis.samples());
}

Vector response_coefficients(const EigenBasis& basis, const Vector& responses) {
    if (static_cast<std::size_t>(responses.size()) != basis.samples()) {
        throw ConfigError("response length differs from the basis sample count");
    }
    return basis.phi_dual.transpose() * responses / static_cast<double>(basis.samples());
}

double df_forecast(const KoopmanMatrix& shift, const Vector& density_coeffs, const Vector& response_coeffs) {
    const Eigen::Index L = shift.entries.rows();
    if (density_coeffs.size() != L || response_coeffs.size() != L) {
        throw ConfigError("diffusion forecast: coefficient vectors must have length L");
    }
    return density_coeffs.dot(shift.entries * response_coeffs);
}

double df_forecast(const EigenBasis& basis, const Vector& density_coeffs, const Vector& response_coeffs,
                   std::size_t q) {
    return df_forecast(shift_matrix(basis, q), density_coeffs, response_coeffs);
}

KAFModel kaf_fit(std::shared_ptr<const EigenBasis> basis, const Vector& responses, std::size_t q_max, std::size_t L) {
    if (!basis) throw ConfigError("kaf_fit: missing basis");
    if (basis->normalization != Normalization::symmetric) {
        throw ConfigError("kernel analog forecasting requires a symmetric-normalized basis");
    }
    const std::size_t n = basis->samples();
    if (static_cast<std::size_t>(responses.size()) != n) {
        throw ConfigError("kaf_fit: response length differs from the basis sample count");
    }
    if (q_max >= n) throw ConfigError("kaf_fit: q_max must be below N");
    if (L == 0 || L > basis->size()) throw ConfigError("kaf_fit: L must lie in [1, basis size]");
    for (std::size_t j = 0; j < L; ++j) {
        if (!(basis->eigenvalues(static_cast<Eigen::Index>(j)) > 0.0)) {
            throw NumericalError("kaf_fit: eigenvalue " + std::to_string(j) + " is not positive; reduce L");
        }
    }

    KAFModel model;
    model.L = L;
    model.q_max = q_max;
    model.coeffs.resize(static_cast<Eigen::Index>(q_max + 1), static_cast<Eigen::Index>(L));
    model.coeffs_sq.resizeLike(model.coeffs);

    const Vector y2 = responses.array().square().matrix();
    for (std::size_t q = 0; q <= q_max; ++q) {
        const std::size_t count = n - q;
        const double inv = 1.0 / static_cast<double>(count);
        const double* y = responses.data() + q;
        const double* yy = y2.data() + q;
        for (std::size_t j = 0; j < L; ++j) {
            const double* p = basis->phi.col(static_cast<Eigen::Index>(j)).data();
            double s = 0.0;
            double s2 = 0.0;
            for (std::size_t k = 0; k < count; ++k) {
                s += p[k] * y[k];
                s2 += p[k] * yy[k];
            }
            model.coeffs(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = s * inv;
            model.coeffs_sq(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = s2 * inv;
        }
    }

    model.response_mean = responses.mean();
    model.response_std = std::sqrt((responses.array() - model.response_mean).square().mean());
    model.response_min = responses.minCoeff();
    model.response_max = responses.maxCoeff();
    model.basis = std::move(basis);
    return model;
}

KAFFeatures kaf_features(const KAFModel& model, const KernelFeatureMap& features, std::span<const double> x) {
    const EigenBasis& basis = *model.basis;
    const OutOfSampleRow row = features.operator_row(x);
    KAFFeatures out;
    out.out_of_domain = row.out_of_domain;
    if (row.out_of_domain) return out;
    const auto L = static_cast<Eigen::Index>(model.L);
    const double nn = static_cast<double>(basis.samples());
    out.scaled.resize(L);
    for (Eigen::Index j = 0; j < L; ++j) {
        out.scaled(j) = row.values.dot(basis.phi.col(j)) / (nn * basis.eigenvalues(j));
    }
    return out;
}

Prediction kaf_predict(const KAFModel& model, const KAFFeatures& features, std::size_t q) {
    if (q > model.q_max) throw ConfigError("kaf_predict: lead exceeds the fitted q_max");
    Prediction out;
    if (features.out_of_domain) {
        out.mean = model.response_mean;
        out.sigma = model.response_std;
        out.fallback = true;
        return out;
    }
    const auto row = static_cast<Eigen::Index>(q);
    out.mean = model.coeffs.row(row).dot(features.scaled);
    const double second = model.coeffs_sq.row(row).dot(features.scaled);
    const double range = model.response_max - model.response_min;
    out.sigma = std::min(std::sqrt(std::max(0.0, second - out.mean * out.mean)), range);
    return out;
}

Prediction kaf_predict(const KAFModel& model, const KernelFeatureMap& features, std::span<const double> x,
                       std::size_t q) {
    return kaf_predict(model, kaf_features(model, features, x), q);
}

Prediction analog_forecast(const Matrix& covariates, const Vector& responses, std::span<const double> x,
                           std::size_t q, std::size_t k_neighbors) {
    const auto n = static_cast<std::size_t>(covariates.rows());
    if (static_cast<std::size_t>(responses.size()) != n) throw ConfigError("analog_forecast: length mismatch");
    if (k_neighbors < 1) throw ConfigError("analog_forecast: k_neighbors must be at least 1");
    if (q >= n) throw ConfigError("analog_forecast: no admissible analogs for lead " + std::to_string(q));
    if (x.size() != static_cast<std::size_t>(covariates.cols())) {
        throw ConfigError("analog_forecast: query dimension mismatch");
    }
    const std::size_t admissible = n - q;
    std::vector<std::pair<double, std::size_t>> dist(admissible);
    for (std::size_t i = 0; i < admissible; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double diff = covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) - x[k];
            s += diff * diff;
        }
        dist[i] = {s, i};
    }
    const std::size_t k = std::min(k_neighbors, admissible);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += responses(static_cast<Eigen::Index>(dist[i].second + q));
    const double mean = sum / static_cast<double>(k);
    double var = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = responses(static_cast<Eigen::Index>(dist[i].second + q)) - mean;
        var += r * r;
    }
    return {mean, std::sqrt(var / static_cast<double>(k)), false};
}

ForecastSeries rmse_curve(const Forecaster& forecaster, const TruthSource& truth, std::size_t n_points,
                          const std::vector<std::size_t>& leads, double dt) {
    if (n_points == 0) throw ConfigError("rmse_curve: empty test set");
    if (leads.empty()) throw ConfigError("rmse_curve: no lead times");
    ForecastSeries out;
    out.leads = leads;
    const auto nl = static_cast<Eigen::Index>(leads.size());
    out.lead_times.resize(nl);
    out.rmse.resize(nl);
    out.mean_sigma.resize(nl);
    out.counts.assign(leads.size(), 0);
    for (Eigen::Index l = 0; l < nl; ++l) {
        const std::size_t q = leads[static_cast<std::size_t>(l)];
        double se = 0.0;
        double sig = 0.0;
        std::size_t count = 0;
        for (std::size_t p = 0; p < n_points; ++p) {
            const std::optional<double> t = truth(p, q);
            if (!t) continue;
            const Prediction pred = forecaster(p, q);
            const double err = pred.mean - *t;
            se += err * err;
            sig += pred.sigma;
            ++count;
            out.records.push_back({p, q, pred.mean, pred.sigma, *t, pred.fallback});
        }
        if (count == 0) {
            throw ConfigError("rmse_curve: no test point has verifying data at lead " + std::to_string(q));
        }
        out.lead_times(l) = static_cast<double>(q) * dt;
        out.rmse(l) = std::sqrt(se / static_cast<double>(count));
        out.mean_sigma(l) = sig / static_cast<double>(count);
        out.counts[static_cast<std::size_t>(l)] = count;
    }
    return out;
}

}  // namespace koopkit
