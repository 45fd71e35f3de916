#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "koopkit/common.hpp"
#include "koopkit/kernels.hpp"
#include "koopkit/spectral.hpp"

namespace koopkit {

struct Prediction {
    double mean = 0.0;
    double sigma = 0.0;
    bool fallback = false;  // out-of-domain query answered with climatology
};

// ---------------------------------------------------------------------------
// Diffusion forecasting
// ---------------------------------------------------------------------------

/// Expansion coefficients <phi_j, rho>_{mu_N} of a density rho on the samples.
/// Paired with `response_coefficients`, rho^T U(q) Y equals the mu_N-average of
/// rho_L(w_n) * (Pi_L Y)(w_{n+q}), rho_L = sum_j <phi_j, rho> phi'_j.
Vector density_coefficients(const EigenBasis& basis, const Vector& density);

/// Expansion coefficients <phi'_j, y>_{mu_N}, so that Pi_L y = sum_j c_j phi_j.
Vector response_coefficients(const EigenBasis& basis, const Vector& responses);

double df_forecast(const KoopmanMatrix& shift, const Vector& density_coeffs, const Vector& response_coeffs);
double df_forecast(const EigenBasis& basis, const Vector& density_coeffs, const Vector& response_coeffs,
                   std::size_t q);

// ---------------------------------------------------------------------------
// Kernel analog forecasting
// ---------------------------------------------------------------------------

/// Expansion coefficients of the shifted response (and its square) in a symmetric
/// eigenbasis, one row per lead q = 0..q_max.
struct KAFModel {
    std::shared_ptr<const EigenBasis> basis;
    std::size_t L = 0;
    std::size_t q_max = 0;
    Matrix coeffs;
    Matrix coeffs_sq;
    double response_mean = 0.0;
    double response_std = 0.0;
    double response_min = 0.0;
    double response_max = 0.0;
};

KAFModel kaf_fit(std::shared_ptr<const EigenBasis> basis, const Vector& responses, std::size_t q_max, std::size_t L);

/// Nystrom numerators nu_j(x) / lambda_j for j < L; shared across lead times.
struct KAFFeatures {
    Vector scaled;
    bool out_of_domain = false;
};

KAFFeatures kaf_features(const KAFModel& model, const KernelFeatureMap& features, std::span<const double> x);
Prediction kaf_predict(const KAFModel& model, const KAFFeatures& features, std::size_t q);
Prediction kaf_predict(const KAFModel& model, const KernelFeatureMap& features, std::span<const double> x,
                       std::size_t q);

// ---------------------------------------------------------------------------
// Analog baseline
// ---------------------------------------------------------------------------

/// Mean of y_{n+q} over the k training covariates nearest to x (n <= N-1-q).
/// `sigma` is the spread of the analog ensemble.
Prediction analog_forecast(const Matrix& covariates, const Vector& responses, std::span<const double> x,
                           std::size_t q, std::size_t k_neighbors);

// ---------------------------------------------------------------------------
// Skill scores
// ---------------------------------------------------------------------------

struct ForecastRecord {
    std::size_t point = 0;
    std::size_t q = 0;
    double prediction = 0.0;
    double sigma = 0.0;
    double truth = 0.0;
    bool fallback = false;
};

struct ForecastSeries {
    std::vector<std::size_t> leads;
    Vector lead_times;
    Vector rmse;
    Vector mean_sigma;
    std::vector<std::size_t> counts;
    std::vector<ForecastRecord> records;
};

using Forecaster = std::function<Prediction(std::size_t point, std::size_t q)>;
/// Verifying value for a test point at lead q, or nullopt when it falls outside the data.
using TruthSource = std::function<std::optional<double>(std::size_t point, std::size_t q)>;

ForecastSeries rmse_curve(const Forecaster& forecaster, const TruthSource& truth, std::size_t n_points,
                          const std::vector<std::size_t>& leads, double dt);

}  // namespace koopkit
