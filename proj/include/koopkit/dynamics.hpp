#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "koopkit/common.hpp"

namespace koopkit {

enum class ModelId { lorenz63, torus_rotation };

std::string to_string(ModelId id);
ModelId parse_model_id(std::string_view text);

/// Reference system plus sampling schedule.
///
/// For Lorenz 63 `parameters` holds (sigma, rho, beta); for the torus rotation
/// it holds the frequencies (nu1, nu2). Samples are recorded every `dt` time
/// units after `spinup_steps` samples have been discarded.
struct SystemSpec {
    ModelId model = ModelId::lorenz63;
    std::vector<double> parameters{10.0, 28.0, 8.0 / 3.0};
    double dt = 0.05;
    std::size_t n_samples = 2000;
    std::size_t spinup_steps = 2000;
    std::vector<double> initial_state{1.0, 1.0, 1.0};
    std::size_t integrator_substeps = 5;

    static SystemSpec lorenz63_default();
    static SystemSpec torus_default();

    /// Throws ConfigError on violated invariants.
    void validate() const;
};

/// Covariate map X applied row-wise to states.
///
/// `angle_embedding(i)` and `torus_embedding` map angles onto unit circles,
/// (cos w_i, sin w_i), so that Euclidean kernels on the covariates are
/// continuous across the 2*pi seam.
struct CovariateMap {
    enum class Kind { identity, coordinate_projection, angle_embedding, torus_embedding };

    Kind kind = Kind::identity;
    std::size_t index = 0;

    static CovariateMap identity() { return {}; }
    static CovariateMap coordinate_projection(std::size_t i) { return {Kind::coordinate_projection, i}; }
    static CovariateMap angle_embedding(std::size_t i) { return {Kind::angle_embedding, i}; }
    static CovariateMap torus_embedding() { return {Kind::torus_embedding, 0}; }

    static CovariateMap parse(std::string_view text);
    std::string to_string() const;

    friend bool operator==(const CovariateMap&, const CovariateMap&) = default;
};

/// Scalar response Y applied to states: a coordinate, or cos/sin of an angle.
struct ResponseMap {
    enum class Kind { coordinate, cosine, sine };

    Kind kind = Kind::coordinate;
    std::size_t index = 0;

    static ResponseMap coordinate(std::size_t i) { return {Kind::coordinate, i}; }
    static ResponseMap cosine(std::size_t i) { return {Kind::cosine, i}; }
    static ResponseMap sine(std::size_t i) { return {Kind::sine, i}; }

    static ResponseMap parse(std::string_view text);
    std::string to_string() const;

    friend bool operator==(const ResponseMap&, const ResponseMap&) = default;
};

/// Samples of a trajectory: states w_n, covariates x_n = X(w_n), responses y_n = Y(w_n).
struct TrajectoryDataset {
    double dt = 0.0;
    Matrix states;
    Matrix covariates;
    Vector responses;
    CovariateMap covariate_map;

    std::size_t size() const { return static_cast<std::size_t>(states.rows()); }

    /// Leading `count` samples (a contiguous time window starting at sample 0).
    TrajectoryDataset head(std::size_t count) const;
};

/// Rows n - (Q-1) hold (x_n, x_{n-1}, ..., x_{n-Q+1}).
struct DelayEmbedding {
    std::size_t Q = 1;
    Matrix rows;
    std::size_t base_index_offset = 0;

    std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
};

std::array<double, 3> lorenz63_field(const std::array<double, 3>& x, std::span<const double> params);

/// One classical fourth-order Runge-Kutta step of the Lorenz 63 field.
std::array<double, 3> lorenz63_rk4_step(const std::array<double, 3>& x, std::span<const double> params, double h);

std::array<double, 2> exact_torus_flow(const std::array<double, 2>& omega0, const std::array<double, 2>& nu, double t);

TrajectoryDataset simulate(const SystemSpec& spec, const CovariateMap& covariate = CovariateMap::identity(),
                           const ResponseMap& response = ResponseMap::coordinate(0));

Matrix apply_covariate(const Matrix& states, const CovariateMap& map);
Vector apply_response(const Matrix& states, const ResponseMap& map);

DelayEmbedding delay_embed(const Matrix& covariates, std::size_t Q);
DelayEmbedding delay_embed(const TrajectoryDataset& dataset, std::size_t Q);

/// Delay vector anchored at sample n (requires n >= Q-1).
Vector delay_vector(const Matrix& covariates, std::size_t n, std::size_t Q);

}  // namespace koopkit
