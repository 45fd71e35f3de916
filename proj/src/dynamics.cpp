#include "koopkit/dynamics.hpp"

#include <charconv>
#include <cmath>
#include <string>

namespace koopkit {

namespace {

// Parses "name(<index>)" and returns the index, or throws.
std::size_t parse_indexed(std::string_view text, std::string_view name) {
    const std::string_view rest = text.substr(name.size());
    if (rest.size() < 3 || rest.front() != '(' || rest.back() != ')') {
        throw ConfigError("expected " + std::string(name) + "(<index>), got '" + std::string(text) + "'");
    }
    const std::string_view digits = rest.substr(1, rest.size() - 2);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) {
        throw ConfigError("invalid index in '" + std::string(text) + "'");
    }
    return value;
}

bool starts_with(std::string_view text, std::string_view prefix) {
    return text.substr(0, prefix.size()) == prefix;
}

double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

}  // namespace

std::string to_string(ModelId id) {
    return id == ModelId::lorenz63 ? "lorenz63" : "torus_rotation";
}

ModelId parse_model_id(std::string_view text) {
    if (text == "lorenz63") return ModelId::lorenz63;
    if (text == "torus_rotation") return ModelId::torus_rotation;
    throw ConfigError("unknown model '" + std::string(text) + "'");
}

SystemSpec SystemSpec::lorenz63_default() { return SystemSpec{}; }

SystemSpec SystemSpec::torus_default() {
    SystemSpec spec;
    spec.model = ModelId::torus_rotation;
    spec.parameters = {1.0, std::sqrt(2.0)};
    spec.dt = 0.05;
    spec.spinup_steps = 0;
    spec.initial_state = {0.0, 0.0};
    spec.integrator_substeps = 1;
    return spec;
}

void SystemSpec::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (n_samples < 2) throw ConfigError("n_samples must be at least 2");
    if (integrator_substeps < 1) throw ConfigError("integrator_substeps must be at least 1");
    const std::size_t dim = model == ModelId::lorenz63 ? 3 : 2;
    if (parameters.size() != dim) {
        throw ConfigError(to_string(model) + " expects " + std::to_string(dim) + " parameters");
    }
    if (initial_state.size() != dim) {
        throw ConfigError(to_string(model) + " expects a " + std::to_string(dim) + "-dimensional initial state");
    }
    for (double v : parameters) {
        if (!std::isfinite(v)) throw ConfigError("parameters must be finite");
    }
    for (double v : initial_state) {
        if (!std::isfinite(v)) throw ConfigError("initial_state must be finite");
    }
}

CovariateMap CovariateMap::parse(std::string_view text) {
    if (text == "identity") return identity();
    if (text == "torus_embedding") return torus_embedding();
    if (starts_with(text, "coordinate_projection")) {
        return coordinate_projection(parse_indexed(text, "coordinate_projection"));
    }
    if (starts_with(text, "angle_embedding")) return angle_embedding(parse_indexed(text, "angle_embedding"));
    throw ConfigError("unknown covariate map '" + std::string(text) + "'");
}

std::string CovariateMap::to_string() const {
    switch (kind) {
        case Kind::identity: return "identity";
        case Kind::coordinate_projection: return "coordinate_projection(" + std::to_string(index) + ")";
        case Kind::angle_embedding: return "angle_embedding(" + std::to_string(index) + ")";
        case Kind::torus_embedding: return "torus_embedding";
    }
    return "identity";
}

ResponseMap ResponseMap::parse(std::string_view text) {
    if (starts_with(text, "coordinate")) return coordinate(parse_indexed(text, "coordinate"));
    if (starts_with(text, "cos")) return cosine(parse_indexed(text, "cos"));
    if (starts_with(text, "sin")) return sine(parse_indexed(text, "sin"));
    throw ConfigError("unknown response map '" + std::string(text) + "'");
}

std::string ResponseMap::to_string() const {
    switch (kind) {
        case Kind::coordinate: return "coordinate(" + std::to_string(index) + ")";
        case Kind::cosine: return "cos(" + std::to_string(index) + ")";
        case Kind::sine: return "sin(" + std::to_string(index) + ")";
    }
    return "coordinate(0)";
}

TrajectoryDataset TrajectoryDataset::head(std::size_t count) const {
    const auto n = static_cast<Eigen::Index>(count);
    TrajectoryDataset out;
    out.dt = dt;
    out.states = states.topRows(n);
    out.covariates = covariates.topRows(n);
    out.responses = responses.head(n);
    out.covariate_map = covariate_map;
    return out;
}

std::array<double, 3> lorenz63_field(const std::array<double, 3>& x, std::span<const double> params) {
    const double sigma = params[0];
    const double rho = params[1];
    const double beta = params[2];
    return {sigma * (x[1] - x[0]), x[0] * (rho - x[2]) - x[1], x[0] * x[1] - beta * x[2]};
}

std::array<double, 3> lorenz63_rk4_step(const std::array<double, 3>& x, std::span<const double> params, double h) {
    auto axpy = [](const std::array<double, 3>& a, double s, const std::array<double, 3>& b) {
        return std::array<double, 3>{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
    };
    const auto k1 = lorenz63_field(x, params);
    const auto k2 = lorenz63_field(axpy(x, 0.5 * h, k1), params);
    const auto k3 = lorenz63_field(axpy(x, 0.5 * h, k2), params);
    const auto k4 = lorenz63_field(axpy(x, h, k3), params);
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

std::array<double, 2> exact_torus_flow(const std::array<double, 2>& omega0, const std::array<double, 2>& nu, double t) {
    return {wrap_angle(omega0[0] + nu[0] * t), wrap_angle(omega0[1] + nu[1] * t)};
}

TrajectoryDataset simulate(const SystemSpec& spec, const CovariateMap& covariate, const ResponseMap& response) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(spec.n_samples);

    TrajectoryDataset out;
    out.dt = spec.dt;
    out.covariate_map = covariate;

    if (spec.model == ModelId::lorenz63) {
        out.states.resize(n, 3);
        std::array<double, 3> x{spec.initial_state[0], spec.initial_state[1], spec.initial_state[2]};
        const double h = spec.dt / static_cast<double>(spec.integrator_substeps);
        std::size_t step = 0;
        const std::size_t total = spec.spinup_steps + spec.n_samples;
        for (std::size_t s = 0; s < total; ++s) {
            if (s >= spec.spinup_steps) {
                const auto row = static_cast<Eigen::Index>(s - spec.spinup_steps);
                out.states.row(row) << x[0], x[1], x[2];
            }
            if (s + 1 == total) break;
            for (std::size_t k = 0; k < spec.integrator_substeps; ++k, ++step) {
                x = lorenz63_rk4_step(x, spec.parameters, h);
                if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2])) {
                    throw IntegrationDivergence(step, "Lorenz 63 integration diverged at step " + std::to_string(step));
                }
            }
        }
    } else {
        out.states.resize(n, 2);
        const std::array<double, 2> omega0{spec.initial_state[0], spec.initial_state[1]};
        const std::array<double, 2> nu{spec.parameters[0], spec.parameters[1]};
        for (Eigen::Index i = 0; i < n; ++i) {
            // Time is formed from the sample index, so trajectories sampled at dt and dt/2
            // share every other point exactly.
            const double t = static_cast<double>(spec.spinup_steps + static_cast<std::size_t>(i)) * spec.dt;
            const auto w = exact_torus_flow(omega0, nu, t);
            out.states(i, 0) = w[0];
            out.states(i, 1) = w[1];
        }
    }

    out.covariates = apply_covariate(out.states, covariate);
    out.responses = apply_response(out.states, response);
    return out;
}

Matrix apply_covariate(const Matrix& states, const CovariateMap& map) {
    const Eigen::Index d = states.cols();
    auto check = [&](std::size_t i) {
        if (static_cast<Eigen::Index>(i) >= d) {
            throw ConfigError("covariate index " + std::to_string(i) + " out of range for state dimension " +
                              std::to_string(d));
        }
    };
    switch (map.kind) {
        case CovariateMap::Kind::identity: return states;
        case CovariateMap::Kind::coordinate_projection: {
            check(map.index);
            return states.col(static_cast<Eigen::Index>(map.index));
        }
        case CovariateMap::Kind::angle_embedding: {
            check(map.index);
            Matrix out(states.rows(), 2);
            const auto col = states.col(static_cast<Eigen::Index>(map.index));
            out.col(0) = col.array().cos();
            out.col(1) = col.array().sin();
            return out;
        }
        case CovariateMap::Kind::torus_embedding: {
            Matrix out(states.rows(), 2 * d);
            out.leftCols(d) = states.array().cos().matrix();
            out.rightCols(d) = states.array().sin().matrix();
            return out;
        }
    }
    return states;
}

Vector apply_response(const Matrix& states, const ResponseMap& map) {
    if (static_cast<Eigen::Index>(map.index) >= states.cols()) {
        throw ConfigError("response index " + std::to_string(map.index) + " out of range");
    }
    const auto col = states.col(static_cast<Eigen::Index>(map.index));
    switch (map.kind) {
        case ResponseMap::Kind::coordinate: return col;
        case ResponseMap::Kind::cosine: return col.array().cos().matrix();
        case ResponseMap::Kind::sine: return col.array().sin().matrix();
    }
    return col;
}

DelayEmbedding delay_embed(const Matrix& covariates, std::size_t Q) {
    const auto n = static_cast<std::size_t>(covariates.rows());
    if (Q < 1) throw ConfigError("delay count Q must be at least 1");
    if (Q > n) throw ConfigError("delay count Q=" + std::to_string(Q) + " exceeds sample count " + std::to_string(n));

    const Eigen::Index m = covariates.cols();
    const auto rows = static_cast<Eigen::Index>(n - Q + 1);
    DelayEmbedding out;
    out.Q = Q;
    out.base_index_offset = Q - 1;
    out.rows.resize(rows, m * static_cast<Eigen::Index>(Q));
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index base = r + static_cast<Eigen::Index>(Q) - 1;
        for (Eigen::Index q = 0; q < static_cast<Eigen::Index>(Q); ++q) {
            out.rows.block(r, q * m, 1, m) = covariates.row(base - q);
        }
    }
    return out;
}

DelayEmbedding delay_embed(const TrajectoryDataset& dataset, std::size_t Q) {
    return delay_embed(dataset.covariates, Q);
}

Vector delay_vector(const Matrix& covariates, std::size_t n, std::size_t Q) {
    if (Q < 1 || n + 1 < Q || n >= static_cast<std::size_t>(covariates.rows())) {
        throw ConfigError("delay vector at sample " + std::to_string(n) + " needs " + std::to_string(Q) +
                          " samples of history");
    }
    const Eigen::Index m = covariates.cols();
    Vector out(m * static_cast<Eigen::Index>(Q));
    for (Eigen::Index q = 0; q < static_cast<Eigen::Index>(Q); ++q) {
        out.segment(q * m, m) = covariates.row(static_cast<Eigen::Index>(n) - q).transpose();
    }
    return out;
}

}  // namespace koopkit
