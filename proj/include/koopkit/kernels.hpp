#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "koopkit/common.hpp"
#include "koopkit/dynamics.hpp"

namespace koopkit {

enum class KernelFamily { gaussian, covariance };
enum class Normalization { none, symmetric, markov };

std::string to_string(KernelFamily family);
std::string to_string(Normalization normalization);
KernelFamily parse_kernel_family(std::string_view text);
Normalization parse_normalization(std::string_view text);

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double epsilon = 1.0;  // squared-distance units; unused by the covariance family
    std::size_t delay_Q = 1;
    Normalization normalization = Normalization::markov;
    double alpha = 1.0;  // density exponent of the first normalization stage

    void validate() const;
};

/// Dense kernel matrix on the training samples.
///
/// After `normalize`, `density_q` holds the raw row sums q_i and `degree_d`
/// the second-stage degrees d_i; both are empty for an unnormalized kernel.
/// For the Markov normalization the values P satisfy the detailed balance
/// relation d_i P_ij = d_j P_ji.
struct KernelMatrix {
    Matrix values;
    Normalization normalization = Normalization::none;
    Vector degree_d;
    Vector density_q;
    KernelSpec spec;
    std::size_t base_offset = 0;

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

/// Delay-averaged squared distances: ||row_i - row_j||^2 / Q.
Matrix pairwise_sqdist(const DelayEmbedding& embedding);
Matrix pairwise_sqdist(const Matrix& rows, std::size_t Q);

/// Gaussian kernel exp(-sqdist / epsilon). Takes ownership of `sqdist` and evaluates in place.
KernelMatrix kernel_eval(const KernelSpec& spec, Matrix sqdist, std::size_t base_offset = 0);

/// Covariance kernel <x_i, x_j> on raw covariate (or delay-vector) rows.
KernelMatrix covariance_kernel(const KernelSpec& spec, const Matrix& covariates, std::size_t base_offset = 0);

/// Two-stage diffusion-maps normalization (density exponent alpha, then symmetric or Markov).
KernelMatrix normalize(const KernelMatrix& raw, Normalization mode, double alpha);

/// Median of the strictly positive off-diagonal squared distances.
double median_bandwidth(const Matrix& sqdist);

struct OutOfSampleRow {
    Vector values;
    bool out_of_domain = false;
};

/// Training-side state needed to evaluate normalized kernel sections at new points.
class KernelFeatureMap {
public:
    KernelFeatureMap() = default;
    KernelFeatureMap(const KernelMatrix& trained, const DelayEmbedding& embedding);

    /// Markov density row at x: nonnegative, (1/N) sum_n row_n = 1.
    /// Falls back to the uniform row (all ones) when every raw weight underflows.
    OutOfSampleRow density_row(std::span<const double> x) const;

    /// Row consistent with the training normalization, scaled so that at a training
    /// point x_k it equals N times row k of the trained kernel matrix.
    OutOfSampleRow operator_row(std::span<const double> x) const;

    /// Unnormalized Gaussian weights exp(-||x - x_n||^2 / (Q epsilon)).
    Vector raw_row(std::span<const double> x) const;

    std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
    std::size_t dimension() const { return static_cast<std::size_t>(points_.cols()); }
    const KernelSpec& spec() const { return spec_; }
    Normalization normalization() const { return normalization_; }

private:
    struct Stage1 {
        Vector k1;
        double degree = 0.0;
        bool out_of_domain = false;
    };
    Stage1 first_stage(std::span<const double> x) const;

    KernelSpec spec_;
    Normalization normalization_ = Normalization::none;
    Matrix points_;
    Vector density_q_;
    Vector degree_d_;
};

/// Equivalent to KernelFeatureMap(trained, embedding).density_row(x).
OutOfSampleRow out_of_sample_row(const KernelMatrix& trained, const DelayEmbedding& embedding,
                                 std::span<const double> x);

inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace koopkit
