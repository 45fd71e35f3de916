#pragma once

#include <cstddef>

#include "koopkit/common.hpp"
#include "koopkit/spectral.hpp"

namespace koopkit {

/// Compactified generator of the Koopman group in a truncated eigenbasis.
///
/// `V_compact` = Lambda^{1/2} V_raw Lambda^{1/2}. Its eigenvalues are i * frequencies;
/// `eigvec_coeffs` holds the corresponding unit coefficient vectors (columns) and
/// `dirichlet_energies` their roughness. Columns are ordered by |frequency| with
/// conjugate pairs adjacent, positive member first. `fd_frequencies` lists the
/// nonnegative frequencies of the uncompactified finite-difference generator V_raw,
/// ascending.
struct GeneratorModel {
    Matrix V_raw;
    Matrix V_compact;
    Vector eigenvalues;  // the lambda_j used for compactification
    Vector frequencies;
    CMatrix eigvec_coeffs;
    Vector dirichlet_energies;
    Vector fd_frequencies;
    double dt = 0.0;
    std::size_t L = 0;
};

/// (A - A^T) / (2 dt) with A the one-step shift matrix; exactly skew-symmetric.
Matrix generator_fd(const EigenBasis& basis, double dt);

GeneratorModel compactify(const Matrix& V_raw, const Vector& lambda, double dt);

/// Convenience: generator_fd followed by compactify with the basis eigenvalues.
GeneratorModel build_generator(const EigenBasis& basis, double dt);

/// RKHS-to-L^2 norm ratio sum |c_j|^2 / lambda_j / sum |c_j|^2.
double dirichlet(const CVector& coeffs, const Vector& lambda);

/// ||U z - exp(i alpha q dt) z|| / ||z|| in coefficient space.
double approx_eigen_residual(const KoopmanMatrix& shift, const CVector& z, double alpha);
double approx_eigen_residual(const EigenBasis& basis, const CVector& z, double alpha, std::size_t q, double dt);

/// min over complex lambda_t of ||U z - lambda_t z|| / ||z||; the minimizer is <z, U z> / ||z||^2.
double optimal_eigen_residual(const KoopmanMatrix& shift, const CVector& z);

/// Samples of the j-th generator eigenfunction along the training trajectory, unit L^2(mu_N) norm.
CVector eigenfunction_timeseries(const GeneratorModel& model, const EigenBasis& basis, std::size_t j);

}  // namespace koopkit
