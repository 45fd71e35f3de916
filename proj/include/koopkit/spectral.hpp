#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "koopkit/common.hpp"
#include "koopkit/dynamics.hpp"
#include "koopkit/kernels.hpp"

namespace koopkit {

/// Data-driven basis of L^2(mu_N) from the leading eigenvectors of a normalized kernel.
///
/// `phi` holds sampled eigenfunctions (unit norm in L^2(mu_N), where
/// <f, g> = (1/N) sum_n f_n g_n) and `phi_dual` the dual basis, with
/// <phi_dual_i, phi_j> = delta_ij. For a symmetric kernel the two coincide.
struct EigenBasis {
    Vector eigenvalues;
    Matrix phi;
    Matrix phi_dual;
    Normalization normalization = Normalization::markov;
    std::size_t requested = 0;
    std::vector<std::string> warnings;

    std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
    std::size_t samples() const { return static_cast<std::size_t>(phi.rows()); }
};

/// Eigenvalues below this fraction of lambda_0 are treated as numerically zero.
inline constexpr double kRankThreshold = 1e-14;

EigenBasis eigenbasis(const KernelMatrix& kernel, std::size_t L);

struct NystromResult {
    Vector values;
    std::vector<std::size_t> omitted;  // components skipped because lambda_j is below threshold
    bool out_of_domain = false;
};

/// Continuous extension of each basis function to the point x.
NystromResult nystrom(const EigenBasis& basis, const KernelFeatureMap& features, std::span<const double> x);

/// Matrix elements <phi'_i, U^q phi_j> of the q-step shift operator.
struct KoopmanMatrix {
    std::size_t q = 0;
    double dt = 0.0;
    Matrix entries;
};

KoopmanMatrix shift_matrix(const EigenBasis& basis, std::size_t q, double dt = 0.0);

struct PODResult {
    Vector singular_values;
    Matrix eofs;  // m x L
    Matrix pcs;   // N x L, pcs(n, j) = <eof_j, y_n>
};

/// Proper orthogonal decomposition of the data rows y_n (N x m).
PODResult pod(const Matrix& data, std::size_t L);
PODResult pod(const TrajectoryDataset& dataset, std::size_t L);

/// Normalized autocorrelation C(q)/C(0), C(q) = (1/(N-q)) sum_n conj(f_n) f_{n+q}.
CVector autocorrelation(const CVector& series, std::size_t q_max, bool center);

}  // namespace koopkit
