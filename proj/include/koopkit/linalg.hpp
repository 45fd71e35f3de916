#pragma once

#include <cstddef>

#include "koopkit/common.hpp"

namespace koopkit {

struct SymmetricEigenpairs {
    Vector values;   // descending
    Matrix vectors;  // orthonormal columns
};

/// Largest `count` eigenpairs of a real symmetric matrix (lower triangle is read).
/// Throws NumericalError if LAPACK reports failure.
SymmetricEigenpairs top_eigenpairs(Matrix symmetric, std::size_t count);

/// Eigen-decomposition of a real skew-symmetric matrix A.
///
/// Columns of `vectors` are unit eigenvectors, A w = i * frequency * w. Nonzero
/// frequencies come in exact conjugate pairs (w, conj(w)) with the positive member
/// first; pairs are sorted by |frequency| ascending, zero modes first. Each vector's
/// largest-magnitude component is real and positive.
struct SkewEigenpairs {
    Vector frequencies;
    CMatrix vectors;
};

SkewEigenpairs skew_eigen(const Matrix& skew, double zero_tolerance = 1e-12);

}  // namespace koopkit
