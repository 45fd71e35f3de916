#include "koopkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include <lapacke.h>

// OpenBLAS runtime kernel selection.
extern "C" {
void gotoblas_dynamic_init(void);
void gotoblas_dynamic_quit(void);
}

namespace koopkit {

namespace {

// Relative eigen-residual of a fixed symmetric test matrix, large enough to hit blocked code paths.
double backend_residual() {
    const lapack_int n = 200;
    Matrix a(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            a(i, j) = std::cos(0.37 * static_cast<double>(i * j)) + 1.0 / (1.0 + std::abs(static_cast<double>(i - j)));
        }
    }
    Matrix c = a;
    Vector w(n);
    Matrix z(n, n);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'A', 'L', n, c.data(), n, 0.0, 0.0, 0, 0, 0.0,
                                           &found, w.data(), z.data(), n, support.data());
    if (info != 0 || found != n) return 1.0;
    return (a * z - z * w.asDiagonal()).norm() / a.norm();
}

// Some OpenBLAS builds auto-select a kernel that returns wrong results on certain CPUs.
// Verify once, and fall back to a known-good kernel family if the check fails.
void ensure_lapack_backend() {
    static std::once_flag once;
    static bool healthy = false;
    std::call_once(once, [] {
        constexpr double kTolerance = 1e-10;
        if (backend_residual() < kTolerance) {
            healthy = true;
            return;
        }
        for (const char* core : {"SkylakeX", "Haswell", "Sandybridge"}) {
            gotoblas_dynamic_quit();
            setenv("OPENBLAS_CORETYPE", core, 1);
            gotoblas_dynamic_init();
            if (backend_residual() < kTolerance) {
                healthy = true;
                return;
            }
        }
    });
    if (!healthy) throw NumericalError("LAPACK backend failed its eigensolver self-check");
}

}  // namespace

SymmetricEigenpairs top_eigenpairs(Matrix symmetric, std::size_t count) {
    ensure_lapack_backend();
    const auto n = static_cast<lapack_int>(symmetric.rows());
    if (symmetric.rows() != symmetric.cols()) throw ConfigError("top_eigenpairs: matrix is not square");
    if (count == 0 || static_cast<lapack_int>(count) > n) {
        throw ConfigError("top_eigenpairs: requested " + std::to_string(count) + " of " + std::to_string(n) +
                          " eigenpairs");
    }
    const auto k = static_cast<lapack_int>(count);
    std::vector<double> w(static_cast<std::size_t>(n));
    Matrix z(n, k);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, symmetric.data(), n, 0.0, 0.0,
                                           n - k + 1, n, 0.0, &found, w.data(), z.data(), n, support.data());
    if (info != 0 || found != k) {
        throw NumericalError("symmetric eigensolver failed (LAPACK info " + std::to_string(info) + ")");
    }
    SymmetricEigenpairs out;
    out.values.resize(k);
    out.vectors.resize(n, k);
    for (lapack_int j = 0; j < k; ++j) {
        out.values(j) = w[static_cast<std::size_t>(k - 1 - j)];
        out.vectors.col(j) = z.col(k - 1 - j);
    }
    return out;
}

namespace {

void fix_phase(Eigen::Ref<CVector> v) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        if (a > mag) {
            mag = a;
            best = i;
        }
    }
    if (mag > 0.0) v *= std::conj(v(best)) / mag;
    v(best) = Complex(std::abs(v(best)), 0.0);
    v.normalize();
}

}  // namespace

SkewEigenpairs skew_eigen(const Matrix& skew, double zero_tolerance) {
    const Eigen::Index n = skew.rows();
    if (n != skew.cols()) throw ConfigError("skew_eigen: matrix is not square");
    if (n == 0) return {};

    // i*A is Hermitian; A w = -i*mu w for each eigenpair (mu, w) of i*A.
    const CMatrix hermitian = Complex(0.0, 1.0) * skew.cast<Complex>();
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian);
    if (solver.info() != Eigen::Success) throw NumericalError("skew-symmetric eigensolver failed");

    const Vector mu = solver.eigenvalues();  // ascending
    const double scale = mu.cwiseAbs().maxCoeff();
    const double tol = zero_tolerance * std::max(scale, 1e-300);

    // Positive frequencies correspond to negative mu; take them in ascending order of |mu|.
    std::vector<Eigen::Index> positive;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        if (-mu(i) > tol) positive.push_back(i);
    }
    std::sort(positive.begin(), positive.end(), [&](Eigen::Index a, Eigen::Index b) { return -mu(a) < -mu(b); });
    const Eigen::Index pairs = static_cast<Eigen::Index>(positive.size());
    const Eigen::Index zeros = n - 2 * pairs;

    SkewEigenpairs out;
    out.frequencies.resize(n);
    out.vectors.resize(n, n);
    Eigen::Index col = 0;

    if (zeros > 0) {
        // Real orthonormal null-space basis from A^T A.
        Eigen::SelfAdjointEigenSolver<Matrix> gram(skew.transpose() * skew);
        if (gram.info() != Eigen::Success) throw NumericalError("skew-symmetric null-space solve failed");
        for (Eigen::Index z = 0; z < zeros; ++z, ++col) {
            out.frequencies(col) = 0.0;
            out.vectors.col(col) = gram.eigenvectors().col(z).cast<Complex>();
            fix_phase(out.vectors.col(col));
        }
    }
    for (Eigen::Index p = 0; p < pairs; ++p) {
        const Eigen::Index i = positive[static_cast<std::size_t>(p)];
        CVector w = solver.eigenvectors().col(i);
        fix_phase(w);
        out.frequencies(col) = -mu(i);
        out.vectors.col(col) = w;
        ++col;
        out.frequencies(col) = mu(i);
        out.vectors.col(col) = w.conjugate();
        ++col;
    }
    return out;
}

}  // namespace koopkit
