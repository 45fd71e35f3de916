#include "koopkit/generator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "koopkit/linalg.hpp"

namespace koopkit {

Matrix generator_fd(const EigenBasis& basis, double dt) {
    if (!(dt > 0.0)) throw ConfigError("generator_fd: dt must be positive");
    const Matrix a = shift_matrix(basis, 1, dt).entries;
    const Eigen::Index L = a.rows();
    const double inv = 1.0 / (2.0 * dt);
    Matrix v(L, L);
    for (Eigen::Index j = 0; j < L; ++j) {
        v(j, j) = 0.0;
        for (Eigen::Index i = j + 1; i < L; ++i) {
            const double value = (a(i, j) - a(j, i)) * inv;
            v(i, j) = value;
            v(j, i) = -value;
        }
    }
    return v;
}

GeneratorModel compactify(const Matrix& V_raw, const Vector& lambda, double dt) {
    const Eigen::Index L = V_raw.rows();
    if (V_raw.cols() != L) throw ConfigError("compactify: generator matrix is not square");
    if (lambda.size() < L) throw ConfigError("compactify: fewer eigenvalues than generator modes");
    for (Eigen::Index j = 0; j < L; ++j) {
        if (!(lambda(j) > 0.0)) {
            throw NumericalError("compactify: eigenvalue " + std::to_string(j) +
                                 " is not positive; rerun with a smaller basis size L (at most " +
                                 std::to_string(j) + ")");
        }
    }

    GeneratorModel model;
    model.V_raw = V_raw;
    model.eigenvalues = lambda.head(L);
    model.dt = dt;
    model.L = static_cast<std::size_t>(L);

    const Vector root = model.eigenvalues.array().sqrt().matrix();
    model.V_compact.resize(L, L);
    for (Eigen::Index j = 0; j < L; ++j) {
        model.V_compact(j, j) = 0.0;
        for (Eigen::Index i = j + 1; i < L; ++i) {
            const double value = root(i) * V_raw(i, j) * root(j);
            model.V_compact(i, j) = value;
            model.V_compact(j, i) = -value;
        }
    }

    const SkewEigenpairs eig = skew_eigen(model.V_compact);
    model.frequencies = eig.frequencies;
    model.eigvec_coeffs = eig.vectors;
    model.dirichlet_energies.resize(L);
    for (Eigen::Index j = 0; j < L; ++j) {
        model.dirichlet_energies(j) = dirichlet(model.eigvec_coeffs.col(j), model.eigenvalues);
    }

    const SkewEigenpairs raw = skew_eigen(V_raw);
    std::vector<double> fd;
    for (Eigen::Index j = 0; j < raw.frequencies.size(); ++j) {
        if (raw.frequencies(j) >= 0.0) fd.push_back(raw.frequencies(j));
    }
    std::sort(fd.begin(), fd.end());
    model.fd_frequencies = Eigen::Map<const Vector>(fd.data(), static_cast<Eigen::Index>(fd.size()));
    return model;
}

GeneratorModel build_generator(const EigenBasis& basis, double dt) {
    return compactify(generator_fd(basis, dt), basis.eigenvalues, dt);
}

double dirichlet(const CVector& coeffs, const Vector& lambda) {
    if (coeffs.size() > lambda.size()) throw ConfigError("dirichlet: more coefficients than eigenvalues");
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
        const double w = std::norm(coeffs(j));
        if (w == 0.0) continue;
        if (!(lambda(j) > 0.0)) throw ConfigError("dirichlet: eigenvalues must be positive");
        num += w / lambda(j);
        den += w;
    }
    if (!(den > 0.0)) throw ConfigError("dirichlet energy of the zero vector is undefined");
    return num / den;
}

double approx_eigen_residual(const KoopmanMatrix& shift, const CVector& z, double alpha) {
    const double norm = z.norm();
    if (!(norm > 0.0)) throw ConfigError("approximate eigenfunction residual of the zero vector");
    const Complex phase = std::polar(1.0, alpha * static_cast<double>(shift.q) * shift.dt);
    const CVector r = shift.entries.cast<Complex>() * z - phase * z;
    return r.norm() / norm;
}

double approx_eigen_residual(const EigenBasis& basis, const CVector& z, double alpha, std::size_t q, double dt) {
    return approx_eigen_residual(shift_matrix(basis, q, dt), z, alpha);
}

double optimal_eigen_residual(const KoopmanMatrix& shift, const CVector& z) {
    const double norm2 = z.squaredNorm();
    if (!(norm2 > 0.0)) throw ConfigError("approximate eigenfunction residual of the zero vector");
    const CVector uz = shift.entries.cast<Complex>() * z;
    const Complex best = z.dot(uz) / norm2;  // Eigen's dot conjugates the left argument
    return (uz - best * z).norm() / std::sqrt(norm2);
}

CVector eigenfunction_timeseries(const GeneratorModel& model, const EigenBasis& basis, std::size_t j) {
    if (j >= model.L) throw ConfigError("eigenfunction index out of range");
    const auto L = static_cast<Eigen::Index>(model.L);
    const CVector w = model.eigvec_coeffs.col(static_cast<Eigen::Index>(j));
    CVector z = basis.phi.leftCols(L).cast<Complex>() * w;
    const double norm = std::sqrt(z.squaredNorm() / static_cast<double>(z.size()));
    if (norm > 0.0) z /= norm;
    return z;
}

}  // namespace koopkit
