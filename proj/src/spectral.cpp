#include "koopkit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "koopkit/linalg.hpp"

namespace koopkit {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kSignificance = 1e-8;

Eigen::Index dominant_index(const Eigen::Ref<const Vector>& v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    return idx;
}

void fix_sign(Eigen::Ref<Vector> v) {
    const double cut = kSignificance * v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > cut) {
            if (v(i) < 0.0) v = -v;
            return;
        }
    }
}

// Within runs of (near-)equal eigenvalues, order columns by the sample index of |v| maximum.
void break_ties(SymmetricEigenpairs& eig) {
    const Eigen::Index k = eig.values.size();
    Eigen::Index start = 0;
    while (start < k) {
        Eigen::Index end = start + 1;
        while (end < k && std::abs(eig.values(end - 1) - eig.values(end)) < kTieTolerance) ++end;
        if (end - start > 1) {
            std::vector<Eigen::Index> order(static_cast<std::size_t>(end - start));
            std::iota(order.begin(), order.end(), start);
            std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                return dominant_index(eig.vectors.col(a)) < dominant_index(eig.vectors.col(b));
            });
            const Matrix block = eig.vectors.middleCols(start, end - start);
            const Vector vals = eig.values.segment(start, end - start);
            for (Eigen::Index i = 0; i < end - start; ++i) {
                eig.vectors.col(start + i) = block.col(order[static_cast<std::size_t>(i)] - start);
                eig.values(start + i) = vals(order[static_cast<std::size_t>(i)] - start);
            }
        }
        start = end;
    }
}

}  // namespace

EigenBasis eigenbasis(const KernelMatrix& kernel, std::size_t L) {
    if (kernel.normalization == Normalization::none) {
        throw ConfigError("eigenbasis requires a symmetric or markov normalized kernel");
    }
    const auto n = static_cast<Eigen::Index>(kernel.size());
    if (L == 0 || static_cast<Eigen::Index>(L) > n) {
        throw ConfigError("basis size L=" + std::to_string(L) + " must lie in [1, N=" + std::to_string(n) + "]");
    }

    // Symmetric conjugate of the kernel operator.
    Matrix sym;
    Vector sqrt_d;
    if (kernel.normalization == Normalization::markov) {
        sqrt_d = kernel.degree_d.array().sqrt().matrix();
        sym.resize(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j; i < n; ++i) sym(i, j) = kernel.values(i, j) * sqrt_d(i) / sqrt_d(j);
        }
    } else {
        sym = kernel.values;
    }

    SymmetricEigenpairs eig = top_eigenpairs(std::move(sym), L);
    if (!eig.values.allFinite() || !eig.vectors.allFinite()) throw NumericalError("eigensolver returned non-finite values");

    EigenBasis basis;
    basis.normalization = kernel.normalization;
    basis.requested = L;

    const double lead = eig.values(0);
    Eigen::Index keep = 0;
    while (keep < eig.values.size() && eig.values(keep) > kRankThreshold * std::abs(lead)) ++keep;
    if (keep < static_cast<Eigen::Index>(L)) {
        basis.warnings.push_back("rank deficiency: only " + std::to_string(keep) + " of " + std::to_string(L) +
                                 " eigenvalues exceed the rank threshold; basis truncated");
        if (keep == 0) throw NumericalError("kernel has no eigenvalues above the rank threshold");
        eig.values.conservativeResize(keep);
        eig.vectors.conservativeResize(Eigen::NoChange, keep);
    }

    for (Eigen::Index j = 0; j < keep; ++j) fix_sign(eig.vectors.col(j));
    break_ties(eig);

    const double nn = static_cast<double>(n);
    basis.eigenvalues = eig.values;
    if (kernel.normalization == Normalization::symmetric) {
        basis.phi = std::sqrt(nn) * eig.vectors;
        basis.phi_dual = basis.phi;
        return basis;
    }

    // Markov: phi_j = D^{-1/2} v_j and phi'_j = D^{1/2} v_j with D = diag(d / sum d),
    // rescaled to unit L^2(mu_N) norm for phi and biorthogonality for the pair.
    const double total = kernel.degree_d.sum();
    const Vector sqrt_pi = (kernel.degree_d / total).array().sqrt().matrix();
    basis.phi.resize(n, keep);
    basis.phi_dual.resize(n, keep);
    for (Eigen::Index j = 0; j < keep; ++j) {
        const Vector raw = eig.vectors.col(j).cwiseQuotient(sqrt_pi);
        const double a = std::sqrt(nn / raw.squaredNorm());
        basis.phi.col(j) = a * raw;
        basis.phi_dual.col(j) = (nn / a) * eig.vectors.col(j).cwiseProduct(sqrt_pi);
    }
    return basis;
}

NystromResult nystrom(const EigenBasis& basis, const KernelFeatureMap& features, std::span<const double> x) {
    if (features.size() != basis.samples()) throw ConfigError("feature map and basis sample counts differ");
    const OutOfSampleRow row = features.operator_row(x);
    NystromResult out;
    out.out_of_domain = row.out_of_domain;
    const auto L = static_cast<Eigen::Index>(basis.size());
    const double nn = static_cast<double>(basis.samples());
    const double cutoff = kRankThreshold * std::abs(basis.eigenvalues(0));
    out.values = Vector::Zero(L);
    for (Eigen::Index j = 0; j < L; ++j) {
        const double lambda = basis.eigenvalues(j);
        if (!(lambda > cutoff)) {
            out.omitted.push_back(static_cast<std::size_t>(j));
            continue;
        }
        out.values(j) = row.values.dot(basis.phi.col(j)) / (nn * lambda);
    }
    return out;
}

KoopmanMatrix shift_matrix(const EigenBasis& basis, std::size_t q, double dt) {
    const std::size_t n = basis.samples();
    if (q >= n) throw ConfigError("shift q=" + std::to_string(q) + " must be below N=" + std::to_string(n));
    const auto L = static_cast<Eigen::Index>(basis.size());
    const auto count = static_cast<Eigen::Index>(n - q);
    const auto shift = static_cast<Eigen::Index>(q);
    const double inv = 1.0 / static_cast<double>(count);

    KoopmanMatrix out;
    out.q = q;
    out.dt = dt;
    out.entries.resize(L, L);
    for (Eigen::Index j = 0; j < L; ++j) {
        const double* pj = basis.phi.col(j).data() + shift;
        for (Eigen::Index i = 0; i < L; ++i) {
            const double* di = basis.phi_dual.col(i).data();
            double s = 0.0;
            for (Eigen::Index k = 0; k < count; ++k) s += di[k] * pj[k];
            out.entries(i, j) = s * inv;
        }
    }
    return out;
}

PODResult pod(const Matrix& data, std::size_t L) {
    const Eigen::Index n = data.rows();
    const Eigen::Index m = data.cols();
    if (L == 0 || static_cast<Eigen::Index>(L) > std::min(n, m)) {
        throw ConfigError("POD rank L=" + std::to_string(L) + " must lie in [1, min(m, N)]");
    }
    const Matrix y = data.transpose();  // m x N, columns y_n
    Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("POD singular value decomposition failed");

    const auto k = static_cast<Eigen::Index>(L);
    PODResult out;
    out.singular_values = svd.singularValues().head(k);
    out.eofs = svd.matrixU().leftCols(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index idx = 0;
        out.eofs.col(j).cwiseAbs().maxCoeff(&idx);
        if (out.eofs(idx, j) < 0.0) out.eofs.col(j) *= -1.0;
    }
    out.pcs = data * out.eofs;
    return out;
}

PODResult pod(const TrajectoryDataset& dataset, std::size_t L) { return pod(dataset.covariates, L); }

CVector autocorrelation(const CVector& series, std::size_t q_max, bool center) {
    const auto n = static_cast<std::size_t>(series.size());
    if (q_max >= n) throw ConfigError("autocorrelation lag q_max must be below the series length");
    CVector f = series;
    if (center) f.array() -= f.mean();

    CVector out(static_cast<Eigen::Index>(q_max + 1));
    for (std::size_t q = 0; q <= q_max; ++q) {
        Complex s(0.0, 0.0);
        for (std::size_t k = 0; k + q < n; ++k) {
            s += std::conj(f(static_cast<Eigen::Index>(k))) * f(static_cast<Eigen::Index>(k + q));
        }
        out(static_cast<Eigen::Index>(q)) = s / static_cast<double>(n - q);
    }
    const double c0 = out(0).real();
    if (!(c0 > 0.0)) throw DegenerateError("autocorrelation of a zero-variance series");
    return out / c0;
}

}  // namespace koopkit
