#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "koopkit/dynamics.hpp"
#include "koopkit/generator.hpp"
#include "koopkit/kernels.hpp"
#include "koopkit/spectral.hpp"
#include "oracles.hpp"

using namespace koopkit;

namespace {

struct Trained {
    TrajectoryDataset data;
    EigenBasis basis;
    GeneratorModel model;
};

Trained train(const SystemSpec& system, const CovariateMap& covariate, Normalization mode, double epsilon,
              bool from_median, std::size_t L) {
    Trained t;
    t.data = simulate(system, covariate);
    const Matrix d = pairwise_sqdist(t.data.covariates, 1);
    KernelSpec spec;
    spec.epsilon = from_median ? epsilon * median_bandwidth(d) : epsilon;
    spec.normalization = mode;
    t.basis = eigenbasis(normalize(kernel_eval(spec, d), mode, 1.0), L);
    if (mode == Normalization::symmetric) t.model = build_generator(t.basis, system.dt);
    return t;
}

Trained lorenz(std::size_t n, Normalization mode, std::size_t L) {
    SystemSpec s = SystemSpec::lorenz63_default();
    s.n_samples = n;
    return train(s, CovariateMap::identity(), mode, 0.2, true, L);
}

// Fine-step torus run shared by the slower tests: dt = 0.01, N = 8000, L = 9.
const Trained& fine_torus() {
    static const Trained t = [] {
        SystemSpec s = SystemSpec::torus_default();
        s.dt = 0.01;
        s.n_samples = 8000;
        return train(s, CovariateMap::torus_embedding(), Normalization::symmetric, 1.0, true, 9);
    }();
    return t;
}

CVector coefficients(const EigenBasis& basis, const CVector& f) {
    return basis.phi.cast<Complex>().adjoint() * f / static_cast<double>(basis.samples());
}

Matrix random_skew(Eigen::Index n, unsigned seed) {
    const Matrix a = oracle::random_matrix(n, n, seed);
    return a - a.transpose();
}

}  // namespace

TEST(GeneratorFd, ExactlySkewAndMatchesShiftOracle) {
    const Trained t = lorenz(300, Normalization::symmetric, 12);
    const Matrix v = generator_fd(t.basis, 0.05);
    EXPECT_EQ((v + v.transpose()).cwiseAbs().maxCoeff(), 0.0);
    const Matrix a = oracle::shift(t.basis.phi, t.basis.phi_dual, 1);
    EXPECT_LT((v - (a - a.transpose()) / 0.1).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_THROW(generator_fd(t.basis, 0.0), ConfigError);
}

TEST(Compactify, TwoByTwoOracle) {
    const double a = 1.7;
    Matrix v(2, 2);
    v << 0.0, a, -a, 0.0;
    Vector lambda(2);
    lambda << 0.9, 0.4;
    const GeneratorModel m = compactify(v, lambda, 0.1);
    const double expected = a * std::sqrt(0.9 * 0.4);
    EXPECT_NEAR(m.frequencies(0), expected, 1e-14);
    EXPECT_NEAR(m.frequencies(1), -expected, 1e-14);
    EXPECT_EQ((m.V_compact + m.V_compact.transpose()).cwiseAbs().maxCoeff(), 0.0);
    // Eigenvector of [[0, b], [-b, 0]] for i*b is (1, i)/sqrt(2) up to phase.
    EXPECT_NEAR(std::abs(m.eigvec_coeffs(0, 0)), std::sqrt(0.5), 1e-14);
    EXPECT_NEAR(m.dirichlet_energies(0), 0.5 / 0.9 + 0.5 / 0.4, 1e-13);
}

TEST(Compactify, EigenpairsOfRandomSkewMatrix) {
    for (Eigen::Index n : {5, 8}) {
        const Matrix v = random_skew(n, static_cast<unsigned>(n));
        Vector lambda = Vector::LinSpaced(n, 1.0, 0.2);
        const GeneratorModel m = compactify(v, lambda, 0.05);
        EXPECT_EQ((m.V_compact + m.V_compact.transpose()).cwiseAbs().maxCoeff(), 0.0);

        Eigen::ComplexEigenSolver<CMatrix> ces(m.V_compact.cast<Complex>());
        EXPECT_LT(ces.eigenvalues().real().cwiseAbs().maxCoeff(), 1e-10);

        std::size_t zeros = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const CVector w = m.eigvec_coeffs.col(j);
            const CVector r = m.V_compact.cast<Complex>() * w - Complex(0.0, m.frequencies(j)) * w;
            EXPECT_LT(r.norm(), 1e-10);
            EXPECT_NEAR(w.norm(), 1.0, 1e-12);
            EXPECT_GE(m.dirichlet_energies(j), 1.0 / lambda(0) - 1e-10);
            if (m.frequencies(j) == 0.0) ++zeros;
        }
        EXPECT_EQ(zeros, static_cast<std::size_t>(n % 2));
        for (Eigen::Index j = static_cast<Eigen::Index>(zeros); j + 1 < n; j += 2) {
            EXPECT_GT(m.frequencies(j), 0.0);
            EXPECT_EQ(m.frequencies(j + 1), -m.frequencies(j));
            EXPECT_EQ(m.eigvec_coeffs.col(j + 1), m.eigvec_coeffs.col(j).conjugate());
        }
        for (Eigen::Index j = 1; j < n; ++j) {
            EXPECT_LE(std::abs(m.frequencies(j - 1)), std::abs(m.frequencies(j)) + 1e-12);
        }
    }
}

TEST(Compactify, KernelDimensionAddsZeroModes) {
    Matrix v = Matrix::Zero(4, 4);
    v(0, 1) = 2.0;
    v(1, 0) = -2.0;
    const GeneratorModel m = compactify(v, Vector::Ones(4), 0.1);
    EXPECT_EQ(m.frequencies(0), 0.0);
    EXPECT_EQ(m.frequencies(1), 0.0);
    EXPECT_NEAR(m.frequencies(2), 2.0, 1e-14);
}

TEST(Compactify, NonpositiveEigenvalueSuggestsSmallerBasis) {
    Vector lambda(3);
    lambda << 1.0, 0.5, 0.0;
    try {
        compactify(random_skew(3, 4), lambda, 0.1);
        FAIL() << "expected a rank error";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("smaller"), std::string::npos);
    }
}

TEST(Dirichlet, SingleModesAndMixture) {
    Vector lambda(3);
    lambda << 1.0, 0.5, 0.25;
    EXPECT_DOUBLE_EQ(dirichlet(CVector::Unit(3, 0), lambda), 1.0);
    EXPECT_DOUBLE_EQ(dirichlet(CVector::Unit(3, 2), lambda), 4.0);
    CVector c(2);
    c << std::sqrt(0.5), std::sqrt(0.5);
    EXPECT_NEAR(dirichlet(c, lambda.head(2)), 1.5, 1e-15);
    EXPECT_THROW(dirichlet(CVector::Zero(3), lambda), ConfigError);
}

TEST(Dirichlet, SmoothestModeMinimizesEnergy) {
    const Vector lambda = Vector::LinSpaced(10, 1.0, 0.1);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const double base = dirichlet(CVector::Unit(10, 0), lambda);
    for (int trial = 0; trial < 100; ++trial) {
        CVector c(10);
        for (Eigen::Index j = 0; j < 10; ++j) c(j) = Complex(g(rng), g(rng));
        EXPECT_LE(base, dirichlet(c, lambda));
    }
}

TEST(EigenResidual, ConstantDirectionBoundaryBound) {
    const Trained t = lorenz(400, Normalization::markov, 10);
    for (std::size_t q : {1u, 10u}) {
        const double eps = approx_eigen_residual(t.basis, CVector::Unit(10, 0), 0.0, q, 0.05);
        // Only q boundary samples drop out of the biorthogonality sum.
        double bound = 0.0;
        for (Eigen::Index i = 0; i < 10; ++i) {
            const double b = static_cast<double>(q) * (1.0 + t.basis.phi_dual.col(i).cwiseAbs().maxCoeff()) /
                             (400.0 - static_cast<double>(q));
            bound += b * b;
        }
        EXPECT_LE(eps, std::sqrt(bound) + 1e-12);
    }
}

TEST(EigenResidual, OptimalResidualNeverExceedsFixedPhase) {
    const Trained t = lorenz(300, Normalization::symmetric, 12);
    const KoopmanMatrix u = shift_matrix(t.basis, 3, 0.05);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        CVector z(12);
        for (Eigen::Index j = 0; j < 12; ++j) z(j) = Complex(g(rng), g(rng));
        const double best = optimal_eigen_residual(u, z);
        for (double alpha : {0.0, 0.5, 1.0, 3.0}) EXPECT_LE(best, approx_eigen_residual(u, z, alpha) + 1e-12);
    }
    EXPECT_THROW(optimal_eigen_residual(u, CVector::Zero(12)), ConfigError);
}

TEST(TorusGenerator, ActsAsDerivativeOnFirstHarmonic) {
    const Trained& t = fine_torus();
    CVector f(static_cast<Eigen::Index>(t.data.size()));
    for (Eigen::Index n = 0; n < f.size(); ++n) f(n) = std::polar(1.0, t.data.states(n, 0));
    const CVector c = coefficients(t.basis, f);
    const CVector vc = t.model.V_raw.cast<Complex>() * c;
    const double nu1 = 1.0;
    EXPECT_LT((vc - Complex(0.0, nu1) * c).norm() / (nu1 * c.norm()), 0.05);
}

TEST(TorusGenerator, FirstHarmonicIsApproximateEigenfunction) {
    const Trained& t = fine_torus();
    CVector f(static_cast<Eigen::Index>(t.data.size()));
    for (Eigen::Index n = 0; n < f.size(); ++n) f(n) = std::polar(1.0, t.data.states(n, 0));
    const CVector c = coefficients(t.basis, f);
    for (std::size_t q : {1u, 10u, 50u, 100u}) {
        EXPECT_LT(approx_eigen_residual(t.basis, c, 1.0, q, 0.01), 0.1) << "q=" << q;
    }
}

TEST(TorusGenerator, CoherentModeBeatsRandomDirections) {
    const Trained& t = fine_torus();
    // Lowest-Dirichlet mode with nonzero frequency.
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < t.model.frequencies.size(); ++j) {
        if (std::abs(t.model.frequencies(j)) < 1e-8) continue;
        if (best < 0 || t.model.dirichlet_energies(j) < t.model.dirichlet_energies(best)) best = j;
    }
    ASSERT_GE(best, 0);
    const CVector w = t.model.eigvec_coeffs.col(best);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::vector<CVector> randoms;
    for (int r = 0; r < 100; ++r) {
        CVector z(9);
        for (Eigen::Index j = 0; j < 9; ++j) z(j) = Complex(g(rng), g(rng));
        randoms.push_back(z / z.norm());
    }
    for (std::size_t q = 1; q <= 50; ++q) {
        const KoopmanMatrix u = shift_matrix(t.basis, q, 0.01);
        std::vector<double> r;
        for (const CVector& z : randoms) r.push_back(optimal_eigen_residual(u, z));
        std::nth_element(r.begin(), r.begin() + 50, r.end());
        EXPECT_LT(optimal_eigen_residual(u, w), r[50]) << "q=" << q;
    }
}

TEST(TorusGenerator, LowFrequencyModeStaysCorrelated) {
    const Trained& t = fine_torus();
    Eigen::Index j = 0;
    while (j < t.model.frequencies.size() && t.model.frequencies(j) <= 1e-8) ++j;
    ASSERT_LT(j, t.model.frequencies.size());
    const CVector z = eigenfunction_timeseries(t.model, t.basis, static_cast<std::size_t>(j));
    EXPECT_NEAR(std::sqrt(z.squaredNorm() / static_cast<double>(z.size())), 1.0, 1e-12);
    const CVector c = autocorrelation(z, 50, false);
    EXPECT_GT(c.cwiseAbs().minCoeff(), 0.95);
}

TEST(EigenfunctionTimeseries, ZeroFrequencyModeIsConstant) {
    const Trained t = lorenz(300, Normalization::symmetric, 9);
    ASSERT_EQ(t.model.frequencies(0), 0.0);
    const CVector z = eigenfunction_timeseries(t.model, t.basis, 0);
    const double spread = (z.array() - z.mean()).abs().maxCoeff();
    EXPECT_LT(spread / std::abs(z.mean()), 0.5);
    EXPECT_THROW(eigenfunction_timeseries(t.model, t.basis, 9), ConfigError);
}

TEST(EigenfunctionTimeseries, LorenzCoherentModeRotatesOneWay) {
    const Trained t = lorenz(2000, Normalization::symmetric, 30);
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < t.model.frequencies.size(); ++j) {
        if (t.model.frequencies(j) <= 1e-8) continue;
        if (best < 0 || t.model.dirichlet_energies(j) < t.model.dirichlet_energies(best)) best = j;
    }
    ASSERT_GE(best, 0);
    const CVector z = eigenfunction_timeseries(t.model, t.basis, static_cast<std::size_t>(best));
    // Periodogram by direct DFT: a phase-coherent carrier puts its power on positive frequencies.
    const auto n = z.size();
    double positive = 0.0, negative = 0.0;
    for (Eigen::Index k = 1; k < n / 2; ++k) {
        Complex sp(0.0, 0.0), sn(0.0, 0.0);
        for (Eigen::Index m = 0; m < n; ++m) {
            const double arg = kTwoPi * static_cast<double>(k * m) / static_cast<double>(n);
            sp += z(m) * std::polar(1.0, -arg);
            sn += z(m) * std::polar(1.0, arg);
        }
        positive += std::norm(sp);
        negative += std::norm(sn);
    }
    EXPECT_GT(positive / (positive + negative), 0.9);
}

// Soft diagnostic: U(q1) U(q2) against U(q1 + q2). Finite N breaks the semigroup law
// slightly, so the gap is recorded rather than gated.
TEST(TorusGenerator, ShiftMatricesComposeApproximately) {
    const Trained& t = fine_torus();
    double worst = 0.0;
    for (std::size_t q1 : {1, 5, 20}) {
        for (std::size_t q2 : {1, 10, 40}) {
            const Matrix prod = shift_matrix(t.basis, q1).entries * shift_matrix(t.basis, q2).entries;
            const Matrix gap = prod - shift_matrix(t.basis, q1 + q2).entries;
            const double norm = Eigen::JacobiSVD<Matrix>(gap).singularValues()(0);
            ASSERT_TRUE(std::isfinite(norm));
            worst = std::max(worst, norm);
        }
    }
    RecordProperty("semigroup_gap", std::to_string(worst));
    std::printf("semigroup gap (operator norm, L = 9, N = 8000): %.4f\n", worst);
}
