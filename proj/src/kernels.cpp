#include "koopkit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace koopkit {

namespace {

// Sum of raw Gaussian weights below which a query point is treated as outside the data.
constexpr double kUnderflowThreshold = 1e-300;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

std::string to_string(KernelFamily family) {
    return family == KernelFamily::gaussian ? "gaussian" : "covariance";
}

std::string to_string(Normalization normalization) {
    switch (normalization) {
        case Normalization::none: return "none";
        case Normalization::symmetric: return "symmetric";
        case Normalization::markov: return "markov";
    }
    return "none";
}

KernelFamily parse_kernel_family(std::string_view text) {
    if (text == "gaussian") return KernelFamily::gaussian;
    if (text == "covariance") return KernelFamily::covariance;
    throw ConfigError("unknown kernel family '" + std::string(text) + "'");
}

Normalization parse_normalization(std::string_view text) {
    if (text == "none") return Normalization::none;
    if (text == "symmetric") return Normalization::symmetric;
    if (text == "markov") return Normalization::markov;
    throw ConfigError("unknown normalization '" + std::string(text) + "'");
}

void KernelSpec::validate() const {
    if (delay_Q < 1) throw ConfigError("delay_Q must be at least 1");
    if (family == KernelFamily::gaussian && !(epsilon > 0.0 && std::isfinite(epsilon))) {
        throw ConfigError("gaussian kernel bandwidth epsilon must be positive");
    }
    if (family == KernelFamily::covariance && normalization != Normalization::none) {
        throw ConfigError("covariance kernel requires normalization = none");
    }
    if (!std::isfinite(alpha)) throw ConfigError("density exponent alpha must be finite");
}

Matrix pairwise_sqdist(const Matrix& rows, std::size_t Q) {
    if (rows.rows() == 0) throw ConfigError("pairwise_sqdist: empty embedding");
    if (Q < 1) throw ConfigError("pairwise_sqdist: Q must be at least 1");
    const RowMajor pts = rows;
    const Eigen::Index n = pts.rows();
    const Eigen::Index w = pts.cols();
    const double inv_q = 1.0 / static_cast<double>(Q);
    Matrix out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out(j, j) = 0.0;
        const double* b = pts.data() + j * w;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double* a = pts.data() + i * w;
            double s = 0.0;
            for (Eigen::Index k = 0; k < w; ++k) {
                const double diff = a[k] - b[k];
                s += diff * diff;
            }
            s *= inv_q;
            out(i, j) = s;
            out(j, i) = s;
        }
    }
    return out;
}

Matrix pairwise_sqdist(const DelayEmbedding& embedding) {
    return pairwise_sqdist(embedding.rows, embedding.Q);
}

KernelMatrix kernel_eval(const KernelSpec& spec, Matrix sqdist, std::size_t base_offset) {
    if (spec.family != KernelFamily::gaussian) {
        throw ConfigError("kernel_eval on squared distances requires the gaussian family");
    }
    if (!(spec.epsilon > 0.0)) throw ConfigError("gaussian kernel bandwidth epsilon must be positive");
    KernelMatrix out;
    const double inv_eps = 1.0 / spec.epsilon;
    out.values = std::move(sqdist);
    out.values = (-inv_eps * out.values.array()).exp().matrix();
    out.spec = spec;
    out.spec.normalization = Normalization::none;
    out.normalization = Normalization::none;
    out.base_offset = base_offset;
    return out;
}

KernelMatrix covariance_kernel(const KernelSpec& spec, const Matrix& covariates, std::size_t base_offset) {
    if (spec.family != KernelFamily::covariance) {
        throw ConfigError("covariance_kernel requires the covariance family");
    }
    KernelMatrix out;
    out.values = covariates * covariates.transpose();
    out.spec = spec;
    out.normalization = Normalization::none;
    out.base_offset = base_offset;
    return out;
}

KernelMatrix normalize(const KernelMatrix& raw, Normalization mode, double alpha) {
    if (mode == Normalization::none) return raw;
    if (raw.normalization != Normalization::none) throw ConfigError("kernel is already normalized");
    if (raw.spec.family != KernelFamily::gaussian) {
        throw ConfigError("only gaussian kernels can be normalized");
    }
    const Eigen::Index n = raw.values.rows();

    // Row sums with a fixed summation order (j ascending for every i).
    Vector q = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) q(i) += raw.values(i, j);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(q(i) > 0.0)) throw DegenerateError("kernel degree q is zero (bandwidth too narrow)");
    }
    const Vector qa = q.array().pow(alpha).matrix();

    KernelMatrix out;
    out.values.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) out.values(i, j) = raw.values(i, j) / (qa(i) * qa(j));
    }
    Vector d = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) d(i) += out.values(i, j);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(d(i) > 0.0) || !std::isfinite(d(i))) {
            throw DegenerateError("kernel degree d is zero (bandwidth too narrow)");
        }
    }

    if (mode == Normalization::markov) {
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) out.values(i, j) /= d(i);
        }
    } else {
        const Vector s = d.array().sqrt().matrix();
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) out.values(i, j) /= (s(i) * s(j));
        }
    }
    out.normalization = mode;
    out.degree_d = std::move(d);
    out.density_q = std::move(q);
    out.spec = raw.spec;
    out.spec.normalization = mode;
    out.spec.alpha = alpha;
    out.base_offset = raw.base_offset;
    return out;
}

double median_bandwidth(const Matrix& sqdist) {
    const Eigen::Index n = sqdist.rows();
    if (n < 2) throw ConfigError("median_bandwidth needs at least 2 points");
    std::vector<double> positive;
    positive.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j + 1; i < n; ++i) {
            if (sqdist(i, j) > 0.0) positive.push_back(sqdist(i, j));
        }
    }
    if (positive.empty()) throw DegenerateError("all pairwise distances are zero");
    const std::size_t mid = positive.size() / 2;
    std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid), positive.end());
    const double upper = positive[mid];
    if (positive.size() % 2 == 1) return upper;
    const double lower = *std::max_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

KernelFeatureMap::KernelFeatureMap(const KernelMatrix& trained, const DelayEmbedding& embedding)
    : spec_(trained.spec),
      normalization_(trained.normalization),
      points_(embedding.rows),
      density_q_(trained.density_q),
      degree_d_(trained.degree_d) {
    if (spec_.family != KernelFamily::gaussian) {
        throw ConfigError("out-of-sample evaluation requires a gaussian kernel");
    }
    if (embedding.size() != trained.size()) {
        throw ConfigError("embedding has " + std::to_string(embedding.size()) + " rows but kernel has " +
                          std::to_string(trained.size()));
    }
    if (embedding.Q != spec_.delay_Q) throw ConfigError("embedding delay count differs from kernel delay_Q");
}

Vector KernelFeatureMap::raw_row(std::span<const double> x) const {
    if (x.size() != dimension()) {
        throw ConfigError("query has dimension " + std::to_string(x.size()) + ", expected " +
                          std::to_string(dimension()));
    }
    const Eigen::Index n = points_.rows();
    const Eigen::Index w = points_.cols();
    const double scale = 1.0 / (static_cast<double>(spec_.delay_Q) * spec_.epsilon);
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < w; ++k) {
            const double diff = x[static_cast<std::size_t>(k)] - points_(i, k);
            s += diff * diff;
        }
        r(i) = std::exp(-s * scale);
    }
    return r;
}

KernelFeatureMap::Stage1 KernelFeatureMap::first_stage(std::span<const double> x) const {
    Stage1 st;
    Vector r = raw_row(x);
    double qx = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) qx += r(i);
    if (!(qx > kUnderflowThreshold)) {
        st.out_of_domain = true;
        return st;
    }
    if (normalization_ == Normalization::none) {
        st.k1 = std::move(r);
        return st;
    }
    const double alpha = spec_.alpha;
    const double qxa = std::pow(qx, alpha);
    st.k1.resize(r.size());
    double d = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        st.k1(i) = r(i) / (qxa * std::pow(density_q_(i), alpha));
        d += st.k1(i);
    }
    if (!(d > 0.0) || !std::isfinite(d)) {
        st.out_of_domain = true;
        return st;
    }
    st.degree = d;
    return st;
}

OutOfSampleRow KernelFeatureMap::density_row(std::span<const double> x) const {
    const auto n = static_cast<Eigen::Index>(size());
    Stage1 st = first_stage(x);
    OutOfSampleRow out;
    if (st.out_of_domain) {
        out.values = Vector::Ones(n);
        out.out_of_domain = true;
        return out;
    }
    double total = st.degree;
    if (normalization_ == Normalization::none) {
        total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) total += st.k1(i);
    }
    out.values = (static_cast<double>(n) / total) * st.k1;
    return out;
}

OutOfSampleRow KernelFeatureMap::operator_row(std::span<const double> x) const {
    const auto n = static_cast<Eigen::Index>(size());
    Stage1 st = first_stage(x);
    OutOfSampleRow out;
    if (st.out_of_domain) {
        out.values = Vector::Ones(n);
        out.out_of_domain = true;
        return out;
    }
    const double nn = static_cast<double>(n);
    switch (normalization_) {
        case Normalization::none: out.values = nn * st.k1; break;
        case Normalization::markov: out.values = (nn / st.degree) * st.k1; break;
        case Normalization::symmetric: {
            const double sx = std::sqrt(st.degree);
            out.values.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) out.values(i) = nn * st.k1(i) / (sx * std::sqrt(degree_d_(i)));
            break;
        }
    }
    return out;
}

OutOfSampleRow out_of_sample_row(const KernelMatrix& trained, const DelayEmbedding& embedding,
                                 std::span<const double> x) {
    return KernelFeatureMap(trained, embedding).density_row(x);
}

}  // namespace koopkit
