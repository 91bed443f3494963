#ifndef DOCAUSAL_REGRESS_HPP
#define DOCAUSAL_REGRESS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "docausal/error.hpp"

namespace docausal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

enum class Distribution { Normal, StudentT, ChiSquare };

/// Upper-tail probability P(X > statistic). `df` is ignored for the normal.
inline double tail_probability(Distribution dist, double statistic, double df = 1.0) {
    namespace bm = boost::math;
    if (std::isnan(statistic)) throw ValidationError("tail probability of NaN statistic");
    switch (dist) {
        case Distribution::Normal:
            if (std::isinf(statistic)) return statistic > 0 ? 0.0 : 1.0;
            return bm::cdf(bm::complement(bm::normal_distribution<>(0.0, 1.0), statistic));
        case Distribution::StudentT:
            if (!(df >= 1.0) || !std::isfinite(df)) throw ValidationError("Student t needs df >= 1");
            if (std::isinf(statistic)) return statistic > 0 ? 0.0 : 1.0;
            return bm::cdf(bm::complement(bm::students_t_distribution<>(df), statistic));
        case Distribution::ChiSquare:
            if (!(df >= 1.0) || !std::isfinite(df)) throw ValidationError("chi-square needs df >= 1");
            if (statistic <= 0.0) return 1.0;
            if (std::isinf(statistic)) return 0.0;
            return bm::cdf(bm::complement(bm::chi_squared_distribution<>(df), statistic));
    }
    return std::nan("");
}

inline double two_sided_normal_p(double z) { return std::min(1.0, 2.0 * tail_probability(Distribution::Normal, std::abs(z))); }

inline double two_sided_t_p(double t, double df) {
    return std::min(1.0, 2.0 * tail_probability(Distribution::StudentT, std::abs(t), df));
}

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal quantile needs p in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<>(0.0, 1.0), p);
}

inline double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("t quantile needs p in (0,1)");
    return boost::math::quantile(boost::math::students_t_distribution<>(df), p);
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

enum class Intercept { Add, None };

struct FitResult {
    Vector coefficients;     // intercept first when present
    Vector standard_errors;
    Matrix covariance;
    bool converged = false;
    double log_likelihood = 0.0;
    std::size_t n_observations = 0;
    bool has_intercept = true;
    std::size_t iterations = 0;
    std::string diagnostic;  // why converged == false
    bool separation = false;
    double residual_variance = 0.0;  // OLS only
    std::vector<double> log_likelihood_trace;

    std::size_t design_width() const {
        return static_cast<std::size_t>(coefficients.size()) - (has_intercept ? 1 : 0);
    }

    // Coefficient of design column j (0-based, excluding the intercept).
    double coef(std::size_t j) const { return coefficients(static_cast<Eigen::Index>(j + (has_intercept ? 1 : 0))); }
    double se(std::size_t j) const { return standard_errors(static_cast<Eigen::Index>(j + (has_intercept ? 1 : 0))); }
};

inline Matrix with_intercept(const Matrix& X) {
    Matrix out(X.rows(), X.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(X.cols()) = X;
    return out;
}

namespace detail {

inline Matrix augmented(const Matrix& X, Intercept ic) { return ic == Intercept::Add ? with_intercept(X) : X; }

inline void check_finite(const Matrix& X, const Vector& y) {
    if (!X.allFinite() || !y.allFinite()) throw ValidationError("design or response contains non-finite values");
}

}  // namespace detail

/// Ordinary least squares by column-pivoted QR. Throws SingularMatrixError on rank deficiency.
inline FitResult ols_fit(const Matrix& design, const Vector& response, Intercept intercept = Intercept::Add) {
    if (design.rows() != response.size()) throw ValidationError("OLS design/response length mismatch");
    detail::check_finite(design, response);
    const Matrix X = detail::augmented(design, intercept);
    const auto n = X.rows();
    const auto p = X.cols();
    if (n < p + 1) throw ValidationError("OLS needs more rows than coefficients");

    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw SingularMatrixError("OLS design is rank deficient (rank " + std::to_string(qr.rank()) +
                                                 " < " + std::to_string(p) + ")");
    FitResult fit;
    fit.has_intercept = intercept == Intercept::Add;
    fit.coefficients = qr.solve(response);
    const Vector resid = response - X * fit.coefficients;
    const double rss = resid.squaredNorm();
    fit.residual_variance = rss / static_cast<double>(n - p);

    const Matrix R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    const Matrix Rinv = R.template triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
    const Matrix unscaled = Rinv * Rinv.transpose();
    const auto& perm = qr.colsPermutation();
    fit.covariance = fit.residual_variance * (perm * unscaled * perm.transpose());
    fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
    fit.standard_errors = fit.covariance.diagonal().cwiseSqrt();
    fit.converged = true;
    fit.n_observations = static_cast<std::size_t>(n);
    const double sigma2_mle = rss / static_cast<double>(n);
    fit.log_likelihood = sigma2_mle > 0.0
                             ? -0.5 * static_cast<double>(n) * (std::log(2.0 * std::numbers::pi * sigma2_mle) + 1.0)
                             : std::numeric_limits<double>::infinity();
    return fit;
}

inline Vector ols_residuals(const Matrix& design, const Vector& response, Intercept intercept = Intercept::Add) {
    const auto fit = ols_fit(design, response, intercept);
    return response - detail::augmented(design, intercept) * fit.coefficients;
}

struct LogisticOptions {
    std::size_t max_iter = 100;
    double tol = 1e-8;
};

// Standardized coefficient |beta_j| * sd(x_j) above which the fit is reported as separated.
inline constexpr double kSeparationBound = 30.0;

namespace detail {

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double inv_logit(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double bernoulli_log_likelihood(const Vector& eta, const Vector& y) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
    return ll;
}

inline Vector score_from_eta(const Matrix& X, const Vector& y, const Vector& eta) {
    Vector r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) r(i) = y(i) - inv_logit(eta(i));
    return X.transpose() * r;
}

}  // namespace detail

inline double inv_logit(double x) { return detail::inv_logit(x); }

// Bernoulli log-likelihood and its gradient at beta; X already carries any intercept column.
inline double logistic_log_likelihood(const Matrix& X, const Vector& y, const Vector& beta) {
    return detail::bernoulli_log_likelihood(X * beta, y);
}

inline Vector logistic_score(const Matrix& X, const Vector& y, const Vector& beta) {
    return detail::score_from_eta(X, y, X * beta);
}

/*
 * Bernoulli maximum likelihood by Newton/IRLS with step halving.
 *
 * Converges when max |score| < tol or the accepted step has norm < tol.
 * Separation is reported through converged == false rather than by throwing;
 * a singular information matrix at the starting point throws.
 */
inline FitResult logistic_fit(const Matrix& design, const Vector& response, LogisticOptions opts = {},
                              Intercept intercept = Intercept::Add) {
    if (design.rows() != response.size()) throw ValidationError("logistic design/response length mismatch");
    detail::check_finite(design, response);
    for (Eigen::Index i = 0; i < response.size(); ++i) {
        if (response(i) != 0.0 && response(i) != 1.0) throw ValidationError("logistic response must be 0/1");
    }
    const Matrix X = detail::augmented(design, intercept);
    const auto n = X.rows();
    const auto p = X.cols();
    if (n < p + 1) throw ValidationError("logistic regression needs more rows than coefficients");

    // column scales for the separation check; intercept counts as scale 1
    Vector scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = X.col(j).mean();
        const double sd = std::sqrt((X.col(j).array() - mean).square().sum() / std::max<double>(1.0, n - 1.0));
        scale(j) = sd > 0.0 ? sd : 1.0;
    }

    FitResult fit;
    fit.has_intercept = intercept == Intercept::Add;
    fit.n_observations = static_cast<std::size_t>(n);
    Vector beta = Vector::Zero(p);
    Vector eta = X * beta;
    double ll = detail::bernoulli_log_likelihood(eta, response);
    fit.log_likelihood_trace.push_back(ll);

    Eigen::LDLT<Matrix> ldlt;
    auto information = [&](const Vector& e) {
        Vector w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = detail::inv_logit(e(i));
            w(i) = pi * (1.0 - pi);
        }
        return Matrix(X.transpose() * w.asDiagonal() * X);
    };
    auto score_at = [&](const Vector& e) { return detail::score_from_eta(X, response, e); };

    bool done = false;
    for (std::size_t it = 0; it < opts.max_iter && !done; ++it) {
        const Vector g = score_at(eta);
        if (g.cwiseAbs().maxCoeff() < opts.tol) {
            fit.converged = true;
            break;
        }
        const Matrix H = information(eta);
        ldlt.compute(H);
        const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                              ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff());
        if (singular) {
            if (it == 0) throw SingularMatrixError("logistic information matrix is singular");
            fit.diagnostic = "information matrix became singular";
            fit.separation = true;
            break;
        }
        const Vector step = ldlt.solve(g);
        double t = 1.0;
        Vector cand = beta + step;
        Vector cand_eta = X * cand;
        double cand_ll = detail::bernoulli_log_likelihood(cand_eta, response);
        int halvings = 0;
        while (!(cand_ll >= ll) && halvings < 40) {
            t *= 0.5;
            cand = beta + t * step;
            cand_eta = X * cand;
            cand_ll = detail::bernoulli_log_likelihood(cand_eta, response);
            ++halvings;
        }
        fit.iterations = it + 1;
        if (!(cand_ll >= ll)) {
            // no ascent possible along the Newton direction: at the optimum to machine precision
            fit.converged = true;
            break;
        }
        const double step_norm = t * step.norm();
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
        fit.log_likelihood_trace.push_back(ll);

        if ((beta.cwiseProduct(scale)).cwiseAbs().maxCoeff() > kSeparationBound) {
            fit.separation = true;
            fit.diagnostic = "separation: a standardized coefficient exceeds " +
                             std::to_string(static_cast<int>(kSeparationBound));
            done = true;
        } else if (step_norm < opts.tol) {
            fit.converged = true;
            done = true;
        }
    }
    if (!fit.converged && fit.diagnostic.empty()) {
        fit.diagnostic = "no convergence after " + std::to_string(opts.max_iter) + " iterations";
    }
    if (fit.converged) {
        // perfect prediction with a converged score means quasi-complete separation
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(response(i) - detail::inv_logit(eta(i))));
        if (worst < 1e-6) {
            fit.converged = false;
            fit.separation = true;
            fit.diagnostic = "separation: fitted probabilities reproduce the response exactly";
        }
    }

    fit.coefficients = beta;
    fit.log_likelihood = ll;
    const Matrix H = information(eta);
    ldlt.compute(H);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0.0) {
        fit.covariance = ldlt.solve(Matrix::Identity(p, p));
        fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
    } else {
        fit.covariance = Matrix::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
        if (fit.converged) throw SingularMatrixError("logistic information matrix is singular at the optimum");
    }
    fit.standard_errors = fit.covariance.diagonal().cwiseSqrt();
    return fit;
}

inline Vector linear_predictor(const FitResult& fit, const Matrix& design) {
    if (static_cast<std::size_t>(design.cols()) != fit.design_width()) {
        throw ValidationError("design has " + std::to_string(design.cols()) + " columns, fit expects " +
                              std::to_string(fit.design_width()));
    }
    if (fit.has_intercept) {
        return (design * fit.coefficients.tail(design.cols())).array() + fit.coefficients(0);
    }
    return design * fit.coefficients;
}

inline Vector predict_proba(const FitResult& fit, const Matrix& design) {
    Vector eta = linear_predictor(fit, design);
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = detail::inv_logit(eta(i));
    return eta;
}

/// Logistic fit that throws when the optimizer did not converge.
inline FitResult logistic_fit_or_throw(const Matrix& design, const Vector& response, LogisticOptions opts = {}) {
    auto fit = logistic_fit(design, response, opts);
    if (!fit.converged) throw ConvergenceError("logistic regression failed: " + fit.diagnostic);
    return fit;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

inline double pearson(const Vector& a, const Vector& b) {
    if (a.size() != b.size() || a.size() < 2) throw ValidationError("correlation needs equal lengths >= 2");
    const Vector ca = a.array() - a.mean();
    const Vector cb = b.array() - b.mean();
    const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
    if (!(den > 0.0)) throw ComputationError("correlation undefined for a constant vector");
    return std::clamp(ca.dot(cb) / den, -1.0, 1.0);
}

struct PartialCorrelation {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::size_t k = 0;
};

/*
 * Correlation of the OLS residuals of x and y on z (plus intercept), tested
 * with t = r * sqrt((n - 2 - k) / (1 - r^2)) on n - 2 - k degrees of freedom.
 */
inline PartialCorrelation partial_correlation(const Vector& x, const Vector& y, const Matrix& z) {
    const auto n = static_cast<std::size_t>(x.size());
    const auto k = static_cast<std::size_t>(z.cols());
    if (static_cast<std::size_t>(y.size()) != n || (z.cols() > 0 && static_cast<std::size_t>(z.rows()) != n)) {
        throw ValidationError("partial correlation inputs must have equal lengths");
    }
    if (n <= k + 3) throw ValidationError("partial correlation needs n > k + 3");
    Vector rx, ry;
    if (k == 0) {
        rx = x.array() - x.mean();
        ry = y.array() - y.mean();
    } else {
        rx = ols_residuals(z, x);
        ry = ols_residuals(z, y);
    }
    // residuals at rounding-noise level count as constant
    const double tiny = 1e-12;
    if (rx.norm() <= tiny * std::max(1.0, x.norm()) || ry.norm() <= tiny * std::max(1.0, y.norm())) {
        throw ComputationError("partial correlation undefined: residual vector is constant");
    }
    PartialCorrelation out;
    out.n = n;
    out.k = k;
    out.r = pearson(rx, ry);
    const double df = static_cast<double>(n) - 2.0 - static_cast<double>(k);
    const double denom = 1.0 - out.r * out.r;
    if (denom <= 0.0) {
        out.p_value = 0.0;
    } else {
        const double t = out.r * std::sqrt(df / denom);
        out.p_value = two_sided_t_p(t, df);
    }
    return out;
}

}  // namespace docausal

#endif  // DOCAUSAL_REGRESS_HPP
