#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pessirank/random.hpp"

namespace pessirank {

// Beta(alpha, beta) prior over a Bernoulli mean.
struct BetaPrior {
    double alpha = 1.0;
    double beta = 1.0;

    double mean() const { return alpha / (alpha + beta); }

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha) || !(beta > 0.0) || !std::isfinite(beta))
            throw std::invalid_argument("BetaPrior: alpha and beta must be positive finite");
    }
};

// Positive/negative pseudo-count pair. Fractional counts are allowed (PBM
// produces examination-weighted observations).
struct BinomialStats {
    double pos = 0.0;
    double neg = 0.0;

    double n() const { return pos + neg; }

    void validate() const {
        if (!(pos >= 0.0) || !std::isfinite(pos) || !(neg >= 0.0) || !std::isfinite(neg))
            throw std::invalid_argument("BinomialStats: counts must be non-negative finite");
    }
};

inline double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::invalid_argument("log_gamma: x must be positive, got " + std::to_string(x));
    return std::lgamma(x);
}

namespace detail {

// Continued fraction for the incomplete beta, evaluated with Lentz's method.
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 1000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b), split at the symmetry point so the
// continued fraction always converges fast.
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("regularized_incomplete_beta: a, b must be positive");
    if (!(x >= 0.0) || !(x <= 1.0))
        throw std::invalid_argument("regularized_incomplete_beta: x must be in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Quantile of Beta(a, b): the x with I_x(a, b) = q. Bisection down to a 1e-12
// bracket, then bracket-guarded Newton polish on the density.
inline double beta_quantile(double a, double b, double q) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("beta_quantile: a, b must be positive");
    if (!(q > 0.0) || !(q < 1.0))
        throw std::invalid_argument("beta_quantile: q must be in (0, 1)");

    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_incomplete_beta(a, b, mid) < q)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);

    const double ln_beta = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
    for (int it = 0; it < 40; ++it) {
        const double f = regularized_incomplete_beta(a, b, x) - q;
        if (std::fabs(f) <= 1e-15) break;
        if (f > 0.0)
            hi = std::min(hi, x);
        else
            lo = std::max(lo, x);
        const double ln_pdf =
            (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - ln_beta;
        const double pdf = std::exp(ln_pdf);
        double next = x - f / pdf;
        if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
        if (next == x) break;
        x = next;
    }
    return x;
}

// Hoeffding lower confidence bound: MLE minus sqrt(log(1/delta) / (2n)).
// Deliberately not clamped; callers substituting into value functions clamp.
inline double hoeffding_lcb(const BinomialStats& stats, double delta) {
    stats.validate();
    if (!(delta > 0.0) || !(delta <= 1.0))
        throw std::invalid_argument("hoeffding_lcb: delta must be in (0, 1]");
    const double n = stats.n();
    if (!(n > 0.0)) throw std::invalid_argument("hoeffding_lcb: empty stats");
    return stats.pos / n - std::sqrt(std::log(1.0 / delta) / (2.0 * n));
}

// Bayesian lower confidence bound: the delta/2 posterior quantile of
// Beta(alpha + pos, beta + neg). delta = 1 yields the posterior median.
// Valid with no data (pure prior quantile).
inline double bayes_lcb(const BinomialStats& stats, const BetaPrior& prior, double delta) {
    stats.validate();
    prior.validate();
    if (!(delta > 0.0) || !(delta <= 1.0))
        throw std::invalid_argument("bayes_lcb: delta must be in (0, 1]");
    return beta_quantile(prior.alpha + stats.pos, prior.beta + stats.neg, 0.5 * delta);
}

// Inverse-CDF draw from Beta(alpha, beta).
inline double sample_beta(const BetaPrior& prior, RandomEngine& rng) {
    return beta_quantile(prior.alpha, prior.beta, rng.next_open_double());
}

}  // namespace pessirank
