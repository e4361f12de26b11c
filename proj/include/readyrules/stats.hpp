#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "readyrules/errors.hpp"

// Small test-statistics toolbox used by the ensemble checks: histograms,
// a chi-square goodness of fit test, a 2 x K homogeneity test and the
// two-sample Kolmogorov-Smirnov test.

namespace readyrules::stats {

// Regularized upper incomplete gamma Q(a, x). Series expansion below the
// a + 1 crossover, modified Lentz continued fraction above it.
inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0)
        throw config_error("regularized_gamma_q requires a > 0 and x >= 0");
    if (x == 0.0) return 1.0;

    const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int n = 0; n < 1000; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        return 1.0 - sum * std::exp(log_prefactor);
    }
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(log_prefactor) * h;
}

inline double chi_square_sf(double stat, int dof) {
    if (dof < 1) throw config_error("chi_square_sf requires dof >= 1");
    if (stat < 0.0) return 1.0;
    return regularized_gamma_q(0.5 * dof, 0.5 * stat);
}

// Survival function of the Kolmogorov distribution,
// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_sf(double lambda) {
    // Below 0.18 the survival probability is 1 within double precision and
    // the alternating series needs thousands of terms, so short-circuit.
    if (lambda < 0.18) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct TestResult {
    double stat = 0.0;
    int dof = 0;
    double p = 1.0;
};

// Goodness of fit of observed bin counts against expected counts. The
// expected counts are rescaled to the observed total; dof = bins - 1.
inline TestResult chi_square_gof(const std::vector<double>& observed,
                                 const std::vector<double>& expected) {
    if (observed.size() != expected.size() || observed.empty())
        throw config_error("chi_square_gof needs matching nonempty bin vectors");
    double n_obs = 0.0, n_exp = 0.0;
    for (double o : observed) n_obs += o;
    for (double e : expected) n_exp += e;
    if (!(n_exp > 0.0) || !(n_obs > 0.0))
        throw config_error("chi_square_gof needs positive totals");

    const double scale = n_obs / n_exp;
    TestResult r;
    int used = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        double e = expected[i] * scale;
        if (e <= 0.0) {
            if (observed[i] > 0.0)
                throw model_error("chi_square_gof: observations in a bin with zero expectation");
            continue;
        }
        double d = observed[i] - e;
        r.stat += d * d / e;
        ++used;
    }
    if (used < 2) throw config_error("chi_square_gof needs at least two populated bins");
    r.dof = used - 1;
    r.p = chi_square_sf(r.stat, r.dof);
    return r;
}

// 2 x K homogeneity test for two vectors of category counts.
inline TestResult chi_square_homogeneity(const std::vector<double>& a,
                                         const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw config_error("chi_square_homogeneity needs matching category vectors");
    double ta = 0.0, tb = 0.0;
    for (double v : a) ta += v;
    for (double v : b) tb += v;
    const double total = ta + tb;
    if (!(ta > 0.0) || !(tb > 0.0))
        throw config_error("chi_square_homogeneity needs nonempty samples");

    TestResult r;
    int used = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double col = a[i] + b[i];
        if (col == 0.0) continue;
        double ea = ta * col / total;
        double eb = tb * col / total;
        r.stat += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
        ++used;
    }
    if (used < 2) throw config_error("chi_square_homogeneity needs at least two categories");
    r.dof = used - 1;
    r.p = chi_square_sf(r.stat, r.dof);
    return r;
}

struct KsResult {
    double d = 0.0;
    double p = 1.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
};

// Two-sample Kolmogorov-Smirnov test with the usual finite-sample
// adjustment lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw config_error("ks_two_sample needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    KsResult r;
    r.n1 = a.size();
    r.n2 = b.size();
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0;
    while (i < a.size() && j < b.size()) {
        double xa = a[i], xb = b[j];
        if (xa <= xb) fa = static_cast<double>(++i) / a.size();
        if (xb <= xa) fb = static_cast<double>(++j) / b.size();
        r.d = std::max(r.d, std::abs(fa - fb));
    }
    r.d = std::max(r.d, 1.0 - std::min(fa, fb));

    const double ne = static_cast<double>(r.n1) * r.n2 / (r.n1 + r.n2);
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * r.d;
    r.p = kolmogorov_sf(lambda);
    return r;
}

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;

    double bin_lo(int i) const { return lo + (hi - lo) * i / counts.size(); }
    double bin_hi(int i) const { return lo + (hi - lo) * (i + 1) / counts.size(); }

    bool operator==(const Histogram&) const = default;
};

inline Histogram make_histogram(const std::vector<double>& xs, double lo, double hi,
                                int nbins) {
    if (!(hi > lo) || nbins < 1)
        throw config_error("make_histogram needs hi > lo and at least one bin");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(nbins, 0);
    for (double x : xs) {
        if (x < lo || x > hi) continue;
        int b = std::min(nbins - 1, static_cast<int>((x - lo) / (hi - lo) * nbins));
        ++h.counts[b];
        ++h.total;
    }
    return h;
}

} // namespace readyrules::stats
