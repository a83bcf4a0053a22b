#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "msode/common.hpp"
#include "msode/io/csv.hpp"
#include "msode/rng.hpp"
#include "msode/transition.hpp"

namespace msode {

// Least-squares projection of the line beta0 + beta1*t onto a regression in
// grid time g_d(t) = t - (t mod d).  The closed forms below (not a generic
// normal-equations solve) are the object under study: the slope error is
// bounded by d*|beta1|/sqrt(A_n/n) and vanishes as the grid-time variance
// grows, while the intercept error c*|beta1| persists whenever the
// observation times sit a constant offset c above the grid.
struct ProjectionResult {
    double b0 = 0;
    double b1 = 0;
    double a_n = 0;  // sum of squared grid-time deviations
    std::size_t n = 0;
    double d = 1.0;
};

inline ProjectionResult project_on_grid(const std::vector<double>& times, double beta0,
                                        double beta1, double d) {
    if (!(d > 0)) throw ConfigError("grid width must be positive");
    const std::size_t n = times.size();
    if (n < 2) throw ConfigError("projection needs at least two observation times");

    double t_bar = 0, g_bar = 0;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = grid_anchor(times[i], d);
        t_bar += times[i];
        g_bar += g[i];
    }
    t_bar /= static_cast<double>(n);
    g_bar /= static_cast<double>(n);

    double a_n = 0, g_sq = 0, tg = 0, g_sum = 0, cross = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a_n += (g[i] - g_bar) * (g[i] - g_bar);
        g_sq += g[i] * g[i];
        tg += times[i] * g[i];
        g_sum += g[i];
        cross += (times[i] - t_bar) * (g[i] - g_bar);
    }
    if (!(a_n > 0)) throw ConfigError("degenerate design: grid times show no variation");

    ProjectionResult r;
    r.a_n = a_n;
    r.n = n;
    r.d = d;
    r.b0 = beta0 + (t_bar * g_sq - tg * g_sum / static_cast<double>(n)) / a_n * beta1;
    r.b1 = beta1 + (cross / a_n - 1.0) * beta1;
    return r;
}

// Slope-error bound: returns (|beta1 - b1|, d*|beta1|/sqrt(A_n/n)) and
// insists the bound holds, up to roundoff.
inline std::pair<double, double> check_slope_bias_bound(const std::vector<double>& times, double beta1,
                                              double d) {
    ProjectionResult r = project_on_grid(times, 0.0, beta1, d);
    const double bias = std::abs(beta1 - r.b1);
    const double bound =
        d * std::abs(beta1) / std::sqrt(r.a_n / static_cast<double>(r.n));
    if (bias > bound + 1e-12 * (1.0 + bound))
        throw NumericalError("slope bias " + std::to_string(bias) + " exceeds its bound " +
                             std::to_string(bound));
    return {bias, bound};
}

// Constant-offset intercept error: builds t_i = (i-1)*d + c and returns
// |beta0 - b0|, which must equal c*|beta1| exactly for every such design.
inline double check_intercept_shift_bias(double c, double d, double beta0, double beta1, std::size_t n) {
    if (!(d > 0)) throw ConfigError("grid width must be positive");
    if (c < 0 || c >= d) throw ConfigError("offset must satisfy 0 <= c < d");
    if (n < 2) throw ConfigError("need at least two observation times");

    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i) * d + c;
    ProjectionResult r = project_on_grid(times, beta0, beta1, d);
    const double bias = std::abs(beta0 - r.b0);
    const double expected = c * std::abs(beta1);
    if (std::abs(bias - expected) > 1e-10 * (1.0 + expected))
        throw NumericalError("intercept bias " + std::to_string(bias) +
                             " drifted from the exact value " + std::to_string(expected));
    return bias;
}

// Three-panel illustration: the same line y = -1/2 + t observed at integer
// times, at integer times shifted by c = 0.6, and at uniform random times,
// each fitted in grid time with d = 1.  One CSV per panel, one row per
// observation, the fitted coefficients repeated on every row.
struct ProjectionPanel {
    std::string name;
    std::string file;
    ProjectionResult fit;
};

inline ProjectionPanel write_bias_panel(const std::string& dir, const std::string& name,
                                     const std::vector<double>& times, double beta0,
                                     double beta1, double d) {
    ProjectionResult fit = project_on_grid(times, beta0, beta1, d);
    std::vector<std::vector<std::string>> rows;
    for (double t : times)
        rows.push_back({format_double(t), format_double(grid_anchor(t, d)),
                        format_double(beta0 + beta1 * t), format_double(fit.b0),
                        format_double(fit.b1)});
    const std::string file = dir + "/projection_" + name + ".csv";
    write_table(file, {"t", "g", "y", "b0", "b1"}, rows);
    return {name, file, fit};
}

inline std::vector<ProjectionPanel> projection_demo(const std::string& dir) {
    const double beta0 = -0.5, beta1 = 1.0, d = 1.0;

    std::vector<double> integer_times, shifted_times, random_times;
    for (int i = 0; i <= 10; ++i) {
        integer_times.push_back(i);
        shifted_times.push_back(i + 0.6);
    }
    Rng rng = make_rng(1729);  // documented seed for the random panel
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    for (int i = 0; i < 200; ++i) random_times.push_back(unif(rng));

    return {write_bias_panel(dir, "integer", integer_times, beta0, beta1, d),
            write_bias_panel(dir, "shifted", shifted_times, beta0, beta1, d),
            write_bias_panel(dir, "random", random_times, beta0, beta1, d)};
}

}  // namespace msode
