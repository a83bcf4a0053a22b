#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "msode/common.hpp"

namespace msode {

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    long max_steps = 1000000;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    double err_accum = 0;  // sum of accepted scaled error norms, a rough global gauge
};

// Dormand-Prince 5(4) pair with PI step-size control, specialized to the
// matrix ODE P'(u) = P(u) Q(u).  The whole m^2 system shares one adaptive
// step schedule, so row sums are conserved to solver precision.
//
// Integrates from times[0] to times.back(), landing exactly on every interior
// time; on_checkpoint(k, P) fires at times[k] for k >= 1 and may overwrite P
// (reset to identity) to cut the trajectory into per-interval factors, which
// is legitimate because P(t,u) = P(t,s) P(s,u).
template <class RateFn, class OnCheckpoint>
OdeStats integrate_transition(RateFn&& rate_at, int m, const std::vector<double>& times,
                              const OdeOptions& opt, OnCheckpoint&& on_checkpoint) {
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    // controller constants as in classic dopri5
    static const double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
    static const double facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;

    if (times.size() < 2) throw ConfigError("integrator needs at least two times");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1]))
            throw ConfigError("integrator times must be strictly increasing");

    const double t_end = times.back();
    Matrix y = Matrix::Identity(m, m), ynew(m, m), ytmp(m, m), q(m, m), err_mat(m, m);
    Matrix k1(m, m), k2(m, m), k3(m, m), k4(m, m), k5(m, m), k6(m, m), k7(m, m);

    double t = times[0];
    std::size_t next_cp = 1;
    OdeStats stats;

    auto scaled_err = [&](const Matrix& e, const Matrix& y0, const Matrix& y1) {
        double acc = 0;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                double sc = opt.atol + opt.rtol * std::max(std::abs(y0(i, j)), std::abs(y1(i, j)));
                double r = e(i, j) / sc;
                acc += r * r;
            }
        return std::sqrt(acc / (m * m));
    };

    // initial step size (trial Euler step heuristic)
    rate_at(t, q);
    k1.noalias() = y * q;
    double h;
    {
        double d0 = 0, d1 = 0;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                double sc = opt.atol + opt.rtol * std::abs(y(i, j));
                d0 += (y(i, j) / sc) * (y(i, j) / sc);
                d1 += (k1(i, j) / sc) * (k1(i, j) / sc);
            }
        d0 = std::sqrt(d0 / (m * m));
        d1 = std::sqrt(d1 / (m * m));
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, t_end - t);
        ytmp = y + h0 * k1;
        rate_at(t + h0, q);
        k2.noalias() = ytmp * q;
        double d2 = 0;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                double sc = opt.atol + opt.rtol * std::abs(y(i, j));
                double r = (k2(i, j) - k1(i, j)) / sc;
                d2 += r * r;
            }
        d2 = std::sqrt(d2 / (m * m)) / h0;
        double h1 = (std::max(d1, d2) <= 1e-15)
                        ? std::max(1e-6, h0 * 1e-3)
                        : std::pow(0.01 / std::max(d1, d2), 0.2);
        h = std::min({100 * h0, h1, t_end - t});
    }

    double facold = 1e-4;
    bool fresh_k1 = true;  // k1 currently holds f(t, y)
    bool last_rejected = false;

    while (t < t_end) {
        if (stats.accepted + stats.rejected > opt.max_steps)
            throw SolverFailure("integrator exceeded its step budget", t);
        if (!(h > std::abs(t) * 1e-14 + 1e-300))
            throw SolverFailure("integrator step size underflow", t);

        bool hit_cp = false;
        double h_step = h;
        if (t + h_step >= times[next_cp] - 1e-14 * std::max(1.0, std::abs(times[next_cp]))) {
            h_step = times[next_cp] - t;
            hit_cp = true;
        }

        if (!fresh_k1) {
            rate_at(t, q);
            k1.noalias() = y * q;
            fresh_k1 = true;
        }

        ytmp = y + (h_step * a21) * k1;
        rate_at(t + c2 * h_step, q);
        k2.noalias() = ytmp * q;

        ytmp = y + h_step * (a31 * k1 + a32 * k2);
        rate_at(t + c3 * h_step, q);
        k3.noalias() = ytmp * q;

        ytmp = y + h_step * (a41 * k1 + a42 * k2 + a43 * k3);
        rate_at(t + c4 * h_step, q);
        k4.noalias() = ytmp * q;

        ytmp = y + h_step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rate_at(t + c5 * h_step, q);
        k5.noalias() = ytmp * q;

        ytmp = y + h_step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rate_at(t + h_step, q);
        k6.noalias() = ytmp * q;

        ynew = y + h_step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        // q still holds Q(t + h_step)
        k7.noalias() = ynew * q;

        err_mat = h_step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = scaled_err(err_mat, y, ynew);

        if (err <= 1.0) {
            ++stats.accepted;
            stats.err_accum += err;
            facold = std::max(err, 1e-4);
            t = hit_cp ? times[next_cp] : t + h_step;
            y.swap(ynew);
            k1.swap(k7);  // FSAL
            fresh_k1 = true;

            double fac11 = std::pow(err, expo1);
            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(facc2, std::min(facc1, fac / safe));
            double hnew = h_step / fac;
            if (last_rejected) hnew = std::min(hnew, h_step);
            last_rejected = false;
            // after a clamped step, let the controller resume from the larger
            // of the clamp width and the previous free step
            h = hit_cp ? std::max(hnew, h) : hnew;

            if (hit_cp) {
                on_checkpoint(next_cp, y);
                fresh_k1 = false;  // callback may have replaced y
                ++next_cp;
                if (next_cp >= times.size()) break;
            }
        } else {
            ++stats.rejected;
            last_rejected = true;
            double fac11 = std::pow(err, expo1);
            h = h_step / std::min(facc1, fac11 / safe);
        }
    }
    return stats;
}

}  // namespace msode
