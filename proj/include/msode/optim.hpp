#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "msode/common.hpp"
#include "msode/rng.hpp"

namespace msode {

struct NmOptions {
    int max_iter = 4000;
    double ftol = 1e-10;     // absolute spread of simplex objective values
    double init_step = 0.5;  // initial simplex edge length
};

struct NmResult {
    Vector x;
    double fval = std::numeric_limits<double>::infinity();
    int iters = 0;
    bool converged = false;
};

// Nelder-Mead direct search with the standard 1 / 2 / 0.5 / 0.5 moves.
// Non-finite objective values are treated as very bad vertices, so the
// simplex backs away from overflow regions on its own.
template <class F>
NmResult nelder_mead(F&& f, const Vector& x0, const NmOptions& opt = {}) {
    const int p = static_cast<int>(x0.size());
    const double big = std::numeric_limits<double>::max();
    auto safe = [&](const Vector& x) {
        double v = f(x);
        return std::isfinite(v) ? v : big;
    };

    std::vector<Vector> vx(p + 1, x0);
    std::vector<double> fv(p + 1);
    for (int i = 0; i < p; ++i) vx[i + 1][i] += opt.init_step;
    for (int i = 0; i <= p; ++i) fv[i] = safe(vx[i]);

    std::vector<int> ord(p + 1);
    NmResult res;
    for (res.iters = 0; res.iters < opt.max_iter; ++res.iters) {
        for (int i = 0; i <= p; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int best = ord[0], worst = ord[p], second = ord[p - 1];
        if (fv[worst] - fv[best] <= opt.ftol * (1.0 + std::abs(fv[best]))) {
            res.converged = true;
            break;
        }

        Vector centroid = Vector::Zero(p);
        for (int i = 0; i <= p; ++i)
            if (i != worst) centroid += vx[i];
        centroid /= p;

        Vector refl = centroid + (centroid - vx[worst]);
        double f_refl = safe(refl);
        if (f_refl < fv[ord[0]]) {
            Vector expd = centroid + 2.0 * (centroid - vx[worst]);
            double f_expd = safe(expd);
            if (f_expd < f_refl) {
                vx[worst] = expd;
                fv[worst] = f_expd;
            } else {
                vx[worst] = refl;
                fv[worst] = f_refl;
            }
        } else if (f_refl < fv[second]) {
            vx[worst] = refl;
            fv[worst] = f_refl;
        } else {
            Vector contr = centroid + 0.5 * (vx[worst] - centroid);
            double f_contr = safe(contr);
            if (f_contr < fv[worst]) {
                vx[worst] = contr;
                fv[worst] = f_contr;
            } else {
                for (int i = 0; i <= p; ++i) {
                    if (i == best) continue;
                    vx[i] = vx[best] + 0.5 * (vx[i] - vx[best]);
                    fv[i] = safe(vx[i]);
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i <= p; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = vx[best];
    res.fval = fv[best];
    return res;
}

// Multi-start wrapper: one run from x0 itself, the rest from uniform
// perturbations of x0; the best final value wins.
template <class F>
NmResult nelder_mead_multistart(F&& f, const Vector& x0, int starts, Rng& rng,
                                const NmOptions& opt = {}, double spread = 1.0) {
    if (starts < 1) throw ConfigError("need at least one start");
    std::uniform_real_distribution<double> unif(-spread, spread);
    NmResult best;
    for (int s = 0; s < starts; ++s) {
        Vector start = x0;
        if (s > 0)
            for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += unif(rng);
        NmResult r = nelder_mead(f, start, opt);
        if (r.fval < best.fval) best = r;
    }
    return best;
}

}  // namespace msode
