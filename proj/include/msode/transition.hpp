#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

#include "msode/common.hpp"
#include "msode/expm.hpp"
#include "msode/ode.hpp"

namespace msode {

// Cell anchor g_d(t): the largest grid multiple of d not exceeding t, with a
// relative snap so that t computed as k*d in floating point lands on cell k
// even when d is not binary-representable (d = 1/6, 0.005, ...).
inline long cell_index(double t, double d) {
    if (!(d > 0)) throw ConfigError("grid width d must be positive");
    if (t < 0) throw ConfigError("grid anchor expects t >= 0");
    double q = t / d;
    double fl = std::floor(q);
    long k = static_cast<long>(fl);
    if (q - fl > 1.0 - 1e-9 * std::max(1.0, q)) ++k;  // snap to the boundary just above
    return k;
}

inline double grid_anchor(double t, double d) { return cell_index(t, d) * d; }

enum class EngineKind { ode, piecewise, homogeneous };

struct EngineConfig {
    EngineKind kind = EngineKind::ode;
    double d = 1.0;  // piecewise cell width
    OdeOptions ode;
};

struct TransitionSolution {
    Matrix p;
    EngineKind method = EngineKind::ode;
    long steps = 0;         // accepted integrator steps, or expm factor count
    double err_estimate = 0;
};

// Clip tiny negative entries / overshoots and renormalize rows.  Deviations
// beyond tol are numerical failures, not things to hide.
inline void cleanup_stochastic(Matrix& p, double tol = 1e-8) {
    const int m = static_cast<int>(p.rows());
    for (int i = 0; i < m; ++i) {
        double row = 0;
        for (int j = 0; j < m; ++j) {
            double v = p(i, j);
            if (!std::isfinite(v)) throw NumericalError("transition matrix has non-finite entries");
            if (v < -tol || v > 1 + tol)
                throw NumericalError("transition probability " + std::to_string(v) +
                                     " deviates beyond cleanup tolerance");
            v = std::min(1.0, std::max(0.0, v));
            p(i, j) = v;
            row += v;
        }
        if (std::abs(row - 1) > tol)
            throw NumericalError("transition row sum " + std::to_string(row) +
                                 " deviates beyond cleanup tolerance");
        p.row(i) /= row;
    }
}

// Time-homogeneous interval: P = exp(h Q), Q frozen at the interval start.
inline TransitionSolution solve_homogeneous(const Matrix& q, double h) {
    if (h < 0) throw ConfigError("interval length must be nonnegative");
    TransitionSolution sol;
    sol.method = EngineKind::homogeneous;
    if (h == 0) {
        sol.p = Matrix::Identity(q.rows(), q.cols());
        return sol;
    }
    sol.p = expm(h * q);
    sol.steps = 1;
    cleanup_stochastic(sol.p);
    return sol;
}

template <class RateFn>
TransitionSolution solve_homogeneous(RateFn&& rate_at, int m, double t, double h) {
    Matrix q(m, m);
    rate_at(t, q);
    return solve_homogeneous(q, h);
}

// Exact interval solution: integrate the forward equation across [t, t+h].
template <class RateFn>
TransitionSolution solve_ode(RateFn&& rate_at, int m, double t, double h,
                             const OdeOptions& opt = {}) {
    if (h < 0) throw ConfigError("interval length must be nonnegative");
    TransitionSolution sol;
    sol.method = EngineKind::ode;
    if (h == 0) {
        sol.p = Matrix::Identity(m, m);
        return sol;
    }
    std::vector<double> times{t, t + h};
    Matrix result;
    OdeStats st = integrate_transition(rate_at, m, times, opt,
                                       [&](std::size_t, Matrix& p) { result = p; });
    sol.p = std::move(result);
    sol.steps = st.accepted;
    sol.err_estimate = st.err_accum * opt.rtol;
    cleanup_stochastic(sol.p);
    return sol;
}

// Cache of exp(width * Q(anchor)) factors for one likelihood evaluation.
// Keyed on (cell index, width); callers keep one cache per covariate pattern,
// which realizes the (cell, width, covariates) key without hashing covariate
// vectors in the hot loop.
class FactorCache {
  public:
    template <class Make>
    const Matrix& get(long cell, double width, Make&& make) {
        Key key{cell, width_bits(width)};
        auto it = map_.find(key);
        if (it != map_.end()) {
            ++hits_;
            return it->second;
        }
        ++misses_;
        return map_.emplace(key, make()).first->second;
    }
    long hits() const { return hits_; }
    long misses() const { return misses_; }
    void clear() { map_.clear(); hits_ = misses_ = 0; }

  private:
    struct Key {
        long cell;
        std::uint64_t width;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t x = static_cast<std::uint64_t>(k.cell) * 0x9e3779b97f4a7c15ull;
            x ^= k.width + 0x9e3779b97f4a7c15ull + (x << 6) + (x >> 2);
            return static_cast<std::size_t>(x);
        }
    };
    static std::uint64_t width_bits(double w) {
        std::uint64_t b;
        std::memcpy(&b, &w, sizeof b);
        return b;
    }
    std::unordered_map<Key, Matrix, KeyHash> map_;
    long hits_ = 0, misses_ = 0;
};

// Piecewise-homogeneous approximation on the width-d grid anchored at 0:
// Q is frozen at the left edge of each cell, so the interval factorizes into
// at most two partial-cell exponentials around full-cell factors,
//   P = exp((g(t)+d-t) Q(g(t))) * exp(d Q(g(t)+d)) * ... * exp((t+h-g(t+h)) Q(g(t+h))),
// and collapses to exp(h Q(g(t+h))) when both ends share a cell.  Zero-width
// end factors drop out as identities.
template <class RateFn>
TransitionSolution solve_piecewise(RateFn&& rate_at, int m, double t, double h, double d,
                                   FactorCache* cache = nullptr) {
    if (h < 0) throw ConfigError("interval length must be nonnegative");
    TransitionSolution sol;
    sol.method = EngineKind::piecewise;
    sol.p = Matrix::Identity(m, m);
    if (h == 0) return sol;

    FactorCache local;
    FactorCache& fc = cache ? *cache : local;
    Matrix q(m, m);
    auto factor = [&](long cell, double width) -> const Matrix& {
        return fc.get(cell, width, [&] {
            rate_at(cell * d, q);
            return expm(width * q);
        });
    };

    const long k0 = cell_index(t, d);
    const long k1 = cell_index(t + h, d);
    Matrix acc(m, m);
    if (k0 == k1) {
        sol.p = factor(k1, h);
        sol.steps = 1;
    } else {
        double w0 = (k0 + 1) * d - t;
        if (w0 > 0) {
            sol.p = factor(k0, w0);  // partial first cell, anchored at its left edge
            ++sol.steps;
        }
        for (long k = k0 + 1; k < k1; ++k) {
            acc.noalias() = sol.p * factor(k, d);
            sol.p.swap(acc);
            ++sol.steps;
        }
        double w1 = t + h - k1 * d;
        if (w1 > 0) {
            acc.noalias() = sol.p * factor(k1, w1);
            sol.p.swap(acc);
            ++sol.steps;
        }
    }
    cleanup_stochastic(sol.p);
    return sol;
}

// Per-interval factors P(t_k, t_{k+1}) for one subject.  The ode engine uses
// a single adaptive pass over [t_1, t_n], resetting the state to the identity
// at each observation time; piecewise and homogeneous engines solve the
// intervals directly (sharing the factor cache where given).
template <class RateFn>
std::vector<Matrix> interval_factors(RateFn&& rate_at, int m, const std::vector<double>& times,
                                     const EngineConfig& cfg, FactorCache* cache = nullptr) {
    std::vector<Matrix> factors;
    if (times.size() < 2) return factors;
    factors.reserve(times.size() - 1);
    switch (cfg.kind) {
        case EngineKind::ode: {
            integrate_transition(rate_at, m, times, cfg.ode, [&](std::size_t, Matrix& p) {
                cleanup_stochastic(p);
                factors.push_back(p);
                p = Matrix::Identity(m, m);
            });
            break;
        }
        case EngineKind::piecewise: {
            for (std::size_t k = 0; k + 1 < times.size(); ++k)
                factors.push_back(solve_piecewise(rate_at, m, times[k], times[k + 1] - times[k],
                                                  cfg.d, cache)
                                      .p);
            break;
        }
        case EngineKind::homogeneous: {
            Matrix q(m, m);
            for (std::size_t k = 0; k + 1 < times.size(); ++k) {
                rate_at(times[k], q);
                factors.push_back(solve_homogeneous(q, times[k + 1] - times[k]).p);
            }
            break;
        }
    }
    return factors;
}

}  // namespace msode
