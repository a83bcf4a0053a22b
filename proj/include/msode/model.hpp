#pragma once

#include <cmath>

#include "msode/common.hpp"
#include "msode/emission.hpp"
#include "msode/panel.hpp"
#include "msode/parameters.hpp"
#include "msode/priors.hpp"
#include "msode/rate_spec.hpp"
#include "msode/state_space.hpp"

namespace msode {

// Full model: state space, rate designs, observation model, initial
// distribution, priors.  Owns the parameter layout.
struct ModelSpec {
    StateSpace states;
    RateSpec rates;
    EmissionModel emission;
    InitSpec init;
    PriorSpec priors;
    ParameterLayout layout;

    int m() const { return states.m(); }

    void finalize() {
        states.validate();
        if (rates.m != states.m()) throw ConfigError("rate spec does not match state count");
        rates.validate();
        for (int s = 0; s < states.m(); ++s) {
            bool exits = false;
            for (int t = 0; t < states.m(); ++t) exits = exits || rates.mask[s][t];
            if (states.absorbing[s] && exits)
                throw ConfigError("absorbing state '" + states.labels[s] + "' has allowed exits");
        }
        emission.validate(states.m());
        init.validate(states.m());
        priors.validate();
        layout = ParameterLayout::build(states, rates, emission, init);
    }
};

inline constexpr double max_log_rate = 690.77552789821368;  // log(1e300)

// Log-linear predictor of transition j at time t.  Predictors beyond the
// safe exp() range (rates outside 1e+-300) reject the whole evaluation.
inline double rate_predictor(const ModelSpec& spec, const Vector& theta, int j, double t,
                             const Vector& covs) {
    const auto& tr = spec.rates.transitions[j];
    const double* beta = theta.data() + spec.layout.transition_offsets[j];
    double eta = 0;
    for (std::size_t k = 0; k < tr.terms.size(); ++k) {
        switch (tr.terms[k].kind) {
            case RateTerm::intercept: eta += beta[k]; break;
            case RateTerm::time: eta += beta[k] * t; break;
            case RateTerm::covariate: eta += beta[k] * covs[tr.terms[k].cov_index]; break;
        }
    }
    if (!std::isfinite(eta) || std::abs(eta) > max_log_rate)
        throw RateOverflowError(tr.from, tr.to, eta);
    return eta;
}

// Generator Q(t): exp of the log-linear predictors on allowed cells, zero on
// disallowed cells, diagonal = -(row sum).  Absorbing rows are identically
// zero by construction.
inline void build_rate_matrix(const ModelSpec& spec, const Vector& theta, double t,
                              const Vector& covs, Matrix& q) {
    const int m = spec.m();
    q.setZero(m, m);
    for (int j = 0; j < spec.rates.n_transitions(); ++j) {
        const auto& tr = spec.rates.transitions[j];
        double v = std::exp(rate_predictor(spec, theta, j, t, covs));
        q(tr.from, tr.to) = v;
        q(tr.from, tr.from) -= v;
    }
}

inline Matrix build_rate_matrix(const ModelSpec& spec, const Vector& theta, double t,
                                const Vector& covs) {
    Matrix q;
    build_rate_matrix(spec, theta, t, covs, q);
    return q;
}

// Exit rates q_{r,s}(t) out of state r, and their total.  Used by the
// simulator's thinning loop, which only ever needs one row.
inline double exit_rates(const ModelSpec& spec, const Vector& theta, int r, double t,
                         const Vector& covs, std::vector<std::pair<int, double>>& out) {
    out.clear();
    double total = 0;
    for (int j = 0; j < spec.rates.n_transitions(); ++j) {
        const auto& tr = spec.rates.transitions[j];
        if (tr.from != r) continue;
        double v = std::exp(rate_predictor(spec, theta, j, t, covs));
        out.emplace_back(tr.to, v);
        total += v;
    }
    return total;
}

// Q(t) evaluator bound to one model, theta, covariate vector; the shape the
// transition solvers are templated on.
struct ModelRateFn {
    const ModelSpec& spec;
    const Vector& theta;
    const Vector& covs;
    void operator()(double t, Matrix& q) const { build_rate_matrix(spec, theta, t, covs, q); }
};

}  // namespace msode
