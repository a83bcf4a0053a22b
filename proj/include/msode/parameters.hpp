#pragma once

#include <string>
#include <vector>

#include "msode/common.hpp"
#include "msode/emission.hpp"
#include "msode/rate_spec.hpp"
#include "msode/state_space.hpp"

namespace msode {

// Initial latent-state distribution: either estimated through m-1 logits
// with state 1 as the reference category, or fixed at given probabilities.
struct InitSpec {
    bool estimate = true;
    Vector fixed_probs;  // used when !estimate

    void validate(int m) const {
        if (!estimate) {
            if (fixed_probs.size() != m)
                throw ConfigError("fixed initial distribution needs one probability per state");
            double sum = 0;
            for (Eigen::Index i = 0; i < fixed_probs.size(); ++i) {
                if (fixed_probs[i] < 0) throw ConfigError("negative initial probability");
                sum += fixed_probs[i];
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw ConfigError("fixed initial distribution must sum to 1");
        }
    }
};

// Flat unconstrained parameter vector layout.  Slice order is fixed:
// rate coefficients (transition-major, design order within a transition),
// misclassification logits (error-cell order), initial-distribution logits,
// per-state log concentrations of the band channel.
struct ParameterLayout {
    int dim = 0;
    int rate_offset = 0, rate_count = 0;
    int misclass_offset = 0, misclass_count = 0;
    int init_offset = 0, init_count = 0;
    int emission_offset = 0, emission_count = 0;
    std::vector<int> transition_offsets;  // absolute offset of each transition's coefficients
    std::vector<std::string> names;
    int m = 0, n_bands = 0;

    static ParameterLayout build(const StateSpace& states, const RateSpec& rates,
                                 const EmissionModel& emission, const InitSpec& init) {
        ParameterLayout lay;
        lay.m = states.m();
        lay.n_bands = emission.n_bands();
        auto term_name = [&](const RateTerm& t) -> std::string {
            switch (t.kind) {
                case RateTerm::intercept: return "intercept";
                case RateTerm::time: return "time";
                default: return rates.covariate_names[t.cov_index];
            }
        };
        int at = 0;
        lay.rate_offset = at;
        for (const auto& tr : rates.transitions) {
            lay.transition_offsets.push_back(at);
            for (const auto& t : tr.terms) {
                lay.names.push_back("beta_" + states.labels[tr.from] + "to" + states.labels[tr.to] +
                                    "_" + term_name(t));
                ++at;
            }
        }
        lay.rate_count = at - lay.rate_offset;

        lay.misclass_offset = at;
        if (has_misclassification(emission.kind))
            for (auto [r, o] : emission.error_cells) {
                lay.names.push_back("mis_" + states.labels[r] + "to" + states.labels[o]);
                ++at;
            }
        lay.misclass_count = at - lay.misclass_offset;

        lay.init_offset = at;
        if (init.estimate)
            for (int s = 1; s < lay.m; ++s) {
                lay.names.push_back("init_" + states.labels[s]);
                ++at;
            }
        lay.init_count = at - lay.init_offset;

        lay.emission_offset = at;
        if (has_band_channel(emission.kind))
            for (int s = 0; s < lay.m; ++s)
                for (const auto& b : emission.band_names) {
                    lay.names.push_back("logconc_" + states.labels[s] + "_" + b);
                    ++at;
                }
        lay.emission_count = at - lay.emission_offset;

        lay.dim = at;
        return lay;
    }
};

// Structured view of one theta.  Slices are stored unconstrained, so
// pack(unpack(theta)) reproduces theta exactly.
struct Parameters {
    Vector rate, misclass, init, emission;
};

inline Parameters unpack(const ParameterLayout& lay, const Vector& theta) {
    if (theta.size() != lay.dim) throw ConfigError("theta length does not match layout");
    Parameters p;
    p.rate = theta.segment(lay.rate_offset, lay.rate_count);
    p.misclass = theta.segment(lay.misclass_offset, lay.misclass_count);
    p.init = theta.segment(lay.init_offset, lay.init_count);
    p.emission = theta.segment(lay.emission_offset, lay.emission_count);
    return p;
}

inline Vector pack(const ParameterLayout& lay, const Parameters& p) {
    if (p.rate.size() != lay.rate_count || p.misclass.size() != lay.misclass_count ||
        p.init.size() != lay.init_count || p.emission.size() != lay.emission_count)
        throw ConfigError("parameter slices do not match layout");
    Vector theta(lay.dim);
    theta.segment(lay.rate_offset, lay.rate_count) = p.rate;
    theta.segment(lay.misclass_offset, lay.misclass_count) = p.misclass;
    theta.segment(lay.init_offset, lay.init_count) = p.init;
    theta.segment(lay.emission_offset, lay.emission_count) = p.emission;
    return theta;
}

// pi(theta): multinomial logit with state 1 as reference, or the fixed
// probabilities when the initial distribution is not estimated.
inline Vector initial_distribution(const InitSpec& init, const ParameterLayout& lay,
                                   const Vector& theta) {
    if (!init.estimate) return init.fixed_probs;
    Vector pi(lay.m);
    double denom = 1.0;
    pi[0] = 1.0;
    for (int s = 1; s < lay.m; ++s) {
        pi[s] = std::exp(theta[lay.init_offset + s - 1]);
        denom += pi[s];
    }
    return pi / denom;
}

// Per-state Dirichlet concentrations (m x B), exp of the stored logs.
inline Matrix emission_concentrations(const ParameterLayout& lay, const Vector& theta) {
    Matrix conc(lay.m, lay.n_bands);
    for (int s = 0; s < lay.m; ++s)
        for (int b = 0; b < lay.n_bands; ++b)
            conc(s, b) = std::exp(theta[lay.emission_offset + s * lay.n_bands + b]);
    return conc;
}

}  // namespace msode
