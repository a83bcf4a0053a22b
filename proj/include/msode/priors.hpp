#pragma once

#include <cmath>

#include "msode/common.hpp"
#include "msode/parameters.hpp"

namespace msode {

// Independent Gaussian priors on the unconstrained scale, one location/scale
// pair per layout slice.  The default scale 20 is diffuse for log rates,
// logits, and log concentrations alike.
struct PriorSpec {
    struct Slice {
        double loc = 0.0, scale = 20.0;
    };
    Slice rate, misclass, init, emission;

    void validate() const {
        for (const Slice* s : {&rate, &misclass, &init, &emission})
            if (!(s->scale > 0)) throw ConfigError("prior scale must be positive");
    }
};

inline double normal_logpdf(double x, double loc, double scale) {
    static const double log_sqrt_2pi = 0.5 * std::log(2.0 * M_PI);
    double z = (x - loc) / scale;
    return -log_sqrt_2pi - std::log(scale) - 0.5 * z * z;
}

inline double log_prior(const PriorSpec& pr, const ParameterLayout& lay, const Vector& theta) {
    if (theta.size() != lay.dim) throw ConfigError("theta length does not match layout");
    double lp = 0;
    auto add = [&](int off, int n, const PriorSpec::Slice& s) {
        for (int i = 0; i < n; ++i) lp += normal_logpdf(theta[off + i], s.loc, s.scale);
    };
    add(lay.rate_offset, lay.rate_count, pr.rate);
    add(lay.misclass_offset, lay.misclass_count, pr.misclass);
    add(lay.init_offset, lay.init_count, pr.init);
    add(lay.emission_offset, lay.emission_count, pr.emission);
    return lp;
}

}  // namespace msode
