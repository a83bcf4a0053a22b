#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "fixtures.hpp"
#include "msode/model.hpp"

using namespace msode;
using Catch::Approx;

TEST_CASE("state space and mask validation", "[model_core]") {
    ModelSpec spec = fixtures::twostate_progressive();
    REQUIRE(spec.m() == 2);

    SECTION("duplicate labels rejected") {
        ModelSpec bad = spec;
        bad.states.labels = {"x", "x"};
        REQUIRE_THROWS_AS(bad.finalize(), ConfigError);
    }
    SECTION("diagonal mask cells rejected") {
        ModelSpec bad = spec;
        bad.rates.mask[0][0] = true;
        REQUIRE_THROWS_AS(bad.finalize(), ConfigError);
    }
    SECTION("absorbing state with exits rejected") {
        ModelSpec bad = spec;
        bad.rates.mask[1][0] = true;
        bad.rates.transitions.push_back({1, 0, {fixtures::term_intercept()}});
        REQUIRE_THROWS_AS(bad.finalize(), ConfigError);
    }
}

TEST_CASE("rate matrix structure and values", "[model_core]") {
    ModelSpec spec = fixtures::forward4_hmm();
    REQUIRE(spec.layout.dim == 22);  // 15 rate + 4 misclass + 3 init logits

    std::mt19937_64 rng(61001);
    Vector sex1 = Vector::Ones(1), sex0 = Vector::Zero(1);

    SECTION("zero theta gives unit rates on allowed cells") {
        Vector theta = Vector::Zero(spec.layout.dim);
        Matrix q = build_rate_matrix(spec, theta, 0.0, sex0);
        REQUIRE(q(0, 1) == 1.0);
        REQUIRE(q(0, 3) == 1.0);
        REQUIRE(q(0, 0) == -2.0);
    }

    SECTION("structural zeros and absorbing row hold for every theta") {
        for (int rep = 0; rep < 100; ++rep) {
            Vector theta = fixtures::random_theta(spec.layout, rng);
            double t = std::uniform_real_distribution<double>(0, 10)(rng);
            Matrix q = build_rate_matrix(spec, theta, t, sex1);
            REQUIRE(q(0, 2) == 0.0);
            REQUIRE(q(1, 0) == 0.0);
            REQUIRE(q(2, 0) == 0.0);
            REQUIRE(q(2, 1) == 0.0);
            for (int j = 0; j < 4; ++j) REQUIRE(q(3, j) == 0.0);
            double scale = 1.0 + q.cwiseAbs().maxCoeff();
            for (int i = 0; i < 4; ++i)
                REQUIRE(q.row(i).sum() == Approx(0.0).margin(1e-14 * scale));
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    if (i != j) REQUIRE(q(i, j) >= 0.0);
        }
    }

    SECTION("log-linear predictor matches a hand-computed rate") {
        Vector theta = Vector::Zero(spec.layout.dim);
        theta[0] = -2.0;  // 1->2 intercept
        theta[1] = 0.3;   // 1->2 time
        theta[2] = 0.7;   // 1->2 sex
        Matrix q = build_rate_matrix(spec, theta, 2.5, sex1);
        REQUIRE(q(0, 1) == Approx(std::exp(-2.0 + 0.3 * 2.5 + 0.7)).epsilon(1e-14));
        Matrix q0 = build_rate_matrix(spec, theta, 2.5, sex0);
        REQUIRE(q0(0, 1) == Approx(std::exp(-2.0 + 0.3 * 2.5)).epsilon(1e-14));
    }

    SECTION("predictor overflow rejects the evaluation naming the transition") {
        Vector theta = Vector::Zero(spec.layout.dim);
        theta[3] = 800.0;  // 1->4 intercept
        try {
            build_rate_matrix(spec, theta, 0.0, sex0);
            FAIL("expected RateOverflowError");
        } catch (const RateOverflowError& e) {
            REQUIRE(e.from == 0);
            REQUIRE(e.to == 3);
        }
        theta[3] = -800.0;  // underflow side rejected too
        REQUIRE_THROWS_AS(build_rate_matrix(spec, theta, 0.0, sex0), RateOverflowError);
    }
}

TEST_CASE("pack and unpack are exact inverses", "[model_core]") {
    for (ModelSpec spec : {fixtures::forward4_hmm(), fixtures::full4_bands()}) {
        std::mt19937_64 rng(71002);
        for (int rep = 0; rep < 1000; ++rep) {
            Vector theta = fixtures::random_theta(spec.layout, rng, 3.0);
            Parameters p = unpack(spec.layout, theta);
            Vector back = pack(spec.layout, p);
            REQUIRE(back.size() == theta.size());
            for (int i = 0; i < theta.size(); ++i) REQUIRE(back[i] == theta[i]);
        }
    }
}

TEST_CASE("parameter layout names and slices", "[model_core]") {
    ModelSpec spec = fixtures::full4_bands();
    // 9 transitions x 2 terms + 6 misclass + 3 init + 4 states x 4 bands
    REQUIRE(spec.layout.dim == 18 + 6 + 3 + 16);
    REQUIRE(spec.layout.names.size() == static_cast<std::size_t>(spec.layout.dim));
    REQUIRE(spec.layout.names[0] == "beta_waketonrem_intercept");
    REQUIRE(spec.layout.names[spec.layout.misclass_offset] == "mis_waketonrem");
    REQUIRE(spec.layout.names[spec.layout.emission_offset] == "logconc_wake_delta");
}

TEST_CASE("misclassification matrix respects structure for every theta", "[model_core]") {
    ModelSpec spec = fixtures::forward4_hmm();
    std::mt19937_64 rng(81003);
    for (int rep = 0; rep < 200; ++rep) {
        Vector theta = fixtures::random_theta(spec.layout, rng, 4.0);
        Matrix mis = misclass_matrix(spec.emission, spec.m(),
                                     theta.data() + spec.layout.misclass_offset);
        for (int r = 0; r < 4; ++r) {
            REQUIRE(mis.row(r).sum() == Approx(1.0).margin(1e-12));
            for (int o = 0; o < 4; ++o) {
                REQUIRE(mis(r, o) >= 0.0);
                REQUIRE(mis(r, o) <= 1.0);
            }
        }
        // structural zeros of the adjacent-error pattern
        REQUIRE(mis(0, 2) == 0.0);
        REQUIRE(mis(0, 3) == 0.0);
        REQUIRE(mis(1, 3) == 0.0);
        REQUIRE(mis(2, 0) == 0.0);
        REQUIRE(mis(2, 3) == 0.0);
        REQUIRE(mis(3, 0) == 0.0);
        REQUIRE(mis(3, 1) == 0.0);
        REQUIRE(mis(3, 2) == 0.0);
        REQUIRE(mis(3, 3) == 1.0);  // no permitted errors: exactly observed
    }
}

TEST_CASE("misclassification probabilities match the logit transform", "[model_core]") {
    ModelSpec spec = fixtures::forward4_hmm();
    Vector theta = Vector::Zero(spec.layout.dim);
    double u21 = -1.2, u23 = 0.4;
    theta[spec.layout.misclass_offset + 1] = u21;
    theta[spec.layout.misclass_offset + 2] = u23;
    Matrix mis = misclass_matrix(spec.emission, 4, theta.data() + spec.layout.misclass_offset);
    double denom = 1 + std::exp(u21) + std::exp(u23);
    REQUIRE(mis(1, 0) == Approx(std::exp(u21) / denom).epsilon(1e-14));
    REQUIRE(mis(1, 2) == Approx(std::exp(u23) / denom).epsilon(1e-14));
    REQUIRE(mis(1, 1) == Approx(1.0 / denom).epsilon(1e-14));
}

TEST_CASE("initial distribution transform", "[model_core]") {
    ModelSpec spec = fixtures::forward4_hmm();
    SECTION("zero logits give the uniform distribution") {
        Vector theta = Vector::Zero(spec.layout.dim);
        Vector pi = initial_distribution(spec.init, spec.layout, theta);
        for (int s = 0; s < 4; ++s) REQUIRE(pi[s] == Approx(0.25).epsilon(1e-14));
    }
    SECTION("state 1 is the reference category") {
        Vector theta = Vector::Zero(spec.layout.dim);
        theta[spec.layout.init_offset + 0] = std::log(2.0);  // state 2
        Vector pi = initial_distribution(spec.init, spec.layout, theta);
        REQUIRE(pi[1] == Approx(2.0 * pi[0]).epsilon(1e-13));
        REQUIRE(pi.sum() == Approx(1.0).margin(1e-14));
    }
    SECTION("fixed initial distribution bypasses theta") {
        ModelSpec fixed = fixtures::twostate_progressive();
        Vector theta = Vector::Zero(fixed.layout.dim);
        Vector pi = initial_distribution(fixed.init, fixed.layout, theta);
        REQUIRE(pi[0] == 1.0);
        REQUIRE(pi[1] == 0.0);
    }
}

TEST_CASE("log prior closed forms", "[model_core]") {
    ModelSpec spec = fixtures::forward4_hmm();
    const int p = spec.layout.dim;

    PriorSpec unit;
    unit.rate = unit.misclass = unit.init = unit.emission = {0.0, 1.0};
    Vector at_mean = Vector::Zero(p);
    REQUIRE(log_prior(unit, spec.layout, at_mean) ==
            Approx(-0.5 * p * std::log(2 * M_PI)).epsilon(1e-13));

    PriorSpec wide;
    wide.rate = wide.misclass = wide.init = wide.emission = {0.0, 10.0};
    REQUIRE(log_prior(unit, spec.layout, at_mean) - log_prior(wide, spec.layout, at_mean) ==
            Approx(p * std::log(10.0)).epsilon(1e-12));

    // moving any coordinate off its location lowers the log prior
    Vector off = at_mean;
    off[3] = 2.0;
    REQUIRE(log_prior(unit, spec.layout, off) < log_prior(unit, spec.layout, at_mean));
}

TEST_CASE("emission band density", "[model_core]") {
    // Dirichlet(1,1,1) is uniform on the simplex: density Gamma(3) = 2
    Vector conc = Vector::Ones(3);
    Vector x(3);
    x << 0.2, 0.3, 0.5;
    REQUIRE(dirichlet_logpdf(conc, x) == Approx(std::log(2.0)).epsilon(1e-13));

    // against a direct evaluation of the density formula
    Vector c2(3);
    c2 << 2.0, 3.0, 4.0;
    double direct = std::lgamma(9.0) - std::lgamma(2.0) - std::lgamma(3.0) - std::lgamma(4.0) +
                    1.0 * std::log(0.2) + 2.0 * std::log(0.3) + 3.0 * std::log(0.5);
    REQUIRE(dirichlet_logpdf(c2, x) == Approx(direct).epsilon(1e-13));

    // boundary handling
    Vector edge(3);
    edge << 0.0, 0.4, 0.6;
    REQUIRE(dirichlet_logpdf(c2, edge) == -std::numeric_limits<double>::infinity());
    Vector cless(3);
    cless << 0.5, 2.0, 2.0;
    REQUIRE_THROWS_AS(dirichlet_logpdf(cless, edge), NumericalError);
}
