#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>

#include "msode/common.hpp"
#include "msode/likelihood.hpp"
#include "msode/priors.hpp"
#include "msode/rng.hpp"

namespace msode {

struct ChainConfig {
    int n_iter = 30000;
    int n_burnin = 10000;
    Vector init;
    double init_scale = 1.0;  // initial proposal sd, spread over sqrt(p)
    int adapt_window = 200;
    double target_accept = 0.234;  // burn-in diagnostic only
    std::uint64_t seed = 1;

    void validate() const {
        if (init.size() == 0) throw ConfigError("chain needs an initial parameter vector");
        if (!(n_burnin > 0 && n_burnin < n_iter))
            throw ConfigError("need 0 < n_burnin < n_iter");
        if (adapt_window < 2) throw ConfigError("adaptation window too small");
        if (!(target_accept > 0 && target_accept < 1))
            throw ConfigError("target acceptance must be inside (0,1)");
        if (!(init_scale > 0)) throw ConfigError("initial proposal scale must be positive");
    }
};

struct PosteriorChain {
    Matrix samples;  // n_iter x p, burn-in included
    Vector log_post;
    std::vector<char> accepted;
    std::vector<Matrix> proposal_cov_history;  // initial + one per adaptation
    Vector window_accept_rate;                 // one entry per full window

    // full proposal log for audit: proposed point, its log posterior, and the
    // log uniform compared against the MH ratio
    Matrix proposals;
    Vector proposal_log_post;
    Vector log_u;

    int n_burnin = 0;

    Matrix retained() const {
        return samples.bottomRows(samples.rows() - n_burnin);
    }
};

// Adaptive Gaussian random-walk Metropolis.  `target` maps theta to a log
// posterior; NumericalError, RateOverflowError and SolverFailure from it are
// treated as -inf proposals (the walk stays in the valid region), anything
// else propagates.  Burn-in adapts the proposal in two phases.  For the
// first three quarters the covariance is refreshed every window as
// lambda s (C_hat + 1e-6 I), with s = 2.38^2/p, C_hat the cumulative sample
// covariance, and a global scale lambda nudged toward target_accept with a
// diminishing gain (the covariance estimate alone systematically misses the
// right magnitude while the walk is still localized).  The last quarter
// freezes the covariance shape and lets lambda alone chase target_accept;
// with the shape fixed, acceptance is monotone in lambda and a unit-gain
// update settles in a few windows.  Everything is frozen after burn-in so
// the retained chain is Markov.
template <class LogTarget>
PosteriorChain run_chain(LogTarget&& target, const ChainConfig& cfg) {
    cfg.validate();
    const int p = static_cast<int>(cfg.init.size());
    const int n = cfg.n_iter;
    constexpr double inf = std::numeric_limits<double>::infinity();

    auto eval = [&](const Vector& x, bool& failed) -> double {
        failed = false;
        try {
            return target(x);  // RateOverflowError and SolverFailure included
        } catch (const NumericalError&) {
        }
        failed = true;
        return -inf;
    };

    bool failed = false;
    Vector cur = cfg.init;
    double cur_lp = eval(cur, failed);
    if (!std::isfinite(cur_lp))
        throw ConfigError("initial parameter vector has an impossible posterior");

    PosteriorChain out;
    out.n_burnin = cfg.n_burnin;
    out.samples.resize(n, p);
    out.log_post.resize(n);
    out.accepted.assign(n, 0);
    out.proposals.resize(n, p);
    out.proposal_log_post.resize(n);
    out.log_u.resize(n);
    out.window_accept_rate.resize(n / cfg.adapt_window);

    const double s = 2.38 * 2.38 / p;
    double lambda = 1.0;
    Matrix c_base = Matrix::Identity(p, p) * (cfg.init_scale * cfg.init_scale / (s * p));
    Matrix cov = s * c_base;
    Matrix chol_l = Matrix::Identity(p, p) * (cfg.init_scale / std::sqrt(p));
    out.proposal_cov_history.push_back(cov);

    Rng rng = make_rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Vector z(p), prop(p);
    int window_accepts = 0, window_failures = 0;
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < p; ++i) z[i] = normal(rng);
        prop = cur + chol_l * z;
        double prop_lp = eval(prop, failed);
        window_failures += failed;
        double lu = std::log(unif(rng));

        out.proposals.row(k) = prop.transpose();
        out.proposal_log_post[k] = prop_lp;
        out.log_u[k] = lu;

        if (lu < prop_lp - cur_lp) {
            cur = prop;
            cur_lp = prop_lp;
            out.accepted[k] = 1;
            ++window_accepts;
        }
        out.samples.row(k) = cur.transpose();
        out.log_post[k] = cur_lp;

        if ((k + 1) % cfg.adapt_window == 0) {
            const int win = (k + 1) / cfg.adapt_window - 1;
            if (win < static_cast<int>(out.window_accept_rate.size()))
                out.window_accept_rate[win] =
                    static_cast<double>(window_accepts) / cfg.adapt_window;
            if (window_failures * 2 > cfg.adapt_window)
                throw NumericalError(
                    "posterior evaluation failed for most proposals in a window; "
                    "the chain is stuck in a numerically invalid region");
            const double window_rate =
                static_cast<double>(window_accepts) / cfg.adapt_window;
            window_accepts = 0;
            window_failures = 0;

            if (k + 1 <= cfg.n_burnin) {
                if (k + 1 <= (3 * cfg.n_burnin) / 4) {
                    // shape phase: refresh the covariance from the cumulative
                    // samples, diminishing gain on the scale so it does not
                    // chase each refresh
                    lambda *= std::exp((window_rate - cfg.target_accept) /
                                       std::sqrt(static_cast<double>(win + 1)));
                    const auto rows = k + 1;
                    Eigen::RowVectorXd mean = out.samples.topRows(rows).colwise().mean();
                    Matrix centered = out.samples.topRows(rows).rowwise() - mean;
                    c_base = centered.transpose() * centered / (rows - 1);
                    c_base += 1e-6 * Matrix::Identity(p, p);
                } else {
                    // polish phase: shape frozen, unit gain
                    lambda *= std::exp(window_rate - cfg.target_accept);
                }
                cov = lambda * s * c_base;
                chol_l = Eigen::LLT<Matrix>(cov).matrixL();
                out.proposal_cov_history.push_back(cov);
            }
        }
    }
    return out;
}

// Posterior log density of a model given panel data, for run_chain.
struct ModelPosterior {
    const ModelSpec& spec;
    const PanelDataset& data;
    EngineConfig engine = {};
    int workers = 1;

    double operator()(const Vector& theta) const {
        double lp = log_prior(spec.priors, spec.layout, theta);
        if (!std::isfinite(lp)) return lp;
        return lp + loglik(spec, theta, data, engine, workers).total;
    }
};

struct ParamSummary {
    double mean = 0, sd = 0, hpd_lo = 0, hpd_hi = 0;
};

// Shortest contiguous window over the sorted draws that holds `level` mass.
inline std::pair<double, double> hpd_interval(std::vector<double> draws, double level) {
    if (!(level > 0 && level < 1)) throw ConfigError("credible level must be inside (0,1)");
    if (draws.empty()) throw ConfigError("empty draw vector");
    std::sort(draws.begin(), draws.end());
    const std::size_t n = draws.size();
    const std::size_t m = std::min(
        n, std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(level * n))));
    std::size_t best = 0;
    double width = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + m <= n; ++j) {
        double w = draws[j + m - 1] - draws[j];
        if (w < width) {
            width = w;
            best = j;
        }
    }
    return {draws[best], draws[best + m - 1]};
}

inline std::vector<ParamSummary> summarize(const PosteriorChain& chain, double level = 0.95) {
    Matrix kept = chain.retained();
    if (kept.rows() < 100) throw ConfigError("need at least 100 post-burn-in draws");
    std::vector<ParamSummary> out(static_cast<std::size_t>(kept.cols()));
    for (Eigen::Index j = 0; j < kept.cols(); ++j) {
        ParamSummary& s = out[static_cast<std::size_t>(j)];
        s.mean = kept.col(j).mean();
        s.sd = std::sqrt((kept.col(j).array() - s.mean).square().sum() / (kept.rows() - 1));
        std::vector<double> draws(kept.col(j).data(), kept.col(j).data() + kept.rows());
        std::tie(s.hpd_lo, s.hpd_hi) = hpd_interval(std::move(draws), level);
    }
    return out;
}

// Split-R-hat over the post-burn-in halves of one or more chains.
inline Vector split_rhat(const std::vector<PosteriorChain>& chains) {
    if (chains.empty()) throw ConfigError("no chains");
    const Eigen::Index p = chains[0].samples.cols();
    std::vector<Matrix> halves;
    for (const auto& ch : chains) {
        Matrix kept = ch.retained();
        const Eigen::Index half = kept.rows() / 2;
        if (half < 2) throw ConfigError("chains too short for split diagnostics");
        halves.push_back(kept.topRows(half));
        halves.push_back(kept.bottomRows(half));
    }
    const double mseq = static_cast<double>(halves.size());
    const double len = static_cast<double>(halves[0].rows());

    Vector rhat(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double grand = 0;
        std::vector<double> means, vars;
        for (const auto& h : halves) {
            double mu = h.col(j).mean();
            means.push_back(mu);
            vars.push_back((h.col(j).array() - mu).square().sum() / (len - 1));
            grand += mu;
        }
        grand /= mseq;
        double b = 0, w = 0;
        for (std::size_t c = 0; c < halves.size(); ++c) {
            b += (means[c] - grand) * (means[c] - grand);
            w += vars[c];
        }
        b *= len / (mseq - 1);
        w /= mseq;
        double var_plus = (len - 1) / len * w + b / len;
        rhat[j] = w > 0 ? std::sqrt(var_plus / w) : 1.0;
    }
    return rhat;
}

// Fraction of replicates whose interval covers the truth, per parameter.
inline Vector coverage(const Vector& truth,
                       const std::vector<std::vector<ParamSummary>>& replicates) {
    if (replicates.size() < 2) throw ConfigError("coverage needs at least 2 replicates");
    Vector cov = Vector::Zero(truth.size());
    for (const auto& rep : replicates) {
        if (static_cast<Eigen::Index>(rep.size()) != truth.size())
            throw ConfigError("replicate summary length does not match truth");
        for (Eigen::Index j = 0; j < truth.size(); ++j)
            cov[j] += rep[static_cast<std::size_t>(j)].hpd_lo <= truth[j] &&
                      truth[j] <= rep[static_cast<std::size_t>(j)].hpd_hi;
    }
    return cov / static_cast<double>(replicates.size());
}

}  // namespace msode
