#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msode/io/csv.hpp"
#include "msode/model.hpp"
#include "msode/simulate.hpp"

namespace msode {

// Sectioned key = value text config.  Keys may contain spaces ("row well",
// "transition well mild"), values are whitespace-separated token lists.
// Every diagnostic carries path:line.
struct ConfigEntry {
    std::string key;
    std::vector<std::string> tokens;
    std::string raw;
    long line = 0;
};

struct ConfigSection {
    std::string name;
    long line = 0;
    std::vector<ConfigEntry> entries;

    const ConfigEntry* find(const std::string& key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
};

struct ConfigText {
    std::string path;
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
    const ConfigSection& require(const std::string& name) const {
        const ConfigSection* s = find(name);
        if (!s) throw ConfigError(path + ": missing required section [" + name + "]");
        return *s;
    }
};

namespace detail {

inline std::vector<std::string> split_tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline double token_double(const ConfigText& cfg, const ConfigEntry& e, const std::string& tok) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(anchor(cfg.path, e.line) + "'" + e.key + "' expects numbers, got '" +
                          tok + "'");
    }
}

inline long token_long(const ConfigText& cfg, const ConfigEntry& e, const std::string& tok) {
    try {
        std::size_t used = 0;
        long v = std::stol(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(anchor(cfg.path, e.line) + "'" + e.key + "' expects integers, got '" +
                          tok + "'");
    }
}

inline bool token_bool(const ConfigText& cfg, const ConfigEntry& e, const std::string& tok) {
    if (tok == "true" || tok == "yes" || tok == "1") return true;
    if (tok == "false" || tok == "no" || tok == "0") return false;
    throw ConfigError(anchor(cfg.path, e.line) + "'" + e.key + "' expects true/false, got '" +
                      tok + "'");
}

inline const std::string& single_token(const ConfigText& cfg, const ConfigEntry& e) {
    if (e.tokens.size() != 1)
        throw ConfigError(anchor(cfg.path, e.line) + "'" + e.key + "' expects one value");
    return e.tokens[0];
}

}  // namespace detail

inline ConfigText read_config_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    ConfigText cfg;
    cfg.path = path;
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        ++n;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string body = detail::trim(line);
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']')
                throw ConfigError(detail::anchor(path, n) + "unterminated section header");
            ConfigSection s;
            s.name = detail::trim(body.substr(1, body.size() - 2));
            s.line = n;
            if (s.name.empty()) throw ConfigError(detail::anchor(path, n) + "empty section name");
            cfg.sections.push_back(std::move(s));
            continue;
        }
        std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(detail::anchor(path, n) + "expected 'key = value'");
        if (cfg.sections.empty())
            throw ConfigError(detail::anchor(path, n) + "entry before any [section]");
        ConfigEntry e;
        e.key = detail::trim(body.substr(0, eq));
        e.raw = detail::trim(body.substr(eq + 1));
        e.tokens = detail::split_tokens(e.raw);
        e.line = n;
        if (e.key.empty()) throw ConfigError(detail::anchor(path, n) + "empty key");
        cfg.sections.back().entries.push_back(std::move(e));
    }
    return cfg;
}

// Simulation settings beyond the model itself; [simulate] section.
struct SimSettings {
    SimConfig sim;
    int replicates = 1;
    double slope_scale = 1.0;
    bool present = false;
};

struct ModelConfig {
    ModelSpec spec;
    std::optional<Vector> theta;
    SimSettings sim;
};

namespace detail {

inline int state_index(const ConfigText& cfg, const ConfigEntry& e, const StateSpace& st,
                       const std::string& label) {
    for (int i = 0; i < st.m(); ++i)
        if (st.labels[static_cast<std::size_t>(i)] == label) return i;
    throw ConfigError(anchor(cfg.path, e.line) + "unknown state '" + label + "'");
}

inline void parse_states(const ConfigText& cfg, ModelSpec& spec) {
    const ConfigSection& sec = cfg.require("states");
    const ConfigEntry* labels = sec.find("labels");
    if (!labels || labels->tokens.empty())
        throw ConfigError(anchor(cfg.path, sec.line) + "[states] needs 'labels = ...'");
    spec.states.labels = labels->tokens;
    spec.states.absorbing.assign(labels->tokens.size(), false);
    if (const ConfigEntry* ab = sec.find("absorbing"))
        for (const std::string& tok : ab->tokens)
            spec.states.absorbing[static_cast<std::size_t>(
                state_index(cfg, *ab, spec.states, tok))] = true;
}

inline void parse_transitions(const ConfigText& cfg, ModelSpec& spec) {
    const int m = spec.states.m();
    const ConfigSection& sec = cfg.require("transitions");
    spec.rates.m = m;
    spec.rates.mask.assign(static_cast<std::size_t>(m),
                           std::vector<bool>(static_cast<std::size_t>(m), false));
    for (const ConfigEntry& e : sec.entries) {
        if (e.key.rfind("row ", 0) != 0)
            throw ConfigError(anchor(cfg.path, e.line) + "[transitions] expects 'row <state>'");
        const int r = state_index(cfg, e, spec.states, e.key.substr(4));
        if (static_cast<int>(e.tokens.size()) != m)
            throw ConfigError(anchor(cfg.path, e.line) + "mask row needs " + std::to_string(m) +
                              " flags");
        for (int c = 0; c < m; ++c) {
            const std::string& tok = e.tokens[static_cast<std::size_t>(c)];
            if (tok != "0" && tok != "1")
                throw ConfigError(anchor(cfg.path, e.line) + "mask flags must be 0 or 1");
            spec.rates.mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                tok == "1";
        }
    }
}

inline void parse_rates(const ConfigText& cfg, ModelSpec& spec) {
    const ConfigSection& sec = cfg.require("rates");
    if (const ConfigEntry* cov = sec.find("covariates")) spec.rates.covariate_names = cov->tokens;

    std::map<std::pair<int, int>, std::pair<const ConfigEntry*, std::vector<RateTerm>>> designs;
    for (const ConfigEntry& e : sec.entries) {
        if (e.key == "covariates") continue;
        std::vector<std::string> parts = split_tokens(e.key);
        if (parts.size() != 3 || parts[0] != "transition")
            throw ConfigError(anchor(cfg.path, e.line) +
                              "[rates] expects 'transition <from> <to> = terms...'");
        const int from = state_index(cfg, e, spec.states, parts[1]);
        const int to = state_index(cfg, e, spec.states, parts[2]);
        if (!spec.rates.mask[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)])
            throw ConfigError(anchor(cfg.path, e.line) + "transition " + parts[1] + " -> " +
                              parts[2] + " is not enabled in [transitions]");
        std::vector<RateTerm> terms;
        for (const std::string& tok : e.tokens) {
            if (tok == "intercept") {
                terms.push_back({RateTerm::intercept, -1});
            } else if (tok == "time") {
                terms.push_back({RateTerm::time, -1});
            } else {
                int idx = -1;
                for (std::size_t k = 0; k < spec.rates.covariate_names.size(); ++k)
                    if (spec.rates.covariate_names[k] == tok) idx = static_cast<int>(k);
                if (idx < 0)
                    throw ConfigError(anchor(cfg.path, e.line) + "unknown rate term '" + tok +
                                      "' (declare covariates first)");
                terms.push_back({RateTerm::covariate, idx});
            }
        }
        if (!designs.emplace(std::make_pair(from, to), std::make_pair(&e, terms)).second)
            throw ConfigError(anchor(cfg.path, e.line) + "duplicate design for transition " +
                              parts[1] + " -> " + parts[2]);
    }

    const int m = spec.states.m();
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c)
            if (spec.rates.mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) {
                auto it = designs.find({r, c});
                if (it == designs.end())
                    throw ConfigError(anchor(cfg.path, sec.line) + "[rates] missing design for " +
                                      spec.states.labels[static_cast<std::size_t>(r)] + " -> " +
                                      spec.states.labels[static_cast<std::size_t>(c)]);
                spec.rates.transitions.push_back({r, c, it->second.second});
            }
}

inline void parse_emissions(const ConfigText& cfg, ModelSpec& spec) {
    const ConfigSection* sec = cfg.find("emissions");
    if (!sec) return;  // exact observation by default
    if (const ConfigEntry* kind = sec->find("kind")) {
        const std::string& tok = single_token(cfg, *kind);
        if (tok == "exact")
            spec.emission.kind = EmissionKind::exact;
        else if (tok == "categorical")
            spec.emission.kind = EmissionKind::categorical;
        else if (tok == "dirichlet")
            spec.emission.kind = EmissionKind::dirichlet;
        else if (tok == "categorical_dirichlet")
            spec.emission.kind = EmissionKind::categorical_dirichlet;
        else
            throw ConfigError(anchor(cfg.path, kind->line) + "unknown emission kind '" + tok +
                              "'");
    }
    for (const ConfigEntry& e : sec->entries) {
        if (e.key == "kind" || e.key == "bands") continue;
        if (e.key.rfind("error ", 0) != 0)
            throw ConfigError(anchor(cfg.path, e.line) +
                              "[emissions] expects 'kind', 'bands' or 'error <state>'");
        const int r = state_index(cfg, e, spec.states, e.key.substr(6));
        for (const std::string& tok : e.tokens)
            spec.emission.error_cells.push_back({r, state_index(cfg, e, spec.states, tok)});
    }
    if (const ConfigEntry* bands = sec->find("bands")) spec.emission.band_names = bands->tokens;
}

inline void parse_priors(const ConfigText& cfg, ModelSpec& spec) {
    const ConfigSection* sec = cfg.find("priors");
    if (!sec) return;
    auto slice_of = [&](const ConfigEntry& e, const std::string& name) -> PriorSpec::Slice* {
        if (name == "rate") return &spec.priors.rate;
        if (name == "misclass") return &spec.priors.misclass;
        if (name == "init") return &spec.priors.init;
        if (name == "emission") return &spec.priors.emission;
        throw ConfigError(anchor(cfg.path, e.line) + "unknown prior slice '" + name + "'");
    };
    for (const ConfigEntry& e : sec->entries) {
        std::vector<std::string> parts = split_tokens(e.key);
        const double v = token_double(cfg, e, single_token(cfg, e));
        if (parts.size() == 1 && (parts[0] == "loc" || parts[0] == "scale")) {
            for (PriorSpec::Slice* s : {&spec.priors.rate, &spec.priors.misclass,
                                        &spec.priors.init, &spec.priors.emission})
                (parts[0] == "loc" ? s->loc : s->scale) = v;
        } else if (parts.size() == 2 && (parts[1] == "loc" || parts[1] == "scale")) {
            PriorSpec::Slice* s = slice_of(e, parts[0]);
            (parts[1] == "loc" ? s->loc : s->scale) = v;
        } else {
            throw ConfigError(anchor(cfg.path, e.line) +
                              "[priors] expects 'loc', 'scale' or '<slice> loc|scale'");
        }
    }
}

inline void parse_init(const ConfigText& cfg, ModelSpec& spec) {
    const ConfigSection* sec = cfg.find("init");
    if (!sec) return;
    if (const ConfigEntry* est = sec->find("estimate"))
        spec.init.estimate = token_bool(cfg, *est, single_token(cfg, *est));
    if (const ConfigEntry* probs = sec->find("probs")) {
        spec.init.fixed_probs = Vector(static_cast<Eigen::Index>(probs->tokens.size()));
        for (std::size_t k = 0; k < probs->tokens.size(); ++k)
            spec.init.fixed_probs[static_cast<Eigen::Index>(k)] =
                token_double(cfg, *probs, probs->tokens[k]);
    }
    if (!spec.init.estimate && spec.init.fixed_probs.size() == 0)
        throw ConfigError(anchor(cfg.path, sec->line) +
                          "[init] with estimate = false needs 'probs = ...'");
}

inline void parse_simulate(const ConfigText& cfg, const ModelSpec& spec, SimSettings& out) {
    const ConfigSection* sec = cfg.find("simulate");
    if (!sec) return;
    out.present = true;
    out.sim.covariate_freq.assign(spec.rates.covariate_names.size(), 0.5);
    for (const ConfigEntry& e : sec->entries) {
        std::vector<std::string> parts = split_tokens(e.key);
        if (e.key == "subjects") {
            out.sim.n_subjects = static_cast<int>(token_long(cfg, e, single_token(cfg, e)));
        } else if (e.key == "t_max") {
            out.sim.t_max = token_double(cfg, e, single_token(cfg, e));
        } else if (e.key == "seed") {
            out.sim.seed = static_cast<std::uint64_t>(token_long(cfg, e, single_token(cfg, e)));
        } else if (e.key == "replicates") {
            out.replicates = static_cast<int>(token_long(cfg, e, single_token(cfg, e)));
        } else if (e.key == "slope_scale") {
            out.slope_scale = token_double(cfg, e, single_token(cfg, e));
        } else if (e.key == "scheme") {
            if (e.tokens.empty())
                throw ConfigError(anchor(cfg.path, e.line) + "'scheme' needs a form");
            out.sim.scheme.gaps.clear();
            out.sim.scheme.weights.clear();
            if (e.tokens[0] == "grid") {
                out.sim.scheme.grid = true;
                for (std::size_t k = 1; k < e.tokens.size(); ++k)
                    out.sim.scheme.gaps.push_back(token_double(cfg, e, e.tokens[k]));
            } else if (e.tokens[0] == "gaps") {
                out.sim.scheme.grid = false;
                bool in_weights = false;
                for (std::size_t k = 1; k < e.tokens.size(); ++k) {
                    if (e.tokens[k] == "@") {
                        in_weights = true;
                        continue;
                    }
                    (in_weights ? out.sim.scheme.weights : out.sim.scheme.gaps)
                        .push_back(token_double(cfg, e, e.tokens[k]));
                }
            } else {
                throw ConfigError(anchor(cfg.path, e.line) +
                                  "scheme must start with 'grid' or 'gaps'");
            }
        } else if (parts.size() == 2 && parts[0] == "freq") {
            int idx = -1;
            for (std::size_t k = 0; k < spec.rates.covariate_names.size(); ++k)
                if (spec.rates.covariate_names[k] == parts[1]) idx = static_cast<int>(k);
            if (idx < 0)
                throw ConfigError(anchor(cfg.path, e.line) + "unknown covariate '" + parts[1] +
                                  "'");
            out.sim.covariate_freq[static_cast<std::size_t>(idx)] =
                token_double(cfg, e, single_token(cfg, e));
        } else {
            throw ConfigError(anchor(cfg.path, e.line) + "unknown [simulate] key '" + e.key +
                              "'");
        }
    }
}

}  // namespace detail

inline ModelConfig load_model_config(const std::string& path) {
    ConfigText cfg = read_config_text(path);
    ModelConfig out;
    detail::parse_states(cfg, out.spec);
    detail::parse_transitions(cfg, out.spec);
    detail::parse_rates(cfg, out.spec);
    detail::parse_emissions(cfg, out.spec);
    detail::parse_priors(cfg, out.spec);
    detail::parse_init(cfg, out.spec);
    try {
        out.spec.finalize();
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }

    if (const ConfigSection* sec = cfg.find("theta")) {
        const ConfigEntry* vals = sec->find("values");
        if (!vals)
            throw ConfigError(detail::anchor(path, sec->line) + "[theta] needs 'values = ...'");
        if (static_cast<int>(vals->tokens.size()) != out.spec.layout.dim)
            throw ConfigError(detail::anchor(path, vals->line) + "[theta] has " +
                              std::to_string(vals->tokens.size()) + " values, model needs " +
                              std::to_string(out.spec.layout.dim));
        Vector theta(out.spec.layout.dim);
        for (std::size_t k = 0; k < vals->tokens.size(); ++k)
            theta[static_cast<Eigen::Index>(k)] = detail::token_double(cfg, *vals, vals->tokens[k]);
        out.theta = std::move(theta);
    }
    detail::parse_simulate(cfg, out.spec, out.sim);
    return out;
}

}  // namespace msode
