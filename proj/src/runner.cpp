/*
   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#include "spde/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spde/analysis.hpp"
#include "spde/coupling.hpp"
#include "spde/invariant.hpp"
#include "spde/sde.hpp"
#include "spde/ultrabound.hpp"

namespace spde::cli {

namespace fs = std::filesystem;
using spectral::SpectralModel;

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"simulate", "couple",     "harnack",     "gradient",
                                                "invariant", "ultrabound", "yosida-table"};
    return names;
}

namespace {

bool needs_model(const std::string& e) { return e != "ultrabound" && e != "yosida-table"; }
bool is_statistical(const std::string& e) { return e == "couple" || e == "harnack" || e == "gradient"; }

Json defaults(const std::string& e) {
    Json p = {{"dt", 1e-3}, {"scheme", "exponential_euler"}, {"allow_dt_override", false}};
    if (e == "simulate") {
        p.update({{"T", 1.0}, {"x0", nullptr}, {"write_binary", false}});
    } else if (e == "couple") {
        p.update({{"T", 1.0}, {"p_list", {1.5, 2.0, 4.0}}, {"N", 1000}, {"glue_tol", 1e-4},
                  {"min_fraction", 0.99}, {"x0", nullptr}, {"y0", nullptr}});
    } else if (e == "harnack") {
        p.update({{"t", 0.5}, {"p", 2.0}, {"N", 1000}, {"f", {{"kind", "exp_linear"}, {"lambda", 1.0}, {"h", nullptr}}},
                  {"t_grid", nullptr}, {"alpha_grid", nullptr}, {"beta_grid", nullptr}, {"x0", nullptr},
                  {"y0", nullptr}});
    } else if (e == "gradient") {
        p.update({{"t", 0.5}, {"N", 1000}, {"f", {{"kind", "bounded_rational"}, {"center", nullptr}}},
                  {"x0", nullptr}, {"y0", nullptr}});
    } else if (e == "invariant") {
        p.update({{"burn_in", 10.0}, {"horizon", 1000.0}, {"alpha_grid", nullptr},
                  {"functionals", {"mode_mean_1", "squared_norm", "theta", "mode_square_all"}},
                  {"keep_every", 100}, {"lambda_grid", {0.0, 0.01, 0.1, 1.0, 10.0}}, {"consistency_se", 4.0},
                  {"exact_se", 3.0}, {"p", 2.0}, {"t", 0.5}, {"x0", nullptr}});
    } else if (e == "ultrabound") {
        p = {{"phi", {{"kind", "power"}, {"m", 2.0}}}, {"a", 1.0}, {"y0_list", nullptr}, {"t_max", 20.0},
             {"ode_dt", 1e-4}, {"envelope_lambda", 1.0}, {"omega", nullptr},
             {"t_grid", {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 20.0}}};
    } else if (e == "yosida-table") {
        p = {{"map", nullptr}, {"alpha_grid", {1.0, 0.1}}, {"r_grid", {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0}}};
    } else {
        throw ConfigError("experiment", "unknown experiment '" + e + "'");
    }
    return p;
}

double num(const Json& p, const char* key) {
    const Json& v = p.at(key);
    if (!v.is_number()) throw ConfigError(std::string("params.") + key, "expected a number");
    return v.get<double>();
}

std::size_t count(const Json& p, const char* key) {
    const Json& v = p.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(std::string("params.") + key, "expected a nonnegative integer");
    return v.get<std::size_t>();
}

std::vector<double> list(const Json& p, const char* key) {
    const Json& v = p.at(key);
    if (v.is_null()) return {};
    if (!v.is_array()) throw ConfigError(std::string("params.") + key, "expected an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(std::string("params.") + key, "expected numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

Vector vector_param(const Json& p, const char* key, std::size_t n, const Vector& fallback) {
    const auto v = list(p, key);
    if (v.empty()) return fallback;
    if (v.size() != n)
        throw ConfigError(std::string("params.") + key, "needs " + std::to_string(n) + " entries");
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(n));
}

Vector unit(std::size_t n) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(n));
    e[0] = 1.0;
    return e;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Csv {
public:
    Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw Error("cannot write " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
    Csv& operator<<(double v) { return field(fmt(v)); }
    Csv& operator<<(const std::string& s) { return field(s); }
    Csv& operator<<(bool b) { return field(b ? "true" : "false"); }
    void end() {
        out_ << '\n';
        first_ = true;
    }

private:
    Csv& field(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
    std::ofstream out_;
    bool first_ = true;
};

Json estimate_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

std::vector<double> alpha_values(const Json& doc) {
    std::vector<double> alphas;
    if (!doc.contains("model") || doc.at("model").is_null()) return alphas;
    const Json& drift = doc.at("model").at("drift");
    if (drift.value("kind", "zero") != "nemytskii") return alphas;
    const Json& reg = drift.at("regularization");
    if (reg.value("kind", "yosida") != "yosida") return alphas;
    alphas.push_back(reg.at("alpha").get<double>());
    const Json& p = doc.at("params");
    if (p.contains("alpha_grid") && p.at("alpha_grid").is_array())
        for (const auto& a : p.at("alpha_grid")) alphas.push_back(a.get<double>());
    return alphas;
}

void validate(const Json& doc) {
    const std::string e = doc.at("experiment").get<std::string>();
    const Json& p = doc.at("params");
    auto positive = [&](const char* key) {
        if (!(num(p, key) > 0)) throw ConfigError(std::string("params.") + key, "must be > 0");
    };
    if (p.contains("dt")) {
        positive("dt");
        sde::scheme_from_string(p.at("scheme").get<std::string>());
    }
    if (p.contains("p") && !(num(p, "p") > 1)) throw ConfigError("params.p", "must be > 1 (Harnack exponent)");
    if (p.contains("p_list"))
        for (double v : list(p, "p_list"))
            if (!(v > 1)) throw ConfigError("params.p_list", "every p must be > 1");
    if (is_statistical(e) && count(p, "N") < 100) throw ConfigError("params.N", "statistical experiments need N >= 100");
    for (const char* key : {"T", "t", "glue_tol", "horizon", "t_max", "ode_dt", "a"})
        if (p.contains(key)) positive(key);
    if (p.contains("burn_in") && !(num(p, "burn_in") >= 0 && num(p, "burn_in") < num(p, "horizon")))
        throw ConfigError("params.burn_in", "must satisfy 0 <= burn_in < horizon");
    if (p.contains("alpha_grid"))
        for (double v : list(p, "alpha_grid"))
            if (!(v > 0)) throw ConfigError("params.alpha_grid", "entries must be > 0");
    if (p.contains("beta_grid"))
        for (double v : list(p, "beta_grid"))
            if (!(v >= 0 && v <= 1)) throw ConfigError("params.beta_grid", "entries must lie in [0, 1]");

    // The Yosida drift is 2/alpha-Lipschitz; explicit steps need dt well
    // below alpha.
    const auto alphas = alpha_values(doc);
    if (!alphas.empty() && p.contains("dt")) {
        const double amin = *std::min_element(alphas.begin(), alphas.end());
        const double dt = num(p, "dt");
        if (dt > amin / 4.0 * (1.0 + 1e-12)) {
            const std::string msg = "dt = " + fmt(dt) + " exceeds alpha / 4 = " + fmt(amin / 4.0);
            if (!p.at("allow_dt_override").get<bool>())
                throw ConfigError("params.dt", msg + " (set params.allow_dt_override=true to proceed)");
            std::cerr << "WARNING: " << msg << "; continuing because allow_dt_override is set\n";
        }
    }
}

} // namespace

void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override", "expected key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(raw);
    } catch (const Json::parse_error&) {
        value = raw;
    }
    Json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError(key, "cannot descend into a non-object");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = Json::object();
    }
    if (!node->is_object()) throw ConfigError(key, "cannot assign into a non-object");
    (*node)[parts.back()] = value;
}

Json resolve(const Json& input, const std::string& experiment, const std::vector<std::string>& overrides) {
    if (!input.is_object()) throw ConfigError("config", "expected a JSON object");
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), experiment) == names.end())
        throw ConfigError("experiment", "unknown experiment '" + experiment + "'");

    // Overrides address the input document, so both "params.x" and
    // "experiments.<name>.x" work.
    Json config = input;
    for (const auto& o : overrides) {
        const std::string key = o.substr(0, o.find('='));
        const std::string top = key.substr(0, key.find('.'));
        if (top != "seed" && top != "model" && top != "params" && top != "experiments")
            throw ConfigError(key, "overrides must start with seed, model, params or experiments");
        apply_override(config, o);
        if (top == "params" && key.size() > 7 && !defaults(experiment).contains(key.substr(7, key.find('.', 7) - 7)))
            throw ConfigError(key, "unknown parameter for " + experiment);
    }

    Json doc;
    doc["experiment"] = experiment;
    doc["seed"] = config.contains("seed") ? config.at("seed") : Json(1);
    doc["model"] = config.contains("model") ? config.at("model") : Json(nullptr);

    Json params = defaults(experiment);
    auto merge = [&](const Json& section, const std::string& where, bool strict) {
        if (section.is_null()) return;
        if (!section.is_object()) throw ConfigError(where, "expected an object");
        for (auto it = section.begin(); it != section.end(); ++it) {
            if (!params.contains(it.key())) {
                if (strict) throw ConfigError(where + "." + it.key(), "unknown parameter for " + experiment);
                continue;
            }
            params[it.key()] = it.value();
        }
    };
    // Shared params may carry keys for other experiments; the
    // per-experiment section and resolved documents may not.
    const bool resolved_input = config.contains("experiment");
    if (config.contains("params")) merge(config.at("params"), "params", resolved_input);
    if (config.contains("experiments") && config.at("experiments").contains(experiment))
        merge(config.at("experiments").at(experiment), "experiments." + experiment, true);
    doc["params"] = params;

    if (!doc.at("seed").is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");

    if (needs_model(experiment) && doc.at("model").is_null()) throw ConfigError("model", "missing");
    if (!doc.at("model").is_null()) doc["model"] = config::to_json(config::model_from_json(doc.at("model")));
    validate(doc);
    return doc;
}

std::vector<YosidaRow> yosida_table(const monotone::ScalarMap& map, const std::vector<double>& alpha_grid,
                                    const std::vector<double>& r_grid) {
    if (alpha_grid.empty() || r_grid.empty()) throw ConfigError("params", "alpha_grid and r_grid must be nonempty");
    std::vector<YosidaRow> rows;
    for (double alpha : alpha_grid) {
        monotone::YosidaParams yp;
        yp.alpha = alpha;
        for (double r : r_grid) {
            YosidaRow row{alpha, r, monotone::resolvent_scalar(map, yp, r), 0.0, monotone::minimal_section(map, r), 0.0};
            row.yosida = monotone::yosida_scalar(map, yp, r);
            row.excess = std::abs(row.yosida) - std::abs(row.minimal);
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

struct Context {
    const Json& doc;
    const Json& params;
    fs::path out;
    unsigned workers;
    std::uint64_t seed;
};

sde::IntegratorConfig integrator(const Context& c, double t_end) {
    sde::IntegratorConfig cfg;
    cfg.dt = num(c.params, "dt");
    cfg.scheme = sde::scheme_from_string(c.params.at("scheme").get<std::string>());
    cfg.t_end = t_end;
    cfg.seed = c.seed;
    return cfg;
}

config::ModelSpec model_spec(const Context& c) { return config::model_from_json(c.doc.at("model")); }

config::ModelSpec with_regularization(config::ModelSpec spec, double alpha, double beta) {
    spec.drift.regularization.yosida.alpha = alpha;
    spec.drift.regularization.beta = beta;
    return spec;
}

bool is_ou(const SpectralModel& m) { return m.drift_kind() == spectral::DriftKind::zero && m.sigma_is_diagonal(); }

analysis::TestFunction test_function(const Json& j, std::size_t n) {
    const std::string path = "params.f";
    if (!j.is_object() || !j.contains("kind")) throw ConfigError(path, "expected an object with a kind");
    const std::string kind = j.at("kind").get<std::string>();
    auto vec = [&](const char* key, const Vector& fallback) {
        if (!j.contains(key) || j.at(key).is_null()) return fallback;
        const auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != n) throw ConfigError(path + "." + key, "needs " + std::to_string(n) + " entries");
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(n)));
    };
    const Vector zero = Vector::Zero(static_cast<Eigen::Index>(n));
    using TF = analysis::TestFunction;
    if (kind == "constant") return TF::constant(j.value("value", 1.0));
    if (kind == "exp_linear") return TF::exp_linear(vec("h", unit(n)), j.value("lambda", 1.0));
    if (kind == "bounded_rational") return TF::bounded_rational(vec("center", zero));
    if (kind == "indicator_ball") return TF::indicator_ball(vec("center", zero), j.value("radius", 1.0), j.value("ramp", true));
    if (kind == "cosine") return TF::cosine(vec("h", unit(n)));
    throw ConfigError(path + ".kind", "unknown test function '" + kind + "'");
}

analysis::Functional parse_functional(const std::string& s) {
    using F = analysis::Functional;
    auto suffix = [&](const std::string& prefix) { return s.substr(prefix.size()); };
    try {
        if (s == "squared_norm") return F::squared_norm();
        if (s == "theta") return F::theta();
        if (s.rfind("mode_mean_", 0) == 0) return F::mode_mean(std::stoul(suffix("mode_mean_")));
        if (s.rfind("mode_square_", 0) == 0) return F::mode_square(std::stoul(suffix("mode_square_")));
        if (s.rfind("abs_moment_", 0) == 0) return F::abs_moment(std::stod(suffix("abs_moment_")));
        if (s.rfind("g_squared_", 0) == 0) return F::g_squared(std::stoi(suffix("g_squared_")));
        if (s.rfind("exp_quadratic_", 0) == 0) return F::exp_quadratic(std::stod(suffix("exp_quadratic_")));
    } catch (const std::logic_error&) {
    }
    throw ConfigError("params.functionals", "unknown functional '" + s + "'");
}

std::vector<analysis::Functional> functionals(const Json& p, std::size_t n) {
    std::vector<analysis::Functional> out;
    for (const auto& item : p.at("functionals")) {
        const std::string s = item.get<std::string>();
        if (s == "mode_square_all") {
            for (std::size_t k = 1; k <= n; ++k) out.push_back(analysis::Functional::mode_square(k));
            continue;
        }
        out.push_back(parse_functional(s));
    }
    return out;
}

Json state_json(const Vector& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

// ---- experiments -------------------------------------------------------

bool run_simulate(const Context& c, Json& results) {
    const SpectralModel model = config::build_model(model_spec(c));
    const Vector x0 = vector_param(c.params, "x0", model.n(), unit(model.n()));
    const auto path = sde::simulate(model, integrator(c, num(c.params, "T")), x0);
    std::ofstream csv(c.out / "path.csv");
    sde::write_csv(path, csv);
    if (c.params.at("write_binary").get<bool>()) {
        std::ofstream bin(c.out / "path.bin", std::ios::binary);
        sde::write_binary(path, bin);
    }
    results["steps"] = path.states.size() - 1;
    results["final_state"] = state_json(path.states.back());
    return true;
}

bool run_couple(const Context& c, Json& results) {
    const SpectralModel model = config::build_model(model_spec(c));
    const std::size_t n = model.n();
    const Vector x0 = vector_param(c.params, "x0", n, unit(n));
    const Vector y0 = vector_param(c.params, "y0", n, Vector::Zero(static_cast<Eigen::Index>(n)));
    coupling::CouplingConfig cfg;
    cfg.T = num(c.params, "T");
    cfg.glue_tol = num(c.params, "glue_tol");
    cfg.integrator = integrator(c, cfg.T);
    const auto batch = coupling::run_coupling_batch(model, cfg, x0, y0, count(c.params, "N"),
                                                    list(c.params, "p_list"), c.workers);

    Csv paths(c.out / "coupling.csv", {"path", "tau", "log_R"});
    for (std::size_t i = 0; i < batch.paths; ++i) {
        paths << static_cast<double>(i) << batch.tau[i] << batch.log_R[i];
        paths.end();
    }
    Csv checks(c.out / "checks.csv", {"check_name", "lhs", "rhs", "constant", "ratio", "se", "pass"});
    checks << std::string("martingale") << batch.martingale.value << 1.0 << 1.0 << batch.martingale.value
           << batch.martingale.se << batch.martingale_pass;
    checks.end();

    bool pass = batch.martingale_pass;
    Json moments = Json::array();
    for (const auto& m : batch.moments) {
        moments.push_back({{"p", m.p}, {"moment", estimate_json(m.moment)}, {"bound", m.bound}, {"ratio", m.ratio},
                           {"relative_se", m.relative_se}, {"powered", m.powered}, {"powered_bound", m.powered_bound},
                           {"pass", m.pass}});
        checks << ("moment_p" + fmt(m.p)) << m.moment.value << m.bound << m.bound << m.ratio << m.moment.se << m.pass;
        checks.end();
        pass = pass && m.pass;
    }
    const double min_fraction = num(c.params, "min_fraction");
    pass = pass && batch.fraction_coupled >= min_fraction && batch.contraction_violations == 0 &&
           batch.post_tau_mismatches == 0;
    results["N"] = batch.paths;
    results["fraction_coupled"] = batch.fraction_coupled;
    results["martingale"] = estimate_json(batch.martingale);
    results["martingale_pass"] = batch.martingale_pass;
    results["moments"] = moments;
    results["worst_contraction_excess"] = batch.worst_contraction_excess;
    results["contraction_violations"] = batch.contraction_violations;
    results["post_tau_mismatches"] = batch.post_tau_mismatches;
    return pass;
}

Json harnack_json(const analysis::HarnackReport& r) {
    return {{"lhs", estimate_json(r.lhs)}, {"rhs_expectation", estimate_json(r.rhs_expectation)},
            {"constant", r.constant}, {"ratio", r.ratio}, {"relative_se", r.relative_se}, {"z", r.z},
            {"pass", r.pass}};
}

bool run_harnack(const Context& c, Json& results) {
    const config::ModelSpec base = model_spec(c);
    const double p = num(c.params, "p");
    const std::size_t N = count(c.params, "N");
    auto t_grid = list(c.params, "t_grid");
    if (t_grid.empty()) t_grid.push_back(num(c.params, "t"));
    const auto alphas = list(c.params, "alpha_grid");
    const auto betas = list(c.params, "beta_grid");
    const bool sweep = !alphas.empty() && base.drift.kind == spectral::DriftKind::nemytskii;

    Csv checks(c.out / "checks.csv", {"check_name", "lhs", "rhs", "constant", "ratio", "se", "pass"});
    Csv series(c.out / "harnack_ratio_vs_t.csv", {"alpha", "beta", "t", "ratio", "relative_se", "constant", "pass"});
    bool pass = true;
    Json rows = Json::array();

    auto one = [&](const config::ModelSpec& spec, double alpha, double beta) {
        const SpectralModel model = config::build_model(spec);
        const std::size_t n = model.n();
        const Vector x = vector_param(c.params, "x0", n, unit(n));
        const Vector y = vector_param(c.params, "y0", n, Vector::Zero(static_cast<Eigen::Index>(n)));
        const auto f = test_function(c.params.at("f"), n);
        for (double t : t_grid) {
            const auto r = analysis::check_harnack(model, integrator(c, t), x, y, f, p, N, c.workers);
            Json row = harnack_json(r);
            row["t"] = t;
            row["alpha"] = alpha;
            row["beta"] = beta;
            if (is_ou(model) && f.kind == analysis::TestFunction::Kind::exp_linear)
                row["exact_ratio"] = analysis::ou_harnack_ratio(model, t, x, y, f, p);
            rows.push_back(row);
            checks << ("harnack_t" + fmt(t) + "_alpha" + fmt(alpha) + "_beta" + fmt(beta)) << r.lhs.value
                   << r.rhs_expectation.value << r.constant << r.ratio << r.relative_se << r.pass;
            checks.end();
            series << alpha << beta << t << r.ratio << r.relative_se << r.constant << r.pass;
            series.end();
            pass = pass && r.pass;
        }
    };

    if (sweep) {
        const std::vector<double> bs = betas.empty() ? std::vector<double>{base.drift.regularization.beta} : betas;
        // Inner limit beta -> 0 at fixed alpha, then alpha -> 0.
        Json monotone_in_beta = Json::object();
        for (double a : alphas) {
            std::vector<double> ratios;
            for (double b : bs) {
                one(with_regularization(base, a, b), a, b);
                ratios.push_back(rows.back().at("ratio").get<double>());
            }
            const bool inc = std::is_sorted(ratios.begin(), ratios.end());
            const bool dec = std::is_sorted(ratios.rbegin(), ratios.rend());
            monotone_in_beta[fmt(a)] = inc ? "nondecreasing" : dec ? "nonincreasing" : "not monotone";
        }
        results["monotonicity_in_beta"] = monotone_in_beta;
    } else {
        const double alpha = base.drift.regularization.yosida.alpha;
        one(base, base.drift.kind == spectral::DriftKind::nemytskii ? alpha : 0.0, base.drift.regularization.beta);
    }
    results["checks"] = rows;
    return pass;
}

bool run_gradient(const Context& c, Json& results) {
    const SpectralModel model = config::build_model(model_spec(c));
    const std::size_t n = model.n();
    const Vector x = vector_param(c.params, "x0", n, unit(n));
    const Vector y = vector_param(c.params, "y0", n, Vector::Zero(static_cast<Eigen::Index>(n)));
    const auto f = test_function(c.params.at("f"), n);
    const double t = num(c.params, "t");
    const auto r = analysis::check_gradient_estimate(model, integrator(c, t), x, y, f, count(c.params, "N"), c.workers);
    results["difference"] = estimate_json(r.difference);
    results["bound"] = r.bound;
    results["lipschitz_bound"] = std::isfinite(r.lipschitz_bound) ? Json(r.lipschitz_bound) : Json(nullptr);
    results["pass_bounded"] = r.pass_bounded;
    results["pass_lipschitz"] = r.pass_lipschitz;
    if (is_ou(model)) {
        try {
            results["exact_difference"] = analysis::ou_exact(model, t, x, f) - analysis::ou_exact(model, t, y, f);
        } catch (const NotLinearModel&) {
        }
    }
    Csv checks(c.out / "checks.csv", {"check_name", "lhs", "rhs", "constant", "ratio", "se", "pass"});
    const double diff = std::abs(r.difference.value);
    checks << std::string("gradient_bounded") << diff << r.bound << r.bound << (r.bound > 0 ? diff / r.bound : 0.0)
           << r.difference.se << r.pass_bounded;
    checks.end();
    if (std::isfinite(r.lipschitz_bound)) {
        checks << std::string("gradient_lipschitz") << diff << r.lipschitz_bound << r.lipschitz_bound
               << (r.lipschitz_bound > 0 ? diff / r.lipschitz_bound : 0.0) << r.difference.se << r.pass_lipschitz;
        checks.end();
    }
    return r.pass;
}

bool run_invariant(const Context& c, Json& results) {
    const config::ModelSpec base = model_spec(c);
    auto alphas = list(c.params, "alpha_grid");
    const bool sweep = !alphas.empty() && base.drift.kind == spectral::DriftKind::nemytskii;
    if (!sweep) alphas = {base.drift.regularization.yosida.alpha};
    const double burn_in = num(c.params, "burn_in");
    const double horizon = num(c.params, "horizon");
    const double exact_se = num(c.params, "exact_se");
    const double consistency_se = num(c.params, "consistency_se");

    Csv table(c.out / "invariant.csv", {"alpha", "functional", "estimate", "se", "exact", "z"});
    bool pass = true;
    Json estimates = Json::array();
    std::vector<analysis::InvariantEstimate> all;
    std::vector<Vector> samples;
    Json lyapunov, density, hyper;
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        const double alpha = alphas[ai];
        const config::ModelSpec spec = sweep ? with_regularization(base, alpha, base.drift.regularization.beta) : base;
        const SpectralModel model = config::build_model(spec);
        const std::size_t n = model.n();
        const auto theta = config::theta_for(model, spec);
        const Vector x0 = vector_param(c.params, "x0", n, Vector::Zero(static_cast<Eigen::Index>(n)));
        auto est = analysis::estimate_invariant(model, integrator(c, horizon), x0, burn_in, horizon,
                                                functionals(c.params, n), theta, count(c.params, "keep_every"));
        est.alpha = sweep ? alpha : 0.0;

        // Exact stationary moments when the model is Gaussian.
        std::map<std::string, double> exact;
        if (is_ou(model) && (model.a_eigs().array() < 0).all()) {
            const Vector var = analysis::ou_stationary_variance(model);
            for (Eigen::Index k = 0; k < var.size(); ++k) {
                exact["mode_square_" + std::to_string(k + 1)] = var[k];
                exact["mode_mean_" + std::to_string(k + 1)] = 0.0;
            }
            exact["squared_norm"] = var.sum();
            exact["theta"] = (theta.lambda().cwiseQuotient(theta.q())).dot(var);
        }
        Json row = {{"alpha", est.alpha}, {"samples", est.samples}, {"moments", Json::object()}};
        for (const auto& [name, e] : est.moments) {
            Json m = estimate_json(e);
            const auto it = exact.find(name);
            if (it != exact.end()) {
                const double z = e.se > 0 ? (e.value - it->second) / e.se : 0.0;
                m["exact"] = it->second;
                m["z"] = z;
                m["pass"] = std::abs(z) <= exact_se;
                pass = pass && std::abs(z) <= exact_se;
                table << est.alpha << name << e.value << e.se << it->second << z;
            } else {
                table << est.alpha << name << e.value << e.se << std::string("") << std::string("");
            }
            table.end();
            row["moments"][name] = m;
        }
        estimates.push_back(row);

        if (ai == 0) {
            samples = est.thinned;
            if (samples.size() >= 4) {
                const auto ly = analysis::lyapunov_drift_check(model, theta, samples,
                                                               spec.drift.map ? spec.drift.map->growth().m : 1);
                lyapunov = {{"c1", ly.c1}, {"trace_term", ly.trace_term}, {"satisfied_fraction", ly.satisfied_fraction},
                            {"worst_residual", ly.worst_residual}, {"pass", ly.pass}};
                const Vector xd = vector_param(c.params, "x0", n, Vector::Zero(static_cast<Eigen::Index>(n)));
                density = {{"p", num(c.params, "p")}, {"t", num(c.params, "t")},
                           {"rhs", analysis::density_norm_rhs(samples, xd, model.sigma_inv_norm(), num(c.params, "p"),
                                                              model.omega(), num(c.params, "t"))}};
                const auto hb = analysis::check_hyperbound_condition(samples, list(c.params, "lambda_grid"),
                                                                     model.omega(), model.sigma_inv_norm());
                Json hrows = Json::array();
                Csv hcsv(c.out / "hyperbound.csv",
                         {"lambda", "estimate", "se", "largest_share", "prefix_growth", "stable", "above_threshold"});
                for (const auto& h : hb.rows) {
                    hrows.push_back({{"lambda", h.lambda}, {"estimate", estimate_json(h.estimate)},
                                     {"largest_share", h.largest_share}, {"prefix_growth", h.prefix_growth},
                                     {"stable", h.stable}, {"above_threshold", h.above_threshold}});
                    hcsv << h.lambda << h.estimate.value << h.estimate.se << h.largest_share << h.prefix_growth
                         << h.stable << h.above_threshold;
                    hcsv.end();
                }
                hyper = {{"threshold", hb.threshold},
                         {"smallest_stable_lambda",
                          std::isfinite(hb.smallest_stable_lambda) ? Json(hb.smallest_stable_lambda) : Json(nullptr)},
                         {"condition_met", hb.condition_met}, {"rows", hrows}};
            }
        }
        all.push_back(std::move(est));
    }

    // Uniqueness consistency: every pair of alphas agrees on every
    // functional within consistency_se combined standard errors.
    if (all.size() > 1) {
        Json pairs = Json::array();
        bool consistent = true;
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j)
                for (const auto& [name, ei] : all[i].moments) {
                    const Estimate& ej = all[j].moments.at(name);
                    const double se = std::hypot(ei.se, ej.se);
                    const double z = se > 0 ? (ei.value - ej.value) / se : 0.0;
                    const bool ok = std::abs(z) <= consistency_se;
                    consistent = consistent && ok;
                    pairs.push_back({{"alpha_i", all[i].alpha}, {"alpha_j", all[j].alpha}, {"functional", name},
                                     {"z", z}, {"pass", ok}});
                }
        results["consistency"] = pairs;
        results["consistent"] = consistent;
        pass = pass && consistent;
    }
    results["estimates"] = estimates;
    if (!lyapunov.is_null()) results["lyapunov"] = lyapunov;
    if (!density.is_null()) results["density_rhs"] = density;
    if (!hyper.is_null()) results["hyperbound"] = hyper;
    return pass;
}

analysis::UltraboundSpec ultrabound_spec(const Json& p) {
    const Json& phi = p.at("phi");
    const double a = num(p, "a");
    const std::string kind = phi.value("kind", "power");
    try {
        if (kind == "power") return analysis::UltraboundSpec::power(phi.at("m").get<double>(), a);
        if (kind == "table")
            return analysis::UltraboundSpec::table(phi.at("s").get<std::vector<double>>(),
                                                   phi.at("phi").get<std::vector<double>>(), a);
    } catch (const Json::exception& e) {
        throw ConfigError("params.phi", e.what());
    }
    throw ConfigError("params.phi.kind", "expected 'power' or 'table'");
}

bool run_ultrabound(const Context& c, Json& results) {
    const auto spec = ultrabound_spec(c.params);
    const double level = spec.Phi0_inverse(2.0 * spec.a);
    auto y0s = list(c.params, "y0_list");
    if (y0s.empty()) y0s = {0.0, level, 10.0 * level};
    double omega = 1.0;
    if (!c.params.at("omega").is_null()) omega = num(c.params, "omega");
    else if (!c.doc.at("model").is_null()) omega = config::build_model(model_spec(c)).omega();

    bool pass = true;
    Json checks = Json::array();
    Csv csv(c.out / "contraction.csv", {"y0", "t", "y", "bound"});
    for (double y0 : y0s) {
        const auto r = analysis::check_contraction_bound(spec, y0, num(c.params, "t_max"), num(c.params, "ode_dt"));
        for (std::size_t k = 0; k < r.times.size(); ++k) {
            csv << y0 << r.times[k] << r.y[k] << r.bound[k];
            csv.end();
        }
        const bool ok = r.bound_holds && (!r.case1 || r.invariance_holds);
        checks.push_back({{"y0", y0}, {"level", r.level}, {"max_excess", r.max_excess}, {"worst_time", r.worst_time},
                          {"bound_holds", r.bound_holds}, {"case1", r.case1}, {"invariance_holds", r.invariance_holds},
                          {"pass", ok}});
        pass = pass && ok;
    }
    const double lambda = num(c.params, "envelope_lambda");
    Csv env(c.out / "envelope.csv", {"t", "psi_inverse", "envelope"});
    Json envelope = Json::array();
    for (double t : list(c.params, "t_grid")) {
        const double e = analysis::ultrabound_envelope(spec, lambda, omega, t);
        const double pi = analysis::psi_inverse(spec, t / 4.0);
        env << t << pi << e;
        env.end();
        envelope.push_back({{"t", t}, {"psi_inverse", pi}, {"envelope", e}});
    }
    results["level"] = level;
    results["omega"] = omega;
    results["envelope_lambda"] = lambda;
    results["contraction"] = checks;
    results["envelope"] = envelope;
    return pass;
}

bool run_yosida_table(const Context& c, Json& results) {
    monotone::ScalarMap map = monotone::ScalarMap::negative_sign();
    if (!c.params.at("map").is_null()) map = config::scalar_map_from_json(c.params.at("map"));
    else if (!c.doc.at("model").is_null()) {
        const auto spec = model_spec(c);
        if (spec.drift.map) map = *spec.drift.map;
    }
    const auto rows = yosida_table(map, list(c.params, "alpha_grid"), list(c.params, "r_grid"));
    Csv csv(c.out / "yosida_table.csv", {"alpha", "r", "J_alpha", "F_alpha", "F_0", "abs_excess", "domination_violation"});
    std::size_t violations = 0;
    for (const auto& r : rows) {
        const bool bad = r.excess > 1e-12;
        violations += bad;
        csv << r.alpha << r.r << r.resolvent << r.yosida << r.minimal << r.excess << bad;
        csv.end();
    }
    results["map"] = config::to_json(map);
    results["rows"] = rows.size();
    results["domination_violations"] = violations;
    return violations == 0;
}

} // namespace

RunResult run(const Json& resolved, const std::string& out_dir, unsigned workers) {
    const std::string e = resolved.at("experiment").get<std::string>();
    fs::create_directories(out_dir);
    Context c{resolved, resolved.at("params"), fs::path(out_dir), std::max(1u, workers),
              resolved.at("seed").get<std::uint64_t>()};
    Json results = Json::object();
    bool pass = false;
    if (e == "simulate") pass = run_simulate(c, results);
    else if (e == "couple") pass = run_couple(c, results);
    else if (e == "harnack") pass = run_harnack(c, results);
    else if (e == "gradient") pass = run_gradient(c, results);
    else if (e == "invariant") pass = run_invariant(c, results);
    else if (e == "ultrabound") pass = run_ultrabound(c, results);
    else if (e == "yosida-table") pass = run_yosida_table(c, results);
    else throw ConfigError("experiment", "unknown experiment '" + e + "'");

    RunResult r;
    r.exit_code = pass ? exit_pass : exit_statistical;
    r.report = {{"experiment", e}, {"pass", pass}, {"exit_code", r.exit_code}, {"results", results}, {"config", resolved}};
    std::ofstream(c.out / "report.json") << r.report.dump(2) << '\n';
    std::ofstream(c.out / "manifest.json") << resolved.dump(2) << '\n';
    return r;
}

} // namespace spde::cli
