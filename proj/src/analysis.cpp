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
#include "spde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "spde/parallel.hpp"

namespace spde::analysis {

double TestFunction::operator()(const Vector& x) const {
    switch (kind) {
    case Kind::constant:
        return value;
    case Kind::exp_linear:
        return std::exp(lambda * h.dot(x));
    case Kind::bounded_rational:
        return 1.0 / (1.0 + (x - center).squaredNorm());
    case Kind::indicator_ball: {
        const double r = (x - center).norm();
        if (r <= radius) return 1.0;
        if (!ramp) return 0.0;
        const double width = radius / 10.0;
        return r >= radius + width ? 0.0 : 1.0 - (r - radius) / width;
    }
    case Kind::cosine:
        return 1.0 + std::cos(h.dot(x));
    case Kind::custom:
        return fn(x);
    }
    return 0.0;
}

std::string TestFunction::name() const {
    switch (kind) {
    case Kind::constant: return "constant";
    case Kind::exp_linear: return "exp_linear";
    case Kind::bounded_rational: return "bounded_rational";
    case Kind::indicator_ball: return "indicator_ball";
    case Kind::cosine: return "cosine";
    case Kind::custom: return "custom";
    }
    return "unknown";
}

TestFunction TestFunction::constant(double c) {
    if (!(c >= 0)) throw ConfigError("f", "test functions must be nonnegative");
    TestFunction f;
    f.kind = Kind::constant;
    f.value = c;
    f.sup_norm = c;
    f.lipschitz = 0.0;
    return f;
}

TestFunction TestFunction::exp_linear(Vector h, double lambda) {
    TestFunction f;
    f.kind = Kind::exp_linear;
    f.h = std::move(h);
    f.lambda = lambda;
    f.sup_norm = (lambda == 0.0 || f.h.norm() == 0.0) ? 1.0 : std::numeric_limits<double>::infinity();
    f.lipschitz = f.sup_norm == 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return f;
}

TestFunction TestFunction::bounded_rational(Vector center) {
    TestFunction f;
    f.kind = Kind::bounded_rational;
    f.center = std::move(center);
    f.sup_norm = 1.0;
    // max of |d/dr (1 + r^2)^{-1}| at r = 1/sqrt(3)
    f.lipschitz = 3.0 * std::sqrt(3.0) / 8.0;
    return f;
}

TestFunction TestFunction::indicator_ball(Vector center, double radius, bool ramp) {
    if (!(radius > 0)) throw ConfigError("radius", "must be > 0");
    TestFunction f;
    f.kind = Kind::indicator_ball;
    f.center = std::move(center);
    f.radius = radius;
    f.ramp = ramp;
    f.sup_norm = 1.0;
    f.lipschitz = ramp ? 10.0 / radius : std::numeric_limits<double>::infinity();
    return f;
}

TestFunction TestFunction::cosine(Vector h) {
    TestFunction f;
    f.kind = Kind::cosine;
    f.h = std::move(h);
    f.sup_norm = 2.0;
    f.lipschitz = f.h.norm();
    return f;
}

TestFunction TestFunction::custom(std::function<double(const Vector&)> fn, double sup_norm, double lipschitz) {
    TestFunction f;
    f.kind = Kind::custom;
    f.fn = std::move(fn);
    f.sup_norm = sup_norm;
    f.lipschitz = lipschitz;
    return f;
}

std::vector<Vector> terminal_states(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x,
                                    std::size_t N, unsigned workers) {
    cfg.validate();
    std::vector<Vector> out(N);
    parallel_for(N, workers, [&](std::size_t i) {
        sde::IntegratorConfig c = cfg;
        c.stream_id = cfg.stream_id + static_cast<std::uint32_t>(i);
        out[i] = sde::terminal_state(model, c, x);
    });
    return out;
}

namespace {

std::vector<double> evaluate_all(const std::vector<Vector>& states, const TestFunction& f, double power = 1.0) {
    std::vector<double> v(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const double fx = f(states[i]);
        if (!(fx >= 0)) throw Error("test function returned a negative or NaN value");
        v[i] = power == 1.0 ? fx : std::pow(fx, power);
    }
    return v;
}

} // namespace

Estimate estimate_semigroup(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x,
                            const TestFunction& f, std::size_t N, unsigned workers) {
    if (N < 2) throw ConfigError("N", "must be >= 2");
    const auto values = evaluate_all(terminal_states(model, cfg, x, N, workers), f);
    return mean_and_se(values);
}

double harnack_constant(double sigma_inv_norm, double p, double omega, double t, double dist) {
    if (!(p > 1)) throw ConfigError("p", "must be > 1");
    if (!(t > 0)) throw ConfigError("t", "must be > 0");
    if (dist == 0.0) return 1.0;
    const double rate = std::abs(omega) < 1e-12 ? 1.0 / (2.0 * t) : omega / -std::expm1(-2.0 * omega * t);
    return std::exp(sigma_inv_norm * sigma_inv_norm * p * rate * dist * dist / (p - 1.0));
}

double harnack_constant(double sigma_inv_norm, double p, double omega, double t, const Vector& x,
                        const Vector& y) {
    return harnack_constant(sigma_inv_norm, p, omega, t, (x - y).norm());
}

HarnackReport check_harnack(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x,
                            const Vector& y, const TestFunction& f, double p, std::size_t N, unsigned workers) {
    if (!(p > 1)) throw ConfigError("p", "must be > 1");
    if (N < 2) throw ConfigError("N", "must be >= 2");
    sde::IntegratorConfig cy = cfg;
    cy.stream_id = cfg.stream_id + static_cast<std::uint32_t>(N);
    const Estimate fx = mean_and_se(evaluate_all(terminal_states(model, cfg, x, N, workers), f));
    const Estimate fpy = mean_and_se(evaluate_all(terminal_states(model, cy, y, N, workers), f, p));

    HarnackReport r;
    r.lhs.value = std::pow(fx.value, p);
    r.lhs.se = p * std::pow(fx.value, p - 1.0) * fx.se; // delta method
    r.rhs_expectation = fpy;
    r.constant = harnack_constant(model.sigma_inv_norm(), p, model.omega(), cfg.t_end, x, y);
    r.ratio = r.lhs.value / (fpy.value * r.constant);
    const double rel_l = fx.value > 0 ? p * fx.se / fx.value : 0.0;
    const double rel_r = fpy.value > 0 ? fpy.se / fpy.value : 0.0;
    r.relative_se = std::hypot(rel_l, rel_r);
    r.z = r.relative_se > 0 ? (r.ratio - 1.0) / r.relative_se : (r.ratio > 1.0 ? INFINITY : -INFINITY);
    r.pass = r.ratio <= 1.0 + 3.0 * r.relative_se;
    return r;
}

double gradient_bound(double omega, double t, double sup_norm, double sigma_inv_norm, double dist) {
    if (dist == 0.0) return 0.0;
    return std::exp(std::abs(omega) * t) / std::sqrt(std::min(t, 1.0)) * sup_norm * sigma_inv_norm * dist;
}

double lipschitz_gradient_bound(double omega, double t, double lipschitz, double dist) {
    if (dist == 0.0 || lipschitz == 0.0) return 0.0;
    return std::exp(std::abs(omega) * t) * lipschitz * dist;
}

GradientReport check_gradient_estimate(const SpectralModel& model, const sde::IntegratorConfig& cfg,
                                       const Vector& x, const Vector& y, const TestFunction& f, std::size_t N,
                                       unsigned workers) {
    if (N < 2) throw ConfigError("N", "must be >= 2");
    if (!std::isfinite(f.sup_norm)) throw ConfigError("f", "gradient estimate needs a bounded test function");
    // Same streams for both starting points: the difference is estimated
    // path by path.
    const auto vx = evaluate_all(terminal_states(model, cfg, x, N, workers), f);
    const auto vy = evaluate_all(terminal_states(model, cfg, y, N, workers), f);
    std::vector<double> diff(N);
    for (std::size_t i = 0; i < N; ++i) diff[i] = vx[i] - vy[i];

    GradientReport r;
    r.difference = mean_and_se(diff);
    const double t = cfg.t_end;
    const double dist = (x - y).norm();
    r.bound = gradient_bound(model.omega(), t, f.sup_norm, model.sigma_inv_norm(), dist);
    r.pass_bounded = std::abs(r.difference.value) <= r.bound + 3.0 * r.difference.se;
    if (std::isfinite(f.lipschitz)) {
        r.lipschitz_bound = lipschitz_gradient_bound(model.omega(), t, f.lipschitz, dist);
        r.pass_lipschitz = std::abs(r.difference.value) <= r.lipschitz_bound + 3.0 * r.difference.se;
    }
    r.pass = r.pass_bounded && r.pass_lipschitz;
    return r;
}

void ou_moments(const SpectralModel& model, double t, const Vector& x, Vector& mean, Vector& variance) {
    if (model.drift_kind() != spectral::DriftKind::zero) throw NotLinearModel("closed form needs zero drift");
    if (!model.sigma_is_diagonal()) throw NotLinearModel("closed form needs sigma diagonal in the eigenbasis");
    require_dimension(model.n(), static_cast<std::size_t>(x.size()));
    const Eigen::Index n = x.size();
    mean.resize(n);
    variance.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double a = model.a_eigs()[k];
        mean[k] = std::exp(a * t) * x[k];
        variance[k] = t == 0.0 ? 0.0 : sde::stochastic_convolution_variance(a, model.sigma()(k, k), t);
    }
}

namespace {

double log_ou_exp_linear(const Vector& mean, const Vector& var, const Vector& h, double lambda) {
    return lambda * h.dot(mean) + 0.5 * lambda * lambda * h.cwiseProduct(h).dot(var);
}

} // namespace

double ou_exact(const SpectralModel& model, double t, const Vector& x, const TestFunction& f) {
    Vector mean, var;
    ou_moments(model, t, x, mean, var);
    switch (f.kind) {
    case TestFunction::Kind::constant:
        return f.value;
    case TestFunction::Kind::exp_linear:
        return std::exp(log_ou_exp_linear(mean, var, f.h, f.lambda));
    case TestFunction::Kind::cosine:
        return 1.0 + std::cos(f.h.dot(mean)) * std::exp(-0.5 * f.h.cwiseProduct(f.h).dot(var));
    default:
        throw NotLinearModel("no closed form for test function " + f.name());
    }
}

double ou_harnack_ratio(const SpectralModel& model, double t, const Vector& x, const Vector& y,
                        const TestFunction& f, double p) {
    if (f.kind != TestFunction::Kind::exp_linear) throw NotLinearModel("closed-form Harnack ratio needs exp_linear");
    Vector mx, vx, my, vy;
    ou_moments(model, t, x, mx, vx);
    ou_moments(model, t, y, my, vy);
    const double log_lhs = p * log_ou_exp_linear(mx, vx, f.h, f.lambda);
    const double log_rhs = log_ou_exp_linear(my, vy, f.h, p * f.lambda);
    const double log_c = std::log(harnack_constant(model.sigma_inv_norm(), p, model.omega(), t, x, y));
    return std::exp(log_lhs - log_rhs - log_c);
}

HyperboundReport check_hyperbound_condition(const std::vector<Vector>& samples, const std::vector<double>& lambda_grid,
                                            double omega, double sigma_inv_norm) {
    HyperboundReport rep;
    const double w = std::min(omega, 0.0);
    rep.threshold = 2.0 * w * w * sigma_inv_norm * sigma_inv_norm;
    const std::size_t n = samples.size();
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = samples[i].squaredNorm();
    std::vector<double> terms(n);
    for (double lambda : lambda_grid) {
        HyperboundRow row;
        row.lambda = lambda;
        row.above_threshold = lambda > rep.threshold;
        double sum = 0.0, largest = 0.0, half = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            terms[i] = std::exp(lambda * sq[i]);
            sum += terms[i];
            largest = std::max(largest, terms[i]);
            if (i + 1 == n / 2) half = sum;
        }
        row.estimate = mean_and_se(terms);
        row.largest_share = sum > 0 ? largest / sum : 0.0;
        const double mean_half = n >= 2 ? half / static_cast<double>(n / 2) : sum;
        row.prefix_growth = mean_half > 0 ? row.estimate.value / mean_half - 1.0 : 0.0;
        // A heavy tail shows up as a few samples carrying the sum and the
        // running mean still drifting upwards.
        row.stable = std::isfinite(sum) && row.largest_share <= 0.02 && std::abs(row.prefix_growth) <= 0.1;
        if (row.stable && row.above_threshold && !(rep.smallest_stable_lambda <= lambda))
            rep.smallest_stable_lambda = lambda;
        rep.rows.push_back(row);
    }
    rep.condition_met = std::isfinite(rep.smallest_stable_lambda);
    return rep;
}

namespace {

double density_rate(double sigma_inv_norm, double p, double omega, double t) {
    if (!(t > 0)) throw ConfigError("t", "must be > 0");
    const double rate = std::abs(omega) < 1e-12 ? 1.0 / (2.0 * t) : omega / -std::expm1(-2.0 * omega * t);
    return sigma_inv_norm * sigma_inv_norm * p * rate;
}

} // namespace

double density_norm_rhs(const std::vector<Vector>& samples, const Vector& x, double sigma_inv_norm, double p,
                        double omega, double t) {
    if (samples.empty()) throw Error("density bound needs samples");
    const double c = density_rate(sigma_inv_norm, p, omega, t);
    double sum = 0.0;
    for (const Vector& y : samples) sum += std::exp(-c * (x - y).squaredNorm());
    return static_cast<double>(samples.size()) / sum;
}

double density_norm_rhs_gaussian(const Vector& x, double v, double sigma_inv_norm, double p, double omega,
                                 double t) {
    const double c = density_rate(sigma_inv_norm, p, omega, t);
    const double s = 1.0 + 2.0 * c * v;
    const double n = static_cast<double>(x.size());
    return std::pow(s, 0.5 * n) * std::exp(c * x.squaredNorm() / s);
}

} // namespace spde::analysis
