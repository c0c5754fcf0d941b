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
#include "spde/invariant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace spde::analysis {

std::string Functional::name() const {
    char buf[64];
    switch (kind) {
    case Kind::mode_mean:
        return "mode_mean_" + std::to_string(mode);
    case Kind::mode_square:
        return "mode_square_" + std::to_string(mode);
    case Kind::squared_norm:
        return "squared_norm";
    case Kind::abs_moment:
        std::snprintf(buf, sizeof buf, "abs_moment_%g", order);
        return buf;
    case Kind::theta:
        return "theta";
    case Kind::g_squared:
        return "g_squared";
    case Kind::exp_quadratic:
        std::snprintf(buf, sizeof buf, "exp_quadratic_%g", lambda);
        return buf;
    }
    return "unknown";
}

Functional Functional::mode_mean(std::size_t k) {
    Functional f;
    f.kind = Kind::mode_mean;
    f.mode = k;
    return f;
}

Functional Functional::mode_square(std::size_t k) {
    Functional f;
    f.kind = Kind::mode_square;
    f.mode = k;
    return f;
}

Functional Functional::squared_norm() { return Functional{}; }

Functional Functional::abs_moment(double order) {
    Functional f;
    f.kind = Kind::abs_moment;
    f.order = order;
    return f;
}

Functional Functional::theta() {
    Functional f;
    f.kind = Kind::theta;
    return f;
}

Functional Functional::g_squared(int m) {
    Functional f;
    f.kind = Kind::g_squared;
    f.order = m;
    return f;
}

Functional Functional::exp_quadratic(double lambda) {
    Functional f;
    f.kind = Kind::exp_quadratic;
    f.lambda = lambda;
    return f;
}

namespace {

constexpr std::size_t kBatches = 32;

// Streaming batch means: the sample count is known up front, so each
// sample goes straight into its batch.
struct BatchAccumulator {
    std::size_t batch_len = 1;
    std::size_t seen = 0;
    double total = 0.0;
    std::vector<double> sums = std::vector<double>(kBatches, 0.0);

    void add(double v) {
        total += v;
        const std::size_t b = seen / batch_len;
        if (b < kBatches) sums[b] += v;
        ++seen;
    }

    Estimate result() const {
        Estimate e;
        e.value = seen ? total / static_cast<double>(seen) : 0.0;
        std::vector<double> means(kBatches);
        for (std::size_t b = 0; b < kBatches; ++b) means[b] = sums[b] / static_cast<double>(batch_len);
        e.se = mean_and_se(means).se;
        return e;
    }
};

} // namespace

InvariantEstimate estimate_invariant(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x0,
                                     double burn_in, double horizon, const std::vector<Functional>& functionals,
                                     const std::optional<ThetaFunctional>& theta, std::size_t keep_every) {
    if (!(burn_in >= 0)) throw ConfigError("burn_in", "must be >= 0");
    if (!(horizon > burn_in)) throw ConfigError("horizon", "must exceed burn_in");
    sde::IntegratorConfig c = cfg;
    c.t_end = horizon;
    c.validate();

    std::optional<ThetaFunctional> th = theta;
    for (const auto& f : functionals) {
        if (f.kind == Functional::Kind::theta && !th) th = ThetaFunctional::for_model(model);
        if (f.kind == Functional::Kind::g_squared && !model.lift())
            throw ConfigError("functionals", "g_squared needs a model with a Nemytskii lift");
        if ((f.kind == Functional::Kind::mode_mean || f.kind == Functional::Kind::mode_square) &&
            (f.mode < 1 || f.mode > model.n()))
            throw ConfigError("functionals", "mode index out of range");
    }

    const sde::TimeGrid grid(horizon, c.dt);
    std::size_t first = 1;
    while (first <= grid.steps && grid.time(first) <= burn_in) ++first;
    const std::size_t count = grid.steps + 1 - first;
    if (count < 2 * kBatches) throw ConfigError("horizon", "too few samples after burn-in for batch means");

    std::vector<BatchAccumulator> acc(functionals.size());
    for (auto& a : acc) a.batch_len = count / kBatches;

    InvariantEstimate est;
    est.burn_in = burn_in;
    est.horizon = horizon;
    const auto lift = model.lift();
    std::size_t kept = 0;
    sde::for_each_state(model, c, x0, [&](std::size_t k, double, const Vector& x) {
        if (k < first) return;
        const double sq = x.squaredNorm();
        for (std::size_t j = 0; j < functionals.size(); ++j) {
            const Functional& f = functionals[j];
            double v = 0.0;
            switch (f.kind) {
            case Functional::Kind::mode_mean: v = x[static_cast<Eigen::Index>(f.mode - 1)]; break;
            case Functional::Kind::mode_square: {
                const double xi = x[static_cast<Eigen::Index>(f.mode - 1)];
                v = xi * xi;
                break;
            }
            case Functional::Kind::squared_norm: v = sq; break;
            case Functional::Kind::abs_moment: v = std::pow(sq, 0.5 * f.order); break;
            case Functional::Kind::theta: v = (*th)(x); break;
            case Functional::Kind::g_squared: {
                const double g = spectral::g_functional(*lift, x, static_cast<int>(f.order));
                v = g * g;
                break;
            }
            case Functional::Kind::exp_quadratic: v = std::exp(f.lambda * sq); break;
            }
            acc[j].add(v);
        }
        if (keep_every > 0 && kept++ % keep_every == 0) est.thinned.push_back(x);
    });
    est.samples = count;
    for (std::size_t j = 0; j < functionals.size(); ++j) est.moments[functionals[j].name()] = acc[j].result();
    return est;
}

Vector ou_stationary_variance(const SpectralModel& model) {
    if (model.drift_kind() != spectral::DriftKind::zero) throw NotLinearModel("stationary variance needs zero drift");
    if (!model.sigma_is_diagonal()) throw NotLinearModel("stationary variance needs diagonal sigma");
    Vector v(model.a_eigs().size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double a = model.a_eigs()[k];
        if (!(a < 0)) throw NotLinearModel("stationary variance needs a_k < 0");
        const double s = model.sigma()(k, k);
        v[k] = s * s / (-2.0 * a);
    }
    return v;
}

double generator_phi(const SpectralModel& model, const Vector& q, const Vector& x) {
    require_dimension(model.n(), static_cast<std::size_t>(q.size()));
    require_dimension(model.n(), static_cast<std::size_t>(x.size()));
    Vector drift;
    model.drift().evaluate(x, drift);
    const Matrix ss = model.sigma() * model.sigma().transpose();
    double out = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        out += ss(i, i) / q[i] + 2.0 / q[i] * x[i] * (model.a_eigs()[i] * x[i] + drift[i]);
    return out;
}

LyapunovReport lyapunov_drift_check(const SpectralModel& model, const ThetaFunctional& theta,
                                    const std::vector<Vector>& samples, int m) {
    if (samples.size() < 4) throw ConfigError("samples", "need at least 4 samples");
    LyapunovReport rep;
    const Vector& q = theta.q();
    rep.trace_term = model.sigma_norm() * model.sigma_norm() * q.cwiseInverse().sum();

    const std::size_t half = samples.size() / 2;
    std::vector<double> residual(samples.size()), scale(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Vector& x = samples[i];
        if (!x.allFinite()) throw Error("non-finite sample");
        const double th = theta(x);
        const double nx = x.norm();
        residual[i] = generator_phi(model, q, x) + 2.0 * th - rep.trace_term;
        scale[i] = 1.0 + std::pow(nx, m + 1) + std::sqrt(th) * nx;
    }
    for (std::size_t i = 0; i < half; ++i) rep.c1 = std::max(rep.c1, residual[i] / scale[i]);
    std::size_t ok = 0;
    rep.worst_residual = -std::numeric_limits<double>::infinity();
    for (std::size_t i = half; i < samples.size(); ++i) {
        const double r = residual[i] - rep.c1 * scale[i];
        rep.worst_residual = std::max(rep.worst_residual, r);
        if (r <= 0) ++ok;
    }
    rep.calibration = half;
    rep.validation = samples.size() - half;
    rep.satisfied_fraction = static_cast<double>(ok) / static_cast<double>(rep.validation);
    rep.pass = rep.satisfied_fraction >= 0.95;
    return rep;
}

} // namespace spde::analysis
