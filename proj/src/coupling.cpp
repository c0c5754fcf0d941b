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
#include "spde/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>

#include "spde/parallel.hpp"

namespace spde::coupling {

void CouplingConfig::validate() const {
    if (!(T > 0)) throw ConfigError("T", "must be > 0");
    if (!(p > 1)) throw ConfigError("p", "must be > 1");
    if (!(glue_tol > 0)) throw ConfigError("glue_tol", "must be > 0");
    if (!(integrator.dt > 0)) throw ConfigError("dt", "must be > 0");
    if (integrator.dt > T) throw ConfigError("dt", "must not exceed T");
}

double xi_schedule(double omega, double T, double dist0, double t) {
    if (dist0 == 0.0) return 0.0;
    if (std::abs(omega) < 1e-12) return dist0 / T;
    // e^{-omega t} / (1 - e^{-2 omega T}) rewritten so that neither factor
    // overflows for large |omega| T.
    if (omega > 0) return 2.0 * omega * dist0 * std::exp(-omega * t) / -std::expm1(-2.0 * omega * T);
    const double w = -omega;
    return 2.0 * w * dist0 * std::exp(w * (t - 2.0 * T)) / -std::expm1(-2.0 * w * T);
}

double girsanov_increment(const SpectralModel& model, const Vector& x, const Vector& y, double xi,
                          const Vector& noise, double dt) {
    if (xi == 0.0) return 0.0;
    const Vector d = x - y;
    const double dn = d.norm();
    if (dn == 0.0) return 0.0;
    const Vector u = d / dn;
    const Vector su = model.sigma_inverse() * u;
    const double lin = (model.sigma_inverse().transpose() * u).dot(noise) * std::sqrt(dt);
    return -xi * lin - 0.5 * xi * xi * su.squaredNorm() * dt;
}

double girsanov_moment_bound(double sigma_inv_norm, double p, double omega, double T, double dist0) {
    if (dist0 == 0.0) return 1.0;
    // omega / (1 - e^{-2 omega T}) -> 1 / (2 T)
    const double rate = std::abs(omega) < 1e-12 ? 1.0 / (2.0 * T) : omega / -std::expm1(-2.0 * omega * T);
    return std::exp(sigma_inv_norm * sigma_inv_norm * p * rate * dist0 * dist0 / ((p - 1.0) * (p - 1.0)));
}

namespace {

// Advances the pair by one step of length h. Returns the applied speed.
struct PairStep {
    bool glued = false;
    double xi = 0.0;
    double log_increment = 0.0;
    double drift_bound = 0.0;
    bool mismatch = false;
};

PairStep advance_pair(const SpectralModel& model, const sde::Stepper& stepper, const CouplingConfig& cfg,
                      double dist0, const Vector& x, const Vector& y, bool glued, double t, double h,
                      const Vector& noise, Vector& x_out, Vector& y_out) {
    PairStep r;
    double bx = 0.0, by = 0.0;
    stepper.advance(x, noise, x_out, nullptr, &bx);
    stepper.advance(y, noise, y_out, nullptr, &by);
    r.drift_bound = std::max(bx, by);
    if (glued) {
        r.glued = true;
        r.mismatch = !(x_out.array() == y_out.array()).all();
        return r;
    }
    const Vector d = x - y;
    const double dn = d.norm();
    // Steering drift, integrated explicitly and clamped so that Y cannot
    // move past X within one step.
    r.xi = std::min(xi_schedule(model.omega(), cfg.T, dist0, t), dn / h);
    if (r.xi > 0.0) y_out += (r.xi * h / dn) * d;
    // Without sigma^{-1} the weight is undefined; run_pair reports it.
    r.log_increment = model.sigma_invertible() ? girsanov_increment(model, x, y, r.xi, noise, h)
                      : r.xi == 0.0               ? 0.0
                                                  : std::numeric_limits<double>::quiet_NaN();
    if ((x_out - y_out).norm() <= cfg.glue_tol) {
        y_out = x_out;
        r.glued = true;
    }
    return r;
}

CoupledPathRecord run_pair(const SpectralModel& model, const CouplingConfig& cfg, const Vector& x0,
                           const Vector& y0, bool record_paths) {
    cfg.validate();
    require_dimension(model.n(), static_cast<std::size_t>(x0.size()));
    require_dimension(model.n(), static_cast<std::size_t>(y0.size()));
    if (!x0.allFinite() || !y0.allFinite()) throw Error("initial states must be finite");

    const sde::TimeGrid grid(cfg.T, cfg.integrator.dt);
    const NoiseSource source(cfg.integrator.seed);
    const sde::Stepper full(model, cfg.integrator.scheme, cfg.integrator.dt);
    std::optional<sde::Stepper> last;
    if (grid.steps > 0 && grid.step_length(grid.steps - 1) < cfg.integrator.dt * (1.0 - 1e-12))
        last.emplace(model, cfg.integrator.scheme, grid.step_length(grid.steps - 1));

    const double omega = model.omega();
    const double dist0 = (x0 - y0).norm();
    CoupledPathRecord rec;
    rec.contraction_series.reserve(grid.steps + 1);
    rec.drift_bound.reserve(grid.steps);
    rec.step_lengths.reserve(grid.steps);

    Vector x = x0, y = y0;
    bool glued = false;
    if (dist0 <= cfg.glue_tol) {
        y = x;
        glued = true;
        rec.tau = 0.0;
    }
    rec.contraction_series.push_back((x - y).norm());
    auto record = [&](double t) {
        if (!record_paths) return;
        rec.x_path.times.push_back(t);
        rec.x_path.states.push_back(x);
        rec.y_path.times.push_back(t);
        rec.y_path.states.push_back(y);
    };
    record(0.0);

    Vector noise(x0.size()), xn, yn;
    for (std::size_t k = 0; k < grid.steps; ++k) {
        const double t = grid.time(k);
        const double h = grid.step_length(k);
        source.normals(cfg.integrator.stream_id, static_cast<std::uint32_t>(k),
                       std::span<double>(noise.data(), static_cast<std::size_t>(noise.size())));
        const sde::Stepper& stepper = (last && k + 1 == grid.steps) ? *last : full;
        PairStep s;
        try {
            s = advance_pair(model, stepper, cfg, dist0, x, y, glued, t, h, noise, xn, yn);
        } catch (const NonFiniteState&) {
            throw NonFiniteState(k);
        }
        x.swap(xn);
        y.swap(yn);
        rec.log_R += s.log_increment;
        rec.drift_bound.push_back(s.drift_bound);
        rec.step_lengths.push_back(h);
        if (s.mismatch) ++rec.post_tau_mismatches;
        if (s.glued && !glued) rec.tau = grid.time(k + 1);
        glued = s.glued;
        rec.contraction_series.push_back(std::exp(-omega * grid.time(k + 1)) * (x - y).norm());
        if (record_paths) {
            record(grid.time(k + 1));
            rec.x_path.noise_increments.push_back(noise);
            rec.y_path.noise_increments.push_back(noise);
        }
    }
    if (std::isnan(rec.log_R)) throw SingularSigma("Girsanov weight needs an invertible sigma");
    if (!std::isfinite(rec.log_R)) throw Error("non-finite Girsanov weight");
    return rec;
}

} // namespace

CoupledStep coupled_step(const SpectralModel& model, const CouplingConfig& cfg, const Vector& x, const Vector& y,
                         double t, const Vector& noise, double dist0, double dt) {
    require_dimension(model.n(), static_cast<std::size_t>(x.size()));
    require_dimension(model.n(), static_cast<std::size_t>(y.size()));
    require_dimension(model.n(), static_cast<std::size_t>(noise.size()));
    const double h = dt > 0 ? dt : cfg.integrator.dt;
    const sde::Stepper stepper(model, cfg.integrator.scheme, h);
    CoupledStep out;
    const bool glued = (x - y).norm() <= cfg.glue_tol;
    const Vector y_start = glued ? x : y;
    const PairStep s = advance_pair(model, stepper, cfg, dist0, x, y_start, glued, t, h, noise, out.x, out.y);
    out.glued = s.glued;
    out.xi = s.xi;
    out.drift_bound = s.drift_bound;
    return out;
}

CoupledPathRecord simulate_coupled(const SpectralModel& model, const CouplingConfig& cfg, const Vector& x0,
                                   const Vector& y0, bool record_paths) {
    return run_pair(model, cfg, x0, y0, record_paths);
}

double contraction_excess(const CoupledPathRecord& rec) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < rec.contraction_series.size(); ++k) {
        const double slack = 10.0 * rec.step_lengths[k] * (rec.drift_bound[k] + 1.0);
        worst = std::max(worst, rec.contraction_series[k + 1] - rec.contraction_series[k] - slack);
    }
    return worst;
}

CouplingBatch run_coupling_batch(const SpectralModel& model, const CouplingConfig& cfg, const Vector& x0,
                                 const Vector& y0, std::size_t N, const std::vector<double>& p_list,
                                 unsigned workers) {
    cfg.validate();
    if (N < 2) throw ConfigError("N", "must be >= 2");
    for (double p : p_list)
        if (!(p > 1)) throw ConfigError("p", "must be > 1");

    CouplingBatch batch;
    batch.paths = N;
    batch.tau.assign(N, 0.0);
    batch.log_R.assign(N, 0.0);
    std::vector<double> excess(N, 0.0);
    std::vector<std::size_t> mismatches(N, 0);
    parallel_for(N, workers, [&](std::size_t i) {
        CouplingConfig c = cfg;
        c.integrator.stream_id = cfg.integrator.stream_id + static_cast<std::uint32_t>(i);
        const CoupledPathRecord rec = run_pair(model, c, x0, y0, false);
        batch.tau[i] = rec.tau;
        batch.log_R[i] = rec.log_R;
        excess[i] = contraction_excess(rec);
        mismatches[i] = rec.post_tau_mismatches;
    });

    std::size_t coupled = 0;
    for (std::size_t i = 0; i < N; ++i) {
        if (batch.tau[i] <= cfg.T) ++coupled;
        batch.worst_contraction_excess = std::max(batch.worst_contraction_excess, excess[i]);
        if (excess[i] > 0) ++batch.contraction_violations;
        batch.post_tau_mismatches += mismatches[i];
    }
    batch.fraction_coupled = static_cast<double>(coupled) / static_cast<double>(N);

    std::vector<double> w(N);
    for (std::size_t i = 0; i < N; ++i) w[i] = std::exp(batch.log_R[i]);
    batch.martingale = mean_and_se(w);
    batch.martingale_pass = std::abs(batch.martingale.value - 1.0) <= 3.0 * batch.martingale.se;

    const double dist0 = (x0 - y0).norm();
    for (double p : p_list) {
        const double q = p / (p - 1.0);
        for (std::size_t i = 0; i < N; ++i) w[i] = std::exp(q * batch.log_R[i]);
        MomentCheck m;
        m.p = p;
        m.moment = mean_and_se(w);
        m.bound = girsanov_moment_bound(model.sigma_inv_norm(), p, model.omega(), cfg.T, dist0);
        m.ratio = m.moment.value / m.bound;
        m.relative_se = m.moment.value > 0 ? m.moment.se / m.moment.value : 0.0;
        m.powered = std::pow(m.moment.value, p - 1.0);
        m.powered_bound = std::pow(m.bound, p - 1.0);
        m.pass = m.ratio <= 1.0 + 3.0 * m.relative_se;
        batch.moments.push_back(m);
    }
    return batch;
}

} // namespace spde::coupling
