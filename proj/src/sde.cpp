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

#include "spde/sde.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <optional>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace spde::sde {

std::string to_string(Scheme scheme) {
    return scheme == Scheme::exponential_euler ? "exponential_euler" : "euler_maruyama";
}

Scheme scheme_from_string(const std::string& name) {
    if (name == "exponential_euler") return Scheme::exponential_euler;
    if (name == "euler_maruyama") return Scheme::euler_maruyama;
    throw ConfigError("scheme", "unknown scheme '" + name + "'");
}

void IntegratorConfig::validate() const {
    if (!(dt > 0)) throw ConfigError("dt", "must be > 0");
    if (!(t_end >= 0)) throw ConfigError("t_end", "must be >= 0");
    if (t_end > 0 && dt > t_end) throw ConfigError("dt", "must not exceed t_end");
}

TimeGrid::TimeGrid(double t_end_, double dt_) : dt(dt_), t_end(t_end_) {
    if (t_end <= 0) return;
    steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    if (steps == 0) steps = 1;
}

double TimeGrid::time(std::size_t k) const {
    if (k >= steps) return t_end;
    return static_cast<double>(k) * dt;
}

double TimeGrid::step_length(std::size_t k) const { return time(k + 1) - time(k); }

double stochastic_convolution_variance(double a, double sigma, double dt) {
    if (std::abs(a) * dt < 1e-12) return sigma * sigma * dt;
    return sigma * sigma * std::expm1(2.0 * a * dt) / (2.0 * a);
}

Stepper::Stepper(const SpectralModel& model, Scheme scheme, double dt)
    : model_(&model), scheme_(scheme), dt_(dt) {
    if (!(dt > 0)) throw ConfigError("dt", "must be > 0");
    const Eigen::Index n = model.a_eigs().size();
    if (scheme == Scheme::exponential_euler) {
        if (!model.sigma_is_diagonal())
            throw ConfigError("scheme", "exponential_euler requires sigma diagonal in the eigenbasis");
        decay_.resize(n);
        phi1_.resize(n);
        noise_sd_.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double a = model.a_eigs()[k];
            decay_[k] = std::exp(a * dt);
            phi1_[k] = std::abs(a) * dt < 1e-12 ? dt : std::expm1(a * dt) / a;
            noise_sd_[k] = std::sqrt(stochastic_convolution_variance(a, model.sigma()(k, k), dt));
        }
    } else {
        sigma_sqrt_dt_ = model.sigma() * std::sqrt(dt);
    }
}

void Stepper::advance(const Vector& x, const Vector& noise, Vector& out, const Vector* extra,
                      double* drift_norm) const {
    thread_local Vector drift;
    model_->drift().evaluate(x, drift);
    if (drift_norm) *drift_norm = drift.norm();
    if (extra) drift += *extra;
    if (scheme_ == Scheme::exponential_euler) {
        out = decay_.cwiseProduct(x) + phi1_.cwiseProduct(drift) + noise_sd_.cwiseProduct(noise);
    } else {
        out = x + dt_ * (model_->a_eigs().cwiseProduct(x) + drift);
        out.noalias() += sigma_sqrt_dt_ * noise;
    }
    if (!out.allFinite()) throw NonFiniteState(0);
}

Vector step(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x, const Vector& noise) {
    require_dimension(model.n(), static_cast<std::size_t>(x.size()));
    require_dimension(model.n(), static_cast<std::size_t>(noise.size()));
    const Stepper stepper(model, cfg.scheme, cfg.dt);
    Vector out;
    stepper.advance(x, noise, out);
    return out;
}

namespace {

template <class Visit>
void run_path(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x0, Visit&& visit) {
    cfg.validate();
    require_dimension(model.n(), static_cast<std::size_t>(x0.size()));
    if (!x0.allFinite()) throw Error("initial state must be finite");
    const TimeGrid grid(cfg.t_end, cfg.dt);
    const NoiseSource noise_source(cfg.seed);
    const Stepper full(model, cfg.scheme, cfg.dt);
    std::optional<Stepper> last;
    if (grid.steps > 0 && grid.step_length(grid.steps - 1) < cfg.dt * (1.0 - 1e-12))
        last.emplace(model, cfg.scheme, grid.step_length(grid.steps - 1));

    Vector x = x0, next, noise(x0.size());
    for (std::size_t k = 0; k < grid.steps; ++k) {
        noise_source.normals(cfg.stream_id, static_cast<std::uint32_t>(k),
                             std::span<double>(noise.data(), static_cast<std::size_t>(noise.size())));
        const Stepper& stepper = (last && k + 1 == grid.steps) ? *last : full;
        try {
            stepper.advance(x, noise, next);
        } catch (const NonFiniteState&) {
            throw NonFiniteState(k);
        }
        x.swap(next);
        visit(k + 1, grid.time(k + 1), x, noise);
    }
}

} // namespace

PathRecord simulate(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x0) {
    PathRecord path;
    const TimeGrid grid(cfg.t_end, cfg.dt);
    path.times.reserve(grid.steps + 1);
    path.states.reserve(grid.steps + 1);
    path.noise_increments.reserve(grid.steps);
    path.times.push_back(0.0);
    path.states.push_back(x0);
    run_path(model, cfg, x0, [&](std::size_t, double t, const Vector& x, const Vector& noise) {
        path.times.push_back(t);
        path.states.push_back(x);
        path.noise_increments.push_back(noise);
    });
    return path;
}

Vector terminal_state(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x0) {
    Vector last = x0;
    run_path(model, cfg, x0, [&](std::size_t, double, const Vector& x, const Vector&) { last = x; });
    return last;
}

void for_each_state(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x0,
                    const std::function<void(std::size_t, double, const Vector&)>& visit) {
    run_path(model, cfg, x0, [&](std::size_t k, double t, const Vector& x, const Vector&) { visit(k, t, x); });
}

void write_csv(const PathRecord& path, std::ostream& out) {
    const std::size_t n = path.states.empty() ? 0 : static_cast<std::size_t>(path.states.front().size());
    out << "time";
    for (std::size_t k = 1; k <= n; ++k) out << ",mode_" << k;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < path.states.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g", path.times[r]);
        out << buf;
        for (Eigen::Index k = 0; k < path.states[r].size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", path.states[r][k]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    out.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bits{};
    in.read(reinterpret_cast<char*>(bits.data()), sizeof(T));
    if (!in) throw Error("truncated binary path record");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
}

} // namespace

void write_binary(const PathRecord& path, std::ostream& out) {
    const std::uint64_t n = path.states.empty() ? 0 : static_cast<std::uint64_t>(path.states.front().size());
    put_le<std::uint64_t>(out, n);
    put_le<std::uint64_t>(out, path.states.size());
    for (std::size_t r = 0; r < path.states.size(); ++r) {
        put_le<double>(out, path.times[r]);
        for (Eigen::Index k = 0; k < path.states[r].size(); ++k) put_le<double>(out, path.states[r][k]);
    }
}

PathRecord read_binary(std::istream& in) {
    const auto n = get_le<std::uint64_t>(in);
    const auto rows = get_le<std::uint64_t>(in);
    PathRecord path;
    path.times.reserve(rows);
    path.states.reserve(rows);
    for (std::uint64_t r = 0; r < rows; ++r) {
        path.times.push_back(get_le<double>(in));
        Vector x(static_cast<Eigen::Index>(n));
        for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = get_le<double>(in);
        path.states.push_back(std::move(x));
    }
    return path;
}

} // namespace spde::sde
