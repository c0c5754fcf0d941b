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

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "spde/core.hpp"
#include "spde/rng.hpp"
#include "spde/spectral.hpp"

// Time stepping for the Galerkin system dX = (A_n X + F_n(X)) dt + sigma_n dW_n.
namespace spde::sde {

using spectral::SpectralModel;

enum class Scheme { exponential_euler, euler_maruyama };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct IntegratorConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::exponential_euler;
    double t_end = 1.0;
    std::uint64_t seed = 0;
    std::uint32_t stream_id = 0;

    void validate() const;
};

/// Uniform grid on [0, t_end] with a shortened last step when dt does not
/// divide t_end.
struct TimeGrid {
    std::size_t steps = 0;
    double dt = 0.0;
    double t_end = 0.0;

    TimeGrid(double t_end, double dt);
    double time(std::size_t k) const;
    double step_length(std::size_t k) const;
};

/// States X(t_0), ..., X(t_K); noise_increments[k] holds the standard
/// normal vector that drove step k (so the Wiener increment is
/// sqrt(step length) times it).
struct PathRecord {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> noise_increments;
};

/// Variance of int_0^dt e^{(dt - s) a} sigma dW(s): sigma^2 (e^{2 a dt} - 1) / (2 a),
/// with the a -> 0 limit sigma^2 dt when |a| dt < 1e-12.
double stochastic_convolution_variance(double a, double sigma, double dt);

/// One-step map for a fixed step length, with precomputed per-mode factors.
class Stepper {
public:
    Stepper(const SpectralModel& model, Scheme scheme, double dt);

    /// out = one step from x driven by the standard normal vector `noise`.
    /// `extra` (optional) is added to the drift, integrated the same way.
    /// `drift_norm` (optional) receives |F_n(x)|.
    void advance(const Vector& x, const Vector& noise, Vector& out, const Vector* extra = nullptr,
                 double* drift_norm = nullptr) const;

    double dt() const { return dt_; }
    Scheme scheme() const { return scheme_; }
    const SpectralModel& model() const { return *model_; }
    /// Exponential Euler factors: e^{a dt}, (e^{a dt} - 1) / a, noise std.
    const Vector& decay() const { return decay_; }
    const Vector& phi1() const { return phi1_; }
    const Vector& noise_sd() const { return noise_sd_; }

private:
    const SpectralModel* model_;
    Scheme scheme_;
    double dt_;
    Vector decay_;
    Vector phi1_;
    Vector noise_sd_;
    Matrix sigma_sqrt_dt_;
};

/// Single step with cfg.dt.
Vector step(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x, const Vector& noise);

/// Full path on the cfg grid; noise for step k is drawn from
/// (cfg.seed, cfg.stream_id, k).
PathRecord simulate(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x0);

/// X(t_end) without storing the path.
Vector terminal_state(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x0);

/// Streams the path without storing it: visit(k, t_k, x_k) for k = 1..steps.
void for_each_state(const SpectralModel& model, const IntegratorConfig& cfg, const Vector& x0,
                    const std::function<void(std::size_t, double, const Vector&)>& visit);

/// Columnar CSV: time, mode_1..mode_n, 17 significant digits.
void write_csv(const PathRecord& path, std::ostream& out);

/// Little-endian binary dump: uint64 n, uint64 rows, then rows x (1 + n)
/// float64 values in row-major order (time first).
void write_binary(const PathRecord& path, std::ostream& out);
PathRecord read_binary(std::istream& in);

} // namespace spde::sde
