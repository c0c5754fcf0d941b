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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spde/core.hpp"
#include "spde/sde.hpp"
#include "spde/spectral.hpp"
#include "spde/stats.hpp"

namespace spde::analysis {

using spectral::SpectralModel;
using spectral::ThetaFunctional;

/// Observable averaged along a trajectory.
struct Functional {
    enum class Kind { mode_mean, mode_square, squared_norm, abs_moment, theta, g_squared, exp_quadratic };
    Kind kind = Kind::squared_norm;
    std::size_t mode = 1;  ///< mode_mean, mode_square (1-based)
    double order = 2.0;    ///< abs_moment: |x|^order; g_squared: m
    double lambda = 0.0;   ///< exp_quadratic: e^{lambda |x|^2}

    std::string name() const;

    static Functional mode_mean(std::size_t k);
    static Functional mode_square(std::size_t k);
    static Functional squared_norm();
    static Functional abs_moment(double order);
    static Functional theta();
    /// G(x)^2 = int |x(xi)|^{2m} dxi on the Nemytskii grid.
    static Functional g_squared(int m);
    static Functional exp_quadratic(double lambda);
};

struct InvariantEstimate {
    double alpha = 0.0; ///< regularisation parameter, for reporting
    std::map<std::string, Estimate> moments;
    double burn_in = 0.0;
    double horizon = 0.0;
    std::size_t samples = 0;          ///< states averaged
    std::vector<Vector> thinned;      ///< every `keep_every`-th state after burn-in
};

/// Time averages over (burn_in, horizon] of one trajectory from x0 with
/// batch-means standard errors (32 batches).
InvariantEstimate estimate_invariant(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x0,
                                     double burn_in, double horizon, const std::vector<Functional>& functionals,
                                     const std::optional<ThetaFunctional>& theta = std::nullopt,
                                     std::size_t keep_every = 0);

/// Exact stationary variance sigma_kk^2 / (-2 a_k) for each mode of an OU model.
Vector ou_stationary_variance(const SpectralModel& model);

/// L phi(x) for phi(x) = sum_i x_i^2 / q_i:
/// sum_i q_i^{-1} (sigma sigma^T)_ii + 2 sum_i q_i^{-1} x_i (a_i x_i + F_i(x)).
double generator_phi(const SpectralModel& model, const Vector& q, const Vector& x);

struct LyapunovReport {
    double c1 = 0.0;              ///< calibrated on the first half of the samples
    double trace_term = 0.0;      ///< |sigma|^2 sum_i q_i^{-1}
    double satisfied_fraction = 0.0; ///< on the second half
    double worst_residual = 0.0;
    std::size_t calibration = 0;
    std::size_t validation = 0;
    bool pass = false;            ///< satisfied_fraction >= 0.95
};

/// Checks L phi(x) <= -2 Theta(x) + c1 (1 + |x|^{m+1} + Theta(x)^{1/2} |x|) + |sigma|^2 sum q_i^{-1}.
LyapunovReport lyapunov_drift_check(const SpectralModel& model, const ThetaFunctional& theta,
                                    const std::vector<Vector>& samples, int m);

} // namespace spde::analysis
