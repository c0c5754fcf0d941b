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
#include <limits>
#include <vector>

#include "spde/core.hpp"
#include "spde/sde.hpp"
#include "spde/spectral.hpp"
#include "spde/stats.hpp"

// Coupling by change of measure: X and Y share the noise, Y is steered
// towards X with speed xi^T(t) so that both meet by time T, and R is the
// Girsanov density of the steered law.
namespace spde::coupling {

using spectral::SpectralModel;

struct CouplingConfig {
    double T = 1.0;
    double p = 2.0;
    double glue_tol = 1e-4; ///< absolute distance at which Y := X
    sde::IntegratorConfig integrator; ///< t_end is ignored, T is used

    void validate() const;
};

struct CoupledPathRecord {
    sde::PathRecord x_path; ///< empty unless recording was requested
    sde::PathRecord y_path;
    double tau = std::numeric_limits<double>::infinity();
    double log_R = 0.0;
    /// e^{-omega t_k} |X_k - Y_k| for k = 0..steps.
    std::vector<double> contraction_series;
    /// max(|F(X_k)|, |F(Y_k)|) at the start of step k.
    std::vector<double> drift_bound;
    std::vector<double> step_lengths;
    /// Steps after tau where X and Y were not bitwise equal.
    std::size_t post_tau_mismatches = 0;

    bool coupled() const { return tau < std::numeric_limits<double>::infinity(); }
};

/// 2 omega e^{-omega t} dist0 / (1 - e^{-2 omega T}); dist0 / T as omega -> 0.
double xi_schedule(double omega, double T, double dist0, double t);

struct CoupledStep {
    Vector x;
    Vector y;
    bool glued = false;
    double xi = 0.0; ///< steering speed actually applied (after clamping)
    double drift_bound = 0.0;
};

/// One step of the pair driven by the same standard normal vector.
/// `dist0` is |x0 - y0| for the schedule; `dt` defaults to cfg's step.
CoupledStep coupled_step(const SpectralModel& model, const CouplingConfig& cfg, const Vector& x, const Vector& y,
                         double t, const Vector& noise, double dist0, double dt = 0.0);

/// Log-weight increment of R over one step with steering speed xi.
double girsanov_increment(const SpectralModel& model, const Vector& x, const Vector& y, double xi,
                          const Vector& noise, double dt);

CoupledPathRecord simulate_coupled(const SpectralModel& model, const CouplingConfig& cfg, const Vector& x0,
                                   const Vector& y0, bool record_paths = false);

/// Upper bound for E[R^{p/(p-1)}].
double girsanov_moment_bound(double sigma_inv_norm, double p, double omega, double T, double dist0);

struct MomentCheck {
    double p = 2.0;
    Estimate moment;          ///< E[R^{p/(p-1)}]
    double bound = 1.0;       ///< girsanov_moment_bound
    double ratio = 0.0;       ///< moment / bound
    double relative_se = 0.0;
    /// (E[R^{p/(p-1)}])^{p-1} and the matching Harnack factor bound^{p-1}.
    double powered = 0.0;
    double powered_bound = 1.0;
    bool pass = false;
};

struct CouplingBatch {
    std::size_t paths = 0;
    double fraction_coupled = 0.0;
    Estimate martingale; ///< E[e^{log_R}], should be 1
    bool martingale_pass = false;
    std::vector<MomentCheck> moments;
    /// max_k (series[k+1] - series[k] - 10 h (drift_bound_k + 1)) over all paths.
    double worst_contraction_excess = -std::numeric_limits<double>::infinity();
    std::size_t contraction_violations = 0; ///< paths with a positive excess
    std::size_t post_tau_mismatches = 0;
    std::vector<double> tau;
    std::vector<double> log_R;
};

/// N coupled paths on streams stream_id .. stream_id + N - 1.
CouplingBatch run_coupling_batch(const SpectralModel& model, const CouplingConfig& cfg, const Vector& x0,
                                 const Vector& y0, std::size_t N, const std::vector<double>& p_list,
                                 unsigned workers);

/// Largest increment of the contraction series beyond 10 h (B_k + 1).
double contraction_excess(const CoupledPathRecord& rec);

} // namespace spde::coupling
