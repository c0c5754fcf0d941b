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

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "spde/core.hpp"
#include "spde/sde.hpp"
#include "spde/spectral.hpp"
#include "spde/stats.hpp"

namespace spde::analysis {

using spectral::SpectralModel;

/// Nonnegative test function on R^n.
struct TestFunction {
    enum class Kind { constant, exp_linear, bounded_rational, indicator_ball, cosine, custom };

    Kind kind = Kind::constant;
    double value = 1.0;  ///< constant
    Vector h;            ///< exp_linear, cosine
    double lambda = 1.0; ///< exp_linear: f(x) = exp(lambda <h, x>)
    Vector center;       ///< bounded_rational, indicator_ball
    double radius = 1.0; ///< indicator_ball
    bool ramp = true;    ///< indicator_ball: linear ramp of width radius / 10
    std::function<double(const Vector&)> fn; ///< custom
    double sup_norm = 1.0;
    double lipschitz = std::numeric_limits<double>::infinity();

    double operator()(const Vector& x) const;
    std::string name() const;

    static TestFunction constant(double c);
    static TestFunction exp_linear(Vector h, double lambda);
    /// 1 / (1 + |x - c|^2)
    static TestFunction bounded_rational(Vector center);
    static TestFunction indicator_ball(Vector center, double radius, bool ramp = true);
    /// 1 + cos <h, x>
    static TestFunction cosine(Vector h);
    static TestFunction custom(std::function<double(const Vector&)> fn, double sup_norm,
                               double lipschitz = std::numeric_limits<double>::infinity());
};

/// Terminal states X(t_end, x) of N paths on streams stream_id + i.
std::vector<Vector> terminal_states(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x,
                                    std::size_t N, unsigned workers);

/// Monte Carlo P_t f(x) with t = cfg.t_end.
Estimate estimate_semigroup(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x,
                            const TestFunction& f, std::size_t N, unsigned workers = 1);

/// exp[|sigma^{-1}|^2 p omega d^2 / ((p - 1)(1 - e^{-2 omega t}))], d = |x - y|.
double harnack_constant(double sigma_inv_norm, double p, double omega, double t, double dist);
double harnack_constant(double sigma_inv_norm, double p, double omega, double t, const Vector& x,
                        const Vector& y);

struct HarnackReport {
    Estimate lhs;             ///< (E f(X_t^x))^p
    Estimate rhs_expectation; ///< E f^p(X_t^y)
    double constant = 1.0;
    double ratio = 0.0;       ///< lhs / (rhs_expectation * constant)
    double relative_se = 0.0; ///< combined relative standard error of the ratio
    double z = 0.0;           ///< (ratio - 1) / relative_se
    bool pass = false;        ///< ratio <= 1 + 3 relative_se
};

/// x-paths use streams stream_id .. +N-1, y-paths the next N streams.
HarnackReport check_harnack(const SpectralModel& model, const sde::IntegratorConfig& cfg, const Vector& x,
                            const Vector& y, const TestFunction& f, double p, std::size_t N,
                            unsigned workers = 1);

struct GradientReport {
    Estimate difference; ///< P_t f(x) - P_t f(y), common random numbers
    double bound = 0.0;  ///< e^{|omega| t} / sqrt(t ^ 1) |f|_0 |sigma^{-1}| |x - y|
    double lipschitz_bound = std::numeric_limits<double>::infinity(); ///< e^{|omega| t} |f|_Lip |x - y|
    bool pass_bounded = false;
    bool pass_lipschitz = true; ///< true when f has no finite Lipschitz constant
    bool pass = false;
};

double gradient_bound(double omega, double t, double sup_norm, double sigma_inv_norm, double dist);
double lipschitz_gradient_bound(double omega, double t, double lipschitz, double dist);

GradientReport check_gradient_estimate(const SpectralModel& model, const sde::IntegratorConfig& cfg,
                                       const Vector& x, const Vector& y, const TestFunction& f, std::size_t N,
                                       unsigned workers = 1);

/// Mean e^{tA} x and per-mode variance of the OU transition for zero drift
/// and diagonal sigma. Throws NotLinearModel otherwise.
void ou_moments(const SpectralModel& model, double t, const Vector& x, Vector& mean, Vector& variance);

/// Closed-form P_t f(x) for the OU model (exp_linear, cosine, constant).
double ou_exact(const SpectralModel& model, double t, const Vector& x, const TestFunction& f);

/// (P_t f(x))^p / (P_t f^p(y) * constant) in closed form for exp_linear f.
double ou_harnack_ratio(const SpectralModel& model, double t, const Vector& x, const Vector& y,
                        const TestFunction& f, double p);

struct HyperboundRow {
    double lambda = 0.0;
    Estimate estimate;           ///< empirical mu(e^{lambda |x|^2})
    double largest_share = 0.0;  ///< largest single term / sum
    double prefix_growth = 0.0;  ///< mean(all) / mean(first half) - 1
    bool stable = false;
    bool above_threshold = false;
};

struct HyperboundReport {
    double threshold = 0.0; ///< 2 (omega ^ 0)^2 |sigma^{-1}|^2
    std::vector<HyperboundRow> rows;
    /// Smallest grid lambda above the threshold with a stable estimate; NaN if none.
    double smallest_stable_lambda = std::numeric_limits<double>::quiet_NaN();
    bool condition_met = false;
};

HyperboundReport check_hyperbound_condition(const std::vector<Vector>& samples, const std::vector<double>& lambda_grid,
                                            double omega, double sigma_inv_norm);

/// 1 / mean_y exp(-c |x - y|^2), c = |sigma^{-1}|^2 p omega / (1 - e^{-2 omega t}).
double density_norm_rhs(const std::vector<Vector>& samples, const Vector& x, double sigma_inv_norm, double p,
                        double omega, double t);
/// Same quantity for mu = N(0, v I_n).
double density_norm_rhs_gaussian(const Vector& x, double v, double sigma_inv_norm, double p, double omega, double t);

} // namespace spde::analysis
