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
#include <vector>

#include "spde/core.hpp"

// The Phi / Psi machinery behind ultraboundedness: Psi(s) is the tail
// integral of 1 / Phi, and solutions of y' = a - Phi(y) / 2 come down
// from infinity below Psi^{-1}(t / 4) + Phi_0^{-1}(2 a).
namespace spde::analysis {

struct UltraboundSpec {
    enum class Kind { power, table, custom };

    Kind kind = Kind::power;
    double m = 2.0;          ///< power: Phi(s) = s^m
    std::vector<double> s;   ///< table nodes, increasing, starting at 0
    std::vector<double> phi; ///< table values, strictly increasing
    std::function<double(double)> fn; ///< custom Phi
    double c = 0.0;          ///< constant of the dissipativity condition on Phi
    double a = 1.0;          ///< constant of the scalar comparison ODE

    static UltraboundSpec power(double m, double a = 1.0);
    /// Piecewise linear through the nodes, extended beyond the last node by
    /// the power law through the last two nodes.
    static UltraboundSpec table(std::vector<double> s, std::vector<double> phi, double a = 1.0);
    static UltraboundSpec custom(std::function<double(double)> fn, double a = 1.0);

    /// Checks positivity, monotonicity and superlinearity on a sample grid.
    /// Throws DivergentTail when s / Phi(s) does not decay.
    void validate() const;

    double Phi(double s) const;
    double Phi0(double s) const { return 0.5 * Phi(s); }
    /// Inverse of Phi_0 on [0, inf).
    double Phi0_inverse(double v) const;
};

/// Psi(s) = int_s^inf dr / Phi(r), s > 0.
double psi(const UltraboundSpec& spec, double s);
/// Solves Psi(s) = v by bisection, v > 0.
double psi_inverse(const UltraboundSpec& spec, double v);

struct ContractionReport {
    double y0 = 0.0;
    double level = 0.0;          ///< Phi_0^{-1}(2 a)
    double max_excess = 0.0;     ///< max_t y(t) - bound(t); <= 1e-6 passes
    double worst_time = 0.0;
    bool bound_holds = false;
    bool case1 = false;          ///< y0 <= level
    bool invariance_holds = true; ///< y(t) <= level for all t (case 1 only)
    std::vector<double> times;   ///< grid samples (every `sample_every` steps)
    std::vector<double> y;
    std::vector<double> bound;
};

/// Integrates y' = a - Phi_0(y) with classical RK4 and checks
/// y(t) <= Psi^{-1}(t / 4) + Phi_0^{-1}(2 a) + 1e-6 at every step on (0, t_max].
ContractionReport check_contraction_bound(const UltraboundSpec& spec, double y0, double t_max = 20.0,
                                          double dt = 1e-4, std::size_t sample_every = 1000);

/// exp[lambda (1 + Psi^{-1}(t / 4)) / (1 - e^{-omega t / 2})^2], t > 0.
double ultrabound_envelope(const UltraboundSpec& spec, double lambda, double omega, double t);

} // namespace spde::analysis
