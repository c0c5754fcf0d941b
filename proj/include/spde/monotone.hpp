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
#include <string>
#include <variant>
#include <vector>

#include "spde/core.hpp"
#include "spde/field.hpp"

// Scalar maximal dissipative maps (nonincreasing functions with filled
// jumps), their resolvents and Yosida approximations, and the Gaussian
// smoothing of a Yosida field.
namespace spde::monotone {

/// Closed interval [lo, hi].
struct Interval {
    double lo;
    double hi;
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

// Registry of continuous parts. All of them are nonincreasing when their
// parameters have the documented sign.
struct ZeroPart {};
struct LinearPart {
    double slope = -1.0; ///< g(s) = slope * s, slope <= 0
};
struct PowerOddPart {
    int m = 3;
    double coeff = 1.0; ///< g(s) = -coeff * sign(s) * |s|^m
};
struct CubicPart {
    double coeff = 1.0; ///< g(s) = -coeff * s^3
};
/// Piecewise-linear interpolation through (s_j, v_j), extended linearly
/// with the end slopes.
struct TablePart {
    std::vector<double> s;
    std::vector<double> v;
};

using ContinuousPart = std::variant<ZeroPart, LinearPart, PowerOddPart, CubicPart, TablePart>;

double evaluate(const ContinuousPart& g, double s);
/// Derivative where it exists (one-sided slope at table nodes).
double derivative(const ContinuousPart& g, double s);
std::string name(const ContinuousPart& g);

/// Jump location with the one-sided limits f(s-) >= f(s+).
struct Breakpoint {
    double at;
    double left;
    double right;
};

/// |f(s)| <= c3 (1 + |s|^m)
struct Growth {
    double c3 = 1.0;
    int m = 1;
};

/// A nonincreasing scalar function with finitely many jumps, viewed as the
/// maximal monotone graph obtained by filling every jump with the closed
/// interval between its one-sided limits.
///
/// On each open interval between breakpoints f equals g + offset, where g
/// is the continuous part and the offsets are fixed by the breakpoint
/// limits. Adjacent breakpoints must therefore agree with g:
/// left_{i+1} - g(s_{i+1}) == right_i - g(s_i).
class ScalarMap {
public:
    ScalarMap(ContinuousPart continuous, std::vector<Breakpoint> breakpoints, Growth growth);

    /// f at a continuity point. At a breakpoint this returns the minimal
    /// section so that the result is always an element of the graph.
    double operator()(double s) const;
    double left_limit(double s) const;
    double right_limit(double s) const;
    bool is_breakpoint(double s) const;

    const ContinuousPart& continuous() const { return continuous_; }
    const std::vector<Breakpoint>& breakpoints() const { return breakpoints_; }
    const Growth& growth() const { return growth_; }

    /// Offset added to g on piece `k` (k = number of breakpoints left of s).
    double piece_offset(std::size_t k) const { return offsets_[k]; }

    /// Sampled check of monotonicity and the growth bound on [-range, range].
    /// Throws InvalidMap on the first violation.
    void validate(double range = 10.0, std::size_t samples = 2001) const;

    // Common maps.
    static ScalarMap negative_identity();
    static ScalarMap negative_sign(double height = 1.0);
    static ScalarMap negative_cubic();
    static ScalarMap two_jump_staircase();
    /// -s^3 - sign(s): the discontinuous drift used for the Dirichlet model.
    static ScalarMap cubic_with_jump();

private:
    std::size_t piece_of(double s) const;

    ContinuousPart continuous_;
    std::vector<Breakpoint> breakpoints_;
    Growth growth_;
    std::vector<double> offsets_;
};

struct YosidaParams {
    double alpha = 1e-2;
    double bisection_tol = 1e-12;
    int max_iter = 200;

    void validate() const;
};

struct SmoothingParams {
    double beta = 0.1;
    std::vector<double> b_coeffs; ///< eigenvalues of -B
    std::size_t node_count = 64;
    std::uint64_t node_seed = 1;

    void validate() const;
    /// b_i = i^2, i = 1..n
    static std::vector<double> default_b(std::size_t n);
};

/// [f(s+), f(s-)] at breakpoints, {f(s)} elsewhere.
Interval fill_graph(const ScalarMap& f, double s);

/// Element of minimal absolute value.
double minimal_section(const Interval& values);
double minimal_section(const ScalarMap& f, double s);

/// J_alpha(r): the unique s with r in s - alpha * fbar(s).
double resolvent_scalar(const ScalarMap& f, const YosidaParams& p, double r);

/// F_alpha(r) = (J_alpha(r) - r) / alpha.
double yosida_scalar(const ScalarMap& f, const YosidaParams& p, double r);

/// Monte Carlo Gaussian smoothing with a fixed table of antithetic nodes:
///
///   F_ab(x) = e^{beta B} (1/K) sum_k F(e^{beta B} x + y_k),
///   y_k ~ N(0, diag((1 - e^{-2 beta b_i}) / (2 b_i))).
///
/// Sharing the nodes across x makes F_ab a deterministic, dissipative map
/// whenever the base field is dissipative.
class SmoothedField final : public VectorField {
public:
    SmoothedField(FieldPtr base, SmoothingParams params);

    std::size_t dimension() const override { return base_->dimension(); }
    void evaluate(const Vector& x, Vector& out) const override;

    const SmoothingParams& params() const { return params_; }
    /// Standard normal node table, one row per node.
    const Matrix& standard_nodes() const { return nodes_; }

private:
    FieldPtr base_;
    SmoothingParams params_;
    Matrix nodes_;
    Vector decay_;
    Vector spread_;
};

Vector smooth_yosida(FieldPtr yosida_field, const SmoothingParams& sp, const Vector& x);

/// max over probes of |F(x)| / (1 + |x|); an empirical lower estimate of the
/// linear growth constant.
double growth_constant(const VectorField& field, const std::vector<Vector>& probes);

} // namespace spde::monotone
