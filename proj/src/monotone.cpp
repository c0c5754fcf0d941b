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

#include "spde/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spde/rng.hpp"

namespace spde::monotone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double signed_power(double s, int m) {
    const double mag = std::pow(std::abs(s), m);
    return s < 0 ? -mag : mag;
}

// Index of the table segment used for s (end segments extend outward).
std::size_t table_segment(const TablePart& t, double s) {
    const auto it = std::upper_bound(t.s.begin(), t.s.end(), s);
    const auto k = static_cast<std::size_t>(it - t.s.begin());
    return std::clamp<std::size_t>(k, 1, t.s.size() - 1) - 1;
}

void check_part(const ContinuousPart& g) {
    std::visit(overloaded{
                   [](const ZeroPart&) {},
                   [](const LinearPart& p) {
                       if (!(p.slope <= 0)) throw InvalidMap("linear slope must be <= 0");
                   },
                   [](const PowerOddPart& p) {
                       if (p.m < 1) throw InvalidMap("power_odd exponent must be >= 1");
                       if (!(p.coeff >= 0)) throw InvalidMap("power_odd coeff must be >= 0");
                   },
                   [](const CubicPart& p) {
                       if (!(p.coeff >= 0)) throw InvalidMap("cubic coeff must be >= 0");
                   },
                   [](const TablePart& t) {
                       if (t.s.size() < 2 || t.s.size() != t.v.size())
                           throw InvalidMap("table needs >= 2 (s, v) pairs of equal length");
                       for (std::size_t j = 1; j < t.s.size(); ++j) {
                           if (!(t.s[j] > t.s[j - 1]))
                               throw InvalidMap("table abscissae must be strictly increasing");
                           if (t.v[j] > t.v[j - 1])
                               throw InvalidMap("table values must be nonincreasing");
                       }
                   },
               },
               g);
}

} // namespace

double evaluate(const ContinuousPart& g, double s) {
    return std::visit(overloaded{
                          [](const ZeroPart&) { return 0.0; },
                          [s](const LinearPart& p) { return p.slope * s; },
                          [s](const PowerOddPart& p) { return -p.coeff * signed_power(s, p.m); },
                          [s](const CubicPart& p) { return -p.coeff * s * s * s; },
                          [s](const TablePart& t) {
                              const std::size_t k = table_segment(t, s);
                              const double w = (s - t.s[k]) / (t.s[k + 1] - t.s[k]);
                              return t.v[k] + w * (t.v[k + 1] - t.v[k]);
                          },
                      },
                      g);
}

double derivative(const ContinuousPart& g, double s) {
    return std::visit(overloaded{
                          [](const ZeroPart&) { return 0.0; },
                          [](const LinearPart& p) { return p.slope; },
                          [s](const PowerOddPart& p) {
                              return -p.coeff * p.m * std::pow(std::abs(s), p.m - 1);
                          },
                          [s](const CubicPart& p) { return -3.0 * p.coeff * s * s; },
                          [s](const TablePart& t) {
                              const std::size_t k = table_segment(t, s);
                              return (t.v[k + 1] - t.v[k]) / (t.s[k + 1] - t.s[k]);
                          },
                      },
                      g);
}

std::string name(const ContinuousPart& g) {
    return std::visit(overloaded{
                          [](const ZeroPart&) { return std::string("zero"); },
                          [](const LinearPart&) { return std::string("linear"); },
                          [](const PowerOddPart&) { return std::string("power_odd"); },
                          [](const CubicPart&) { return std::string("cubic"); },
                          [](const TablePart&) { return std::string("table"); },
                      },
                      g);
}

ScalarMap::ScalarMap(ContinuousPart continuous, std::vector<Breakpoint> breakpoints, Growth growth)
    : continuous_(std::move(continuous)), breakpoints_(std::move(breakpoints)), growth_(growth) {
    check_part(continuous_);
    if (growth_.m < 1 || !(growth_.c3 >= 0)) throw InvalidMap("growth needs c3 >= 0 and m >= 1");
    std::sort(breakpoints_.begin(), breakpoints_.end(),
              [](const Breakpoint& a, const Breakpoint& b) { return a.at < b.at; });
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        const Breakpoint& b = breakpoints_[i];
        if (!std::isfinite(b.at) || !std::isfinite(b.left) || !std::isfinite(b.right))
            throw InvalidMap("breakpoint entries must be finite");
        if (b.right > b.left)
            throw InvalidMap("breakpoint at " + std::to_string(b.at) + " has f(s+) > f(s-)");
        if (i > 0 && !(b.at > breakpoints_[i - 1].at))
            throw InvalidMap("duplicate breakpoint at " + std::to_string(b.at));
    }

    offsets_.resize(breakpoints_.size() + 1, 0.0);
    if (!breakpoints_.empty()) {
        offsets_[0] = breakpoints_[0].left - evaluate(continuous_, breakpoints_[0].at);
        for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
            const Breakpoint& b = breakpoints_[i];
            offsets_[i + 1] = b.right - evaluate(continuous_, b.at);
            if (i + 1 < breakpoints_.size()) {
                const Breakpoint& next = breakpoints_[i + 1];
                const double expected = next.left - evaluate(continuous_, next.at);
                const double scale = 1.0 + std::abs(expected) + std::abs(offsets_[i + 1]);
                if (std::abs(expected - offsets_[i + 1]) > 1e-9 * scale)
                    throw InvalidMap("breakpoint limits at " + std::to_string(b.at) + " and " +
                                     std::to_string(next.at) +
                                     " disagree with the continuous part between them");
            }
        }
    }
}

std::size_t ScalarMap::piece_of(double s) const {
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), s,
                                     [](const Breakpoint& b, double v) { return b.at < v; });
    return static_cast<std::size_t>(it - breakpoints_.begin());
}

bool ScalarMap::is_breakpoint(double s) const {
    const std::size_t k = piece_of(s);
    return k < breakpoints_.size() && breakpoints_[k].at == s;
}

double ScalarMap::left_limit(double s) const {
    const std::size_t k = piece_of(s);
    if (k < breakpoints_.size() && breakpoints_[k].at == s) return breakpoints_[k].left;
    return evaluate(continuous_, s) + offsets_[k];
}

double ScalarMap::right_limit(double s) const {
    const std::size_t k = piece_of(s);
    if (k < breakpoints_.size() && breakpoints_[k].at == s) return breakpoints_[k].right;
    return evaluate(continuous_, s) + offsets_[k];
}

double ScalarMap::operator()(double s) const {
    const std::size_t k = piece_of(s);
    if (k < breakpoints_.size() && breakpoints_[k].at == s)
        return minimal_section(Interval{breakpoints_[k].right, breakpoints_[k].left});
    return evaluate(continuous_, s) + offsets_[k];
}

void ScalarMap::validate(double range, std::size_t samples) const {
    double prev = kInf;
    for (std::size_t j = 0; j < samples; ++j) {
        // Irrational-ish shift keeps the grid off typical breakpoint locations.
        const double s = -range + 2.0 * range * (static_cast<double>(j) + 0.318309886) /
                                      static_cast<double>(samples);
        if (is_breakpoint(s)) continue;
        const double v = (*this)(s);
        if (v > prev + 1e-12 * (1.0 + std::abs(prev)))
            throw InvalidMap("map increases near s = " + std::to_string(s));
        const double bound = growth_.c3 * (1.0 + std::pow(std::abs(s), growth_.m));
        if (std::abs(v) > bound * (1.0 + 1e-12))
            throw InvalidMap("growth bound violated at s = " + std::to_string(s));
        prev = v;
    }
    for (const Breakpoint& b : breakpoints_) {
        const double bound = growth_.c3 * (1.0 + std::pow(std::abs(b.at), growth_.m));
        if (std::max(std::abs(b.left), std::abs(b.right)) > bound * (1.0 + 1e-12))
            throw InvalidMap("growth bound violated at breakpoint " + std::to_string(b.at));
    }
}

ScalarMap ScalarMap::negative_identity() { return ScalarMap(LinearPart{-1.0}, {}, Growth{1.0, 1}); }

ScalarMap ScalarMap::negative_sign(double height) {
    return ScalarMap(ZeroPart{}, {Breakpoint{0.0, height, -height}}, Growth{height, 1});
}

ScalarMap ScalarMap::negative_cubic() { return ScalarMap(CubicPart{1.0}, {}, Growth{1.0, 3}); }

ScalarMap ScalarMap::two_jump_staircase() {
    return ScalarMap(ZeroPart{}, {Breakpoint{-1.0, 1.0, 0.0}, Breakpoint{1.0, 0.0, -1.0}},
                     Growth{1.0, 1});
}

ScalarMap ScalarMap::cubic_with_jump() {
    return ScalarMap(CubicPart{1.0}, {Breakpoint{0.0, 1.0, -1.0}}, Growth{1.0, 3});
}

void YosidaParams::validate() const {
    if (!(alpha > 0)) throw Error("yosida alpha must be > 0");
    if (!(bisection_tol > 0)) throw Error("yosida bisection_tol must be > 0");
    if (max_iter < 1) throw Error("yosida max_iter must be >= 1");
}

void SmoothingParams::validate() const {
    if (!(beta > 0 && beta <= 1)) throw Error("smoothing beta must lie in (0, 1]");
    for (double b : b_coeffs)
        if (!(b > 0)) throw Error("smoothing b_coeffs must be > 0");
    if (node_count < 2 || node_count % 2 != 0)
        throw Error("smoothing node_count must be even and >= 2 (antithetic pairs)");
}

std::vector<double> SmoothingParams::default_b(std::size_t n) {
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<double>((i + 1) * (i + 1));
    return b;
}

Interval fill_graph(const ScalarMap& f, double s) {
    return Interval{f.right_limit(s), f.left_limit(s)};
}

double minimal_section(const Interval& values) {
    if (values.lo <= 0.0 && values.hi >= 0.0) return 0.0;
    return values.lo > 0.0 ? values.lo : values.hi;
}

double minimal_section(const ScalarMap& f, double s) { return minimal_section(fill_graph(f, s)); }

namespace {

// Solves s - alpha (g(s) + offset) = r on the open piece (lo, hi), where the
// left side is continuous and strictly increasing.
double solve_piece(const ScalarMap& f, const YosidaParams& p, double offset, double r, double lo,
                   double hi) {
    const double a = p.alpha;
    const ContinuousPart& g = f.continuous();
    if (std::holds_alternative<ZeroPart>(g)) return std::clamp(r + a * offset, lo, hi);
    if (const auto* lin = std::get_if<LinearPart>(&g))
        return std::clamp((r + a * offset) / (1.0 - a * lin->slope), lo, hi);

    auto phi = [&](double s) { return s - a * (evaluate(g, s) + offset) - r; };

    const Growth& growth = f.growth();
    double half_width = a * growth.c3 * (2.0 + std::pow(std::abs(r), growth.m));
    int iterations = 0;
    double left = std::max(lo, r - half_width);
    double right = std::min(hi, r + half_width);
    while (phi(left) > 0.0 || phi(right) < 0.0) {
        if (++iterations > p.max_iter)
            throw IterationLimit("resolvent bracket did not enclose r = " + std::to_string(r));
        half_width *= 2.0;
        left = std::max(lo, r - half_width);
        right = std::min(hi, r + half_width);
    }

    // Newton steps kept inside the bracket, bisection otherwise.
    double s = 0.5 * (left + right);
    while (true) {
        if (++iterations > p.max_iter)
            throw IterationLimit("resolvent did not converge for r = " + std::to_string(r));
        const double value = phi(s);
        if (std::abs(value) <= p.bisection_tol) return s;
        if (value < 0.0)
            left = s;
        else
            right = s;
        if (right - left <= p.bisection_tol ||
            right - left <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(s))
            return 0.5 * (left + right);
        const double slope = 1.0 - a * derivative(g, s);
        double next = s - value / slope;
        if (!(next > left && next < right)) next = 0.5 * (left + right);
        s = next;
    }
}

} // namespace

double resolvent_scalar(const ScalarMap& f, const YosidaParams& p, double r) {
    p.validate();
    const double a = p.alpha;
    const auto& bps = f.breakpoints();
    // h(s) = s - a f(s) is increasing; find the first jump whose image
    // [s_i - a f(s_i-), s_i - a f(s_i+)] reaches r.
    const auto it = std::partition_point(bps.begin(), bps.end(), [&](const Breakpoint& b) {
        return b.at - a * b.right < r;
    });
    if (it != bps.end() && it->at - a * it->left <= r) return it->at;
    const auto k = static_cast<std::size_t>(it - bps.begin());
    const double lo = k > 0 ? bps[k - 1].at : -kInf;
    const double hi = k < bps.size() ? bps[k].at : kInf;
    return solve_piece(f, p, f.piece_offset(k), r, lo, hi);
}

double yosida_scalar(const ScalarMap& f, const YosidaParams& p, double r) {
    const double j = resolvent_scalar(f, p, r);
    // Off the jumps r = j - alpha f(j), so F_alpha(r) = f(j) without the
    // cancellation in (j - r) / alpha.
    if (!f.is_breakpoint(j)) return f(j);
    return (j - r) / p.alpha;
}

SmoothedField::SmoothedField(FieldPtr base, SmoothingParams params)
    : base_(std::move(base)), params_(std::move(params)) {
    const std::size_t n = base_->dimension();
    if (params_.b_coeffs.empty()) params_.b_coeffs = SmoothingParams::default_b(n);
    params_.validate();
    require_dimension(n, params_.b_coeffs.size());

    const auto rows = static_cast<Eigen::Index>(params_.node_count);
    const auto cols = static_cast<Eigen::Index>(n);
    nodes_.resize(rows, cols);
    const NoiseSource source(params_.node_seed, NoiseDomain::smoothing_nodes);
    std::vector<double> row(n);
    for (Eigen::Index k = 0; k < rows / 2; ++k) {
        source.normals(static_cast<std::uint32_t>(k), 0, row);
        for (Eigen::Index i = 0; i < cols; ++i) {
            nodes_(k, i) = row[static_cast<std::size_t>(i)];
            nodes_(k + rows / 2, i) = -row[static_cast<std::size_t>(i)];
        }
    }

    decay_.resize(cols);
    spread_.resize(cols);
    for (Eigen::Index i = 0; i < cols; ++i) {
        const double b = params_.b_coeffs[static_cast<std::size_t>(i)];
        decay_[i] = std::exp(-params_.beta * b);
        spread_[i] = std::sqrt(-std::expm1(-2.0 * params_.beta * b) / (2.0 * b));
    }
}

void SmoothedField::evaluate(const Vector& x, Vector& out) const {
    require_dimension(dimension(), static_cast<std::size_t>(x.size()));
    thread_local Vector shifted;
    thread_local Vector value;
    const Vector centre = decay_.cwiseProduct(x);
    Vector sum = Vector::Zero(x.size());
    for (Eigen::Index k = 0; k < nodes_.rows(); ++k) {
        shifted = centre + spread_.cwiseProduct(nodes_.row(k).transpose());
        base_->evaluate(shifted, value);
        sum += value;
    }
    out = decay_.cwiseProduct(sum) / static_cast<double>(nodes_.rows());
}

Vector smooth_yosida(FieldPtr yosida_field, const SmoothingParams& sp, const Vector& x) {
    const SmoothedField smoothed(std::move(yosida_field), sp);
    return smoothed(x);
}

double growth_constant(const VectorField& field, const std::vector<Vector>& probes) {
    if (probes.empty()) throw Error("growth_constant needs at least one probe");
    double best = 0.0;
    Vector value;
    for (const Vector& x : probes) {
        field.evaluate(x, value);
        best = std::max(best, value.norm() / (1.0 + x.norm()));
    }
    return best;
}

} // namespace spde::monotone
