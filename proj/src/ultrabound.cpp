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
#include "spde/ultrabound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace spde::analysis {

UltraboundSpec UltraboundSpec::power(double m, double a) {
    UltraboundSpec spec;
    spec.kind = Kind::power;
    spec.m = m;
    spec.a = a;
    spec.validate();
    return spec;
}

UltraboundSpec UltraboundSpec::table(std::vector<double> s, std::vector<double> phi, double a) {
    UltraboundSpec spec;
    spec.kind = Kind::table;
    spec.s = std::move(s);
    spec.phi = std::move(phi);
    spec.a = a;
    spec.validate();
    return spec;
}

UltraboundSpec UltraboundSpec::custom(std::function<double(double)> fn, double a) {
    UltraboundSpec spec;
    spec.kind = Kind::custom;
    spec.fn = std::move(fn);
    spec.a = a;
    spec.validate();
    return spec;
}

namespace {

double table_tail_exponent(const UltraboundSpec& spec) {
    const std::size_t n = spec.s.size();
    return std::log(spec.phi[n - 1] / spec.phi[n - 2]) / std::log(spec.s[n - 1] / spec.s[n - 2]);
}

} // namespace

void UltraboundSpec::validate() const {
    if (!(a > 0)) throw ConfigError("a", "must be > 0");
    switch (kind) {
    case Kind::power:
        if (!(m > 1)) throw DivergentTail("Phi(s) = s^m needs m > 1 for a finite tail integral");
        return;
    case Kind::table: {
        if (s.size() < 3 || s.size() != phi.size()) throw ConfigError("Phi", "table needs >= 3 matching nodes");
        if (s.front() != 0.0) throw ConfigError("Phi", "table must start at s = 0");
        for (std::size_t i = 1; i < s.size(); ++i) {
            if (!(s[i] > s[i - 1])) throw ConfigError("Phi", "table nodes must increase");
            if (!(phi[i] > phi[i - 1])) throw ConfigError("Phi", "Phi must be strictly increasing");
        }
        if (!(phi.front() >= 0)) throw ConfigError("Phi", "Phi must be nonnegative");
        if (!(table_tail_exponent(*this) > 1.0)) throw DivergentTail("table tail is not superlinear");
        return;
    }
    case Kind::custom: {
        if (!fn) throw ConfigError("Phi", "custom Phi is empty");
        double prev = -std::numeric_limits<double>::infinity();
        for (int k = -10; k <= 40; ++k) {
            const double v = fn(std::ldexp(1.0, k));
            if (!(v > 0) || !(v > prev)) throw ConfigError("Phi", "Phi must be positive and strictly increasing");
            prev = v;
        }
        // s / Phi(s) must decay, and faster than any logarithm would allow.
        const double big = std::ldexp(1.0, 40);
        const double slope = std::log(fn(big) / fn(big / 2)) / std::log(2.0);
        if (!(slope > 1.0 + 1e-3)) throw DivergentTail("Phi is not superlinear on the sampled grid");
        return;
    }
    }
}

double UltraboundSpec::Phi(double x) const {
    x = std::max(x, 0.0);
    switch (kind) {
    case Kind::power:
        return std::pow(x, m);
    case Kind::table: {
        const std::size_t n = s.size();
        if (x >= s[n - 1]) return phi[n - 1] * std::pow(x / s[n - 1], table_tail_exponent(*this));
        const auto it = std::upper_bound(s.begin(), s.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - s.begin());
        const double w = (x - s[j - 1]) / (s[j] - s[j - 1]);
        return phi[j - 1] + w * (phi[j] - phi[j - 1]);
    }
    case Kind::custom:
        return fn(x);
    }
    return 0.0;
}

double UltraboundSpec::Phi0_inverse(double v) const {
    if (!(v >= 0)) throw ConfigError("v", "must be >= 0");
    if (kind == Kind::power) return std::pow(2.0 * v, 1.0 / m);
    double lo = 0.0, hi = 1.0;
    while (Phi0(hi) < v) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (Phi0(mid) < v ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double psi(const UltraboundSpec& spec, double s) {
    if (!(s > 0)) throw ConfigError("s", "Psi needs s > 0");
    using boost::math::quadrature::gauss_kronrod;
    auto inv = [&](double r) { return 1.0 / spec.Phi(r); };
    switch (spec.kind) {
    case UltraboundSpec::Kind::power:
        return std::pow(s, 1.0 - spec.m) / (spec.m - 1.0);
    case UltraboundSpec::Kind::table: {
        const std::size_t n = spec.s.size();
        const double q = table_tail_exponent(spec);
        const double sn = spec.s[n - 1], pn = spec.phi[n - 1];
        // Analytic tail beyond the last node.
        if (s >= sn) return std::pow(sn, q) / pn * std::pow(s, 1.0 - q) / (q - 1.0);
        double total = sn / (pn * (q - 1.0));
        const auto it = std::upper_bound(spec.s.begin(), spec.s.end(), s);
        double lo = s;
        for (auto k = static_cast<std::size_t>(it - spec.s.begin()); k < n; ++k) {
            total += gauss_kronrod<double, 31>::integrate(inv, lo, spec.s[k], 15, 1e-13);
            lo = spec.s[k];
        }
        return total;
    }
    case UltraboundSpec::Kind::custom:
        return gauss_kronrod<double, 61>::integrate(inv, s, std::numeric_limits<double>::infinity(), 20, 1e-13);
    }
    return 0.0;
}

double psi_inverse(const UltraboundSpec& spec, double v) {
    if (!(v > 0)) throw ConfigError("v", "Psi^{-1} needs v > 0");
    // Psi decreases strictly from Psi(0+) to 0; bisect in log s.
    double lo = 1.0, hi = 1.0;
    while (psi(spec, lo) < v) {
        lo *= 0.5;
        if (lo < 1e-300) throw DivergentTail("Psi(0+) does not exceed the requested value");
    }
    while (psi(spec, hi) > v) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = std::sqrt(lo * hi);
        (psi(spec, mid) > v ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// Closed-form inverse for power Phi; bisection otherwise.
double psi_inverse_fast(const UltraboundSpec& spec, double v) {
    if (spec.kind == UltraboundSpec::Kind::power) return std::pow((spec.m - 1.0) * v, -1.0 / (spec.m - 1.0));
    return psi_inverse(spec, v);
}

} // namespace

ContractionReport check_contraction_bound(const UltraboundSpec& spec, double y0, double t_max, double dt,
                                          std::size_t sample_every) {
    if (!(y0 >= 0)) throw ConfigError("y0", "must be >= 0");
    if (!(dt > 0) || !(t_max > 0)) throw ConfigError("dt", "t_max and dt must be > 0");
    spec.validate();
    ContractionReport rep;
    rep.y0 = y0;
    rep.level = spec.Phi0_inverse(2.0 * spec.a);
    rep.case1 = y0 <= rep.level;
    rep.max_excess = -std::numeric_limits<double>::infinity();

    auto rhs = [&](double y) { return spec.a - spec.Phi0(y); };
    const auto steps = static_cast<std::size_t>(std::llround(t_max / dt));
    double y = y0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double k1 = rhs(y);
        const double k2 = rhs(y + 0.5 * dt * k1);
        const double k3 = rhs(y + 0.5 * dt * k2);
        const double k4 = rhs(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double t = static_cast<double>(k) * dt;
        const double bound = psi_inverse_fast(spec, t / 4.0) + rep.level;
        if (y - bound > rep.max_excess) {
            rep.max_excess = y - bound;
            rep.worst_time = t;
        }
        if (rep.case1 && y > rep.level) rep.invariance_holds = false;
        if (sample_every > 0 && (k % sample_every == 0 || k == steps)) {
            rep.times.push_back(t);
            rep.y.push_back(y);
            rep.bound.push_back(bound);
        }
    }
    rep.bound_holds = rep.max_excess <= 1e-6;
    return rep;
}

double ultrabound_envelope(const UltraboundSpec& spec, double lambda, double omega, double t) {
    if (!(t > 0)) throw ConfigError("t", "must be > 0");
    const double den = -std::expm1(-omega * t / 2.0);
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return std::exp(lambda * (1.0 + psi_inverse_fast(spec, t / 4.0)) / (den * den));
}

} // namespace spde::analysis
