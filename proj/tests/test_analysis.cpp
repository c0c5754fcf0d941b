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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spde/analysis.hpp"
#include "spde/coupling.hpp"
#include "spde/invariant.hpp"
#include "spde/rng.hpp"
#include "spde/ultrabound.hpp"

using namespace spde;
using namespace spde::analysis;
using spectral::DriftSpec;
using spectral::SigmaSpec;

namespace {

SpectralModel ou_1mode() {
    return spectral::build_explicit_model(Vector::Constant(1, -1.0), -1.0, DriftSpec{}, SigmaSpec{});
}

sde::IntegratorConfig config(double t, double dt = 1e-2, std::uint64_t seed = 1) {
    sde::IntegratorConfig cfg;
    cfg.t_end = t;
    cfg.dt = dt;
    cfg.seed = seed;
    return cfg;
}

std::vector<Vector> gaussian_samples(std::size_t n, std::size_t count, double v, std::uint64_t seed) {
    const NoiseSource src(seed, NoiseDomain::samples);
    std::vector<Vector> out(count, Vector(static_cast<Eigen::Index>(n)));
    for (std::size_t i = 0; i < count; ++i) {
        src.normals(static_cast<std::uint32_t>(i), 0, std::span<double>(out[i].data(), n));
        out[i] *= std::sqrt(v);
    }
    return out;
}

} // namespace

TEST_CASE("test functions") {
    CHECK(TestFunction::bounded_rational(Vector::Zero(2))(Vector::Zero(2)) == 1.0);
    const TestFunction ball = TestFunction::indicator_ball(Vector::Zero(1), 1.0);
    CHECK(ball(Vector::Constant(1, 0.5)) == 1.0);
    CHECK(ball(Vector::Constant(1, 1.05)) == doctest::Approx(0.5));
    CHECK(ball(Vector::Constant(1, 1.2)) == 0.0);
    CHECK(TestFunction::indicator_ball(Vector::Zero(1), 1.0, false)(Vector::Constant(1, 1.05)) == 0.0);
    CHECK(TestFunction::cosine(Vector::Ones(2)).sup_norm == 2.0);
    CHECK_THROWS_AS(TestFunction::constant(-1.0), ConfigError);
}

TEST_CASE("ou closed forms") {
    const SpectralModel ou = ou_1mode();
    const Vector one = Vector::Ones(1);
    const TestFunction f = TestFunction::exp_linear(one, 1.0);
    CHECK(ou_exact(ou, 1.0, one, f) ==
          doctest::Approx(std::exp(std::exp(-1.0) + (1.0 - std::exp(-2.0)) / 4.0)).epsilon(1e-14));
    CHECK(ou_exact(ou, 0.0, one, f) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(ou_exact(ou, 1.0, one, TestFunction::exp_linear(one, 0.0)) == 1.0);

    const double v = (1.0 - std::exp(-1.0)) / 2.0;
    CHECK(ou_exact(ou, 0.5, Vector::Constant(1, 2.0), TestFunction::cosine(one)) ==
          doctest::Approx(1.0 + std::cos(2.0 * std::exp(-0.5)) * std::exp(-v / 2.0)).epsilon(1e-14));

    DriftSpec cubic;
    cubic.kind = spectral::DriftKind::nemytskii;
    cubic.map = monotone::ScalarMap::negative_cubic();
    const SpectralModel nonlinear = spectral::build_dirichlet_model(2, cubic, SigmaSpec{});
    CHECK_THROWS_AS(ou_exact(nonlinear, 1.0, Vector::Zero(2), TestFunction::exp_linear(Vector::Ones(2), 1.0)),
                    NotLinearModel);
}

TEST_CASE("semigroup estimates") {
    const SpectralModel ou = ou_1mode();
    const Vector x = Vector::Constant(1, 0.7);
    const Estimate c = estimate_semigroup(ou, config(1.0), x, TestFunction::constant(1.0), 200);
    CHECK(c.value == 1.0);
    CHECK(c.se == 0.0);

    const TestFunction f = TestFunction::bounded_rational(Vector::Zero(1));
    CHECK(estimate_semigroup(ou, config(0.0), x, f, 50).value == doctest::Approx(f(x)).epsilon(1e-15));

    const TestFunction g = TestFunction::exp_linear(Vector::Ones(1), 0.8);
    const Estimate mc = estimate_semigroup(ou, config(1.0, 1e-2, 5), x, g, 20000);
    CHECK(std::abs(mc.value - ou_exact(ou, 1.0, x, g)) <= 3.0 * mc.se);

    // P_{t+s} f = P_t (P_s f), where P_s exp(lambda y) = exp(lambda e^{-s} y) exp(lambda^2 v_s / 2).
    const double t = 0.4, s = 0.6, lambda = 0.8;
    const double vs = (1.0 - std::exp(-2.0 * s)) / 2.0;
    const double nested = std::exp(lambda * lambda * vs / 2.0) *
                          ou_exact(ou, t, x, TestFunction::exp_linear(Vector::Ones(1), lambda * std::exp(-s)));
    CHECK(ou_exact(ou, t + s, x, g) == doctest::Approx(nested).epsilon(1e-13));
    CHECK(std::abs(mc.value - nested) <= 3.0 * mc.se);
}

TEST_CASE("terminal states do not depend on the worker count") {
    const SpectralModel ou = spectral::build_dirichlet_model(3, DriftSpec{}, SigmaSpec{});
    const auto a = terminal_states(ou, config(0.1, 1e-3), Vector::Ones(3), 40, 1);
    const auto b = terminal_states(ou, config(0.1, 1e-3), Vector::Ones(3), 40, 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("harnack constant") {
    CHECK(harnack_constant(1.0, 2.0, 1.0, 1.0, 0.0) == 1.0);
    CHECK(harnack_constant(1.0, 2.0, 1.0, 1.0, 1.0) == doctest::Approx(10.105).epsilon(1e-4));
    // At p = 2 the exponents of the Harnack constant and the moment bound coincide.
    CHECK(harnack_constant(1.0, 2.0, 1.0, 1.0, 1.0) ==
          doctest::Approx(coupling::girsanov_moment_bound(1.0, 2.0, 1.0, 1.0, 1.0)).epsilon(1e-14));
    double previous = INFINITY;
    for (double p : {1.5, 2.0, 4.0, 10.0, 1e6}) {
        const double c = harnack_constant(1.0, p, -2.0, 0.5, 0.8);
        CHECK(c <= previous);
        previous = c;
    }
    CHECK(previous == doctest::Approx(std::exp(-2.0 * 0.64 / -std::expm1(2.0))).epsilon(1e-5));
    CHECK(harnack_constant(1.0, 2.0, 0.0, 2.0, 1.0) == doctest::Approx(std::exp(2.0 / 4.0)));
    CHECK(harnack_constant(2.0, 2.0, 1.0, 1.0, Vector::Ones(2), Vector::Zero(2)) ==
          doctest::Approx(std::exp(4.0 * 2.0 * 2.0 / (1.0 - std::exp(-2.0)))));
}

TEST_CASE("ou harnack ratio is sharp for exp_linear") {
    const SpectralModel ou = ou_1mode();
    const double p = 2.0, t = 0.7, d = 1.3;
    const double v = (1.0 - std::exp(-2.0 * t)) / 2.0;
    const double best = std::exp(-t) * d / ((p - 1.0) * v);
    const Vector x = Vector::Constant(1, d), y = Vector::Zero(1);
    CHECK(ou_harnack_ratio(ou, t, x, y, TestFunction::exp_linear(Vector::Ones(1), best), p) ==
          doctest::Approx(1.0).epsilon(1e-12));
    for (double lambda : {-1.0, 0.1, 0.5, 2.0, 5.0})
        CHECK(ou_harnack_ratio(ou, t, x, y, TestFunction::exp_linear(Vector::Ones(1), lambda), p) <= 1.0 + 1e-10);
}

TEST_CASE("monte carlo harnack checks") {
    const SpectralModel ou = ou_1mode();
    const Vector x = Vector::Constant(1, 0.5);
    // Jensen: x = y.
    const HarnackReport same =
        check_harnack(ou, config(0.5), x, x, TestFunction::bounded_rational(Vector::Zero(1)), 2.0, 2000);
    CHECK(same.constant == 1.0);
    CHECK(same.pass);

    const TestFunction f = TestFunction::exp_linear(Vector::Ones(1), 0.5);
    const HarnackReport rep = check_harnack(ou, config(1.0), Vector::Ones(1), Vector::Zero(1), f, 2.0, 5000);
    CHECK(rep.pass);
    const double exact = ou_harnack_ratio(ou, 1.0, Vector::Ones(1), Vector::Zero(1), f, 2.0);
    CHECK(std::abs(rep.ratio - exact) <= 3.0 * rep.relative_se * exact);
}

TEST_CASE("gradient estimate") {
    CHECK(gradient_bound(-2.0, 0.25, 2.0, 1.0, 0.5) == doctest::Approx(std::exp(0.5) / 0.5 * 2.0 * 0.5));
    CHECK(gradient_bound(-2.0, 4.0, 2.0, 1.0, 0.5) == doctest::Approx(std::exp(8.0) * 2.0 * 0.5));
    CHECK(lipschitz_gradient_bound(-1.0, 1.0, 3.0, 2.0) == doctest::Approx(std::exp(1.0) * 6.0));

    const SpectralModel ou = ou_1mode();
    const TestFunction f = TestFunction::cosine(Vector::Ones(1));
    for (double t : {0.1, 0.5, 2.0}) {
        for (double d : {0.1, 1.0, 3.0}) {
            const double diff = std::abs(ou_exact(ou, t, Vector::Constant(1, d), f) - ou_exact(ou, t, Vector::Zero(1), f));
            CHECK(diff <= gradient_bound(-1.0, t, 2.0, 1.0, d));
            CHECK(diff <= lipschitz_gradient_bound(-1.0, t, 1.0, d));
        }
    }

    const GradientReport same = check_gradient_estimate(ou, config(0.5), Vector::Ones(1), Vector::Ones(1), f, 200);
    CHECK(same.difference.value == 0.0);
    CHECK(same.pass);
    const GradientReport flat =
        check_gradient_estimate(ou, config(0.5), Vector::Ones(1), Vector::Zero(1), TestFunction::constant(2.0), 200);
    CHECK(flat.difference.value == 0.0);
    const GradientReport rep = check_gradient_estimate(ou, config(0.5), Vector::Ones(1), Vector::Zero(1), f, 4000);
    CHECK(rep.pass);
}

TEST_CASE("psi for power and custom phi") {
    const UltraboundSpec sq = UltraboundSpec::power(2.0);
    CHECK(psi(sq, 2.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(psi_inverse(sq, 0.25) == doctest::Approx(4.0).epsilon(1e-10));
    const UltraboundSpec cube = UltraboundSpec::power(3.0);
    CHECK(psi(cube, 1.0) == doctest::Approx(0.5).epsilon(1e-14));

    // Closed form against numeric quadrature on the mapped tail r = 1 / u.
    const double quad = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [](double u) { return u; }, 0.0, 1.0);
    CHECK(quad == doctest::Approx(0.5).epsilon(1e-14));
    const UltraboundSpec custom = UltraboundSpec::custom([](double r) { return r * r * r; });
    CHECK(psi(custom, 1.0) == doctest::Approx(0.5).epsilon(1e-10));

    for (const UltraboundSpec& spec : {sq, cube, UltraboundSpec::power(4.0), custom}) {
        for (double s = 1e-3; s <= 1e3; s *= 3.7) {
            CAPTURE(s);
            CHECK(std::abs(psi_inverse(spec, psi(spec, s)) - s) <= 1e-8 * (1.0 + s));
        }
    }

    const UltraboundSpec table = UltraboundSpec::table({0.0, 1.0, 2.0, 4.0}, {0.5, 1.0, 4.0, 16.0});
    CHECK(psi(table, 4.0) == doctest::Approx(0.25).epsilon(1e-10));
    // Linear piece 4 + 6 (r - 2) on [3, 4], then the tail r^2.
    CHECK(psi(table, 3.0) == doctest::Approx(std::log(1.6) / 6.0 + 0.25).epsilon(1e-10));
    CHECK_THROWS_AS(UltraboundSpec::custom([](double r) { return r; }).validate(), DivergentTail);
}

TEST_CASE("contraction ODE bound") {
    const UltraboundSpec sq = UltraboundSpec::power(2.0, 1.0);
    CHECK(sq.Phi0_inverse(2.0) == doctest::Approx(2.0));
    const ContractionReport high = check_contraction_bound(sq, 10.0);
    CHECK(high.bound_holds);
    CHECK_FALSE(high.case1);
    REQUIRE(!high.times.empty());
    CHECK(high.bound[0] == doctest::Approx(4.0 / high.times[0] + 2.0));

    const ContractionReport zero = check_contraction_bound(sq, 0.0);
    CHECK(zero.case1);
    CHECK(zero.invariance_holds);
    CHECK(zero.bound_holds);

    const ContractionReport edge = check_contraction_bound(sq, 2.0, 1.0, 1e-4, 1);
    CHECK(edge.invariance_holds);
    CHECK(edge.y[0] < 2.0);
    // y' = a - Phi_0(level) = -a at the start.
    CHECK((edge.y[0] - 2.0) / 1e-4 == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("ultrabound envelope") {
    const UltraboundSpec sq = UltraboundSpec::power(2.0);
    CHECK(ultrabound_envelope(sq, 1.0, 1.0, 4.0) ==
          doctest::Approx(std::exp((1.0 + 1.0) / std::pow(1.0 - std::exp(-2.0), 2))));
    CHECK(ultrabound_envelope(sq, 1.0, 1.0, 1e4) == doctest::Approx(std::exp(1.0)).epsilon(1e-3));
    double previous = INFINITY;
    for (double t = 0.1; t < 50.0; t *= 1.5) {
        const double e = ultrabound_envelope(sq, 0.5, 1.0, t);
        CHECK(e <= previous);
        previous = e;
    }
}

TEST_CASE("hyperbound condition on gaussian samples") {
    const double v = 0.5;
    const std::size_t n = 3;
    const auto samples = gaussian_samples(n, 50000, v, 8);
    const HyperboundReport rep = check_hyperbound_condition(samples, {0.0, 0.1, 0.3, 1.0, 2.0}, -1.0, 0.5);
    CHECK(rep.threshold == doctest::Approx(0.5));
    CHECK(rep.rows[0].estimate.value == 1.0);
    for (std::size_t i = 1; i < 3; ++i) {
        const double lambda = rep.rows[i].lambda;
        const double exact = std::pow(1.0 - 2.0 * lambda * v, -0.5 * n);
        CHECK(std::abs(rep.rows[i].estimate.value - exact) <= 4.0 * rep.rows[i].estimate.se);
        CHECK(rep.rows[i].stable);
    }
    // lambda >= 1 / (2 v) has an infinite mean.
    CHECK_FALSE(rep.rows[3].stable);
    CHECK_FALSE(rep.rows[4].stable);
    CHECK_FALSE(rep.condition_met);

    const HyperboundReport low = check_hyperbound_condition(samples, {0.2, 0.3}, -0.3, 1.0);
    CHECK(low.condition_met);
    CHECK(low.smallest_stable_lambda == 0.2);
}

TEST_CASE("density bound right-hand side") {
    const double v = 0.4, p = 2.0, omega = -1.0, t = 0.5;
    const Vector x{{0.3, -0.2}};
    const double c = p * omega / -std::expm1(-2.0 * omega * t);
    const double exact = std::pow(1.0 + 2.0 * c * v, 1.0) * std::exp(c * x.squaredNorm() / (1.0 + 2.0 * c * v));
    CHECK(density_norm_rhs_gaussian(x, v, 1.0, p, omega, t) == doctest::Approx(exact).epsilon(1e-14));
    const double mc = density_norm_rhs(gaussian_samples(2, 40000, v, 3), x, 1.0, p, omega, t);
    CHECK(mc == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("lyapunov generator") {
    const SpectralModel ou = spectral::build_dirichlet_model(4, DriftSpec{}, SigmaSpec{});
    const spectral::ThetaFunctional theta = spectral::ThetaFunctional::for_model(ou);
    const Vector& q = theta.q();
    CHECK(generator_phi(ou, q, Vector::Zero(4)) == doctest::Approx(q.cwiseInverse().sum()).epsilon(1e-14));

    const Vector x{{0.5, -1.0, 0.2, 0.1}};
    double expected = q.cwiseInverse().sum();
    for (Eigen::Index i = 0; i < 4; ++i) expected += 2.0 * ou.a_eigs()[i] * x[i] * x[i] / q[i];
    CHECK(generator_phi(ou, q, x) == doctest::Approx(expected).epsilon(1e-13));

    const LyapunovReport rep = lyapunov_drift_check(ou, theta, spectral::sample_points(4, 400, 0.5, 3), 1);
    CHECK(rep.pass);
    CHECK(rep.trace_term == doctest::Approx(q.cwiseInverse().sum()));
}

TEST_CASE("invariant estimates") {
    const SpectralModel ou = spectral::build_dirichlet_model(3, DriftSpec{}, SigmaSpec{});
    const Vector var = ou_stationary_variance(ou);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(var[k] == doctest::Approx(1.0 / (2.0 * pi2 * (k + 1) * (k + 1))));

    sde::IntegratorConfig cfg = config(0.0, 1e-3, 2);
    const InvariantEstimate est = estimate_invariant(ou, cfg, Vector::Zero(3), 1.0, 101.0,
                                                     {Functional::mode_square(1), Functional::mode_mean(1)});
    const Estimate m2 = est.moments.at("mode_square_1");
    CHECK(std::abs(m2.value - var[0]) <= 3.0 * m2.se);
    CHECK(std::abs(est.moments.at("mode_mean_1").value) <= 3.0 * est.moments.at("mode_mean_1").se);

    SigmaSpec none;
    none.kind = SigmaSpec::Kind::scalar;
    none.scale = 0.0;
    const SpectralModel still = spectral::build_dirichlet_model(3, DriftSpec{}, none);
    const InvariantEstimate zero =
        estimate_invariant(still, cfg, Vector::Zero(3), 1.0, 5.0, {Functional::squared_norm(), Functional::theta()});
    CHECK(zero.moments.at("squared_norm").value == 0.0);
    CHECK(zero.moments.at("theta").value == 0.0);
    CHECK_THROWS(estimate_invariant(ou, cfg, Vector::Zero(3), 5.0, 5.0, {Functional::squared_norm()}));
}
