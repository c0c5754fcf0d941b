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
// Acceptance battery: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spde/analysis.hpp"
#include "spde/coupling.hpp"
#include "spde/invariant.hpp"
#include "spde/model_spec.hpp"
#include "spde/monotone.hpp"
#include "spde/parallel.hpp"
#include "spde/runner.hpp"
#include "spde/sde.hpp"
#include "spde/ultrabound.hpp"

using namespace spde;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const std::string tool = SPDE_TOOL_PATH;
const std::string configs = SPDE_CONFIG_DIR;
const unsigned workers = default_workers();

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void note(const std::string& line) { std::cout << "    " << line << '\n' << std::flush; }

config::Json model_doc(const std::string& name) {
    return config::load_json_file(configs + "/" + name + ".json").at("model");
}

spectral::SpectralModel model_from(const config::Json& doc) {
    return config::build_model(config::model_from_json(doc));
}

spectral::SpectralModel model_alpha(double alpha) {
    config::Json doc = model_doc("example54_n8_alpha1e-2");
    doc["drift"]["regularization"]["alpha"] = alpha;
    return model_from(doc);
}

// ---------------------------------------------------------------- 1

Outcome yosida_suite() {
    using namespace monotone;
    Outcome out;
    const std::vector<std::pair<std::string, ScalarMap>> maps = {{"-s", ScalarMap::negative_identity()},
                                                                 {"-sign", ScalarMap::negative_sign()},
                                                                 {"-s^3", ScalarMap::negative_cubic()},
                                                                 {"staircase", ScalarMap::two_jump_staircase()}};
    const std::vector<double> alphas = {1e-1, 1e-2, 1e-3};
    std::mt19937_64 gen(20240601);
    std::normal_distribution<double> normal(0.0, 1.5);
    std::size_t checked = 0, conv_points = 0, excluded = 0;
    double worst_conv = 0.0;
    for (const auto& [label, f] : maps) {
        std::size_t bad_nonexp = 0, bad_diss = 0, bad_lip = 0, bad_dom = 0, bad_mono = 0, bad_conv = 0;
        for (int k = 0; k < 1000; ++k) {
            const double r1 = normal(gen), r2 = normal(gen);
            for (double alpha : alphas) {
                YosidaParams p;
                p.alpha = alpha;
                const double j1 = resolvent_scalar(f, p, r1), j2 = resolvent_scalar(f, p, r2);
                const double f1 = yosida_scalar(f, p, r1), f2 = yosida_scalar(f, p, r2);
                const double d = std::abs(r1 - r2);
                // Rounding allowance only: 1e-12 relative plus 1e-12 absolute.
                if (std::abs(j1 - j2) > d * (1 + 1e-12) + 1e-12) ++bad_nonexp;
                if ((f1 - f2) * (r1 - r2) > 1e-12 * (1 + std::abs(f1) + std::abs(f2))) ++bad_diss;
                if (std::abs(f1 - f2) > 2.0 / alpha * d * (1 + 1e-12) + 1e-12) ++bad_lip;
                if (std::abs(f1) > std::abs(minimal_section(f, r1)) * (1 + 1e-12) + 1e-12) ++bad_dom;
                ++checked;
            }
            // Convergence at continuity points along the alpha sequence.
            if (f.is_breakpoint(r1)) continue;
            double previous = INFINITY, error = 0.0;
            for (double alpha : alphas) {
                YosidaParams p;
                p.alpha = alpha;
                error = std::abs(yosida_scalar(f, p, r1) - f(r1));
                if (error > previous + 1e-12) ++bad_mono;
                previous = error;
            }
            // Within alpha of a jump F_alpha is still crossing between the
            // one-sided limits, so the tolerance applies outside the last
            // alpha's layer.
            bool near_jump = false;
            for (const auto& b : f.breakpoints()) near_jump = near_jump || std::abs(r1 - b.at) <= alphas.back();
            if (near_jump) ++excluded;
            if (std::abs(r1) <= 1.5 && !near_jump) {
                ++conv_points;
                const double rel = error / (1.0 + std::abs(f(r1)));
                worst_conv = std::max(worst_conv, rel);
                if (rel > 1e-2) ++bad_conv;
            }
        }
        note(label + ": violations nonexpansive " + std::to_string(bad_nonexp) + ", dissipative " +
             std::to_string(bad_diss) + ", lipschitz " + std::to_string(bad_lip) + ", domination " +
             std::to_string(bad_dom) + ", monotone convergence " + std::to_string(bad_mono) + ", tolerance " +
             std::to_string(bad_conv));
        out.require(bad_nonexp + bad_diss + bad_lip + bad_dom + bad_mono + bad_conv == 0, label);
    }
    out.detail << checked << " pair checks, " << conv_points << " convergence points (|r| <= 1.5, " << excluded
               << " within 1e-3 of a jump excluded), worst final error " << g(worst_conv) << " x (1 + |f(r)|)";
    return out;
}

// ---------------------------------------------------------------- 2

Outcome integrator_order() {
    Outcome out;
    // Deterministic linear system with a non-diagonal dissipative coupling.
    Matrix L(4, 4);
    L << -0.6, 0.3, 0.1, 0.0, 0.3, -0.6, 0.3, 0.1, 0.1, 0.3, -0.6, 0.3, 0.0, 0.1, 0.3, -0.6;
    const Vector a{{-1.0, -2.0, -3.0, -4.0}};
    spectral::DriftSpec drift;
    drift.kind = spectral::DriftKind::linear;
    drift.linear = L;
    spectral::SigmaSpec none;
    none.kind = spectral::SigmaSpec::Kind::scalar;
    none.scale = 0.0;
    const auto model = spectral::build_explicit_model(a, -1.0, drift, none);
    const Vector x0{{1.0, -0.5, 2.0, 0.3}};
    const double T = 1.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(a.asDiagonal()) + L);
    const Vector exact =
        eig.eigenvectors() * (eig.eigenvalues().array() * T).exp().matrix().asDiagonal() * eig.eigenvectors().transpose() * x0;

    std::vector<double> logdt, logerr;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
        sde::IntegratorConfig cfg;
        cfg.dt = dt;
        cfg.t_end = T;
        const double err = (sde::terminal_state(model, cfg, x0) - exact).norm();
        note("dt " + g(dt) + ": global error " + g(err));
        logdt.push_back(std::log10(dt));
        logerr.push_back(std::log10(err));
    }
    // Least-squares slope of log error against log dt.
    const double mx = (logdt[0] + logdt[1] + logdt[2]) / 3.0, my = (logerr[0] + logerr[1] + logerr[2]) / 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (logdt[i] - mx) * (logerr[i] - my);
        sxx += (logdt[i] - mx) * (logdt[i] - mx);
    }
    const double slope = sxy / sxx;
    out.require(std::abs(slope - 1.0) <= 0.15, "slope");

    // OU second moment on the 8-mode Dirichlet model.
    const auto ou = model_from(model_doc("ou_8mode"));
    sde::IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.1;
    cfg.seed = 2;
    Vector x(8);
    for (Eigen::Index k = 0; k < 8; ++k) x[k] = 1.0 / (k + 1.0);
    const std::size_t N = 10000;
    const auto states = analysis::terminal_states(ou, cfg, x, N, workers);
    std::vector<double> sq(N);
    for (std::size_t i = 0; i < N; ++i) sq[i] = states[i].squaredNorm();
    const Estimate mc = mean_and_se(sq);
    double moment = 0.0;
    for (Eigen::Index k = 0; k < 8; ++k) {
        const double ak = -std::numbers::pi * std::numbers::pi * (k + 1.0) * (k + 1.0);
        moment += std::exp(2.0 * ak * 0.1) * x[k] * x[k] + std::expm1(2.0 * ak * 0.1) / (2.0 * ak);
    }
    const double z = (mc.value - moment) / mc.se;
    out.require(std::abs(z) <= 3.0, "OU second moment");
    out.detail << "slope " << g(slope) << " (target 1 +/- 0.15); E|X_0.1|^2 = " << g(mc.value) << " +/- " << g(mc.se)
               << " vs exact " << g(moment) << " (z = " << g(z) << ")";
    return out;
}

// ---------------------------------------------------------------- 3, 4

struct CouplingSetting {
    std::string name;
    spectral::SpectralModel model;
};

std::vector<CouplingSetting> coupling_models() {
    return {{"ou_8mode", model_from(model_doc("ou_8mode"))}, {"example54", model_alpha(1e-2)}};
}

coupling::CouplingConfig coupling_config(double T, std::uint64_t seed) {
    coupling::CouplingConfig cfg;
    cfg.T = T;
    cfg.glue_tol = 1e-4;
    cfg.integrator.dt = 1e-3;
    cfg.integrator.seed = seed;
    return cfg;
}

Outcome coupling_suite() {
    Outcome out;
    for (const auto& s : coupling_models()) {
        const Vector x0 = Vector::Unit(8, 0), y0 = Vector::Zero(8);
        const auto batch = coupling::run_coupling_batch(s.model, coupling_config(1.0, 31), x0, y0, 1000, {2.0}, workers);
        note(s.name + ": fraction(tau <= T) " + g(batch.fraction_coupled) + ", contraction violations " +
             std::to_string(batch.contraction_violations) + " (worst excess " + g(batch.worst_contraction_excess) +
             "), post-tau mismatches " + std::to_string(batch.post_tau_mismatches));
        out.require(batch.fraction_coupled >= 0.99, s.name + " fraction");
        out.require(batch.contraction_violations == 0, s.name + " contraction");
        out.require(batch.post_tau_mismatches == 0, s.name + " post-tau identity");
        out.detail << s.name << " fraction " << g(batch.fraction_coupled) << "; ";
    }
    out.detail << "N = 1000, T = 1, dt = 1e-3, glue_tol = 1e-4";
    return out;
}

Outcome girsanov_suite() {
    Outcome out;
    const std::vector<double> ps = {1.5, 2.0, 4.0};
    struct Case {
        double T;
        double dist;
    };
    // T = 1 with |x0 - y0| = 1, and a short horizon where the weight is far from 1.
    for (const Case c : {Case{1.0, 1.0}, Case{0.1, 0.5}}) {
        for (const auto& s : coupling_models()) {
            const Vector x0 = Vector::Constant(8, c.dist / std::sqrt(8.0)), y0 = Vector::Zero(8);
            const auto batch = coupling::run_coupling_batch(s.model, coupling_config(c.T, 41), x0, y0, 10000, ps, workers);
            const double mz = (batch.martingale.value - 1.0) / batch.martingale.se;
            std::ostringstream line;
            line << s.name << " T = " << c.T << " |x0 - y0| = " << c.dist << ": E R = " << g(batch.martingale.value)
                 << " +/- " << g(batch.martingale.se) << " (z = " << g(mz) << ")";
            out.require(batch.martingale_pass, s.name + " martingale T=" + g(c.T));
            for (const auto& m : batch.moments) {
                line << "; p = " << m.p << ": E R^q = " << g(m.moment.value) << " (rel se " << g(m.relative_se)
                     << ") bound " << g(m.bound) << ", (E R^q)^(p-1) = " << g(m.powered) << " vs bound^(p-1) "
                     << g(m.powered_bound);
                out.require(m.pass, s.name + " moment p=" + g(m.p) + " T=" + g(c.T));
            }
            note(line.str());
        }
    }
    out.detail << "martingale within 3 SE and E[R^{p/(p-1)}] <= bound (1 + 3 rel SE), p in {1.5, 2, 4}, N = 10^4, "
                  "both models, two horizons";
    return out;
}

// ---------------------------------------------------------------- 5

// Closed-form Harnack ratio for the 1-mode OU model (a = -1, sigma = 1) and
// f = exp(lambda x), written out independently of the library.
double ou_ratio_by_hand(double t, double d, double lambda, double p) {
    const double m = std::exp(-t) * d; // mean difference, y = 0
    const double v = (1.0 - std::exp(-2.0 * t)) / 2.0;
    const double lhs_log = p * (lambda * m + lambda * lambda * v / 2.0);
    const double rhs_log = p * p * lambda * lambda * v / 2.0;
    const double c_log = p * d * d / ((p - 1.0) * (std::exp(2.0 * t) - 1.0));
    return std::exp(lhs_log - rhs_log - c_log);
}

Outcome harnack_suite() {
    Outcome out;
    // (a) closed forms on a 5 x 5 grid.
    const auto ou1 = model_from(model_doc("ou_1mode"));
    double worst = 0.0, worst_mismatch = 0.0;
    for (double t : {0.1, 0.25, 0.5, 1.0, 2.0}) {
        for (double d : {0.1, 0.5, 1.0, 2.0, 4.0}) {
            for (double p : {1.5, 2.0, 4.0}) {
                const double v = (1.0 - std::exp(-2.0 * t)) / 2.0;
                const double sharp = std::exp(-t) * d / ((p - 1.0) * v);
                for (double lambda : {-1.0, 0.3, 1.0, sharp}) {
                    const auto f = analysis::TestFunction::exp_linear(Vector::Ones(1), lambda);
                    const double lib = analysis::ou_harnack_ratio(ou1, t, Vector::Constant(1, d), Vector::Zero(1), f, p);
                    const double hand = ou_ratio_by_hand(t, d, lambda, p);
                    worst = std::max(worst, lib);
                    worst_mismatch = std::max(worst_mismatch, std::abs(lib - hand) / hand);
                }
            }
        }
    }
    out.require(worst <= 1.0 + 1e-10, "analytic ratio");
    out.require(worst_mismatch <= 1e-10, "closed form agreement");
    note("(a) max analytic ratio " + g(worst) + " (1 is attained at the optimal lambda), library vs hand " +
         g(worst_mismatch));

    // (b) 20 randomized Monte Carlo configurations.
    std::mt19937_64 gen(777);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const auto ou8 = model_from(model_doc("ou_8mode"));
    const auto ex54 = model_alpha(1e-2);
    std::size_t passed = 0;
    double max_z = -INFINITY;
    for (int i = 0; i < 20; ++i) {
        const int which = i % 3;
        const auto& model = which == 0 ? ou1 : (which == 1 ? ou8 : ex54);
        const std::size_t n = model.n();
        const double p = 1.5 + 2.5 * U(gen);
        const double t = 0.1 + 0.9 * U(gen);
        const double dist = 0.1 + 1.4 * U(gen);
        Vector dir(static_cast<Eigen::Index>(n));
        std::normal_distribution<double> normal;
        for (auto& v : dir) v = normal(gen);
        const Vector x = dist * dir.normalized(), y = Vector::Zero(static_cast<Eigen::Index>(n));
        analysis::TestFunction f;
        const int kind = static_cast<int>(U(gen) * 4);
        switch (kind) {
        case 0: f = analysis::TestFunction::bounded_rational(0.5 * x); break;
        case 1: f = analysis::TestFunction::cosine(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / std::sqrt(double(n)))); break;
        case 2: f = analysis::TestFunction::indicator_ball(x, 0.5 + dist); break;
        default: f = analysis::TestFunction::exp_linear(dir.normalized(), 0.5); break;
        }
        sde::IntegratorConfig cfg;
        cfg.dt = which == 2 ? 2.5e-3 : 1e-3;
        cfg.t_end = t;
        cfg.seed = 1000 + static_cast<std::uint64_t>(i);
        const std::size_t N = 10000;
        const auto rep = analysis::check_harnack(model, cfg, x, y, f, p, N, workers);
        max_z = std::max(max_z, rep.z);
        if (rep.pass) ++passed;
        out.require(rep.pass, "config " + std::to_string(i));
        out.require(rep.z <= 5.0, "config " + std::to_string(i) + " beyond 5 SE");
        const char* names[] = {"ou_1mode", "ou_8mode", "example54"};
        note("(b) " + std::to_string(i) + " " + names[which] + " " + f.name() + " p = " + g(p) + " t = " + g(t) +
             " |x - y| = " + g(dist) + ": ratio " + g(rep.ratio) + " constant " + g(rep.constant) + " z " + g(rep.z) +
             (rep.pass ? "" : " FAIL"));
    }
    out.detail << "analytic max ratio " << g(worst) << "; Monte Carlo " << passed << "/20 pass, max z " << g(max_z);
    return out;
}

// ---------------------------------------------------------------- 6

Outcome gradient_suite() {
    Outcome out;
    // OU closed form: 1 + cos(h x) has sup 2 and Lipschitz constant |h|.
    std::size_t grid = 0;
    double worst = 0.0;
    for (double t : {0.05, 0.2, 0.5, 1.0, 3.0}) {
        for (double d : {0.05, 0.3, 1.0, 2.0, 5.0}) {
            for (double h : {0.5, 1.0, 3.0}) {
                const double v = (1.0 - std::exp(-2.0 * t)) / 2.0;
                const double damp = std::exp(-h * h * v / 2.0);
                const double diff = std::abs(std::cos(h * std::exp(-t) * d) - 1.0) * damp;
                const double bounded = analysis::gradient_bound(-1.0, t, 2.0, 1.0, d);
                const double lip = analysis::lipschitz_gradient_bound(-1.0, t, h, d);
                worst = std::max(worst, diff / std::min(bounded, lip));
                ++grid;
            }
        }
    }
    out.require(worst <= 1.0, "OU closed form");
    note("OU closed form on " + std::to_string(grid) + " points: max difference / bound " + g(worst));

    const auto ex54 = model_alpha(1e-2);
    sde::IntegratorConfig cfg;
    cfg.dt = 2.5e-3;
    cfg.seed = 61;
    // At t = 0.5 the first mode has decayed to e^{-pi^2 / 2}, so the short horizon
    // is the one where P_t f(x) - P_t f(y) is visible.
    for (const auto& [t, d] : {std::pair{0.05, 2.0}, std::pair{0.5, 1.0}}) {
        cfg.t_end = t;
        const Vector x = d * Vector::Unit(8, 0), y = Vector::Zero(8);
        for (const auto& f : {analysis::TestFunction::bounded_rational(Vector::Zero(8)),
                              analysis::TestFunction::cosine(Vector::Constant(8, 0.5))}) {
            const auto rep = analysis::check_gradient_estimate(ex54, cfg, x, y, f, 10000, workers);
            note("example54 t = " + g(t) + " |x - y| = " + g(d) + " " + f.name() + ": |P f(x) - P f(y)| = " +
                 g(std::abs(rep.difference.value)) + " +/- " + g(rep.difference.se) + ", bound " + g(rep.bound) +
                 ", Lipschitz bound " + g(rep.lipschitz_bound));
            out.require(rep.pass, "example54 " + f.name() + " t = " + g(t));
        }
    }
    out.detail << "OU closed form max ratio " << g(worst) << "; Monte Carlo on example54 at N = 10^4";
    return out;
}

// ---------------------------------------------------------------- 7

Outcome ultrabound_suite() {
    Outcome out;
    std::size_t runs = 0;
    double worst = -INFINITY;
    for (double m : {2.0, 3.0, 4.0}) {
        for (double a : {0.5, 1.0, 5.0}) {
            const auto spec = analysis::UltraboundSpec::power(m, a);
            const double level = spec.Phi0_inverse(2.0 * a);
            for (double y0 : {0.0, level, 10.0 * level}) {
                const auto rep = analysis::check_contraction_bound(spec, y0, 20.0, 1e-4, 0);
                worst = std::max(worst, rep.max_excess);
                out.require(rep.bound_holds, "bound m=" + g(m) + " a=" + g(a) + " y0=" + g(y0));
                if (rep.case1) out.require(rep.invariance_holds, "case 1 m=" + g(m) + " a=" + g(a));
                ++runs;
            }
        }
    }
    out.detail << runs << " ODE runs, max (y - bound) = " << g(worst) << " (tolerance 1e-6)";
    return out;
}

// ---------------------------------------------------------------- 8

Outcome invariant_suite() {
    Outcome out;
    const auto ou = model_from(model_doc("ou_8mode"));
    const auto theta = spectral::ThetaFunctional::for_model(ou);
    sde::IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.seed = 81;
    std::vector<analysis::Functional> fs;
    for (std::size_t k = 1; k <= 8; ++k) fs.push_back(analysis::Functional::mode_square(k));
    fs.push_back(analysis::Functional::theta());
    const auto est = analysis::estimate_invariant(ou, cfg, Vector::Zero(8), 10.0, 1000.0, fs, theta);
    const Vector var = analysis::ou_stationary_variance(ou);
    double worst_z = 0.0;
    for (std::size_t k = 1; k <= 8; ++k) {
        const Estimate e = est.moments.at("mode_square_" + std::to_string(k));
        const double exact = 1.0 / (2.0 * std::numbers::pi * std::numbers::pi * double(k * k));
        const double z = (e.value - exact) / e.se;
        worst_z = std::max(worst_z, std::abs(z));
        out.require(std::abs(e.value - var[static_cast<Eigen::Index>(k - 1)]) <= 3.0 * e.se, "mode " + std::to_string(k));
        out.require(std::abs(exact - var[static_cast<Eigen::Index>(k - 1)]) <= 1e-15, "stationary variance formula");
    }
    double theta_exact = 0.0;
    for (Eigen::Index i = 0; i < 8; ++i) theta_exact += theta.lambda()[i] / theta.q()[i] * var[i];
    const Estimate th = est.moments.at("theta");
    const double theta_z = (th.value - theta_exact) / th.se;
    out.require(std::abs(theta_z) <= 3.0, "theta moment");
    note("OU: max |z| over mode variances " + g(worst_z) + "; Theta " + g(th.value) + " +/- " + g(th.se) + " vs " +
         g(theta_exact) + " (z = " + g(theta_z) + ")");

    // alpha sweep on the discontinuous model with a common step.
    struct Row {
        double alpha;
        Estimate mean, second;
    };
    std::vector<Row> rows;
    cfg.dt = 2.5e-4;
    cfg.seed = 82;
    for (double alpha : {1e-1, 1e-2, 1e-3}) {
        const auto model = model_alpha(alpha);
        const auto e = analysis::estimate_invariant(model, cfg, Vector::Zero(8), 10.0, 1000.0,
                                                    {analysis::Functional::mode_mean(1), analysis::Functional::squared_norm()});
        rows.push_back({alpha, e.moments.at("mode_mean_1"), e.moments.at("squared_norm")});
        note("example54 alpha " + g(alpha) + ": E x_1 = " + g(rows.back().mean.value) + " +/- " +
             g(rows.back().mean.se) + ", E|x|^2 = " + g(rows.back().second.value) + " +/- " + g(rows.back().second.se));
    }
    double worst_pair = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            for (auto pick : {&Row::mean, &Row::second}) {
                const Estimate a = rows[i].*pick, b = rows[j].*pick;
                const double z = std::abs(a.value - b.value) / std::hypot(a.se, b.se);
                worst_pair = std::max(worst_pair, z);
            }
        }
    }
    out.require(worst_pair <= 4.0, "alpha sweep consistency");
    out.detail << "OU max |z| " << g(worst_z) << ", Theta z " << g(theta_z) << "; alpha sweep max pairwise z "
               << g(worst_pair) << " (limit 4)";
    return out;
}

// ---------------------------------------------------------------- 9

int run_tool(const std::string& args) {
    const int status = std::system((tool + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every file in a must exist in b with the same bytes, and vice versa.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
    std::vector<std::string> na, nb;
    for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    if (na != nb || na.empty()) return false;
    for (const auto& name : na) {
        if (slurp(a / name) != slurp(b / name)) return false;
        ++files;
    }
    return true;
}

Outcome reproducibility_suite(Clock::time_point battery_start) {
    Outcome out;
    const fs::path root = fs::temp_directory_path() / "spde_acceptance_repro";
    fs::remove_all(root);
    struct Run {
        std::string config, experiment, extra;
    };
    const std::vector<Run> runs = {
        {"ou_1mode", "simulate", ""},
        {"ou_1mode", "harnack", " --override experiments.harnack.N=1000"},
        {"ou_8mode", "couple", " --override experiments.couple.N=200"},
        {"ou_8mode", "invariant", " --override experiments.invariant.horizon=50"},
        {"example54_n8_alpha1e-2", "simulate", ""},
        {"example54_n8_alpha1e-2", "gradient", " --override experiments.gradient.N=200"},
        {"ultrabound_power2", "ultrabound", ""},
        {"ultrabound_power2", "yosida-table", ""},
    };
    std::size_t files = 0, idx = 0;
    for (const auto& r : runs) {
        const fs::path a = root / (std::to_string(idx) + "a"), b = root / (std::to_string(idx) + "b"),
                       c = root / (std::to_string(idx) + "c");
        ++idx;
        const std::string base = r.experiment + " --config " + configs + "/" + r.config + ".json --seed 5" + r.extra;
        const int ca = run_tool(base + " --workers 1 --out " + a.string());
        const int cb = run_tool(base + " --workers 2 --out " + b.string());
        const int cc = run_tool(r.experiment + " --config " + (a / "manifest.json").string() + " --out " + c.string());
        const bool ok = ca != 1 && ca == cb && ca == cc && same_tree(a, b, files) && same_tree(a, c, files);
        note(r.config + " " + r.experiment + ": exit " + std::to_string(ca) + ", identical reruns and manifest rerun: " +
             (ok ? "yes" : "no"));
        out.require(ok, r.config + " " + r.experiment);
    }
    fs::remove_all(root);
    const double total = std::chrono::duration<double>(Clock::now() - battery_start).count();
    out.require(total < 3600.0, "battery runtime");
    out.detail << files << " files byte-identical across worker counts and manifest reruns; battery runtime "
               << g(total) << " s (limit 3600 s)";
    return out;
}

} // namespace

int main() {
    const auto start = Clock::now();
    std::cout << "acceptance battery, " << workers << " worker(s)\n";
    struct Criterion {
        int id;
        std::string name;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "Yosida suite", yosida_suite},
        {2, "integrator order", integrator_order},
        {3, "coupling", coupling_suite},
        {4, "Girsanov", girsanov_suite},
        {5, "Harnack", harnack_suite},
        {6, "gradient estimate", gradient_suite},
        {7, "ultrabound ODE", ultrabound_suite},
        {8, "invariant measure", invariant_suite},
        {9, "reproducibility", [&] { return reproducibility_suite(start); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        std::cout << "criterion " << c.id << " (" << c.name << ")\n" << std::flush;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": " << o.detail.str()
                  << " [" << g(secs) << " s]\n"
                  << std::flush;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << '\n';
    return failures == 0 ? 0 : 1;
}
