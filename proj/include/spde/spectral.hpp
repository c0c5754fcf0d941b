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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spde/core.hpp"
#include "spde/field.hpp"
#include "spde/monotone.hpp"

// Galerkin truncation onto the first n eigenvectors of A, the pointwise
// (Nemytskii) lift of a scalar drift on L^2(0,1), and the quadratic
// Lyapunov functional Theta.
namespace spde::spectral {

/// Composition x -> f(x(.)) expressed on sine coefficients.
///
/// Coefficients are synthesised on the uniform grid xi_j = j / M,
/// j = 0..M, with e_k(xi) = sqrt(2) sin(k pi xi); the scalar map is
/// applied pointwise and the result is projected back with composite
/// trapezoid weights. For 1 <= k, l < M the discrete sine basis is exactly
/// orthonormal under these weights, so linear maps are reproduced to
/// rounding.
class NemytskiiLift final : public VectorField {
public:
    NemytskiiLift(std::size_t n, std::function<double(double)> scalar, std::size_t grid_size);

    std::size_t dimension() const override { return n_; }
    void evaluate(const Vector& coeffs, Vector& out) const override;

    std::size_t grid_size() const { return grid_size_; }
    /// Nodal values on the M + 1 grid points.
    Vector to_grid(const Vector& coeffs) const;
    /// k-th coefficient: sum_j w_j v_j e_k(xi_j).
    Vector project(const Vector& grid_values) const;
    /// Trapezoid rule on the grid.
    double integrate(const Vector& grid_values) const;

private:
    std::size_t n_;
    std::size_t grid_size_;
    Matrix basis_;  // (M + 1) x n
    Matrix wbasis_; // weights folded in, n x (M + 1)
    Vector weights_;
    std::function<double(double)> scalar_;
};

Vector lift_drift(const NemytskiiLift& lift, const Vector& coeffs);

/// (integral_0^1 |x(xi)|^{2m} dxi)^{1/2} by the lift's trapezoid rule.
double g_functional(const NemytskiiLift& lift, const Vector& coeffs, int m);
double g_functional_grid(const NemytskiiLift& lift, const Vector& grid_values, int m);

enum class DriftKind { zero, linear, nemytskii };

/// How the multivalued scalar drift enters the simulation.
struct Regularization {
    enum class Kind { minimal_section, yosida };
    Kind kind = Kind::yosida;
    monotone::YosidaParams yosida;
    double beta = 0.0; ///< > 0 adds Gaussian smoothing in coefficient space
    std::size_t node_count = 64;
    std::uint64_t node_seed = 1;
};

struct DriftSpec {
    DriftKind kind = DriftKind::zero;
    std::optional<monotone::ScalarMap> map; ///< nemytskii only
    Regularization regularization;
    Matrix linear; ///< linear only, n x n
};

struct SigmaSpec {
    enum class Kind { identity, scalar, diagonal, dense };
    Kind kind = Kind::identity;
    double scale = 1.0;
    std::vector<double> diagonal;
    Matrix dense;
    std::optional<double> inv_norm; ///< norm of sigma^{-1} on the full space

    Matrix matrix(std::size_t n) const;
};

/// sigma must be symmetric positive semidefinite; a singular sigma is
/// accepted for deterministic runs.
///
/// Finite-dimensional model dX = (A_n X + F_n(X)) dt + sigma_n dW_n in the
/// eigenbasis of A. Immutable after construction.
class SpectralModel {
public:
    SpectralModel(Vector a_eigs, double omega, Matrix sigma, FieldPtr drift, DriftKind drift_kind,
                  std::optional<double> sigma_inv_norm = std::nullopt);

    std::size_t n() const { return static_cast<std::size_t>(a_eigs_.size()); }
    const Vector& a_eigs() const { return a_eigs_; }
    double omega() const { return omega_; }
    const Matrix& sigma() const { return sigma_; }
    /// Throws SingularSigma when sigma is only semidefinite.
    const Matrix& sigma_inverse() const;
    bool sigma_invertible() const { return sigma_inv_.size() != 0; }
    double sigma_inv_norm() const { return sigma_inv_norm_; }
    double sigma_norm() const { return sigma_norm_; }
    bool sigma_is_diagonal() const { return sigma_diagonal_; }
    const VectorField& drift() const { return *drift_; }
    FieldPtr drift_ptr() const { return drift_; }
    DriftKind drift_kind() const { return drift_kind_; }

    /// Set for Dirichlet models with a Nemytskii drift.
    std::shared_ptr<const NemytskiiLift> lift() const { return lift_; }
    void set_lift(std::shared_ptr<const NemytskiiLift> lift) { lift_ = std::move(lift); }

private:
    Vector a_eigs_;
    double omega_;
    Matrix sigma_;
    Matrix sigma_inv_;
    double sigma_inv_norm_;
    double sigma_norm_;
    bool sigma_diagonal_;
    FieldPtr drift_;
    DriftKind drift_kind_;
    std::shared_ptr<const NemytskiiLift> lift_;
};

/// Scalar drift used by the simulator for a given regularisation.
std::function<double(double)> scalar_drift(const monotone::ScalarMap& map,
                                           const Regularization& reg);

/// Drift field on R^n from a spec; `lift_out` receives the Nemytskii lift
/// when one is built.
FieldPtr build_drift(std::size_t n, const DriftSpec& spec, std::size_t oversampling,
                     std::shared_ptr<const NemytskiiLift>* lift_out = nullptr);

/// Dirichlet Laplacian on (0, 1): a_k = -pi^2 k^2, omega = -pi^2.
SpectralModel build_dirichlet_model(std::size_t n, const DriftSpec& drift, const SigmaSpec& sigma,
                                    std::size_t oversampling = 8);

/// Diagonal model with explicit eigenvalues (OU-type test problems).
SpectralModel build_explicit_model(const Vector& a_eigs, double omega, const DriftSpec& drift,
                                   const SigmaSpec& sigma);

/// max over pairs of <F(x) - F(y), x - y> / |x - y|^2. Non-positive for a
/// dissipative field; <= -eta for an eta-strongly dissipative one.
double dissipativity_rate(const VectorField& field, const std::vector<std::pair<Vector, Vector>>& pairs);

/// Deterministic Gaussian sample pairs for property checks.
std::vector<std::pair<Vector, Vector>> sample_pairs(std::size_t n, std::size_t count, double scale,
                                                    std::uint64_t seed);
std::vector<Vector> sample_points(std::size_t n, std::size_t count, double scale, std::uint64_t seed);

/// q_i = i^{3/2}, checked against 0 < q_i < lambda_i and q_i / lambda_i
/// nonincreasing. Throws InfeasibleQ otherwise.
Vector default_q(const Vector& lambda);

/// Theta(x) = sum_i (lambda_i / q_i) x_i^2 with lambda_i the eigenvalues
/// of (shift - A), shift = 1 + omega'.
class ThetaFunctional {
public:
    ThetaFunctional(Vector lambda, Vector q);

    /// lambda_i = 1 + max(omega, 0) - a_i; q from `q_override` or default_q.
    static ThetaFunctional for_model(const SpectralModel& model,
                                     const std::optional<Vector>& q_override = std::nullopt);

    double operator()(const Vector& x) const;
    const Vector& lambda() const { return lambda_; }
    const Vector& q() const { return q_; }

private:
    Vector lambda_;
    Vector q_;
    Vector weights_;
};

double theta_value(const ThetaFunctional& theta, const Vector& x);

/// Shift used by ThetaFunctional::for_model (1 + max(omega, 0)).
double theta_shift(const SpectralModel& model);

/// Smallest C with |F(x)| <= C (1 + |x|^m + Theta(x)^{1/2}) on the samples.
double growth_transfer_constant(const SpectralModel& model, const ThetaFunctional& theta, int m,
                                const std::vector<Vector>& samples);

} // namespace spde::spectral
