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

#include "spde/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spde/rng.hpp"

namespace spde::spectral {

NemytskiiLift::NemytskiiLift(std::size_t n, std::function<double(double)> scalar,
                             std::size_t grid_size)
    : n_(n), grid_size_(grid_size), scalar_(std::move(scalar)) {
    if (n_ == 0) throw Error("Nemytskii lift needs n >= 1");
    if (grid_size_ < 2 * n_)
        throw Error("Nemytskii grid size " + std::to_string(grid_size_) +
                    " is below the anti-aliasing floor 2n = " + std::to_string(2 * n_));
    const auto points = static_cast<Eigen::Index>(grid_size_ + 1);
    const auto modes = static_cast<Eigen::Index>(n_);
    const double h = 1.0 / static_cast<double>(grid_size_);
    basis_.resize(points, modes);
    weights_.setConstant(points, h);
    weights_[0] = weights_[points - 1] = 0.5 * h;
    for (Eigen::Index j = 0; j < points; ++j) {
        const double xi = static_cast<double>(j) * h;
        for (Eigen::Index k = 0; k < modes; ++k)
            basis_(j, k) = std::numbers::sqrt2 * std::sin(static_cast<double>(k + 1) * std::numbers::pi * xi);
    }
    // sin(k pi) is not exactly zero in floating point; the boundary values are.
    basis_.row(0).setZero();
    basis_.row(points - 1).setZero();
    wbasis_ = (basis_.array().colwise() * weights_.array()).matrix().transpose();
}

void NemytskiiLift::evaluate(const Vector& coeffs, Vector& out) const {
    require_dimension(n_, static_cast<std::size_t>(coeffs.size()));
    thread_local Vector grid;
    grid.noalias() = basis_ * coeffs;
    for (Eigen::Index j = 0; j < grid.size(); ++j) grid[j] = scalar_(grid[j]);
    out.resize(static_cast<Eigen::Index>(n_));
    out.noalias() = wbasis_ * grid;
}

Vector NemytskiiLift::to_grid(const Vector& coeffs) const {
    require_dimension(n_, static_cast<std::size_t>(coeffs.size()));
    return basis_ * coeffs;
}

Vector NemytskiiLift::project(const Vector& grid_values) const {
    require_dimension(grid_size_ + 1, static_cast<std::size_t>(grid_values.size()));
    return wbasis_ * grid_values;
}

double NemytskiiLift::integrate(const Vector& grid_values) const {
    require_dimension(grid_size_ + 1, static_cast<std::size_t>(grid_values.size()));
    return weights_.dot(grid_values);
}

Vector lift_drift(const NemytskiiLift& lift, const Vector& coeffs) { return lift(coeffs); }

double g_functional_grid(const NemytskiiLift& lift, const Vector& grid_values, int m) {
    if (m < 1) throw Error("G functional needs m >= 1");
    const Vector powered = grid_values.array().abs().pow(2.0 * m).matrix();
    return std::sqrt(lift.integrate(powered));
}

double g_functional(const NemytskiiLift& lift, const Vector& coeffs, int m) {
    return g_functional_grid(lift, lift.to_grid(coeffs), m);
}

Matrix SigmaSpec::matrix(std::size_t n) const {
    const auto size = static_cast<Eigen::Index>(n);
    switch (kind) {
    case Kind::identity:
        return Matrix::Identity(size, size);
    case Kind::scalar:
        return scale * Matrix::Identity(size, size);
    case Kind::diagonal: {
        if (diagonal.size() != n) throw InvalidSigma("diagonal sigma needs " + std::to_string(n) + " entries");
        Matrix m = Matrix::Zero(size, size);
        for (Eigen::Index i = 0; i < size; ++i) m(i, i) = diagonal[static_cast<std::size_t>(i)];
        return m;
    }
    case Kind::dense:
        if (dense.rows() != size || dense.cols() != size)
            throw InvalidSigma("dense sigma must be " + std::to_string(n) + "x" + std::to_string(n));
        return dense;
    }
    throw InvalidSigma("unknown sigma kind");
}

SpectralModel::SpectralModel(Vector a_eigs, double omega, Matrix sigma, FieldPtr drift,
                             DriftKind drift_kind, std::optional<double> sigma_inv_norm)
    : a_eigs_(std::move(a_eigs)),
      omega_(omega),
      sigma_(std::move(sigma)),
      drift_(std::move(drift)),
      drift_kind_(drift_kind) {
    const std::size_t dim = n();
    if (dim == 0) throw Error("model dimension must be >= 1");
    for (Eigen::Index k = 0; k < a_eigs_.size(); ++k)
        if (a_eigs_[k] > omega_ + 1e-12 * (1.0 + std::abs(omega_)))
            throw Error("eigenvalue a_" + std::to_string(k + 1) + " exceeds omega");
    require_dimension(dim, static_cast<std::size_t>(sigma_.rows()));
    require_dimension(dim, static_cast<std::size_t>(sigma_.cols()));
    require_dimension(dim, drift_->dimension());

    const double scale = sigma_.cwiseAbs().maxCoeff();
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale))
        throw InvalidSigma("sigma must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_);
    const double smallest = eig.eigenvalues().minCoeff();
    const double tol = 1e-14 * (1.0 + scale);
    if (smallest < -tol) throw InvalidSigma("sigma must be positive semidefinite");
    sigma_norm_ = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (smallest > tol) {
        const Eigen::LLT<Matrix> llt(sigma_);
        if (llt.info() != Eigen::Success) throw InvalidSigma("sigma must be positive definite");
        sigma_inv_ = llt.solve(Matrix::Identity(sigma_.rows(), sigma_.cols()));
        if (!sigma_inv_.allFinite()) throw SingularSigma("sigma inverse is not finite");
        sigma_inv_norm_ = sigma_inv_norm.value_or(1.0 / smallest);
        if (!(sigma_inv_norm_ > 0)) throw InvalidSigma("sigma_inv_norm must be > 0");
    } else {
        // Degenerate noise is allowed for deterministic runs; anything that
        // needs sigma^{-1} throws SingularSigma.
        sigma_inv_norm_ = std::numeric_limits<double>::infinity();
    }

    const Matrix off = sigma_ - Matrix(sigma_.diagonal().asDiagonal());
    sigma_diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;

    if (drift_kind_ != DriftKind::zero) {
        const double rate = dissipativity_rate(*drift_, sample_pairs(dim, 16, 1.0, 0x5eedULL));
        if (rate > 1e-6) throw Error("drift is not dissipative on sampled pairs (rate " + std::to_string(rate) + ")");
    }
}

const Matrix& SpectralModel::sigma_inverse() const {
    if (sigma_inv_.size() == 0) throw SingularSigma("sigma is singular");
    return sigma_inv_;
}

std::function<double(double)> scalar_drift(const monotone::ScalarMap& map, const Regularization& reg) {
    if (reg.kind == Regularization::Kind::minimal_section)
        return [map](double s) { return monotone::minimal_section(map, s); };
    reg.yosida.validate();
    return [map, p = reg.yosida](double s) { return monotone::yosida_scalar(map, p, s); };
}

FieldPtr build_drift(std::size_t n, const DriftSpec& spec, std::size_t oversampling,
                     std::shared_ptr<const NemytskiiLift>* lift_out) {
    switch (spec.kind) {
    case DriftKind::zero:
        return std::make_shared<ZeroField>(n);
    case DriftKind::linear:
        require_dimension(n, static_cast<std::size_t>(spec.linear.rows()));
        return std::make_shared<LinearField>(spec.linear);
    case DriftKind::nemytskii: {
        if (!spec.map) throw Error("nemytskii drift needs a scalar map");
        auto lift = std::make_shared<NemytskiiLift>(n, scalar_drift(*spec.map, spec.regularization),
                                                    oversampling * n);
        if (lift_out) *lift_out = lift;
        if (spec.regularization.beta > 0.0) {
            monotone::SmoothingParams sp;
            sp.beta = spec.regularization.beta;
            sp.b_coeffs = monotone::SmoothingParams::default_b(n);
            sp.node_count = spec.regularization.node_count;
            sp.node_seed = spec.regularization.node_seed;
            return std::make_shared<monotone::SmoothedField>(lift, sp);
        }
        return lift;
    }
    }
    throw Error("unknown drift kind");
}

SpectralModel build_dirichlet_model(std::size_t n, const DriftSpec& drift, const SigmaSpec& sigma,
                                    std::size_t oversampling) {
    if (n < 1) throw Error("model dimension must be >= 1");
    Vector a(static_cast<Eigen::Index>(n));
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (std::size_t k = 0; k < n; ++k) a[static_cast<Eigen::Index>(k)] = -pi2 * static_cast<double>((k + 1) * (k + 1));
    std::shared_ptr<const NemytskiiLift> lift;
    FieldPtr field = build_drift(n, drift, oversampling, &lift);
    SpectralModel model(std::move(a), -pi2, sigma.matrix(n), std::move(field), drift.kind, sigma.inv_norm);
    if (!lift) {
        // Keep a quadrature grid for the G functional even without a nonlinearity.
        lift = std::make_shared<NemytskiiLift>(n, [](double s) { return s; }, oversampling * n);
    }
    model.set_lift(std::move(lift));
    return model;
}

SpectralModel build_explicit_model(const Vector& a_eigs, double omega, const DriftSpec& drift,
                                   const SigmaSpec& sigma) {
    const auto n = static_cast<std::size_t>(a_eigs.size());
    if (drift.kind == DriftKind::nemytskii)
        throw Error("explicit-eigenvalue models support zero or linear drift only");
    return SpectralModel(a_eigs, omega, sigma.matrix(n), build_drift(n, drift, 8), drift.kind, sigma.inv_norm);
}

double dissipativity_rate(const VectorField& field, const std::vector<std::pair<Vector, Vector>>& pairs) {
    double worst = -std::numeric_limits<double>::infinity();
    Vector fx, fy;
    for (const auto& [x, y] : pairs) {
        const Vector d = x - y;
        const double d2 = d.squaredNorm();
        if (d2 == 0.0) continue;
        field.evaluate(x, fx);
        field.evaluate(y, fy);
        worst = std::max(worst, (fx - fy).dot(d) / d2);
    }
    return worst;
}

std::vector<Vector> sample_points(std::size_t n, std::size_t count, double scale, std::uint64_t seed) {
    const NoiseSource source(seed, NoiseDomain::samples);
    std::vector<Vector> out;
    out.reserve(count);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < count; ++i) {
        source.normals(static_cast<std::uint32_t>(i), 0, row);
        Vector x = Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(n)) * scale;
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<std::pair<Vector, Vector>> sample_pairs(std::size_t n, std::size_t count, double scale,
                                                    std::uint64_t seed) {
    const std::vector<Vector> points = sample_points(n, 2 * count, scale, seed);
    std::vector<std::pair<Vector, Vector>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.emplace_back(points[2 * i], points[2 * i + 1]);
    return out;
}

Vector default_q(const Vector& lambda) {
    constexpr double eps = 1e-12;
    Vector q(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        const double target = std::pow(static_cast<double>(i + 1), 1.5);
        if (!(lambda[i] > target))
            throw InfeasibleQ(static_cast<std::size_t>(i + 1),
                              "lambda = " + std::to_string(lambda[i]) + " <= i^{3/2} = " + std::to_string(target));
        q[i] = std::clamp(target, eps, lambda[i] - eps);
    }
    // Constructing validates the remaining properties.
    ThetaFunctional check(lambda, q);
    return q;
}

ThetaFunctional::ThetaFunctional(Vector lambda, Vector q) : lambda_(std::move(lambda)), q_(std::move(q)) {
    require_dimension(static_cast<std::size_t>(lambda_.size()), static_cast<std::size_t>(q_.size()));
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
        const auto idx = static_cast<std::size_t>(i + 1);
        if (!(lambda_[i] > 0)) throw InfeasibleQ(idx, "lambda must be > 0");
        if (i > 0 && lambda_[i] < lambda_[i - 1]) throw InfeasibleQ(idx, "lambda must be nondecreasing");
        if (!(q_[i] > 0 && q_[i] < lambda_[i])) throw InfeasibleQ(idx, "need 0 < q < lambda");
        if (i > 0 && q_[i] / lambda_[i] > q_[i - 1] / lambda_[i - 1] * (1.0 + 1e-12))
            throw InfeasibleQ(idx, "q / lambda must be nonincreasing");
    }
    weights_ = lambda_.cwiseQuotient(q_);
}

double theta_shift(const SpectralModel& model) { return 1.0 + std::max(model.omega(), 0.0); }

ThetaFunctional ThetaFunctional::for_model(const SpectralModel& model, const std::optional<Vector>& q_override) {
    const Vector lambda = (Vector::Constant(model.a_eigs().size(), theta_shift(model)) - model.a_eigs()).eval();
    return ThetaFunctional(lambda, q_override ? *q_override : default_q(lambda));
}

double ThetaFunctional::operator()(const Vector& x) const {
    require_dimension(static_cast<std::size_t>(weights_.size()), static_cast<std::size_t>(x.size()));
    return weights_.dot(x.cwiseAbs2());
}

double theta_value(const ThetaFunctional& theta, const Vector& x) { return theta(x); }

double growth_transfer_constant(const SpectralModel& model, const ThetaFunctional& theta, int m,
                                const std::vector<Vector>& samples) {
    double c = 0.0;
    Vector fx;
    for (const Vector& x : samples) {
        model.drift().evaluate(x, fx);
        const double denom = 1.0 + std::pow(x.norm(), m) + std::sqrt(theta(x));
        c = std::max(c, fx.norm() / denom);
    }
    return c;
}

} // namespace spde::spectral
