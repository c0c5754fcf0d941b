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

#include <cstddef>
#include <functional>
#include <memory>

#include "spde/core.hpp"

namespace spde {

/// A map R^n -> R^n. Implementations must be pure and safe to call from
/// several threads at once.
class VectorField {
public:
    virtual ~VectorField() = default;
    virtual std::size_t dimension() const = 0;
    /// `out` is resized if needed; callers reuse it to avoid allocation.
    virtual void evaluate(const Vector& x, Vector& out) const = 0;

    Vector operator()(const Vector& x) const {
        Vector out(static_cast<Eigen::Index>(dimension()));
        evaluate(x, out);
        return out;
    }
};

using FieldPtr = std::shared_ptr<const VectorField>;

class ZeroField final : public VectorField {
public:
    explicit ZeroField(std::size_t n) : n_(n) {}
    std::size_t dimension() const override { return n_; }
    void evaluate(const Vector& x, Vector& out) const override;

private:
    std::size_t n_;
};

/// x -> L x for a fixed matrix L.
class LinearField final : public VectorField {
public:
    explicit LinearField(Matrix matrix);
    std::size_t dimension() const override { return static_cast<std::size_t>(matrix_.rows()); }
    void evaluate(const Vector& x, Vector& out) const override;
    const Matrix& matrix() const { return matrix_; }

private:
    Matrix matrix_;
};

/// Applies one scalar function to every coordinate.
class CoordinatewiseField final : public VectorField {
public:
    CoordinatewiseField(std::size_t n, std::function<double(double)> scalar)
        : n_(n), scalar_(std::move(scalar)) {}
    std::size_t dimension() const override { return n_; }
    void evaluate(const Vector& x, Vector& out) const override;

private:
    std::size_t n_;
    std::function<double(double)> scalar_;
};

/// Adapter for ad-hoc fields (tests, oracles).
class FunctionField final : public VectorField {
public:
    using Fn = std::function<void(const Vector&, Vector&)>;
    FunctionField(std::size_t n, Fn fn) : n_(n), fn_(std::move(fn)) {}
    std::size_t dimension() const override { return n_; }
    void evaluate(const Vector& x, Vector& out) const override;

private:
    std::size_t n_;
    Fn fn_;
};

} // namespace spde
