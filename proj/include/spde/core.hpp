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
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace spde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IterationLimit : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : Error("dimension mismatch: expected " + std::to_string(expected) +
                ", got " + std::to_string(got)) {}
};

class InvalidMap : public Error {
public:
    using Error::Error;
};

class InvalidSigma : public Error {
public:
    using Error::Error;
};

class SingularSigma : public Error {
public:
    using Error::Error;
};

class InfeasibleQ : public Error {
public:
    InfeasibleQ(std::size_t index, const std::string& why)
        : Error("infeasible q at index " + std::to_string(index) + ": " + why),
          index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

/// Raised when an integrator step produces inf/nan; usually dt is too
/// large for the drift's growth.
class NonFiniteState : public Error {
public:
    explicit NonFiniteState(std::size_t step)
        : Error("non-finite state at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class NotLinearModel : public Error {
public:
    using Error::Error;
};

class DivergentTail : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

inline void require_dimension(std::size_t expected, std::size_t got) {
    if (expected != got) throw DimensionMismatch(expected, got);
}

} // namespace spde
