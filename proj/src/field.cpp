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

#include "spde/field.hpp"

namespace spde {

void ZeroField::evaluate(const Vector& x, Vector& out) const {
    require_dimension(n_, static_cast<std::size_t>(x.size()));
    out.setZero(static_cast<Eigen::Index>(n_));
}

LinearField::LinearField(Matrix matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols())
        throw DimensionMismatch(static_cast<std::size_t>(matrix_.rows()),
                                static_cast<std::size_t>(matrix_.cols()));
}

void LinearField::evaluate(const Vector& x, Vector& out) const {
    require_dimension(dimension(), static_cast<std::size_t>(x.size()));
    out.noalias() = matrix_ * x;
}

void CoordinatewiseField::evaluate(const Vector& x, Vector& out) const {
    require_dimension(n_, static_cast<std::size_t>(x.size()));
    out.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = scalar_(x[i]);
}

void FunctionField::evaluate(const Vector& x, Vector& out) const {
    require_dimension(n_, static_cast<std::size_t>(x.size()));
    out.resize(x.size());
    fn_(x, out);
}

} // namespace spde
