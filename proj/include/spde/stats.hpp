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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace spde {

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Mean and standard error (sample std / sqrt(N)), summed in index order.
inline Estimate mean_and_se(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n == 0) return {};
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(n);
    if (n < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

/// Batch-means estimate for a correlated series: the series is cut into
/// `batches` contiguous blocks and the standard error is taken across the
/// block means.
inline Estimate batch_means(std::span<const double> series, std::size_t batches = 32) {
    const std::size_t n = series.size();
    if (n < 2 * batches) return mean_and_se(series);
    const std::size_t len = n / batches;
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += series[i];
        means[b] = s / static_cast<double>(len);
    }
    Estimate e = mean_and_se(means);
    // Use every sample for the point estimate.
    double total = 0.0;
    for (double v : series) total += v;
    e.value = total / static_cast<double>(n);
    return e;
}

} // namespace spde
