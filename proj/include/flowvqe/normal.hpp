// Copyright 2026 The flowgen-vqe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

namespace flowvqe::normal {

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178032973640562;

/// Standard normal CDF.
double cdf(double x);

/// Inverse standard normal CDF (Wichura AS241, PPND16). Relative accuracy
/// is around 1e-16 on (0, 1). Returns +-infinity at the endpoints.
double quantile(double p);

/// log of the standard normal density.
inline double log_pdf(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

} // namespace flowvqe::normal
