// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace iqc {

inline constexpr double kPi = std::numbers::pi_v<double>;

// All warnings go to stderr so stdout stays machine-parsable.
inline void warn(const std::string& msg)
{
    std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

// Error conventions used across the library:
//   invalid_argument - a caller passed a bad value
//   runtime_error    - bad state, configuration, or I/O
//   domain_error     - statistically or numerically degenerate input
inline void require_arg(bool cond, const std::string& msg)
{
    if (!cond)
        throw std::invalid_argument(msg);
}

inline void require_state(bool cond, const std::string& msg)
{
    if (!cond)
        throw std::runtime_error(msg);
}

inline void require_domain(bool cond, const std::string& msg)
{
    if (!cond)
        throw std::domain_error(msg);
}

} // namespace iqc
