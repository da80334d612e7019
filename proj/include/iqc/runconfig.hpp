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

#include "iqc/model.hpp"
#include "iqc/training.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace iqc {

// Fully resolved run settings: a flat key=value file overlaid by command
// flags.  Every command echoes the resolved state, so a log line is
// enough to reproduce a run.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::uint64_t seed = 0;

    // Keys whose values were set by file or flag, in resolution order.
    std::map<std::string, std::string> resolved;
};

// Parses "key = value" lines; '#' starts a comment, blank lines are
// ignored.  Unknown keys fail loudly.
RunConfig load_run_config(const std::string& path);

// Applies one key=value setting on top of an existing config.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// One-line-per-key echo of the resolved configuration.
void echo_config(std::ostream& os, const RunConfig& cfg);

} // namespace iqc
