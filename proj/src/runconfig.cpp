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

#include "iqc/runconfig.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace iqc {

namespace {

std::string trim(const std::string& s)
{
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& value)
{
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        require_arg(pos == value.size(), key + ": trailing characters in integer");
        return v;
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument(key + ": expected an integer, got '" + value + "'");
    } catch (const std::out_of_range&) {
        throw std::invalid_argument(key + ": integer out of range");
    }
}

double to_double(const std::string& key, const std::string& value)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        require_arg(pos == value.size(), key + ": trailing characters in number");
        return v;
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument(key + ": expected a number, got '" + value + "'");
    } catch (const std::out_of_range&) {
        throw std::invalid_argument(key + ": number out of range");
    }
}

bool to_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1")
        return true;
    if (value == "false" || value == "0")
        return false;
    throw std::invalid_argument(key + ": expected true/false, got '" + value + "'");
}

std::array<int, 4> to_int4(const std::string& key, const std::string& value)
{
    std::array<int, 4> out {};
    std::stringstream ss(value);
    std::string part;
    int n = 0;
    while (std::getline(ss, part, ',')) {
        require_arg(n < 4, key + ": expected exactly 4 comma-separated integers");
        out[static_cast<std::size_t>(n++)] = to_int(key, trim(part));
    }
    require_arg(n == 4, key + ": expected exactly 4 comma-separated integers");
    return out;
}

} // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value)
{
    BackboneConfig& b = cfg.model.backbone;
    if (key == "model.embed_dim")
        b.embed_dim = to_int(key, value);
    else if (key == "model.depths")
        b.depths = to_int4(key, value);
    else if (key == "model.dims")
        b.dims = to_int4(key, value);
    else if (key == "model.heads")
        b.heads = to_int4(key, value);
    else if (key == "model.kernel")
        b.kernel = to_int(key, value);
    else if (key == "model.mlp_ratio")
        b.mlp_ratio = to_int(key, value);
    else if (key == "model.input_size")
        b.input_size = to_int(key, value);
    else if (key == "model.k")
        cfg.model.select = to_int(key, value);
    else if (key == "plan.m")
        cfg.model.viewports = to_int(key, value);
    else if (key == "plan.offset_deg")
        cfg.model.plan_offset_deg = to_double(key, value);
    else if (key == "plan.fov")
        cfg.model.fov_deg = to_double(key, value);
    else if (key == "plan.lon0_deg")
        cfg.model.lon0_deg = to_double(key, value);
    else if (key == "ablate.no_dspn")
        cfg.model.enable_dspn = !to_bool(key, value);
    else if (key == "ablate.no_msfs")
        cfg.model.enable_msfs = !to_bool(key, value);
    else if (key == "ablate.no_vpfs")
        cfg.model.enable_vpfs = !to_bool(key, value);
    else if (key == "train.epochs")
        cfg.train.epochs = to_int(key, value);
    else if (key == "train.batch")
        cfg.train.batch = to_int(key, value);
    else if (key == "train.lr_init")
        cfg.train.lr_init = to_double(key, value);
    else if (key == "train.lr_min")
        cfg.train.lr_min = to_double(key, value);
    else if (key == "train.frac")
        cfg.train.train_frac = to_double(key, value);
    else if (key == "train.gamma")
        cfg.train.gamma = to_double(key, value);
    else if (key == "train.aug")
        cfg.train.aug_repeat = to_int(key, value);
    else if (key == "train.eval_rolls")
        cfg.train.eval_rolls = to_int(key, value);
    else if (key == "train.out_dir")
        cfg.train.out_dir = value;
    else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        cfg.train.seed = cfg.seed;
    } else
        throw std::invalid_argument("unknown configuration key '" + key + "'");
    cfg.resolved[key] = value;
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream is(path);
    require_state(is.good(), "cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::size_t eq = line.find('=');
        require_state(eq != std::string::npos,
                      path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require_state(!key.empty(), path + ":" + std::to_string(lineno) + ": empty key");
        apply_setting(cfg, key, value);
    }
    return cfg;
}

void echo_config(std::ostream& os, const RunConfig& cfg)
{
    const BackboneConfig& b = cfg.model.backbone;
    os << "config: model.embed_dim=" << b.embed_dim;
    os << " model.depths=" << b.depths[0] << ',' << b.depths[1] << ',' << b.depths[2] << ','
       << b.depths[3];
    os << " model.dims=" << b.dims[0] << ',' << b.dims[1] << ',' << b.dims[2] << ',' << b.dims[3];
    os << " model.heads=" << b.heads[0] << ',' << b.heads[1] << ',' << b.heads[2] << ','
       << b.heads[3];
    os << " model.kernel=" << b.kernel;
    os << " model.mlp_ratio=" << b.mlp_ratio;
    os << " model.input_size=" << b.input_size;
    os << " model.k=" << cfg.model.select;
    os << " plan.m=" << cfg.model.viewports;
    os << " plan.offset_deg=" << cfg.model.plan_offset_deg;
    os << " plan.fov=" << cfg.model.fov_deg;
    os << " plan.lon0_deg=" << cfg.model.lon0_deg;
    os << " ablate.no_dspn=" << (cfg.model.enable_dspn ? "false" : "true");
    os << " ablate.no_msfs=" << (cfg.model.enable_msfs ? "false" : "true");
    os << " ablate.no_vpfs=" << (cfg.model.enable_vpfs ? "false" : "true");
    os << " train.epochs=" << cfg.train.epochs;
    os << " train.batch=" << cfg.train.batch;
    os << " train.lr_init=" << cfg.train.lr_init;
    os << " train.lr_min=" << cfg.train.lr_min;
    os << " train.frac=" << cfg.train.train_frac;
    os << " train.gamma=" << cfg.train.gamma;
    os << " train.aug=" << cfg.train.aug_repeat;
    os << " train.eval_rolls=" << cfg.train.eval_rolls;
    os << " train.out_dir=" << cfg.train.out_dir;
    os << " seed=" << cfg.seed << "\n";
}

} // namespace iqc
