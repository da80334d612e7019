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

#include "iqc/model.hpp"

#include <cstring>
#include <fstream>

namespace iqc {

namespace {

constexpr char kMagic[4] = {'I', 'Q', 'C', '1'};

void put_u32(std::ostream& os, std::uint32_t v)
{
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is)
{
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
           | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v)
{
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is)
{
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void save_checkpoint(const Model& model, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    require_state(os.good(), "cannot write " + path);
    os.write(kMagic, 4);
    const ModelConfig& c = model.cfg;
    put_u32(os, static_cast<std::uint32_t>(c.backbone.embed_dim));
    for (int d : c.backbone.depths)
        put_u32(os, static_cast<std::uint32_t>(d));
    for (int d : c.backbone.dims)
        put_u32(os, static_cast<std::uint32_t>(d));
    for (int d : c.backbone.heads)
        put_u32(os, static_cast<std::uint32_t>(d));
    put_u32(os, static_cast<std::uint32_t>(c.backbone.kernel));
    put_u32(os, static_cast<std::uint32_t>(c.backbone.mlp_ratio));
    put_u32(os, static_cast<std::uint32_t>(c.backbone.input_size));
    put_u32(os, static_cast<std::uint32_t>(c.viewports));
    put_u32(os, static_cast<std::uint32_t>(c.select));
    put_f64(os, c.fov_deg);
    put_f64(os, c.plan_offset_deg);
    put_f64(os, c.lon0_deg);
    put_u32(os, (c.enable_dspn ? 1u : 0u) | (c.enable_msfs ? 2u : 0u)
                    | (c.enable_vpfs ? 4u : 0u));
    const std::vector<std::string> names = model.store.names();
    put_u32(os, static_cast<std::uint32_t>(names.size()));
    for (const std::string& name : names) {
        const Array& value = model.store.value(name);
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(value.rank()));
        for (int d : value.shape)
            put_u32(os, static_cast<std::uint32_t>(d));
        static_assert(sizeof(float) == 4);
        os.write(reinterpret_cast<const char*>(value.data.data()),
                 static_cast<std::streamsize>(value.numel() * sizeof(float)));
    }
    require_state(os.good(), "short write to " + path);
}

Model load_checkpoint(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    require_state(is.good(), "cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    require_state(is.good() && std::memcmp(magic, kMagic, 4) == 0,
                  path + ": not a model checkpoint");
    ModelConfig c;
    c.backbone.embed_dim = static_cast<int>(get_u32(is));
    for (int& d : c.backbone.depths)
        d = static_cast<int>(get_u32(is));
    for (int& d : c.backbone.dims)
        d = static_cast<int>(get_u32(is));
    for (int& d : c.backbone.heads)
        d = static_cast<int>(get_u32(is));
    c.backbone.kernel = static_cast<int>(get_u32(is));
    c.backbone.mlp_ratio = static_cast<int>(get_u32(is));
    c.backbone.input_size = static_cast<int>(get_u32(is));
    c.viewports = static_cast<int>(get_u32(is));
    c.select = static_cast<int>(get_u32(is));
    c.fov_deg = get_f64(is);
    c.plan_offset_deg = get_f64(is);
    c.lon0_deg = get_f64(is);
    const std::uint32_t flags = get_u32(is);
    c.enable_dspn = (flags & 1u) != 0;
    c.enable_msfs = (flags & 2u) != 0;
    c.enable_vpfs = (flags & 4u) != 0;
    require_state(is.good(), path + ": truncated configuration block");
    Model model(c);
    model.init_zero();
    const std::uint32_t n_records = get_u32(is);
    require_state(n_records == model.store.size(),
                  path + ": parameter count does not match the configuration");
    for (std::uint32_t r = 0; r < n_records; ++r) {
        const std::uint32_t name_len = get_u32(is);
        require_state(is.good() && name_len > 0 && name_len < 4096,
                      path + ": bad parameter name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        require_state(model.store.has(name), path + ": unexpected parameter '" + name + "'");
        Array& value = model.store.value(name);
        const std::uint32_t rank = get_u32(is);
        require_state(rank == static_cast<std::uint32_t>(value.rank()),
                      path + ": rank mismatch for '" + name + "'");
        for (std::uint32_t d = 0; d < rank; ++d)
            require_state(static_cast<int>(get_u32(is)) == value.shape[d],
                          path + ": shape mismatch for '" + name + "'");
        is.read(reinterpret_cast<char*>(value.data.data()),
                static_cast<std::streamsize>(value.numel() * sizeof(float)));
        require_state(is.gcount()
                          == static_cast<std::streamsize>(value.numel() * sizeof(float)),
                      path + ": truncated data for '" + name + "'");
    }
    return model;
}

} // namespace iqc
