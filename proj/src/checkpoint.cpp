#include "dfdepth/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace dfdepth {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Cursor {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size()) {
            throw std::runtime_error("checkpoint: truncated file while reading " + std::string(what) +
                                     " at byte offset " + std::to_string(pos));
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::vector<double> text_to_values(const std::string& text) {
    std::vector<double> v(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) v[i] = static_cast<double>(static_cast<std::uint8_t>(text[i]));
    return v;
}

std::string values_to_text(const std::vector<double>& values) {
    std::string s(values.size(), '\0');
    for (std::size_t i = 0; i < values.size(); ++i) s[i] = static_cast<char>(static_cast<std::uint8_t>(values[i]));
    return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const bool f32 = ckpt.config.precision == "f32";
    const std::uint8_t width = f32 ? 4 : 8;

    std::vector<NamedTensorData> all = ckpt.tensors;
    {
        NamedTensorData cfg_blob;
        cfg_blob.name = "config.text";
        const std::string text = ckpt.config.to_text();
        cfg_blob.shape = {static_cast<int>(text.size())};
        cfg_blob.values = text_to_values(text);
        all.push_back(std::move(cfg_blob));
        NamedTensorData step;
        step.name = "optimizer.step";
        step.shape = {1};
        step.values = {static_cast<double>(ckpt.step)};
        all.push_back(std::move(step));
    }

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    out.push_back(static_cast<char>(width));
    put_u32(out, static_cast<std::uint32_t>(all.size()));
    for (const auto& t : all) {
        if (t.name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long");
        if (t.values.size() != numel(t.shape)) {
            throw std::invalid_argument("checkpoint: value count mismatch for " + t.name);
        }
        put_u16(out, static_cast<std::uint16_t>(t.name.size()));
        out.append(t.name);
        out.push_back(static_cast<char>(t.shape.size()));
        for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        if (f32) {
            for (double v : t.values) {
                const float fv = static_cast<float>(v);
                std::uint32_t bits = 0;
                std::memcpy(&bits, &fv, 4);
                put_u32(out, bits);
            }
        } else {
            for (double v : t.values) {
                std::uint64_t bits = 0;
                std::memcpy(&bits, &v, 8);
                put_u64(out, bits);
            }
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Cursor cur{buf};

    const std::string magic = cur.bytes(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path + " (not a DFCK file)");
    }
    const std::uint32_t version = cur.u32("version");
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " (expected " + std::to_string(kVersion) + ")");
    }
    const std::uint8_t width = cur.u8("value width");
    if (width != 4 && width != 8) {
        throw std::runtime_error("checkpoint: invalid value width " + std::to_string(width));
    }
    const std::uint32_t count = cur.u32("tensor count");

    Checkpoint ckpt;
    std::string config_text;
    bool saw_config = false;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensorData t;
        const std::uint16_t name_len = cur.u16("name length");
        t.name = cur.bytes(name_len, "name");
        const std::uint8_t ndim = cur.u8("ndim");
        for (std::uint8_t d = 0; d < ndim; ++d) {
            t.shape.push_back(static_cast<int>(cur.u32("dimension")));
        }
        const std::size_t n = numel(t.shape);
        t.values.resize(n);
        if (width == 4) {
            for (std::size_t j = 0; j < n; ++j) {
                const std::uint32_t bits = cur.u32("values");
                float fv = 0.0f;
                std::memcpy(&fv, &bits, 4);
                t.values[j] = static_cast<double>(fv);
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                const std::uint64_t bits = cur.u64("values");
                double dv = 0.0;
                std::memcpy(&dv, &bits, 8);
                t.values[j] = dv;
            }
        }
        if (t.name == "config.text") {
            config_text = values_to_text(t.values);
            saw_config = true;
        } else if (t.name == "optimizer.step") {
            ckpt.step = static_cast<std::int64_t>(t.values.at(0));
        } else {
            ckpt.tensors.push_back(std::move(t));
        }
    }
    if (!saw_config) throw std::runtime_error("checkpoint: missing config snapshot in " + path);
    ckpt.config = TrainConfig::parse_text(config_text);
    return ckpt;
}

Checkpoint make_checkpoint(const TrainConfig& cfg, DepthModel& model, const AdamState* adam) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    for (const auto& [name, p] : model.params()) {
        ckpt.tensors.push_back({name, p.shape(), {p.data().begin(), p.data().end()}});
    }
    for (const auto& [name, buf] : model.buffers()) {
        ckpt.tensors.push_back({name, {static_cast<int>(buf->size())}, *buf});
    }
    if (adam) {
        ckpt.step = adam->t;
        const auto& params = model.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            ckpt.tensors.push_back({"optimizer.m." + params[i].first, params[i].second.shape(), adam->m[i]});
            ckpt.tensors.push_back({"optimizer.v." + params[i].first, params[i].second.shape(), adam->v[i]});
        }
    }
    return ckpt;
}

void restore_model(const Checkpoint& ckpt, DepthModel& model) {
    std::map<std::string, const NamedTensorData*> by_name;
    for (const auto& t : ckpt.tensors) by_name[t.name] = &t;

    for (auto& [name, p] : model.params()) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: missing parameter " + name);
        if (it->second->shape != p.shape()) {
            throw std::runtime_error("checkpoint: shape mismatch for " + name + ": file " +
                                     shape_str(it->second->shape) + " vs model " + shape_str(p.shape()));
        }
        p.set_data(it->second->values);
    }
    for (auto& [name, buf] : model.buffers()) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: missing buffer " + name);
        if (it->second->values.size() != buf->size()) {
            throw std::runtime_error("checkpoint: size mismatch for buffer " + name);
        }
        *buf = it->second->values;
    }
}

bool restore_adam(const Checkpoint& ckpt, DepthModel& model, AdamState& state) {
    std::map<std::string, const NamedTensorData*> by_name;
    for (const auto& t : ckpt.tensors) by_name[t.name] = &t;

    const auto& params = model.params();
    state.init_like(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto mi = by_name.find("optimizer.m." + params[i].first);
        const auto vi = by_name.find("optimizer.v." + params[i].first);
        if (mi == by_name.end() || vi == by_name.end()) return false;
        if (mi->second->values.size() != params[i].second.size() ||
            vi->second->values.size() != params[i].second.size()) {
            throw std::runtime_error("checkpoint: optimizer moment size mismatch for " + params[i].first);
        }
        state.m[i] = mi->second->values;
        state.v[i] = vi->second->values;
    }
    state.t = ckpt.step;
    return true;
}

}  // namespace dfdepth
