#include "dfdepth/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dfdepth {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: invalid number for " + key + ": '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw std::invalid_argument("config: invalid integer for " + key + ": '" + v + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw std::invalid_argument("config: invalid unsigned integer for " + key + ": '" + v + "'");
    }
    return out;
}

}  // namespace

std::optional<SynthSpec> parse_synth_spec(const std::string& data) {
    if (data.rfind("synth:", 0) != 0) return std::nullopt;
    const auto second = data.find(':', 6);
    if (second == std::string::npos) {
        throw std::invalid_argument("config: synthetic spec must be synth:COUNT:SEED, got '" + data + "'");
    }
    SynthSpec spec;
    spec.count = parse_int("data", data.substr(6, second - 6));
    spec.seed = parse_u64("data", data.substr(second + 1));
    if (spec.count < 1) throw std::invalid_argument("config: synthetic count must be >= 1");
    return spec;
}

void TrainConfig::validate() const {
    model_config().validate();
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("config: alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    if (learning_rate < 0.0) throw std::invalid_argument("config: learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (min_valid < 0.0) throw std::invalid_argument("config: min_valid must be >= 0");
    if (precision != "f64" && precision != "f32") {
        throw std::invalid_argument("config: precision must be f64 or f32, got '" + precision + "'");
    }
    parse_synth_spec(data);  // throws on a malformed synth spec
}

ModelConfig TrainConfig::model_config() const {
    ModelConfig m;
    m.image_size = image_size;
    m.embed_dim = embed_dim;
    m.encoder_blocks = encoder_blocks;
    m.transformer_blocks = transformer_blocks;
    m.heads = heads;
    m.depth_scale = depth_scale;
    return m;
}

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "alpha = " << alpha << "\n";
    os << "learning_rate = " << learning_rate << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "epochs = " << epochs << "\n";
    os << "seed = " << seed << "\n";
    os << "image_size = " << image_size << "\n";
    os << "embed_dim = " << embed_dim << "\n";
    os << "encoder_blocks = " << encoder_blocks << "\n";
    os << "transformer_blocks = " << transformer_blocks << "\n";
    os << "heads = " << heads << "\n";
    os << "data = " << data << "\n";
    os << "depth_scale = " << depth_scale << "\n";
    os << "min_valid = " << min_valid << "\n";
    os << "precision = " << precision << "\n";
    os << "crop_offset_x = " << crop_offset_x << "\n";
    os << "crop_offset_y = " << crop_offset_y << "\n";
    return os.str();
}

TrainConfig TrainConfig::parse_text(const std::string& text) {
    TrainConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not 'key = value': '" + trim(line) + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        seen.insert(key);
        if (key == "alpha") cfg.alpha = parse_double(key, value);
        else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
        else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
        else if (key == "epochs") cfg.epochs = parse_int(key, value);
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "image_size") cfg.image_size = parse_int(key, value);
        else if (key == "embed_dim") cfg.embed_dim = parse_int(key, value);
        else if (key == "encoder_blocks") cfg.encoder_blocks = parse_int(key, value);
        else if (key == "transformer_blocks") cfg.transformer_blocks = parse_int(key, value);
        else if (key == "heads") cfg.heads = parse_int(key, value);
        else if (key == "data") cfg.data = value;
        else if (key == "depth_scale") cfg.depth_scale = parse_double(key, value);
        else if (key == "min_valid") cfg.min_valid = parse_double(key, value);
        else if (key == "precision") cfg.precision = value;
        else if (key == "crop_offset_x") cfg.crop_offset_x = parse_int(key, value);
        else if (key == "crop_offset_y") cfg.crop_offset_y = parse_int(key, value);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    // Synthetic depth maps are dense and exact, so nothing needs masking out.
    if (!seen.count("min_valid") && parse_synth_spec(cfg.data)) cfg.min_valid = 0.0;
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

void apply_precision(const TrainConfig& cfg) {
    set_precision(cfg.precision == "f32" ? Precision::f32 : Precision::f64);
}

}  // namespace dfdepth
