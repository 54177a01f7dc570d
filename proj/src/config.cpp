#include "adasti/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace adasti {

MissingPattern parse_missing_pattern(const std::string& s) {
    if (s == "random") return MissingPattern::random;
    if (s == "block") return MissingPattern::block;
    if (s == "native") return MissingPattern::native;
    throw ContractError("unknown missing pattern '" + s + "' (expected random, block or native)");
}

std::string to_string(MissingPattern p) {
    switch (p) {
        case MissingPattern::block: return "block";
        case MissingPattern::native: return "native";
        default: return "random";
    }
}

ModelConfig ExperimentConfig::model(Index nodes) const {
    ModelConfig m;
    m.nodes = nodes;
    m.length = window;
    m.channels = channels;
    m.mlp_hidden = mlp_hidden;
    m.heads = heads;
    m.layers = layers;
    m.step_embedding = step_embedding;
    m.state_dim = state_dim;
    m.feature_width = feature_width;
    m.feature_heads = feature_heads;
    m.stc_kernel = stc_kernel;
    m.diffusion_steps = diffusion_steps;
    m.positional_encoding = positional_encoding;
    m.use_bis4pi = !no_bis4pi;
    m.gated_attention = !no_gated_attention;
    m.share_directions = share_directions;
    m.literal_reconstruction = literal_reconstruction;
    m.aux = aux_placement;
    return m;
}

NoiseSchedule ExperimentConfig::noise_schedule() const {
    return make_schedule(diffusion_steps, beta_min, beta_max, schedule);
}

void ExperimentConfig::validate(bool check_files) const {
    require(!data.empty(), "config: 'data' is required");
    require(adjacency.empty() != distances.empty(), "config: exactly one of 'adjacency' or 'distances' is required");
    if (check_files) {
        for (const auto* p : {&data, &adjacency, &distances, &mask})
            if (!p->empty())
                require(std::filesystem::exists(*p), "config: file not found: " + *p);
    }
    require(threshold >= 0.0 && threshold < 1.0, "config: threshold must be in [0, 1)");
    require(window >= 1 && stride >= 0, "config: window must be >= 1 and stride >= 0");
    require(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction < 1.0,
            "config: need train_fraction > 0, val_fraction >= 0 and their sum < 1");
    if (pattern != MissingPattern::native || !mask.empty())
        require(rate > 0.0 && rate < 1.0, "config: rate must be in (0, 1)");
    require(block_nodes >= 1 && block_steps >= 1, "config: block_nodes and block_steps must be >= 1");
    require(lambda >= 0.0, "config: lambda must be >= 0");
    require(target_fraction > 0.0 && target_fraction < 1.0, "config: target_fraction must be in (0, 1)");
    require(learning_rate > 0.0, "config: learning_rate must be > 0");
    require(epochs >= 1 && batch_size >= 1 && validate_every >= 1, "config: epochs, batch_size, validate_every must be >= 1");
    require(k >= 1 && val_k >= 1, "config: k and val_k must be >= 1");
    model(1).validate();
    (void)noise_schedule();
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ContractError("expected a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) throw ContractError("expected a number, got '" + v + "'");
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
    std::function<void(ExperimentConfig&, const std::string&, const std::filesystem::path&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
    bool identity = true;  // part of the fingerprint
};

using FieldTable = std::vector<std::pair<std::string, Field>>;

template <class M>
Field path_field(M ExperimentConfig::*m, bool identity = true) {
    return {[m](ExperimentConfig& c, const std::string& v, const std::filesystem::path& base) {
                std::filesystem::path p(v);
                c.*m = (!v.empty() && p.is_relative() && !base.empty()) ? (base / p).lexically_normal().string() : v;
            },
            [m](const ExperimentConfig& c) { return c.*m; }, identity};
}

Field string_field(std::string ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) { c.*m = v; },
            [m](const ExperimentConfig& c) { return c.*m; }};
}

Field index_field(Index ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) {
                c.*m = parse_number<Index>(v);
            },
            [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field real_field(double ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) {
                c.*m = parse_number<double>(v);
            },
            [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

Field bool_field(bool ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) { c.*m = parse_bool(v); },
            [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

const FieldTable& fields() {
    static const FieldTable table = {
        {"data", path_field(&ExperimentConfig::data)},
        {"missing_token", string_field(&ExperimentConfig::missing_token)},
        {"adjacency", path_field(&ExperimentConfig::adjacency)},
        {"distances", path_field(&ExperimentConfig::distances)},
        {"threshold", real_field(&ExperimentConfig::threshold)},
        {"mask", path_field(&ExperimentConfig::mask)},
        {"window", index_field(&ExperimentConfig::window)},
        {"stride", index_field(&ExperimentConfig::stride)},
        {"train_fraction", real_field(&ExperimentConfig::train_fraction)},
        {"val_fraction", real_field(&ExperimentConfig::val_fraction)},
        {"pattern",
         {[](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) {
              c.pattern = parse_missing_pattern(v);
          },
          [](const ExperimentConfig& c) { return to_string(c.pattern); }}},
        {"rate", real_field(&ExperimentConfig::rate)},
        {"block_nodes", index_field(&ExperimentConfig::block_nodes)},
        {"block_steps", index_field(&ExperimentConfig::block_steps)},
        {"channels", index_field(&ExperimentConfig::channels)},
        {"mlp_hidden", index_field(&ExperimentConfig::mlp_hidden)},
        {"heads", index_field(&ExperimentConfig::heads)},
        {"layers", index_field(&ExperimentConfig::layers)},
        {"step_embedding", index_field(&ExperimentConfig::step_embedding)},
        {"state_dim", index_field(&ExperimentConfig::state_dim)},
        {"feature_width", index_field(&ExperimentConfig::feature_width)},
        {"feature_heads", index_field(&ExperimentConfig::feature_heads)},
        {"stc_kernel", index_field(&ExperimentConfig::stc_kernel)},
        {"positional_encoding", bool_field(&ExperimentConfig::positional_encoding)},
        {"share_directions", bool_field(&ExperimentConfig::share_directions)},
        {"aux_placement",
         {[](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) {
              c.aux_placement = parse_aux_placement(v);
          },
          [](const ExperimentConfig& c) { return to_string(c.aux_placement); }}},
        {"diffusion_steps", index_field(&ExperimentConfig::diffusion_steps)},
        {"beta_min", real_field(&ExperimentConfig::beta_min)},
        {"beta_max", real_field(&ExperimentConfig::beta_max)},
        {"schedule",
         {[](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) {
              c.schedule = parse_schedule_kind(v);
          },
          [](const ExperimentConfig& c) { return to_string(c.schedule); }}},
        {"lambda", real_field(&ExperimentConfig::lambda)},
        {"target_fraction", real_field(&ExperimentConfig::target_fraction)},
        {"learning_rate", real_field(&ExperimentConfig::learning_rate)},
        {"epochs", index_field(&ExperimentConfig::epochs)},
        {"batch_size", index_field(&ExperimentConfig::batch_size)},
        {"validate_every", index_field(&ExperimentConfig::validate_every)},
        {"val_k", index_field(&ExperimentConfig::val_k)},
        {"k", index_field(&ExperimentConfig::k)},
        {"seed",
         {[](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) {
              c.seed = parse_number<std::uint64_t>(v);
          },
          [](const ExperimentConfig& c) { return std::to_string(c.seed); }}},
        {"no_bis4pi", bool_field(&ExperimentConfig::no_bis4pi)},
        {"no_gated_attention", bool_field(&ExperimentConfig::no_gated_attention)},
        {"literal_reverse_coeffs", bool_field(&ExperimentConfig::literal_reverse_coeffs)},
        {"literal_reconstruction", bool_field(&ExperimentConfig::literal_reconstruction)},
        {"checkpoint", path_field(&ExperimentConfig::checkpoint, false)},
        {"report", path_field(&ExperimentConfig::report, false)},
        {"trace", path_field(&ExperimentConfig::trace, false)},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    std::map<std::string, const Field*> lookup;
    for (const auto& [k, f] : fields()) lookup[k] = &f;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        const auto it = lookup.find(key);
        if (it == lookup.end()) throw ParseError("unknown key '" + key + "'", lineno);
        if (!seen.insert(key).second) throw ParseError("duplicate key '" + key + "'", lineno);
        try {
            it->second->set(cfg, value, base_dir);
        } catch (const ContractError& e) {
            throw ParseError(key + ": " + e.what(), lineno);
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string to_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [k, f] : fields()) out += k + " = " + f.get(cfg) + "\n";
    return out;
}

std::uint64_t fingerprint(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, f] : fields()) {
        if (!f.identity) continue;
        for (const char c : k + "=" + f.get(cfg) + "\n") {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fp;
    return os.str();
}

}  // namespace adasti
