#include "adasti/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace adasti {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'A', 'S', 'T', 'I', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

class Writer {
public:
    explicit Writer(const std::filesystem::path& p) : out_(p, std::ios::binary) {
        if (!out_) throw ContractError("cannot write checkpoint " + p.string());
    }
    template <class T>
    void pod(const T& v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void u64(std::uint64_t v) { pod(v); }
    void i64(Index v) { pod(static_cast<std::int64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void doubles(const double* p, Index n) { out_.write(reinterpret_cast<const char*>(p), n * 8); }
    void tensor(const Tensor& t) {
        u64(static_cast<std::uint64_t>(t.rank()));
        for (Index d : t.shape()) i64(d);
        doubles(t.data(), t.size());
    }
    void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
    void finish() {
        out_.flush();
        if (!out_) throw ContractError("checkpoint write failed");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& p) : in_(p, std::ios::binary) {
        if (!in_) throw ContractError("cannot open checkpoint " + p.string());
    }
    template <class T>
    T pod() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw FormatError("checkpoint truncated");
        return v;
    }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    Index i64() { return static_cast<Index>(pod<std::int64_t>()); }
    Index count(std::uint64_t limit = 1ULL << 32) {
        const auto n = u64();
        if (n > limit) throw FormatError("checkpoint corrupt: implausible length " + std::to_string(n));
        return static_cast<Index>(n);
    }
    std::string str() {
        std::string s(static_cast<std::size_t>(count()), '\0');
        in_.read(s.data(), static_cast<std::streamsize>(s.size()));
        if (!in_) throw FormatError("checkpoint truncated");
        return s;
    }
    void doubles(double* p, Index n) {
        in_.read(reinterpret_cast<char*>(p), n * 8);
        if (!in_) throw FormatError("checkpoint truncated");
    }
    Tensor tensor() {
        const Index rank = count(8);
        Shape s(static_cast<std::size_t>(rank));
        for (auto& d : s) {
            d = i64();
            if (d < 0 || d > (1LL << 32)) throw FormatError("checkpoint corrupt: bad tensor dimension");
        }
        Tensor t(s);
        doubles(t.data(), t.size());
        return t;
    }
    void raw(char* p, std::size_t n) {
        in_.read(p, static_cast<std::streamsize>(n));
        if (!in_) throw FormatError("checkpoint truncated");
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::ifstream in_;
};

void write_matrix(Writer& w, const data::Matrix& m) {
    w.i64(m.rows());
    w.i64(m.cols());
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
    w.doubles(r.data(), r.size());
}

data::Matrix read_matrix(Reader& r) {
    const Index rows = r.i64(), cols = r.i64();
    if (rows < 0 || cols < 0 || rows > (1 << 20) || cols > (1 << 20)) throw FormatError("checkpoint corrupt: bad matrix");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
    r.doubles(m.data(), m.size());
    return m;
}

void write_vector(Writer& w, const Eigen::VectorXd& v) {
    w.i64(v.size());
    w.doubles(v.data(), v.size());
}

Eigen::VectorXd read_vector(Reader& r) {
    Eigen::VectorXd v(r.count(1 << 20));
    r.doubles(v.data(), v.size());
    return v;
}

}  // namespace

ExperimentConfig Checkpoint::config() const { return parse_config(config_text); }

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const AdaSti& model, const Adam* optimizer, Index epoch,
                           const Rng& rng, const data::NormStats& stats, const std::vector<std::string>& node_ids) {
    Checkpoint c;
    c.config_text = to_text(cfg);
    c.fingerprint = fingerprint(cfg);
    c.epoch = epoch;
    c.rng_state = rng.serialize();
    c.node_ids = node_ids;
    c.adjacency = model.adjacency();
    c.stats = stats;
    c.names = model.params().names();
    c.params = model.params().values();
    if (optimizer) {
        c.adam_steps = optimizer->steps();
        c.adam_m = optimizer->first_moment();
        c.adam_v = optimizer->second_moment();
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    require(c.names.size() == c.params.size(), "checkpoint: names/params length mismatch");
    Writer w(path);
    w.raw(kMagic, sizeof kMagic);
    w.pod(Checkpoint::kVersion);
    w.u64(c.fingerprint);
    w.str(c.config_text);
    w.i64(c.epoch);
    w.str(c.rng_state);
    w.u64(c.node_ids.size());
    for (const auto& id : c.node_ids) w.str(id);
    write_matrix(w, c.adjacency);
    write_vector(w, c.stats.mean);
    write_vector(w, c.stats.std);
    w.u64(c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i) {
        w.str(c.names[i]);
        w.tensor(c.params[i]);
    }
    const bool has_opt = !c.adam_m.empty();
    w.pod<std::uint8_t>(has_opt ? 1 : 0);
    if (has_opt) {
        w.i64(c.adam_steps);
        for (std::size_t i = 0; i < c.params.size(); ++i) {
            w.tensor(c.adam_m[i]);
            w.tensor(c.adam_v[i]);
        }
    }
    w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[sizeof kMagic];
    try {
        r.raw(magic, sizeof magic);
    } catch (const FormatError&) {
        throw FormatError(path.string() + " is not a checkpoint file");
    }
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError(path.string() + " is not a checkpoint file");
    Checkpoint c;
    c.version = r.pod<std::uint32_t>();
    if (c.version > Checkpoint::kVersion)
        throw FormatError("checkpoint format version " + std::to_string(c.version) +
                          " is newer than the supported version " + std::to_string(Checkpoint::kVersion));
    if (c.version == 0) throw FormatError("checkpoint format version 0 is invalid");
    c.fingerprint = r.u64();
    c.config_text = r.str();
    c.epoch = r.i64();
    c.rng_state = r.str();
    c.node_ids.resize(static_cast<std::size_t>(r.count(1 << 20)));
    for (auto& id : c.node_ids) id = r.str();
    c.adjacency = read_matrix(r);
    c.stats.mean = read_vector(r);
    c.stats.std = read_vector(r);
    const Index n = r.count(1 << 20);
    c.names.resize(static_cast<std::size_t>(n));
    c.params.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        c.names[static_cast<std::size_t>(i)] = r.str();
        c.params[static_cast<std::size_t>(i)] = r.tensor();
    }
    if (r.pod<std::uint8_t>() != 0) {
        c.adam_steps = r.i64();
        c.adam_m.resize(static_cast<std::size_t>(n));
        c.adam_v.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            c.adam_m[static_cast<std::size_t>(i)] = r.tensor();
            c.adam_v[static_cast<std::size_t>(i)] = r.tensor();
        }
    }
    if (!r.at_end()) throw FormatError("checkpoint has trailing bytes");
    if (fingerprint(c.config()) != c.fingerprint)
        throw FormatError("checkpoint config fingerprint mismatch (stored " + fingerprint_hex(c.fingerprint) +
                          ", recomputed " + fingerprint_hex(fingerprint(c.config())) + ")");
    return c;
}

AdaSti restore_model(const Checkpoint& c) {
    const ExperimentConfig cfg = c.config();
    const Index N = c.adjacency.rows();
    AdaSti model = AdaSti::create(cfg.model(N), data::adjacency_from_matrix(c.adjacency, c.node_ids), cfg.seed);
    ParamStore& store = model.params();
    if (store.size() != static_cast<Index>(c.params.size()))
        throw FormatError("checkpoint holds " + std::to_string(c.params.size()) + " parameters, model expects " +
                          std::to_string(store.size()));
    for (std::size_t i = 0; i < c.params.size(); ++i) {
        const auto id = store.find(c.names[i]);
        if (!id) throw FormatError("checkpoint parameter '" + c.names[i] + "' not present in the model");
        if (store.value(*id).shape() != c.params[i].shape())
            throw FormatError("checkpoint parameter '" + c.names[i] + "' has shape " + shape_str(c.params[i].shape()) +
                              ", model expects " + shape_str(store.value(*id).shape()));
        store.value(*id) = c.params[i];
    }
    return model;
}

}  // namespace adasti
