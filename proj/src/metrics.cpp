#include "adasti/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace adasti {

void ErrorAccumulator::add(double prediction, double truth) {
    const double e = prediction - truth;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ++count;
}

double ErrorAccumulator::mae() const {
    require(count > 0, "metrics: no target entries");
    return abs_sum / static_cast<double>(count);
}

double ErrorAccumulator::rmse() const {
    require(count > 0, "metrics: no target entries");
    return std::sqrt(sq_sum / static_cast<double>(count));
}

Metrics masked_metrics(const data::Matrix& prediction, const data::Matrix& truth, const data::Mask& targets) {
    require(prediction.rows() == truth.rows() && prediction.cols() == truth.cols() &&
                targets.rows() == truth.rows() && targets.cols() == truth.cols(),
            "metrics: shape mismatch");
    ErrorAccumulator acc;
    for (Index i = 0; i < truth.size(); ++i)
        if (targets(i)) acc.add(prediction(i), truth(i));
    return {acc.mae(), acc.rmse(), acc.count};
}

bool MetricsReport::same_results(const MetricsReport& o) const {
    if (method != o.method || mae != o.mae || rmse != o.rmse || targets != o.targets ||
        config_fingerprint != o.config_fingerprint || seed != o.seed || k != o.k || extra != o.extra ||
        per_node.size() != o.per_node.size())
        return false;
    for (std::size_t i = 0; i < per_node.size(); ++i) {
        const auto &a = per_node[i], &b = o.per_node[i];
        if (a.node != b.node || a.mae != b.mae || a.rmse != b.rmse || a.count != b.count) return false;
    }
    return true;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

std::string to_text(const MetricsReport& r) {
    std::ostringstream os;
    os << "method = " << r.method << "\n";
    os << "mae = " << fmt(r.mae) << "\n";
    os << "rmse = " << fmt(r.rmse) << "\n";
    os << "targets = " << r.targets << "\n";
    os << "config_fingerprint = " << r.config_fingerprint << "\n";
    os << "seed = " << r.seed << "\n";
    os << "k = " << r.k << "\n";
    os << "wall_clock_seconds = " << fmt(r.wall_clock_seconds) << "\n";
    os << "nodes = " << r.per_node.size() << "\n";
    for (std::size_t i = 0; i < r.per_node.size(); ++i) {
        const auto& n = r.per_node[i];
        const std::string p = "node." + std::to_string(i) + ".";
        os << p << "id = " << n.node << "\n";
        os << p << "mae = " << fmt(n.mae) << "\n";
        os << p << "rmse = " << fmt(n.rmse) << "\n";
        os << p << "targets = " << n.count << "\n";
    }
    for (const auto& [k, v] : r.extra) os << "extra." << k << " = " << fmt(v) << "\n";
    return os.str();
}

MetricsReport parse_report(const std::string& text) {
    MetricsReport r;
    std::istringstream in(text);
    std::string line;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
        const std::string key = line.substr(0, eq), v = line.substr(eq + 3);
        try {
            if (key == "method") r.method = v;
            else if (key == "mae") r.mae = std::stod(v);
            else if (key == "rmse") r.rmse = std::stod(v);
            else if (key == "targets") r.targets = std::stoll(v);
            else if (key == "config_fingerprint") r.config_fingerprint = v;
            else if (key == "seed") r.seed = std::stoull(v);
            else if (key == "k") r.k = std::stoll(v);
            else if (key == "wall_clock_seconds") r.wall_clock_seconds = std::stod(v);
            else if (key == "nodes") r.per_node.resize(std::stoul(v));
            else if (key.rfind("node.", 0) == 0) {
                const auto dot = key.find('.', 5);
                const auto idx = std::stoul(key.substr(5, dot - 5));
                if (dot == std::string::npos || idx >= r.per_node.size())
                    throw ParseError("per-node key out of range: " + key, lineno);
                const std::string field = key.substr(dot + 1);
                auto& n = r.per_node[idx];
                if (field == "id") n.node = v;
                else if (field == "mae") n.mae = std::stod(v);
                else if (field == "rmse") n.rmse = std::stod(v);
                else if (field == "targets") n.count = std::stoll(v);
                else throw ParseError("unknown per-node field: " + field, lineno);
            } else if (key.rfind("extra.", 0) == 0) {
                r.extra[key.substr(6)] = std::stod(v);
            } else {
                throw ParseError("unknown report key: " + key, lineno);
            }
        } catch (const std::logic_error&) {
            throw ParseError("bad value for " + key + ": '" + v + "'", lineno);
        }
    }
    return r;
}

void write_report(const std::filesystem::path& path, const MetricsReport& r) {
    std::ofstream out(path);
    if (!out) throw ContractError("cannot write report " + path.string());
    out << to_text(r);
}

MetricsReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open report " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_report(ss.str());
}

}  // namespace adasti
