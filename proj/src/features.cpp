#include "siamret/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace siamret {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

// Splits a line into whitespace-separated tokens.
std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_value(const std::string& tok, const std::string& path, std::size_t line) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + tok.size())
        parse_fail(path, line, "malformed value '" + tok + "'");
    if (!std::isfinite(v))
        parse_fail(path, line, "non-finite value '" + tok + "'");
    return v;
}

// Reads and validates the "#dim D" header line.
std::size_t parse_dim_header(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line))
        parse_fail(path, 1, "malformed header: empty file, expected '#dim D'");
    const auto toks = tokenize(line);
    if (toks.size() != 2 || toks[0] != "#dim")
        parse_fail(path, 1, "malformed header: expected '#dim D'");
    char* end = nullptr;
    const long d = std::strtol(toks[1].c_str(), &end, 10);
    if (end != toks[1].c_str() + toks[1].size() || d <= 0)
        parse_fail(path, 1, "malformed header: dim must be a positive integer");
    return static_cast<std::size_t>(d);
}

void check_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("non-finite value in vector");
}

std::string format_value(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

}  // namespace

FeatureTable::FeatureTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("FeatureTable dim must be positive");
}

void FeatureTable::insert(std::string id, Vec values) {
    if (values.size() != dim_)
        throw std::invalid_argument("feature length mismatch for id '" + id + "'");
    check_finite(values);
    if (entries_.count(id))
        throw std::invalid_argument("duplicate id '" + id + "'");
    ids_.push_back(id);
    entries_.emplace(std::move(id), std::move(values));
}

const Vec* FeatureTable::find(const std::string& id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

const Vec& FeatureTable::at(const std::string& id) const {
    const Vec* v = find(id);
    if (!v) throw std::out_of_range("unknown feature id '" + id + "'");
    return *v;
}

RegionTable::RegionTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("RegionTable dim must be positive");
}

void RegionTable::add_region(const std::string& id, double priority, Vec values) {
    if (values.size() != dim_)
        throw std::invalid_argument("region length mismatch for id '" + id + "'");
    if (!std::isfinite(priority))
        throw std::invalid_argument("non-finite priority for id '" + id + "'");
    check_finite(values);
    auto it = sets_.find(id);
    if (it == sets_.end()) {
        ids_.push_back(id);
        it = sets_.emplace(id, RegionFeatureSet{id, {}}).first;
    }
    it->second.regions.push_back(Region{priority, std::move(values)});
}

const RegionFeatureSet* RegionTable::find(const std::string& id) const {
    auto it = sets_.find(id);
    return it == sets_.end() ? nullptr : &it->second;
}

const RegionFeatureSet& RegionTable::at(const std::string& id) const {
    const RegionFeatureSet* s = find(id);
    if (!s) throw std::out_of_range("unknown region id '" + id + "'");
    return *s;
}

FeatureTable load_feature_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    FeatureTable table(parse_dim_header(in, path));

    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line) || line[0] == '#') continue;
        const auto toks = tokenize(line);
        if (toks.size() != table.dim() + 1)
            parse_fail(path, lineno,
                       "row length mismatch: expected " + std::to_string(table.dim()) +
                           " values, got " + std::to_string(toks.size() - 1));
        Vec values(table.dim());
        for (std::size_t i = 0; i < table.dim(); ++i)
            values[i] = parse_value(toks[i + 1], path, lineno);
        try {
            table.insert(toks[0], std::move(values));
        } catch (const std::invalid_argument& e) {
            parse_fail(path, lineno, e.what());
        }
    }
    return table;
}

void write_feature_table(const FeatureTable& table, const std::string& path,
                         int precision) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write feature file: " + path);
    out << "#dim " << table.dim() << "\n";
    for (const auto& id : table.ids()) {
        out << id;
        for (double v : table.at(id)) out << ' ' << format_value(v, precision);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

RegionTable load_region_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open region file: " + path);
    RegionTable table(parse_dim_header(in, path));

    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line) || line[0] == '#') continue;
        const auto toks = tokenize(line);
        if (toks.size() != table.dim() + 2)
            parse_fail(path, lineno,
                       "row length mismatch: expected priority + " +
                           std::to_string(table.dim()) + " values, got " +
                           std::to_string(toks.size() - 1) + " fields");
        const double priority = parse_value(toks[1], path, lineno);
        Vec values(table.dim());
        for (std::size_t i = 0; i < table.dim(); ++i)
            values[i] = parse_value(toks[i + 2], path, lineno);
        try {
            table.add_region(toks[0], priority, std::move(values));
        } catch (const std::invalid_argument& e) {
            parse_fail(path, lineno, e.what());
        }
    }
    return table;
}

void write_region_table(const RegionTable& table, const std::string& path,
                        int precision) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write region file: " + path);
    out << "#dim " << table.dim() << "\n";
    for (const auto& id : table.ids()) {
        for (const Region& r : table.at(id).regions) {
            out << id << ' ' << format_value(r.priority, precision);
            for (double v : r.values) out << ' ' << format_value(v, precision);
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureVector mean_pool_topk(const RegionFeatureSet& rset, std::size_t k) {
    if (rset.regions.empty())
        throw std::invalid_argument("mean_pool_topk: empty region list for '" + rset.id + "'");
    if (k == 0) throw std::invalid_argument("mean_pool_topk: k must be >= 1");

    std::vector<std::size_t> order(rset.regions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Highest priority first; ties keep original list order.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rset.regions[a].priority > rset.regions[b].priority;
    });

    const std::size_t m = std::min(k, order.size());
    // Accumulate the selected regions in list order so the k >= count case
    // sums exactly like mean_pool.
    order.resize(m);
    std::sort(order.begin(), order.end());
    const std::size_t dim = rset.regions.front().values.size();
    Vec mean(dim, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const Vec& v = rset.regions[order[i]].values;
        if (v.size() != dim)
            throw std::invalid_argument("mean_pool_topk: region dim mismatch in '" + rset.id + "'");
        for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
    }
    for (double& x : mean) x /= static_cast<double>(m);
    return FeatureVector{rset.id, std::move(mean)};
}

Vec mean_pool(const std::vector<Vec>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("mean_pool: empty list");
    const std::size_t dim = vectors.front().size();
    Vec mean(dim, 0.0);
    for (const Vec& v : vectors) {
        if (v.size() != dim) throw std::invalid_argument("mean_pool: dim mismatch");
        for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
    }
    for (double& x : mean) x /= static_cast<double>(vectors.size());
    return mean;
}

FusedFeature concat_fuse(const Vec& a, const Vec& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("concat_fuse: zero-length input rejected");
    FusedFeature f;
    f.values.reserve(a.size() + b.size());
    f.values.insert(f.values.end(), a.begin(), a.end());
    f.values.insert(f.values.end(), b.begin(), b.end());
    return f;
}

Vec l2_normalize(const Vec& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw std::invalid_argument("l2_normalize: zero-norm input");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

}  // namespace siamret
