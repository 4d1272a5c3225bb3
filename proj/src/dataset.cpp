#include "siamret/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "siamret/rng.hpp"

namespace siamret {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

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

}  // namespace

void RetrievalDataset::add(const std::string& query, const std::string& ref, int grade) {
    if (grade < 0 || grade > 3)
        throw std::invalid_argument("grade out of range 0..3: " + std::to_string(grade));
    auto& grades = grade_by_pair_[query];
    if (grades.count(ref))
        throw std::invalid_argument("duplicate judgment (" + query + ", " + ref + ")");
    if (!by_query_.count(query)) queries_.push_back(query);
    grades.emplace(ref, grade);
    by_query_[query].push_back(Judgment{ref, grade});
    ++total_;
}

const std::vector<Judgment>& RetrievalDataset::references(const std::string& query) const {
    auto it = by_query_.find(query);
    if (it == by_query_.end())
        throw std::out_of_range("unknown query id '" + query + "'");
    return it->second;
}

bool RetrievalDataset::has_judgment(const std::string& query, const std::string& ref) const {
    auto it = grade_by_pair_.find(query);
    return it != grade_by_pair_.end() && it->second.count(ref) != 0;
}

int RetrievalDataset::grade(const std::string& query, const std::string& ref) const {
    auto it = grade_by_pair_.find(query);
    if (it != grade_by_pair_.end()) {
        auto jt = it->second.find(ref);
        if (jt != it->second.end()) return jt->second;
    }
    throw std::out_of_range("unjudged pair (" + query + ", " + ref + ")");
}

RetrievalDataset load_relevance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open relevance file: " + path);

    RetrievalDataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        const auto toks = tokenize(line);
        if (toks.size() != 3)
            parse_fail(path, lineno, "expected 'QUERY_ID REF_ID GRADE'");
        char* end = nullptr;
        const long g = std::strtol(toks[2].c_str(), &end, 10);
        if (end != toks[2].c_str() + toks[2].size())
            parse_fail(path, lineno, "malformed grade '" + toks[2] + "'");
        if (g < 0 || g > 3)
            parse_fail(path, lineno, "grade out of range 0..3: " + toks[2]);
        try {
            ds.add(toks[0], toks[1], static_cast<int>(g));
        } catch (const std::invalid_argument& e) {
            parse_fail(path, lineno, e.what());
        }
    }
    if (ds.total_judgments() == 0)
        throw std::runtime_error(path + ": empty relevance file, no judgments");
    return ds;
}

void write_relevance(const RetrievalDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write relevance file: " + path);
    for (const auto& q : ds.queries())
        for (const Judgment& j : ds.references(q))
            out << q << ' ' << j.ref << ' ' << j.grade << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<Pair> generate_pairs(const RetrievalDataset& ds,
                                 const std::vector<std::string>& train_queries) {
    std::vector<Pair> pairs;
    for (const auto& q : train_queries) {
        if (!ds.has_query(q))
            throw std::invalid_argument("unknown query id '" + q + "'");
        for (const Judgment& j : ds.references(q))
            pairs.push_back(Pair{q, j.ref, j.grade});
    }
    return pairs;
}

std::vector<FoldSplit> kfold_split(const std::vector<std::string>& queries,
                                   std::size_t folds, std::uint64_t seed) {
    if (folds < 2)
        throw std::invalid_argument("kfold_split: folds must be >= 2");
    if (queries.size() < folds)
        throw std::invalid_argument("kfold_split: fewer queries (" +
                                    std::to_string(queries.size()) + ") than folds (" +
                                    std::to_string(folds) + ")");

    std::vector<std::string> shuffled = queries;
    std::mt19937_64 rng(seed);
    shuffle_deterministic(shuffled, rng);

    std::vector<FoldSplit> splits(folds);
    std::vector<std::unordered_set<std::string>> eval_sets(folds);
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
        const std::size_t f = i % folds;
        splits[f].eval_queries.push_back(shuffled[i]);
        eval_sets[f].insert(shuffled[i]);
    }
    for (std::size_t f = 0; f < folds; ++f) {
        splits[f].fold_index = f;
        for (const auto& q : queries)
            if (!eval_sets[f].count(q)) splits[f].train_queries.push_back(q);
    }
    return splits;
}

SynthCorpus synth_generate(const SynthConfig& cfg) {
    if (cfg.n_queries == 0 || cfg.refs_per_query == 0 || cfg.dim_a == 0 ||
        cfg.dim_b == 0 || cfg.n_latent_clusters == 0 || cfg.regions_per_image == 0)
        throw std::invalid_argument("synth_generate: all size parameters must be positive");
    if (cfg.noise_sigma < 0.0)
        throw std::invalid_argument("synth_generate: noise_sigma must be >= 0");

    std::mt19937_64 rng(cfg.seed);
    const std::size_t n_clusters = cfg.n_latent_clusters;
    // Reference pool shared across queries, sized to mirror the benchmark
    // geometry (~10 pool images per judged reference slot).
    const std::size_t n_refs = 10 * cfg.refs_per_query;
    const std::size_t n_images = cfg.n_queries + n_refs;

    // Two independent centroids per cluster, one per view.
    std::vector<Vec> centroid_a(n_clusters, Vec(cfg.dim_a));
    std::vector<Vec> centroid_b(n_clusters, Vec(cfg.dim_b));
    for (auto& c : centroid_a)
        for (double& x : c) x = normal_double(rng);
    for (auto& c : centroid_b)
        for (double& x : c) x = normal_double(rng);

    auto image_id = [&](std::size_t i) {
        char buf[32];
        if (i < cfg.n_queries)
            std::snprintf(buf, sizeof(buf), "q%05zu", i);
        else
            std::snprintf(buf, sizeof(buf), "r%05zu", i - cfg.n_queries);
        return std::string(buf);
    };

    std::vector<std::size_t> cluster_of(n_images);
    for (auto& c : cluster_of) c = static_cast<std::size_t>(uniform_index(rng, n_clusters));

    SynthCorpus corpus{FeatureTable(cfg.dim_a), RegionTable(cfg.dim_b), RetrievalDataset{}};

    const double sigma = cfg.noise_sigma;
    for (std::size_t i = 0; i < n_images; ++i) {
        const std::size_t c = cluster_of[i];
        Vec va(cfg.dim_a);
        for (std::size_t d = 0; d < cfg.dim_a; ++d)
            va[d] = centroid_a[c][d] + sigma * normal_double(rng);
        corpus.view_a.insert(image_id(i), std::move(va));
    }
    for (std::size_t i = 0; i < n_images; ++i) {
        const std::size_t c = cluster_of[i];
        // Regions share one per-image offset plus a smaller per-region jitter,
        // so top-k pooling keeps the image-level noise scale comparable to
        // view A.
        Vec image_noise(cfg.dim_b);
        for (double& x : image_noise) x = sigma * normal_double(rng);
        const std::string id = image_id(i);
        for (std::size_t r = 0; r < cfg.regions_per_image; ++r) {
            const double priority = uniform_double(rng);
            Vec v(cfg.dim_b);
            for (std::size_t d = 0; d < cfg.dim_b; ++d)
                v[d] = centroid_b[c][d] + image_noise[d] + 0.5 * sigma * normal_double(rng);
            corpus.view_b.add_region(id, priority, std::move(v));
        }
    }

    auto grade_between = [&](std::size_t cq, std::size_t cr) {
        if (cq == cr) return 3;
        if (cfg.ring_grades && n_clusters >= 2) {
            const std::size_t d = (cq + n_clusters - cr) % n_clusters;
            if (d == 1 || d == n_clusters - 1) return 2;
        }
        return 0;
    };

    std::vector<std::size_t> pool(n_refs);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t qi = 0; qi < cfg.n_queries; ++qi) {
        // Partial Fisher-Yates: first refs_per_query entries become the
        // query's judged references, distinct by construction.
        for (std::size_t j = 0; j < cfg.refs_per_query; ++j) {
            const std::size_t pick =
                j + static_cast<std::size_t>(uniform_index(rng, n_refs - j));
            std::swap(pool[j], pool[pick]);
        }
        const std::string qid = image_id(qi);
        for (std::size_t j = 0; j < cfg.refs_per_query; ++j) {
            const std::size_t ref_image = cfg.n_queries + pool[j];
            corpus.relevance.add(qid, image_id(ref_image),
                                 grade_between(cluster_of[qi], cluster_of[ref_image]));
        }
    }
    return corpus;
}

}  // namespace siamret
