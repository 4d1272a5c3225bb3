#include "siamret/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace siamret {

namespace {

double gain_of(int rel, GainKind gain) {
    if (rel < 0 || rel > 3)
        throw std::invalid_argument("relevance grade out of range 0..3: " +
                                    std::to_string(rel));
    if (gain == GainKind::exponential)
        return static_cast<double>((1 << rel) - 1);  // 2^rel - 1
    return static_cast<double>(rel);
}

double euclidean(const Vec& a, const Vec& b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

std::string fmt10(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

RankedList rank_references(const std::string& query_id, const Vec& query_vec,
                           const std::vector<std::pair<std::string, Vec>>& refs) {
    if (refs.empty())
        throw std::invalid_argument("rank_references: empty reference set for '" +
                                    query_id + "'");
    for (const auto& [id, v] : refs)
        if (v.size() != query_vec.size())
            throw std::invalid_argument("rank_references: dim mismatch for '" + id + "'");

    std::vector<std::size_t> order(refs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> dist(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i)
        dist[i] = euclidean(query_vec, refs[i].second);

    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return refs[a].first < refs[b].first;
    });

    RankedList out;
    out.query_id = query_id;
    out.refs.reserve(refs.size());
    out.distances.reserve(refs.size());
    for (std::size_t i : order) {
        out.refs.push_back(refs[i].first);
        out.distances.push_back(dist[i]);
    }
    return out;
}

double dcg(const std::vector<int>& relevances, std::size_t k, GainKind gain) {
    if (k == 0) throw std::invalid_argument("dcg: k must be >= 1");
    const std::size_t n = std::min(k, relevances.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += gain_of(relevances[i], gain) /
               std::log2(static_cast<double>(i) + 2.0);  // position i+1, 1-based
    return sum;
}

double ndcg_at_k(const std::vector<int>& ranked_relevances, std::size_t k,
                 GainKind gain) {
    const double actual = dcg(ranked_relevances, k, gain);
    std::vector<int> ideal = ranked_relevances;
    std::sort(ideal.begin(), ideal.end(), std::greater<int>());
    const double best = dcg(ideal, k, gain);
    if (best == 0.0) return 0.0;
    return std::min(actual / best, 1.0);
}

EvalReport evaluate(const Embedder& embedder, const FeatureLookup& features,
                    const RetrievalDataset& ds,
                    const std::vector<std::string>& eval_queries,
                    const std::vector<std::size_t>& ks, GainKind gain) {
    if (ks.empty()) throw std::invalid_argument("evaluate: empty K list");
    for (std::size_t k : ks)
        if (k == 0) throw std::invalid_argument("evaluate: K must be >= 1");

    // References recur across queries; embed each id once.
    std::unordered_map<std::string, Vec> embedded;
    auto embed = [&](const std::string& id) -> const Vec& {
        auto it = embedded.find(id);
        if (it != embedded.end()) return it->second;
        const Vec* raw = features(id);
        if (!raw) throw std::runtime_error("evaluate: unresolvable id '" + id + "'");
        return embedded.emplace(id, embedder(*raw)).first->second;
    };

    EvalReport report;
    report.ks = ks;
    report.mean_ndcg.assign(ks.size(), 0.0);

    for (const auto& q : eval_queries) {
        const std::vector<Judgment>& judged = ds.references(q);
        std::vector<std::pair<std::string, Vec>> refs;
        refs.reserve(judged.size());
        for (const Judgment& j : judged) refs.emplace_back(j.ref, embed(j.ref));

        const RankedList ranked = rank_references(q, embed(q), refs);
        std::vector<int> rels(ranked.refs.size());
        bool any_relevant = false;
        for (std::size_t i = 0; i < ranked.refs.size(); ++i) {
            rels[i] = ds.grade(q, ranked.refs[i]);
            any_relevant = any_relevant || rels[i] > 0;
        }
        if (!any_relevant) report.flagged.push_back(q);

        std::vector<double> scores(ks.size());
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
            scores[ki] = ndcg_at_k(rels, ks[ki], gain);
            report.mean_ndcg[ki] += scores[ki];
        }
        report.per_query.emplace_back(q, std::move(scores));
    }

    if (!eval_queries.empty())
        for (double& m : report.mean_ndcg) m /= static_cast<double>(eval_queries.size());
    std::sort(report.per_query.begin(), report.per_query.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::sort(report.flagged.begin(), report.flagged.end());
    return report;
}

void write_report(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);

    for (const auto& [k, v] : report.meta) out << "# " << k << ' ' << v << "\n";
    out << "K,mean_ndcg\n";
    for (std::size_t ki = 0; ki < report.ks.size(); ++ki)
        out << report.ks[ki] << ',' << fmt10(report.mean_ndcg[ki]) << "\n";
    out << "query_id,K,ndcg\n";
    for (const auto& [q, scores] : report.per_query)
        for (std::size_t ki = 0; ki < report.ks.size(); ++ki)
            out << q << ',' << report.ks[ki] << ',' << fmt10(scores[ki]) << "\n";
    for (const auto& q : report.flagged) out << "#flagged: " << q << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace siamret
