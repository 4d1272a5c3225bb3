#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "siamret/dataset.hpp"
#include "siamret/features.hpp"

namespace siamret {

/// References of one query ordered by ascending distance. Exact distance
/// ties break by reference id.
struct RankedList {
    std::string query_id;
    std::vector<std::string> refs;
    std::vector<double> distances;
};

enum class GainKind {
    exponential,  // 2^rel - 1
    linear        // rel
};

/// Per-query nDCG@K values and their dataset means over a list of cutoffs.
struct EvalReport {
    std::vector<std::size_t> ks;
    /// query id -> one nDCG per K, sorted by query id.
    std::vector<std::pair<std::string, std::vector<double>>> per_query;
    std::vector<double> mean_ndcg;       // aligned with ks
    std::vector<std::string> flagged;    // all-zero-relevance queries, sorted
    std::map<std::string, std::string> meta;  // fold/pair bookkeeping
};

/// Euclidean ranking of judged references against a query vector.
RankedList rank_references(const std::string& query_id, const Vec& query_vec,
                           const std::vector<std::pair<std::string, Vec>>& refs);

/// Discounted cumulative gain over the first min(k, n) positions:
///   sum gain(rel_i) / log2(i + 1), positions 1-based.
double dcg(const std::vector<int>& relevances, std::size_t k,
           GainKind gain = GainKind::exponential);

/// dcg normalized by the ideal (descending-grade) ordering; 0 when the ideal
/// DCG is 0 (all grades zero), which callers flag.
double ndcg_at_k(const std::vector<int>& ranked_relevances, std::size_t k,
                 GainKind gain = GainKind::exponential);

/// Maps an input feature vector to the space retrieval distances are
/// measured in (a trained model's embedding, or identity for raw features).
using Embedder = std::function<Vec(const Vec&)>;

/// For each eval query: embed, rank its judged references, score nDCG at
/// every K. Means are arithmetic over the eval queries, all-zero-relevance
/// queries included (at 0) and flagged.
EvalReport evaluate(const Embedder& embedder, const FeatureLookup& features,
                    const RetrievalDataset& ds,
                    const std::vector<std::string>& eval_queries,
                    const std::vector<std::size_t>& ks,
                    GainKind gain = GainKind::exponential);

// Report CSV: '#' metadata lines, a "K,mean_ndcg" section, a
// "query_id,K,ndcg" section sorted by (query_id, K), then one
// "#flagged: <id>" line per all-zero-relevance query. Byte-deterministic.
void write_report(const EvalReport& report, const std::string& path);

}  // namespace siamret
