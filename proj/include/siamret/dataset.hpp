#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "siamret/features.hpp"

namespace siamret {

/// One judged reference of a query.
struct Judgment {
    std::string ref;
    int grade = 0;  // 0 (irrelevant) .. 3 (excellent match)
};

/// Queries with graded-relevance judgments over per-query reference lists.
/// Grades are integers 0..3; a (query, reference) pair is judged at most
/// once; queries keep first-seen order and references keep file order.
class RetrievalDataset {
  public:
    /// Throws std::invalid_argument on a grade outside 0..3 or a duplicate
    /// (query, reference) judgment.
    void add(const std::string& query, const std::string& ref, int grade);

    const std::vector<std::string>& queries() const { return queries_; }
    bool has_query(const std::string& query) const { return by_query_.count(query) != 0; }
    const std::vector<Judgment>& references(const std::string& query) const;
    bool has_judgment(const std::string& query, const std::string& ref) const;
    /// Grade of a judged pair; throws if the pair was never judged.
    int grade(const std::string& query, const std::string& ref) const;
    std::size_t total_judgments() const { return total_; }

  private:
    std::vector<std::string> queries_;
    std::unordered_map<std::string, std::vector<Judgment>> by_query_;
    std::unordered_map<std::string, std::unordered_map<std::string, int>> grade_by_pair_;
    std::size_t total_ = 0;
};

/// Training pair: a query, one of its judged references, and the grade y.
struct Pair {
    std::string id_a;
    std::string id_b;
    int y = 0;
};

/// One fold of the query k-fold protocol. train and eval partition the
/// query set.
struct FoldSplit {
    std::size_t fold_index = 0;
    std::vector<std::string> train_queries;
    std::vector<std::string> eval_queries;
};

/// Parameters of the planted-similarity synthetic corpus. Scale defaults
/// mirror the rPascal benchmark (50 queries, ~180 judged references each,
/// two 512-dim views).
struct SynthConfig {
    std::size_t n_queries = 50;
    std::size_t refs_per_query = 180;
    std::size_t dim_a = 512;
    std::size_t dim_b = 512;
    std::size_t n_latent_clusters = 16;
    std::size_t regions_per_image = 8;
    double noise_sigma = 3.0;
    std::uint64_t seed = 42;
    /// When true, references in a cluster adjacent (on a fixed ring) to the
    /// query's cluster are graded 2; when false only same-cluster (3) and
    /// other (0) grades exist.
    bool ring_grades = true;
};

struct SynthCorpus {
    FeatureTable view_a;
    RegionTable view_b;
    RetrievalDataset relevance;
};

// Relevance file format: one judgment per line, "QUERY_ID REF_ID GRADE",
// whitespace separated, grade in {0,1,2,3}; '#' lines are comments. Errors
// (grade out of range, duplicate judgment, empty file) carry line numbers.
RetrievalDataset load_relevance(const std::string& path);
void write_relevance(const RetrievalDataset& ds, const std::string& path);

/// One Pair per judgment of each training query, in train_queries order then
/// reference file order. References are never paired with each other.
std::vector<Pair> generate_pairs(const RetrievalDataset& ds,
                                 const std::vector<std::string>& train_queries);

/// Seeded shuffle, then round-robin deal into `folds` eval sets; each train
/// set is the complement in original query order. Requires folds >= 2 and
/// at least `folds` queries.
std::vector<FoldSplit> kfold_split(const std::vector<std::string>& queries,
                                   std::size_t folds, std::uint64_t seed);

/// Generates a two-view corpus with planted cluster structure. Every image
/// gets a latent cluster; view A is that cluster's first centroid plus
/// gaussian noise, view B's regions sit around a second, independently drawn
/// centroid of the same cluster. Grades: 3 same cluster, 2 ring-adjacent
/// cluster (if enabled), else 0. Deterministic per seed.
SynthCorpus synth_generate(const SynthConfig& cfg);

}  // namespace siamret
