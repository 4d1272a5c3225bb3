#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace siamret {

using Vec = std::vector<double>;

/// Resolves an id to its feature vector; nullptr means unknown.
using FeatureLookup = std::function<const Vec*(const std::string&)>;

/// One whole-image feature vector.
struct FeatureVector {
    std::string id;
    Vec values;
};

/// Id-indexed dense vectors of a fixed dimension. Insertion order is kept so
/// that writes reproduce file order. All entries are finite and of length
/// dim(); insert() enforces this.
class FeatureTable {
  public:
    explicit FeatureTable(std::size_t dim);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    /// Throws std::invalid_argument on wrong length, non-finite values, or a
    /// duplicate id.
    void insert(std::string id, Vec values);

    const Vec* find(const std::string& id) const;
    const Vec& at(const std::string& id) const;  // throws if absent

  private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, Vec> entries_;
};

/// One described image region: a priority score and its encoding.
struct Region {
    double priority = 0.0;
    Vec values;
};

/// All region encodings for one image, in file order.
struct RegionFeatureSet {
    std::string id;
    std::vector<Region> regions;
};

/// Region sets for a corpus, keyed by image id; one shared region dimension.
class RegionTable {
  public:
    explicit RegionTable(std::size_t dim);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    /// Appends one region to the image's set, creating the set on first use.
    void add_region(const std::string& id, double priority, Vec values);

    const RegionFeatureSet* find(const std::string& id) const;
    const RegionFeatureSet& at(const std::string& id) const;

  private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, RegionFeatureSet> sets_;
};

/// Concatenation of two source vectors; length = dimA + dimB.
struct FusedFeature {
    Vec values;
};

// File formats
//
// Whole-image features:   first line "#dim D"; then one image per non-empty
// line, "ID v1 v2 ... vD", whitespace separated. Lines starting with '#'
// after the header are comments.
//
// Region features:        first line "#dim D"; then "ID PRIORITY v1 ... vD",
// one region per line; repeated IDs accumulate that image's region set in
// file order.
//
// Parse errors (malformed header, row length mismatch, non-finite value,
// duplicate id) are reported as std::runtime_error with the offending line
// number.

FeatureTable load_feature_table(const std::string& path);
void write_feature_table(const FeatureTable& table, const std::string& path,
                         int precision = 17);

RegionTable load_region_table(const std::string& path);
void write_region_table(const RegionTable& table, const std::string& path,
                        int precision = 17);

/// Unweighted mean of the min(k, |regions|) vectors with highest priority.
/// Priority ties keep file order. k must be >= 1 and the set non-empty.
FeatureVector mean_pool_topk(const RegionFeatureSet& rset, std::size_t k);

/// Arithmetic mean of a non-empty list of equal-length vectors.
Vec mean_pool(const std::vector<Vec>& vectors);

/// Late fusion: a followed by b. Zero-length inputs are rejected.
FusedFeature concat_fuse(const Vec& a, const Vec& b);

/// Scales v to unit euclidean norm. Zero-norm input is an error.
Vec l2_normalize(const Vec& v);

}  // namespace siamret
