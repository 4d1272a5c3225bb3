#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "siamret/dataset.hpp"
#include "siamret/eval.hpp"
#include "siamret/features.hpp"
#include "siamret/model.hpp"

namespace siamret {

/// Which features feed the network: the fused concatenation (FIC then pooled
/// regions), or either view alone.
enum class ViewKind { fused, view_a, view_b };

std::string view_name(ViewKind view);
ViewKind parse_view(const std::string& name);

/// Everything the subcommands need; flag parsing fills this in.
struct PipelineConfig {
    std::string fic_path;
    std::string regions_path;
    std::string rel_path;
    std::string out_dir;
    std::string models_dir;  // where eval looks for checkpoints; defaults to out_dir

    std::size_t folds = 5;
    std::size_t pool_k = 5;
    std::vector<std::size_t> layer_dims = {1024, 2048, 1024, 512, 512};
    ViewKind view = ViewKind::fused;
    LossConfig loss;
    TrainConfig train;
    std::vector<std::size_t> ks = {5, 10, 20, 30};
    GainKind gain = GainKind::exponential;
    bool baseline = false;
    std::uint64_t seed = 42;
};

/// Model-ready input vectors for every id a dataset references.
struct InputBank {
    std::unordered_map<std::string, Vec> by_id;
    std::size_t dim = 0;

    /// Valid only while the bank is alive.
    FeatureLookup lookup() const {
        return [this](const std::string& id) -> const Vec* {
            auto it = by_id.find(id);
            return it == by_id.end() ? nullptr : &it->second;
        };
    }
};

/// Builds per-image inputs for the chosen view. Fusion order is fixed as
/// [FIC | pooled regions]. Throws naming the first dataset id missing from a
/// feature file.
InputBank build_inputs(const FeatureTable* fic, const RegionTable* regions,
                       const RetrievalDataset& ds, ViewKind view, std::size_t pool_k);

struct FoldTrainResult {
    std::size_t fold = 0;
    std::size_t n_train_queries = 0;
    std::size_t n_eval_queries = 0;
    std::size_t n_pairs = 0;
    double first_epoch_loss = 0.0;
    double final_epoch_loss = 0.0;
    std::string model_path;
    std::string history_path;
};

/// Trains one model per fold (folds may run in parallel; results are
/// bit-identical either way) and writes fold_i.model, fold_i_history.csv and
/// train_summary.csv under out_dir.
std::vector<FoldTrainResult> run_train(const PipelineConfig& cfg);

struct EvalRunResult {
    std::vector<EvalReport> fold_reports;
    EvalReport aggregate;
    std::vector<EvalReport> baseline_fold_reports;
    EvalReport baseline_aggregate;
};

/// Evaluates each fold's checkpoint on that fold's eval queries; writes
/// fold_i_report.csv and aggregate_report.csv (plus baseline_* variants when
/// cfg.baseline). The fold protocol is re-derived from cfg.seed, which must
/// match the checkpoints' recorded seed.
EvalRunResult run_eval(const PipelineConfig& cfg);

/// Writes features_a.txt, regions_b.txt and relevance.txt under out_dir.
void run_synth(const SynthConfig& cfg, const std::string& out_dir);

struct RankRequest {
    std::string query_id;
    std::string model_path;  // ignored when raw
    bool raw = false;
};

struct RankOutcome {
    RankedList ranked;
    std::vector<int> grades;  // aligned with ranked.refs
};

/// Ranks one query's judged references by model embedding or raw features.
RankOutcome run_rank(const PipelineConfig& cfg, const RankRequest& req);

}  // namespace siamret
