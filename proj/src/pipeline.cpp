#include "siamret/pipeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "siamret/rng.hpp"

namespace siamret {

namespace fs = std::filesystem;

std::string view_name(ViewKind view) {
    switch (view) {
        case ViewKind::fused: return "fused";
        case ViewKind::view_a: return "a";
        case ViewKind::view_b: return "b";
    }
    throw std::logic_error("unreachable");
}

ViewKind parse_view(const std::string& name) {
    if (name == "fused") return ViewKind::fused;
    if (name == "a") return ViewKind::view_a;
    if (name == "b") return ViewKind::view_b;
    throw std::invalid_argument("unknown view '" + name + "' (expected fused, a or b)");
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> dataset_ids(const RetrievalDataset& ds) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& q : ds.queries()) {
        if (seen.insert(q).second) ids.push_back(q);
        for (const Judgment& j : ds.references(q))
            if (seen.insert(j.ref).second) ids.push_back(j.ref);
    }
    return ids;
}

Eigen::VectorXd to_eigen(const Vec& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vec to_vec(const Eigen::VectorXd& v) {
    return Vec(v.data(), v.data() + v.size());
}

Embedder model_embedder(const SiameseModel& m) {
    return [&m](const Vec& x) { return to_vec(forward(m, to_eigen(x))); };
}

Embedder identity_embedder() {
    return [](const Vec& x) { return x; };
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write history: " + path);
    out << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < history.epoch_mean_loss.size(); ++e)
        out << (e + 1) << ',' << fmt17(history.epoch_mean_loss[e]) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string fold_model_path(const std::string& dir, std::size_t fold) {
    return (fs::path(dir) / ("fold_" + std::to_string(fold) + ".model")).string();
}

// Runs fn(fold) for every fold index, at most hardware_concurrency at a
// time. Each fold touches only its own outputs, so results do not depend on
// scheduling; the first exception is rethrown after all workers stop.
void for_each_fold(std::size_t folds, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(folds, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t f = 0; f < folds; ++f) fn(f);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t f = next.fetch_add(1);
                if (f >= folds) return;
                try {
                    fn(f);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string fusion_tag(ViewKind view) {
    switch (view) {
        case ViewKind::fused: return "fic+regions";
        case ViewKind::view_a: return "fic";
        case ViewKind::view_b: return "regions";
    }
    throw std::logic_error("unreachable");
}

ViewKind view_from_fusion_tag(const std::string& tag) {
    if (tag == "fic+regions") return ViewKind::fused;
    if (tag == "fic") return ViewKind::view_a;
    if (tag == "regions") return ViewKind::view_b;
    throw std::runtime_error("checkpoint has unknown fusion tag '" + tag + "'");
}

struct LoadedData {
    RetrievalDataset ds;
    InputBank bank;
};

LoadedData load_view_data(const PipelineConfig& cfg, ViewKind view, std::size_t pool_k) {
    LoadedData data;
    data.ds = load_relevance(cfg.rel_path);

    const bool needs_fic = view != ViewKind::view_b;
    const bool needs_regions = view != ViewKind::view_a;
    if (needs_fic && cfg.fic_path.empty())
        throw std::invalid_argument("--fic is required for view '" + view_name(view) + "'");
    if (needs_regions && cfg.regions_path.empty())
        throw std::invalid_argument("--regions is required for view '" + view_name(view) + "'");

    FeatureTable fic(1);
    RegionTable regions(1);
    if (needs_fic) fic = load_feature_table(cfg.fic_path);
    if (needs_regions) regions = load_region_table(cfg.regions_path);
    data.bank = build_inputs(needs_fic ? &fic : nullptr,
                             needs_regions ? &regions : nullptr, data.ds, view, pool_k);
    return data;
}

}  // namespace

InputBank build_inputs(const FeatureTable* fic, const RegionTable* regions,
                       const RetrievalDataset& ds, ViewKind view, std::size_t pool_k) {
    if (view != ViewKind::view_b && !fic)
        throw std::invalid_argument("build_inputs: FIC table required");
    if (view != ViewKind::view_a && !regions)
        throw std::invalid_argument("build_inputs: region table required");

    InputBank bank;
    for (const auto& id : dataset_ids(ds)) {
        Vec input;
        if (view != ViewKind::view_b) {
            const Vec* a = fic->find(id);
            if (!a)
                throw std::runtime_error("id '" + id + "' missing from FIC feature file");
            input = *a;
        }
        if (view != ViewKind::view_a) {
            const RegionFeatureSet* rset = regions->find(id);
            if (!rset)
                throw std::runtime_error("id '" + id + "' missing from region feature file");
            Vec pooled = mean_pool_topk(*rset, pool_k).values;
            input = view == ViewKind::view_b
                        ? std::move(pooled)
                        : std::move(concat_fuse(input, pooled).values);
        }
        bank.dim = input.size();
        bank.by_id.emplace(id, std::move(input));
    }
    if (bank.by_id.empty()) throw std::runtime_error("build_inputs: dataset names no ids");
    return bank;
}

std::vector<FoldTrainResult> run_train(const PipelineConfig& cfg) {
    if (cfg.out_dir.empty()) throw std::invalid_argument("train: --out is required");
    fs::create_directories(cfg.out_dir);

    const LoadedData data = load_view_data(cfg, cfg.view, cfg.pool_k);
    const std::vector<FoldSplit> folds = kfold_split(data.ds.queries(), cfg.folds, cfg.seed);

    std::vector<FoldTrainResult> results(folds.size());
    for_each_fold(folds.size(), [&](std::size_t f) {
        const FoldSplit& split = folds[f];
        const std::vector<Pair> pairs = generate_pairs(data.ds, split.train_queries);

        SiameseModel model =
            init_model(data.bank.dim, cfg.layer_dims, mix_seed(cfg.seed, 2000 + f));
        TrainConfig tc = cfg.train;
        tc.seed = mix_seed(cfg.seed, 1000 + f);
        const TrainHistory history =
            train(model, pairs, data.bank.lookup(), cfg.loss, tc);

        std::map<std::string, std::string> meta;
        meta["fusion"] = fusion_tag(cfg.view);
        if (cfg.view != ViewKind::view_a) meta["pool_k"] = std::to_string(cfg.pool_k);
        meta["seed"] = std::to_string(cfg.seed);
        meta["folds"] = std::to_string(cfg.folds);
        meta["fold"] = std::to_string(f);
        meta["loss"] = cfg.loss.kind == LossKind::modified ? "modified" : "standard";

        FoldTrainResult r;
        r.fold = f;
        r.n_train_queries = split.train_queries.size();
        r.n_eval_queries = split.eval_queries.size();
        r.n_pairs = pairs.size();
        r.first_epoch_loss =
            history.epoch_mean_loss.empty() ? 0.0 : history.epoch_mean_loss.front();
        r.final_epoch_loss =
            history.epoch_mean_loss.empty() ? 0.0 : history.epoch_mean_loss.back();
        r.model_path = fold_model_path(cfg.out_dir, f);
        r.history_path =
            (fs::path(cfg.out_dir) / ("fold_" + std::to_string(f) + "_history.csv")).string();
        save_model(model, r.model_path, meta);
        write_history_csv(history, r.history_path);
        results[f] = std::move(r);
    });

    const std::string summary_path = (fs::path(cfg.out_dir) / "train_summary.csv").string();
    std::ofstream out(summary_path);
    if (!out) throw std::runtime_error("cannot write " + summary_path);
    out << "fold,train_queries,eval_queries,pairs,first_epoch_loss,final_epoch_loss\n";
    for (const FoldTrainResult& r : results)
        out << r.fold << ',' << r.n_train_queries << ',' << r.n_eval_queries << ','
            << r.n_pairs << ',' << fmt17(r.first_epoch_loss) << ','
            << fmt17(r.final_epoch_loss) << "\n";
    if (!out) throw std::runtime_error("write failed: " + summary_path);
    return results;
}

EvalRunResult run_eval(const PipelineConfig& cfg) {
    if (cfg.out_dir.empty()) throw std::invalid_argument("eval: --out is required");
    if (cfg.folds < 2) throw std::invalid_argument("eval: --folds must be >= 2");
    const std::string models_dir = cfg.models_dir.empty() ? cfg.out_dir : cfg.models_dir;
    fs::create_directories(cfg.out_dir);

    std::vector<LoadedModel> checkpoints;
    checkpoints.reserve(cfg.folds);
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        const std::string path = fold_model_path(models_dir, f);
        if (!fs::exists(path))
            throw std::runtime_error("missing checkpoint: " + path);
        checkpoints.push_back(load_model(path));
    }

    auto meta_of = [&](std::size_t f, const std::string& key) -> std::string {
        auto it = checkpoints[f].meta.find(key);
        return it == checkpoints[f].meta.end() ? "" : it->second;
    };
    const std::string fusion = meta_of(0, "fusion");
    if (fusion.empty())
        throw std::runtime_error(fold_model_path(models_dir, 0) +
                                 ": checkpoint lacks a fusion tag");
    for (std::size_t f = 1; f < cfg.folds; ++f)
        if (meta_of(f, "fusion") != fusion)
            throw std::runtime_error("checkpoints disagree on fusion view");
    const ViewKind view = view_from_fusion_tag(fusion);
    std::size_t pool_k = cfg.pool_k;
    if (!meta_of(0, "pool_k").empty())
        pool_k = static_cast<std::size_t>(std::stoull(meta_of(0, "pool_k")));
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        const std::string seed = meta_of(f, "seed");
        if (!seed.empty() && seed != std::to_string(cfg.seed))
            throw std::runtime_error(fold_model_path(models_dir, f) +
                                     ": trained with --seed " + seed +
                                     ", eval invoked with --seed " + std::to_string(cfg.seed));
        const std::string folds = meta_of(f, "folds");
        if (!folds.empty() && folds != std::to_string(cfg.folds))
            throw std::runtime_error(fold_model_path(models_dir, f) +
                                     ": trained with --folds " + folds +
                                     ", eval invoked with --folds " + std::to_string(cfg.folds));
    }

    const LoadedData data = load_view_data(cfg, view, pool_k);
    const std::vector<FoldSplit> folds = kfold_split(data.ds.queries(), cfg.folds, cfg.seed);

    auto aggregate_reports = [&](const std::vector<EvalReport>& reports) {
        EvalReport agg;
        agg.ks = cfg.ks;
        agg.mean_ndcg.assign(cfg.ks.size(), 0.0);
        for (const EvalReport& r : reports) {
            for (std::size_t ki = 0; ki < cfg.ks.size(); ++ki)
                agg.mean_ndcg[ki] += r.mean_ndcg[ki];
            agg.per_query.insert(agg.per_query.end(), r.per_query.begin(),
                                 r.per_query.end());
            agg.flagged.insert(agg.flagged.end(), r.flagged.begin(), r.flagged.end());
        }
        for (double& m : agg.mean_ndcg) m /= static_cast<double>(reports.size());
        std::sort(agg.per_query.begin(), agg.per_query.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::sort(agg.flagged.begin(), agg.flagged.end());
        agg.meta["folds"] = std::to_string(cfg.folds);
        return agg;
    };

    EvalRunResult result;
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        EvalReport report =
            evaluate(model_embedder(checkpoints[f].model), data.bank.lookup(), data.ds,
                     folds[f].eval_queries, cfg.ks, cfg.gain);
        report.meta["fold"] = std::to_string(f);
        report.meta["eval_queries"] = std::to_string(folds[f].eval_queries.size());
        write_report(report, (fs::path(cfg.out_dir) /
                              ("fold_" + std::to_string(f) + "_report.csv"))
                                 .string());
        result.fold_reports.push_back(std::move(report));
    }
    result.aggregate = aggregate_reports(result.fold_reports);
    write_report(result.aggregate, (fs::path(cfg.out_dir) / "aggregate_report.csv").string());

    if (cfg.baseline) {
        for (std::size_t f = 0; f < cfg.folds; ++f) {
            EvalReport report = evaluate(identity_embedder(), data.bank.lookup(), data.ds,
                                         folds[f].eval_queries, cfg.ks, cfg.gain);
            report.meta["fold"] = std::to_string(f);
            report.meta["baseline"] = "raw-" + fusion;
            write_report(report, (fs::path(cfg.out_dir) /
                                  ("baseline_fold_" + std::to_string(f) + "_report.csv"))
                                     .string());
            result.baseline_fold_reports.push_back(std::move(report));
        }
        result.baseline_aggregate = aggregate_reports(result.baseline_fold_reports);
        result.baseline_aggregate.meta["baseline"] = "raw-" + fusion;
        write_report(result.baseline_aggregate,
                     (fs::path(cfg.out_dir) / "baseline_aggregate_report.csv").string());
    }
    return result;
}

void run_synth(const SynthConfig& cfg, const std::string& out_dir) {
    if (out_dir.empty()) throw std::invalid_argument("synth: --out is required");
    fs::create_directories(out_dir);
    const SynthCorpus corpus = synth_generate(cfg);
    // 9 significant digits keep the files compact; loaders re-parse them
    // identically on every run.
    write_feature_table(corpus.view_a, (fs::path(out_dir) / "features_a.txt").string(), 9);
    write_region_table(corpus.view_b, (fs::path(out_dir) / "regions_b.txt").string(), 9);
    write_relevance(corpus.relevance, (fs::path(out_dir) / "relevance.txt").string());
}

RankOutcome run_rank(const PipelineConfig& cfg, const RankRequest& req) {
    ViewKind view = cfg.view;
    std::size_t pool_k = cfg.pool_k;
    LoadedModel checkpoint;
    if (!req.raw) {
        checkpoint = load_model(req.model_path);
        auto it = checkpoint.meta.find("fusion");
        if (it != checkpoint.meta.end()) view = view_from_fusion_tag(it->second);
        it = checkpoint.meta.find("pool_k");
        if (it != checkpoint.meta.end())
            pool_k = static_cast<std::size_t>(std::stoull(it->second));
    }

    const LoadedData data = load_view_data(cfg, view, pool_k);
    if (!data.ds.has_query(req.query_id))
        throw std::runtime_error("unknown query id '" + req.query_id + "'");

    const Embedder embedder =
        req.raw ? identity_embedder() : model_embedder(checkpoint.model);
    const FeatureLookup lookup = data.bank.lookup();
    auto embed = [&](const std::string& id) {
        const Vec* v = lookup(id);
        if (!v) throw std::runtime_error("id '" + id + "' missing from feature files");
        return embedder(*v);
    };

    std::vector<std::pair<std::string, Vec>> refs;
    for (const Judgment& j : data.ds.references(req.query_id))
        refs.emplace_back(j.ref, embed(j.ref));

    RankOutcome out;
    out.ranked = rank_references(req.query_id, embed(req.query_id), refs);
    out.grades.reserve(out.ranked.refs.size());
    for (const auto& ref : out.ranked.refs)
        out.grades.push_back(data.ds.grade(req.query_id, ref));
    return out;
}

}  // namespace siamret
