#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "siamret/gradcheck.hpp"
#include "siamret/pipeline.hpp"

namespace {

using namespace siamret;

struct CliOptions {
    PipelineConfig pipe;
    SynthConfig synth;
    std::string loss_name = "modified";
    std::string view = "fused";
    std::string gain = "exp";
    bool scale_grades = false;
    bool no_shuffle = false;
    bool ring_off = false;

    std::string query_id;
    std::string model_path;
    bool raw = false;

    GradCheckConfig gradcheck;
};

void add_data_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--fic", opt.pipe.fic_path, "whole-image (FIC) feature file");
    cmd->add_option("--regions", opt.pipe.regions_path, "region feature file");
    cmd->add_option("--rel", opt.pipe.rel_path, "relevance judgments file")->required();
    cmd->add_option("--k", opt.pipe.pool_k, "regions pooled per image (top-k by priority)")
        ->check(CLI::PositiveNumber);
}

void finish_config(CliOptions& opt) {
    opt.pipe.view = parse_view(opt.view);
    opt.pipe.loss.kind =
        opt.loss_name == "standard" ? LossKind::standard : LossKind::modified;
    opt.pipe.loss.grade_scale = opt.scale_grades ? 1.0 / 3.0 : 1.0;
    opt.pipe.gain = opt.gain == "linear" ? GainKind::linear : GainKind::exponential;
    opt.pipe.train.shuffle_each_epoch = !opt.no_shuffle;
    opt.synth.ring_grades = !opt.ring_off;
}

int run(int argc, char** argv) {
    CLI::App app{"Fused-feature siamese retrieval toolkit"};
    app.require_subcommand(1);
    // Optional key=value defaults, e.g. "[train]\nepochs=8"; given before the
    // subcommand ("siamret --config run.cfg train ..."). Command-line flags
    // take precedence over config values.
    app.set_config("--config");

    CliOptions opt;

    auto* synth = app.add_subcommand(
        "synth", "Generate a planted-similarity synthetic corpus");
    synth->add_option("--n-queries", opt.synth.n_queries)->check(CLI::PositiveNumber);
    synth->add_option("--refs-per-query", opt.synth.refs_per_query)
        ->check(CLI::PositiveNumber);
    synth->add_option("--dim-a", opt.synth.dim_a)->check(CLI::PositiveNumber);
    synth->add_option("--dim-b", opt.synth.dim_b)->check(CLI::PositiveNumber);
    synth->add_option("--clusters", opt.synth.n_latent_clusters)
        ->check(CLI::PositiveNumber);
    synth->add_option("--regions-per-image", opt.synth.regions_per_image)
        ->check(CLI::PositiveNumber);
    synth->add_option("--noise-sigma", opt.synth.noise_sigma)
        ->check(CLI::NonNegativeNumber);
    synth->add_flag("--no-ring", opt.ring_off,
                    "grade only same-cluster references (no adjacent-cluster 2s)");
    synth->add_option("--seed", opt.synth.seed);
    synth->add_option("--out", opt.pipe.out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "Train one siamese model per fold");
    add_data_flags(train, opt);
    train->add_option("--folds", opt.pipe.folds);
    train->add_option("--epochs", opt.pipe.train.epochs);
    train->add_option("--lr", opt.pipe.train.learning_rate)->check(CLI::PositiveNumber);
    train->add_option("--momentum", opt.pipe.train.momentum)
        ->check(CLI::Range(0.0, 0.9999));
    train->add_option("--margin", opt.pipe.loss.margin)->check(CLI::PositiveNumber);
    train->add_option("--batch", opt.pipe.loss.batch_size)->check(CLI::PositiveNumber);
    train->add_option("--loss", opt.loss_name)
        ->check(CLI::IsMember({"standard", "modified"}));
    train->add_option("--layers", opt.pipe.layer_dims, "hidden unit counts per layer")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    train->add_option("--view", opt.view)->check(CLI::IsMember({"fused", "a", "b"}));
    train->add_flag("--scale-grades", opt.scale_grades,
                    "rescale grades to [0,1] inside the modified loss");
    train->add_flag("--no-shuffle", opt.no_shuffle);
    train->add_option("--seed", opt.pipe.seed);
    train->add_option("--out", opt.pipe.out_dir, "checkpoint/history directory")
        ->required();

    auto* eval = app.add_subcommand("eval", "Evaluate per-fold checkpoints with nDCG@K");
    add_data_flags(eval, opt);
    eval->add_option("--models", opt.pipe.models_dir,
                     "checkpoint directory (defaults to --out)");
    eval->add_option("--folds", opt.pipe.folds);
    eval->add_option("--ks", opt.pipe.ks, "rank cutoffs")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    eval->add_flag("--baseline", opt.pipe.baseline,
                   "also rank by raw features and report the baseline");
    eval->add_option("--gain", opt.gain)->check(CLI::IsMember({"exp", "linear"}));
    eval->add_option("--seed", opt.pipe.seed);
    eval->add_option("--out", opt.pipe.out_dir, "report directory")->required();

    auto* rank = app.add_subcommand("rank", "Rank one query's judged references");
    add_data_flags(rank, opt);
    rank->add_option("--query", opt.query_id)->required();
    rank->add_option("--model", opt.model_path, "checkpoint to embed with");
    rank->add_flag("--raw", opt.raw, "rank by raw features instead of a model");
    rank->add_option("--view", opt.view)->check(CLI::IsMember({"fused", "a", "b"}));

    auto* gradcheck = app.add_subcommand(
        "gradcheck", "Verify analytic gradients against finite differences");
    gradcheck->add_option("--trials", opt.gradcheck.trials)->check(CLI::PositiveNumber);
    gradcheck->add_option("--seed", opt.gradcheck.seed);
    gradcheck->add_flag("--corrupt", opt.gradcheck.corrupt,
                        "self-test hook: corrupt one gradient entry");

    CLI11_PARSE(app, argc, argv);
    finish_config(opt);

    if (synth->parsed()) {
        run_synth(opt.synth, opt.pipe.out_dir);
        return 0;
    }
    if (train->parsed()) {
        const auto results = run_train(opt.pipe);
        for (const auto& r : results)
            std::printf("fold %zu: train_queries=%zu eval_queries=%zu pairs=%zu "
                        "first_loss=%.6g final_loss=%.6g\n",
                        r.fold, r.n_train_queries, r.n_eval_queries, r.n_pairs,
                        r.first_epoch_loss, r.final_epoch_loss);
        return 0;
    }
    if (eval->parsed()) {
        const auto result = run_eval(opt.pipe);
        for (std::size_t ki = 0; ki < opt.pipe.ks.size(); ++ki)
            std::printf("K=%zu mean_ndcg=%.10g\n", opt.pipe.ks[ki],
                        result.aggregate.mean_ndcg[ki]);
        if (opt.pipe.baseline)
            for (std::size_t ki = 0; ki < opt.pipe.ks.size(); ++ki)
                std::printf("baseline K=%zu mean_ndcg=%.10g\n", opt.pipe.ks[ki],
                            result.baseline_aggregate.mean_ndcg[ki]);
        return 0;
    }
    if (rank->parsed()) {
        if (!opt.raw && opt.model_path.empty())
            throw CLI::ValidationError("rank", "either --model or --raw is required");
        const RankOutcome out =
            run_rank(opt.pipe, RankRequest{opt.query_id, opt.model_path, opt.raw});
        for (std::size_t i = 0; i < out.ranked.refs.size(); ++i)
            std::printf("%s %.10g %d\n", out.ranked.refs[i].c_str(),
                        out.ranked.distances[i], out.grades[i]);
        return 0;
    }
    if (gradcheck->parsed()) {
        const GradCheckReport report = run_gradcheck(opt.gradcheck);
        std::printf("gradcheck: trials=%zu max_rel_error=%.3g tolerance=%.3g %s\n",
                    opt.gradcheck.trials, report.max_rel_error, opt.gradcheck.tolerance,
                    report.passed ? "PASS" : "FAIL");
        return report.passed ? 0 : 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
