#include "siamret/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "siamret/rng.hpp"

namespace siamret {

namespace {

double rel_error(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-4);
}

// Central difference of the forward-only loss w.r.t. one parameter slot.
double central_diff(SiameseModel& m, double& slot, const PairBatch& batch,
                    const LossConfig& cfg, double eps) {
    const double saved = slot;
    slot = saved + eps;
    const double plus = batch_loss(m, batch, cfg);
    slot = saved - eps;
    const double minus = batch_loss(m, batch, cfg);
    slot = saved;
    return (plus - minus) / (2.0 * eps);
}

}  // namespace

GradCheckReport run_gradcheck(const GradCheckConfig& cfg) {
    GradCheckReport report;
    report.per_trial.reserve(cfg.trials);

    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        std::mt19937_64 rng(mix_seed(cfg.seed, trial));

        SiameseModel model = init_model(4, {3, 2}, mix_seed(cfg.seed, 1000 + trial));
        // Nonzero biases keep the embedding defined even when a sample lands
        // on a fully dead rectifier path, and give the bias gradients
        // something to check.
        for (auto& b : model.biases)
            for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.3 * normal_double(rng);

        LossConfig loss;
        loss.kind = (trial % 2 == 0) ? LossKind::modified : LossKind::standard;
        loss.margin = 1.0;

        const std::size_t n_pairs = 2 + trial % 7;  // 2..8
        PairBatch batch;
        batch.a.resize(static_cast<Eigen::Index>(n_pairs), 4);
        batch.b.resize(static_cast<Eigen::Index>(n_pairs), 4);
        batch.y.resize(n_pairs);
        for (std::size_t i = 0; i < n_pairs; ++i) {
            for (Eigen::Index c = 0; c < 4; ++c) {
                batch.a(static_cast<Eigen::Index>(i), c) = normal_double(rng);
                batch.b(static_cast<Eigen::Index>(i), c) = normal_double(rng);
            }
            const int max_grade = loss.kind == LossKind::modified ? 3 : 1;
            batch.y[i] = static_cast<int>(
                uniform_index(rng, static_cast<std::uint64_t>(max_grade) + 1));
        }

        // Keep every pair's distance clear of the hinge boundary: an epsilon
        // step in parameter space moves d by far less than this slack, so no
        // pair switches hinge side during differencing.
        const Eigen::MatrixXd ea = forward_batch(model, batch.a);
        const Eigen::MatrixXd eb = forward_batch(model, batch.b);
        for (int guard = 0; guard < 200; ++guard) {
            bool clear = true;
            for (Eigen::Index i = 0; i < ea.rows(); ++i) {
                const double d = (ea.row(i) - eb.row(i)).norm();
                if (std::abs(loss.margin - d) < 1e-3 ||
                    std::abs(loss.margin - d * d) < 1e-3) {
                    clear = false;
                    break;
                }
            }
            if (clear) break;
            loss.margin += 0.0137;
        }

        auto [loss_value, grads] = batch_grad(model, batch, loss);
        (void)loss_value;
        if (cfg.corrupt) grads.weights[0](0, 0) += 1e-3;

        double worst = 0.0;
        for (std::size_t l = 0; l < model.num_layers(); ++l) {
            Eigen::MatrixXd& w = model.weights[l];
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c) {
                    const double fd = central_diff(model, w(r, c), batch, loss, cfg.epsilon);
                    worst = std::max(worst, rel_error(grads.weights[l](r, c), fd));
                }
            Eigen::VectorXd& b = model.biases[l];
            for (Eigen::Index r = 0; r < b.size(); ++r) {
                const double fd = central_diff(model, b(r), batch, loss, cfg.epsilon);
                worst = std::max(worst, rel_error(grads.biases[l](r), fd));
            }
        }
        report.per_trial.push_back(worst);
        report.max_rel_error = std::max(report.max_rel_error, worst);
    }
    report.passed = report.max_rel_error < cfg.tolerance;
    return report;
}

}  // namespace siamret
