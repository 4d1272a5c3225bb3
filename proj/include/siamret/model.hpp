#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "siamret/dataset.hpp"
#include "siamret/features.hpp"

namespace siamret {

/// The shared wing of the siamese network: a fully connected stack with
/// rectifier activations between layers, a linear last layer, and L2
/// normalization of the final output. One parameter set serves both wings.
struct SiameseModel {
    std::size_t input_dim = 0;
    std::vector<std::size_t> layer_dims;       // output units per layer
    std::vector<Eigen::MatrixXd> weights;      // [l]: layer_dims[l] x fan_in
    std::vector<Eigen::VectorXd> biases;       // [l]: layer_dims[l]

    std::size_t num_layers() const { return layer_dims.size(); }
    std::size_t embedding_dim() const { return layer_dims.back(); }
};

enum class LossKind { standard, modified };

struct LossConfig {
    double margin = 1.0;                 // hinge threshold for dissimilar pairs
    std::size_t batch_size = 64;
    LossKind kind = LossKind::modified;
    /// Multiplier applied to grades inside the modified loss (1.0 = raw
    /// grades 0..3; 1/3 rescales them into [0,1]).
    double grade_scale = 1.0;
};

struct TrainConfig {
    std::size_t epochs = 30;
    double learning_rate = 0.01;
    double momentum = 0.9;               // classical momentum, in [0, 1)
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
};

struct TrainHistory {
    std::vector<double> epoch_mean_loss;  // one entry per epoch
};

/// Per-parameter accumulator with the model's shapes; also serves as the
/// optimizer's velocity state.
struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static Gradients zeros_like(const SiameseModel& m);
};

/// A mini-batch of input pairs: row i of `a` pairs with row i of `b`.
struct PairBatch {
    Eigen::MatrixXd a;       // batch x input_dim
    Eigen::MatrixXd b;       // batch x input_dim
    std::vector<int> y;      // grades, one per row
};

/// Weights ~ N(0, 2/fan_in), biases zero, deterministic per seed.
SiameseModel init_model(std::size_t input_dim, std::vector<std::size_t> layer_dims,
                        std::uint64_t seed);

/// One wing: affine + rectifier per hidden layer, affine last layer, then L2
/// normalization. Throws if the pre-normalization output has norm <= 1e-12.
Eigen::VectorXd forward(const SiameseModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

/// forward() for many inputs at once, one row per sample.
Eigen::MatrixXd forward_batch(const SiameseModel& m,
                              const Eigen::Ref<const Eigen::MatrixXd>& inputs);

/// Plain (not squared) euclidean distance; in [0, 2] for unit-norm inputs.
double embedding_distance(const Eigen::Ref<const Eigen::VectorXd>& e1,
                          const Eigen::Ref<const Eigen::VectorXd>& e2);

/// Contrastive loss over (distance, label) pairs with binary labels:
///   E = 1/(2N) sum  y*d + (1-y)*max(margin - d, 0)
double loss_standard(const std::vector<std::pair<double, int>>& pairs,
                     const LossConfig& cfg);

/// Graded-relevance variant, labels 0..3:
///   E = 1/(2N) sum  y^2*d + [y=0]*max(margin - d^2, 0)
/// The square term punishes residual distance between highly relevant pairs.
double loss_modified(const std::vector<std::pair<double, int>>& pairs,
                     const LossConfig& cfg);

/// Batch loss via the single-sample forward path only; used by the
/// finite-difference verifier, which must not touch the backward code.
double batch_loss(const SiameseModel& m, const PairBatch& batch, const LossConfig& cfg);

/// Loss and exact analytic gradients for one mini-batch. Both wings'
/// contributions accumulate into the single shared parameter set. At hinge
/// boundaries the subgradient 0 is used; the distance derivative at d = 0
/// is taken as 0.
std::pair<double, Gradients> batch_grad(const SiameseModel& m, const PairBatch& batch,
                                        const LossConfig& cfg);

/// Classical momentum update: v <- momentum*v - lr*g; theta <- theta + v.
void sgd_step(SiameseModel& m, const Gradients& grads, const TrainConfig& cfg,
              Gradients& velocity);

/// Mini-batch SGD over the pair list. Pairs are reshuffled each epoch by a
/// seeded generator when enabled; the final partial batch uses its own size
/// as N. Returns per-epoch mean loss. Aborts with a diagnostic on a
/// non-finite loss.
TrainHistory train(SiameseModel& m, const std::vector<Pair>& pairs,
                   const FeatureLookup& lookup, const LossConfig& loss_cfg,
                   const TrainConfig& train_cfg);

// Checkpoint format: line 1 "SIAMESE v1"; optional "# key value" metadata
// lines; "input_dim D"; "layers L d1 ... dL"; then per layer "W l rows cols"
// with row-major values and "b l rows" with values, written with 17
// significant digits for exact round-trips.
void save_model(const SiameseModel& m, const std::string& path,
                const std::map<std::string, std::string>& meta = {});

struct LoadedModel {
    SiameseModel model;
    std::map<std::string, std::string> meta;
};

LoadedModel load_model(const std::string& path);

}  // namespace siamret
