#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "siamret/gradcheck.hpp"
#include "siamret/model.hpp"
#include "siamret/rng.hpp"

using namespace siamret;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

// Test-side central-difference oracle: perturbs every parameter of a copy of
// the model and differentiates the forward-only batch loss. Kept independent
// of run_gradcheck so the product verifier is itself checked against this.
double max_fd_rel_error(const SiameseModel& model, const PairBatch& batch,
                        const LossConfig& loss) {
    const double eps = 1e-5;
    SiameseModel probe = model;
    const Gradients grads = batch_grad(model, batch, loss).second;

    auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-4);
    };
    auto fd = [&](double& slot) {
        const double saved = slot;
        slot = saved + eps;
        const double plus = batch_loss(probe, batch, loss);
        slot = saved - eps;
        const double minus = batch_loss(probe, batch, loss);
        slot = saved;
        return (plus - minus) / (2.0 * eps);
    };

    double worst = 0.0;
    for (std::size_t l = 0; l < probe.num_layers(); ++l) {
        for (Eigen::Index r = 0; r < probe.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < probe.weights[l].cols(); ++c)
                worst = std::max(worst, rel(grads.weights[l](r, c),
                                            fd(probe.weights[l](r, c))));
        for (Eigen::Index r = 0; r < probe.biases[l].size(); ++r)
            worst = std::max(worst, rel(grads.biases[l](r), fd(probe.biases[l](r))));
    }
    return worst;
}

PairBatch random_batch(std::size_t n, std::size_t dim, int max_grade,
                       std::mt19937_64& rng) {
    PairBatch batch;
    batch.a.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    batch.b.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    batch.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < dim; ++c) {
            batch.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                normal_double(rng);
            batch.b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                normal_double(rng);
        }
        batch.y[i] = static_cast<int>(uniform_index(rng, max_grade + 1));
    }
    return batch;
}

// Small random biases keep tiny rectifier models away from all-dead paths
// whose embedding would be undefined.
void randomize_biases(SiameseModel& m, std::mt19937_64& rng) {
    for (auto& b : m.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.3 * normal_double(rng);
}

// Shifts the margin until every pair is clear of both hinge boundaries, so
// finite differencing cannot cross a kink.
void clear_hinges(const SiameseModel& m, const PairBatch& batch, LossConfig& loss) {
    for (int guard = 0; guard < 200; ++guard) {
        bool clear = true;
        for (Eigen::Index i = 0; i < batch.a.rows(); ++i) {
            const double d = embedding_distance(forward(m, batch.a.row(i).transpose()),
                                                forward(m, batch.b.row(i).transpose()));
            if (std::abs(loss.margin - d) < 1e-3 || std::abs(loss.margin - d * d) < 1e-3)
                clear = false;
        }
        if (clear) return;
        loss.margin += 0.0137;
    }
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("init_model produces the documented shapes for the default architecture") {
    const SiameseModel m = init_model(1024, {1024, 2048, 1024, 512, 512}, 1);
    REQUIRE(m.num_layers() == 5);
    const std::pair<int, int> expected[] = {
        {1024, 1024}, {2048, 1024}, {1024, 2048}, {512, 1024}, {512, 512}};
    for (std::size_t l = 0; l < 5; ++l) {
        CHECK(m.weights[l].rows() == expected[l].first);
        CHECK(m.weights[l].cols() == expected[l].second);
        CHECK(m.biases[l].size() == expected[l].first);
    }
    CHECK(m.embedding_dim() == 512);
}

TEST_CASE("init_model: biases zero, weights scaled by fan-in, deterministic per seed") {
    const SiameseModel a = init_model(2, {3}, 17);
    REQUIRE(a.num_layers() == 1);
    CHECK(a.weights[0].rows() == 3);
    CHECK(a.weights[0].cols() == 2);
    CHECK(a.biases[0].isZero(0.0));

    const SiameseModel b = init_model(2, {3}, 17);
    CHECK((a.weights[0] - b.weights[0]).cwiseAbs().maxCoeff() == 0.0);
    const SiameseModel c = init_model(2, {3}, 18);
    CHECK((a.weights[0] - c.weights[0]).cwiseAbs().maxCoeff() > 0.0);

    // Empirical std of a wide layer should sit near sqrt(2/fan_in).
    const SiameseModel wide = init_model(256, {256}, 5);
    const double stddev = std::sqrt(wide.weights[0].array().square().mean());
    CHECK(stddev == doctest::Approx(std::sqrt(2.0 / 256.0)).epsilon(0.05));
}

TEST_CASE("init_model rejects non-positive dims") {
    CHECK_THROWS_AS(init_model(0, {3}, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_model(3, {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_model(3, {4, 0}, 1), std::invalid_argument);
}

TEST_CASE("forward through an identity layer is plain L2 normalization") {
    SiameseModel m;
    m.input_dim = 2;
    m.layer_dims = {2};
    m.weights = {Eigen::MatrixXd::Identity(2, 2)};
    m.biases = {Eigen::VectorXd::Zero(2)};
    const Eigen::VectorXd e = forward(m, vec2(3.0, 4.0));
    CHECK(e(0) == 0.6);
    CHECK(e(1) == 0.8);
}

TEST_CASE("forward output is unit norm and repeat calls are bit-identical") {
    std::mt19937_64 rng(33);
    const SiameseModel m = init_model(6, {5, 4, 3}, 91);
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::VectorXd x(6);
        for (int i = 0; i < 6; ++i) x(i) = normal_double(rng);
        const Eigen::VectorXd e1 = forward(m, x);
        CHECK(std::abs(e1.norm() - 1.0) < 1e-12);
        const Eigen::VectorXd e2 = forward(m, x);
        CHECK((e1 - e2).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("forward rejects a zero pre-normalization output") {
    SiameseModel m;
    m.input_dim = 2;
    m.layer_dims = {2};
    m.weights = {Eigen::MatrixXd::Zero(2, 2)};
    m.biases = {Eigen::VectorXd::Zero(2)};
    CHECK_THROWS_WITH_AS(forward(m, vec2(1.0, 1.0)), doctest::Contains("zero vector"),
                         std::runtime_error);
}

TEST_CASE("forward_batch matches per-sample forward") {
    std::mt19937_64 rng(44);
    const SiameseModel m = init_model(5, {4, 3}, 7);
    Eigen::MatrixXd X(6, 5);
    for (Eigen::Index r = 0; r < 6; ++r)
        for (Eigen::Index c = 0; c < 5; ++c) X(r, c) = normal_double(rng);
    const Eigen::MatrixXd E = forward_batch(m, X);
    for (Eigen::Index r = 0; r < 6; ++r) {
        const Eigen::VectorXd e = forward(m, X.row(r).transpose());
        CHECK((E.row(r).transpose() - e).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("embedding_distance basics") {
    const Eigen::VectorXd e = vec2(0.6, 0.8);
    CHECK(embedding_distance(e, e) == 0.0);
    CHECK(embedding_distance(e, -e) == 2.0);
    CHECK(embedding_distance(vec2(1, 0), vec2(0, 1)) == std::sqrt(2.0));
}

TEST_CASE("standard loss literal substitutions") {
    LossConfig cfg;
    cfg.margin = 1.0;
    CHECK(loss_standard({{0.3, 1}}, cfg) == 0.15);
    CHECK(loss_standard({{0.3, 0}}, cfg) == 0.35);
    CHECK(loss_standard({{1.5, 0}}, cfg) == 0.0);
    CHECK_THROWS_AS(loss_standard({{0.3, 2}}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(loss_standard({}, cfg), std::invalid_argument);
}

TEST_CASE("modified loss literal substitutions") {
    LossConfig cfg;
    cfg.margin = 1.0;
    CHECK(loss_modified({{0.2, 3}}, cfg) == 0.9);
    CHECK(loss_modified({{0.5, 0}}, cfg) == 0.375);
    CHECK(loss_modified({{1.2, 0}}, cfg) == 0.0);
    CHECK_THROWS_AS(loss_modified({{0.2, 5}}, cfg), std::invalid_argument);
}

TEST_CASE("modified loss is monotone in d and non-negative") {
    LossConfig cfg;
    cfg.margin = 1.0;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const double d1 = 2.0 * uniform_double(rng);
        const double d2 = d1 + 1e-6 + uniform_double(rng);
        const int y = static_cast<int>(uniform_index(rng, 4));
        const double e1 = loss_modified({{d1, y}}, cfg);
        const double e2 = loss_modified({{d2, y}}, cfg);
        CHECK(e1 >= 0.0);
        CHECK(e2 >= 0.0);
        if (y > 0)
            CHECK(e2 > e1);  // strictly increasing
        else
            CHECK(e2 <= e1);  // hinge never increases with distance
    }
}

TEST_CASE("modified loss weighs grade 3 exactly 9x grade 1") {
    LossConfig cfg;
    CHECK(loss_modified({{0.25, 3}}, cfg) / loss_modified({{0.25, 1}}, cfg) == 9.0);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const double d = 0.01 + uniform_double(rng);
        const double ratio = loss_modified({{d, 3}}, cfg) / loss_modified({{d, 1}}, cfg);
        CHECK(ratio == doctest::Approx(9.0).epsilon(1e-12));
    }
}

TEST_CASE("batch_grad is flat when every hinge is inactive") {
    // y = 0 everywhere with a margin below every squared distance: E = 0 and
    // every gradient is exactly zero.
    SiameseModel m = init_model(4, {3, 2}, 6);
    LossConfig cfg;
    cfg.margin = 1e-9;

    // Scan seeds until every pair sits strictly beyond the hinge (dead
    // rectifier paths can collapse a pair to d = 0).
    PairBatch batch;
    bool found = false;
    for (std::uint64_t attempt = 0; attempt < 50 && !found; ++attempt) {
        std::mt19937_64 rng(mix_seed(5, attempt));
        randomize_biases(m, rng);
        batch = random_batch(5, 4, 0, rng);
        found = true;
        for (Eigen::Index i = 0; i < batch.a.rows(); ++i) {
            const double d = embedding_distance(forward(m, batch.a.row(i).transpose()),
                                                forward(m, batch.b.row(i).transpose()));
            found = found && d * d > cfg.margin;
        }
    }
    REQUIRE(found);
    for (auto& y : batch.y) y = 0;
    const auto [loss, grads] = batch_grad(m, batch, cfg);
    CHECK(loss == 0.0);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        CHECK(grads.weights[l].cwiseAbs().maxCoeff() == 0.0);
        CHECK(grads.biases[l].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    // The oracle for the whole backward pass; run it over several seeds and
    // both losses before trusting batch_grad anywhere else.
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        std::mt19937_64 rng(mix_seed(100, seed));
        SiameseModel m = init_model(4, {3, 2}, mix_seed(200, seed));
        randomize_biases(m, rng);
        const bool modified = seed % 2 == 0;
        PairBatch batch = random_batch(2 + seed % 5, 4, modified ? 3 : 1, rng);

        LossConfig cfg;
        cfg.kind = modified ? LossKind::modified : LossKind::standard;
        clear_hinges(m, batch, cfg);

        const double worst = max_fd_rel_error(m, batch, cfg);
        CAPTURE(seed);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("identical inputs with y > 0 produce zero gradient through d = 0") {
    std::mt19937_64 rng(6);
    SiameseModel m = init_model(4, {3, 2}, 7);
    randomize_biases(m, rng);
    PairBatch batch = random_batch(1, 4, 3, rng);
    batch.b = batch.a;
    batch.y[0] = 3;
    const auto [loss, grads] = batch_grad(m, batch, LossConfig{});
    CHECK(loss == 0.0);  // y^2 * d with d = 0
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        CHECK(grads.weights[l].cwiseAbs().maxCoeff() == 0.0);
        CHECK(grads.biases[l].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("batch_grad loss agrees with the forward-only batch loss") {
    std::mt19937_64 rng(7);
    const SiameseModel m = init_model(5, {4, 3}, 8);
    const PairBatch batch = random_batch(6, 5, 3, rng);
    LossConfig cfg;
    const double from_grad = batch_grad(m, batch, cfg).first;
    const double from_forward = batch_loss(m, batch, cfg);
    CHECK(from_grad == doctest::Approx(from_forward).epsilon(1e-12));
}

TEST_CASE("tied weights make pairs symmetric") {
    std::mt19937_64 rng(8);
    SiameseModel m = init_model(4, {3, 2}, 9);
    randomize_biases(m, rng);
    const PairBatch ab = random_batch(1, 4, 3, rng);
    PairBatch ba = ab;
    std::swap(ba.a, ba.b);

    const Eigen::VectorXd ea = forward(m, ab.a.row(0).transpose());
    const Eigen::VectorXd eb = forward(m, ab.b.row(0).transpose());
    CHECK(embedding_distance(ea, eb) == embedding_distance(eb, ea));

    const auto [la, ga] = batch_grad(m, ab, LossConfig{});
    const auto [lb, gb] = batch_grad(m, ba, LossConfig{});
    CHECK(la == lb);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        CHECK((ga.weights[l] - gb.weights[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((ga.biases[l] - gb.biases[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("scaling the final layer leaves the embedding unchanged") {
    std::mt19937_64 rng(9);
    SiameseModel m = init_model(5, {4, 3}, 10);
    Eigen::VectorXd x(5);
    for (int i = 0; i < 5; ++i) x(i) = normal_double(rng);
    const Eigen::VectorXd before = forward(m, x);
    m.weights.back() *= 7.5;
    m.biases.back() *= 7.5;
    const Eigen::VectorXd after = forward(m, x);
    CHECK((before - after).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("sgd_step hand-checked recursions") {
    SiameseModel m;
    m.input_dim = 1;
    m.layer_dims = {1};
    m.weights = {Eigen::MatrixXd::Zero(1, 1)};
    m.biases = {Eigen::VectorXd::Zero(1)};
    Gradients g = Gradients::zeros_like(m);
    Gradients v = Gradients::zeros_like(m);
    g.weights[0](0, 0) = 1.0;

    TrainConfig plain;
    plain.momentum = 0.0;
    plain.learning_rate = 1.0;
    sgd_step(m, g, plain, v);
    CHECK(m.weights[0](0, 0) == -1.0);

    // zero gradient, zero velocity: no movement
    m.weights[0](0, 0) = 0.0;
    v = Gradients::zeros_like(m);
    sgd_step(m, Gradients::zeros_like(m), plain, v);
    CHECK(m.weights[0](0, 0) == 0.0);

    // two steps of momentum 0.9, lr 0.1 against a constant unit gradient
    m.weights[0](0, 0) = 0.0;
    v = Gradients::zeros_like(m);
    TrainConfig mom;
    mom.momentum = 0.9;
    mom.learning_rate = 0.1;
    sgd_step(m, g, mom, v);
    sgd_step(m, g, mom, v);
    CHECK(m.weights[0](0, 0) == doctest::Approx(-0.29).epsilon(1e-15));
}

TEST_CASE("sgd_step rejects mismatched shapes") {
    SiameseModel m = init_model(2, {2}, 1);
    Gradients g = Gradients::zeros_like(m);
    Gradients v = Gradients::zeros_like(m);
    g.weights[0] = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(sgd_step(m, g, TrainConfig{}, v), std::invalid_argument);
}

TEST_CASE("train with zero epochs returns an empty history and leaves the model alone") {
    SiameseModel m = init_model(2, {2}, 3);
    const Eigen::MatrixXd w0 = m.weights[0];
    const std::vector<Pair> pairs{{"a", "b", 3}};
    const Vec va{1.0, 0.0}, vb{0.0, 1.0};
    const FeatureLookup lookup = [&](const std::string& id) -> const Vec* {
        if (id == "a") return &va;
        if (id == "b") return &vb;
        return nullptr;
    };
    TrainConfig tc;
    tc.epochs = 0;
    const TrainHistory h = train(m, pairs, lookup, LossConfig{}, tc);
    CHECK(h.epoch_mean_loss.empty());
    CHECK((m.weights[0] - w0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train reports an unresolvable id by name") {
    SiameseModel m = init_model(2, {2}, 3);
    const std::vector<Pair> pairs{{"a", "ghost", 1}};
    const Vec va{1.0, 0.0};
    const FeatureLookup lookup = [&](const std::string& id) -> const Vec* {
        return id == "a" ? &va : nullptr;
    };
    TrainConfig tc;
    tc.epochs = 1;
    CHECK_THROWS_WITH_AS(train(m, pairs, lookup, LossConfig{}, tc),
                         doctest::Contains("ghost"), std::runtime_error);
}

TEST_CASE("train is bit-deterministic given the seed") {
    SynthConfig sc;
    sc.n_queries = 6;
    sc.refs_per_query = 8;
    sc.dim_a = 6;
    sc.dim_b = 6;
    sc.n_latent_clusters = 3;
    sc.regions_per_image = 2;
    sc.noise_sigma = 0.5;
    sc.seed = 123;
    const SynthCorpus corpus = synth_generate(sc);
    const auto pairs = generate_pairs(corpus.relevance, corpus.relevance.queries());
    const FeatureLookup lookup = [&](const std::string& id) {
        return corpus.view_a.find(id);
    };

    LossConfig lc;
    lc.batch_size = 16;
    TrainConfig tc;
    tc.epochs = 3;
    tc.learning_rate = 0.05;
    tc.seed = 7;

    SiameseModel m1 = init_model(6, {8, 4}, 55);
    SiameseModel m2 = init_model(6, {8, 4}, 55);
    const TrainHistory h1 = train(m1, pairs, lookup, lc, tc);
    const TrainHistory h2 = train(m2, pairs, lookup, lc, tc);
    CHECK(h1.epoch_mean_loss == h2.epoch_mean_loss);
    for (std::size_t l = 0; l < m1.num_layers(); ++l) {
        CHECK((m1.weights[l] - m2.weights[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((m1.biases[l] - m2.biases[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("training on a small planted corpus at least halves the mean loss") {
    SynthConfig sc;
    sc.n_queries = 10;
    sc.refs_per_query = 15;
    sc.dim_a = 12;
    sc.dim_b = 12;
    sc.n_latent_clusters = 3;
    sc.regions_per_image = 2;
    sc.noise_sigma = 0.3;
    sc.seed = 31;
    const SynthCorpus corpus = synth_generate(sc);
    const auto pairs = generate_pairs(corpus.relevance, corpus.relevance.queries());
    const FeatureLookup lookup = [&](const std::string& id) {
        return corpus.view_a.find(id);
    };

    SiameseModel m = init_model(12, {16, 8}, 77);
    LossConfig lc;
    lc.batch_size = 32;
    TrainConfig tc;
    tc.epochs = 30;
    tc.learning_rate = 0.02;
    tc.seed = 3;
    const TrainHistory h = train(m, pairs, lookup, lc, tc);
    REQUIRE(h.epoch_mean_loss.size() == 30);
    for (double e : h.epoch_mean_loss) CHECK(e >= 0.0);
    CHECK(h.epoch_mean_loss.back() < 0.5 * h.epoch_mean_loss.front());
}

TEST_CASE("train aborts with a diagnostic when the loss diverges") {
    SynthConfig sc;
    sc.n_queries = 4;
    sc.refs_per_query = 6;
    sc.dim_a = 6;
    sc.dim_b = 6;
    sc.n_latent_clusters = 2;
    sc.regions_per_image = 2;
    sc.seed = 8;
    const SynthCorpus corpus = synth_generate(sc);
    const auto pairs = generate_pairs(corpus.relevance, corpus.relevance.queries());
    const FeatureLookup lookup = [&](const std::string& id) {
        return corpus.view_a.find(id);
    };
    SiameseModel m = init_model(6, {8, 4}, 5);
    TrainConfig tc;
    tc.epochs = 10;
    tc.learning_rate = 1e200;  // overflow the affine chain on purpose
    CHECK_THROWS_AS(train(m, pairs, lookup, LossConfig{}, tc), std::runtime_error);
}

TEST_CASE("checkpoint save/load round-trips the model exactly") {
    std::mt19937_64 rng(10);
    const SiameseModel m = init_model(5, {4, 3}, 20);
    const std::string path = (fs::temp_directory_path() / "model_rt.model").string();
    save_model(m, path, {{"fusion", "fic+regions"}, {"pool_k", "5"}});
    const LoadedModel loaded = load_model(path);

    CHECK(loaded.meta.at("fusion") == "fic+regions");
    CHECK(loaded.meta.at("pool_k") == "5");
    CHECK(loaded.model.input_dim == 5);
    CHECK(loaded.model.layer_dims == std::vector<std::size_t>{4, 3});
    for (std::size_t l = 0; l < m.num_layers(); ++l)
        CHECK((m.weights[l] - loaded.model.weights[l]).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd x(5);
    for (int i = 0; i < 5; ++i) x(i) = normal_double(rng);
    CHECK((forward(m, x) - forward(loaded.model, x)).cwiseAbs().maxCoeff() == 0.0);

    // saving the loaded model again reproduces the file byte for byte
    const std::string path2 = (fs::temp_directory_path() / "model_rt2.model").string();
    save_model(loaded.model, path2, loaded.meta);
    std::ifstream f1(path), f2(path2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
}

TEST_CASE("load_model rejects truncated files rather than returning a partial model") {
    const SiameseModel m = init_model(4, {3, 2}, 21);
    const std::string path = (fs::temp_directory_path() / "model_trunc.model").string();
    save_model(m, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    in.close();
    const std::string full = ss.str();
    std::ofstream out(path);
    out << full.substr(0, full.size() * 2 / 3);
    out.close();
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("truncated"),
                         std::runtime_error);
}

TEST_CASE("load_model names the layer on a declared-size mismatch") {
    const std::string path = (fs::temp_directory_path() / "model_shape.model").string();
    std::ofstream out(path);
    out << "SIAMESE v1\ninput_dim 2\nlayers 1 2\nW 0 3 2\n1 2\n3 4\n5 6\nb 0 2\n0 0\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("layer 0"),
                         std::runtime_error);
}

TEST_CASE("load_model rejects a version mismatch") {
    const std::string path = (fs::temp_directory_path() / "model_ver.model").string();
    std::ofstream out(path);
    out << "SIAMESE v2\ninput_dim 2\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("version"),
                         std::runtime_error);
}

TEST_CASE("run_gradcheck passes and its corruption hook trips the detector") {
    GradCheckConfig cfg;
    cfg.trials = 10;
    cfg.seed = 7;
    const GradCheckReport ok = run_gradcheck(cfg);
    CHECK(ok.passed);
    CHECK(ok.max_rel_error < 1e-4);
    REQUIRE(ok.per_trial.size() == 10);

    const GradCheckReport again = run_gradcheck(cfg);
    CHECK(again.max_rel_error == ok.max_rel_error);

    cfg.corrupt = true;
    const GradCheckReport bad = run_gradcheck(cfg);
    CHECK_FALSE(bad.passed);
}

}  // TEST_SUITE
