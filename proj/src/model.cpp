#include "siamret/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "siamret/rng.hpp"

namespace siamret {

namespace {

constexpr double kNormFloor = 1e-12;

void check_architecture(std::size_t input_dim, const std::vector<std::size_t>& layer_dims) {
    if (input_dim == 0) throw std::invalid_argument("input_dim must be positive");
    if (layer_dims.empty()) throw std::invalid_argument("at least one layer required");
    for (std::size_t d : layer_dims)
        if (d == 0) throw std::invalid_argument("layer dims must be positive");
}

// Loss term and its derivative w.r.t. d for one pair. Hinge boundaries use
// the subgradient 0 (strict inequality below).
struct TermSlope {
    double term;
    double slope;
};

TermSlope pair_term(double d, int y, const LossConfig& cfg) {
    if (cfg.kind == LossKind::standard) {
        const int yb = y > 0 ? 1 : 0;  // standard loss is defined for binary labels
        if (yb == 1) return {d, 1.0};
        const double gap = cfg.margin - d;
        if (gap > 0.0) return {gap, -1.0};
        return {0.0, 0.0};
    }
    const double yw = static_cast<double>(y) * cfg.grade_scale;
    if (y != 0) return {yw * yw * d, yw * yw};
    const double gap = cfg.margin - d * d;
    if (gap > 0.0) return {gap, -2.0 * d};
    return {0.0, 0.0};
}

}  // namespace

Gradients Gradients::zeros_like(const SiameseModel& m) {
    Gradients g;
    g.weights.reserve(m.num_layers());
    g.biases.reserve(m.num_layers());
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
    }
    return g;
}

SiameseModel init_model(std::size_t input_dim, std::vector<std::size_t> layer_dims,
                        std::uint64_t seed) {
    check_architecture(input_dim, layer_dims);

    SiameseModel m;
    m.input_dim = input_dim;
    m.layer_dims = std::move(layer_dims);

    std::mt19937_64 rng(seed);
    std::size_t fan_in = input_dim;
    for (std::size_t l = 0; l < m.layer_dims.size(); ++l) {
        const std::size_t out = m.layer_dims[l];
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        Eigen::MatrixXd w(out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = stddev * normal_double(rng);
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(out));
        fan_in = out;
    }
    return m;
}

namespace {

struct WingCache {
    std::vector<Eigen::MatrixXd> hidden;  // post-rectifier activations per hidden layer
    Eigen::MatrixXd pre_norm;             // last layer output before normalization
    Eigen::VectorXd norms;
    Eigen::MatrixXd embeddings;
};

WingCache wing_forward(const SiameseModel& m, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != m.input_dim)
        throw std::invalid_argument("forward: input dim mismatch (got " +
                                    std::to_string(inputs.cols()) + ", expected " +
                                    std::to_string(m.input_dim) + ")");

    WingCache cache;
    const std::size_t L = m.num_layers();
    cache.hidden.reserve(L > 0 ? L - 1 : 0);

    Eigen::MatrixXd cur = inputs;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = cur * m.weights[l].transpose();
        z.rowwise() += m.biases[l].transpose();
        if (l + 1 < L) {
            z = z.cwiseMax(0.0);
            cache.hidden.push_back(z);
            cur = std::move(z);
        } else {
            cache.pre_norm = std::move(z);
        }
    }

    cache.norms = cache.pre_norm.rowwise().norm();
    for (Eigen::Index i = 0; i < cache.norms.size(); ++i)
        if (!(cache.norms(i) > kNormFloor))
            throw std::runtime_error(
                "forward: pre-normalization output is (numerically) the zero vector; "
                "the embedding is undefined");
    cache.embeddings = cache.pre_norm.array().colwise() / cache.norms.array();
    return cache;
}

}  // namespace

Eigen::VectorXd forward(const SiameseModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const WingCache cache = wing_forward(m, x.transpose());
    return cache.embeddings.row(0).transpose();
}

Eigen::MatrixXd forward_batch(const SiameseModel& m,
                              const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
    return wing_forward(m, inputs).embeddings;
}

double embedding_distance(const Eigen::Ref<const Eigen::VectorXd>& e1,
                          const Eigen::Ref<const Eigen::VectorXd>& e2) {
    if (e1.size() != e2.size())
        throw std::invalid_argument("embedding_distance: dim mismatch");
    return (e1 - e2).norm();
}

double loss_standard(const std::vector<std::pair<double, int>>& pairs,
                     const LossConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("loss_standard: empty batch");
    LossConfig c = cfg;
    c.kind = LossKind::standard;
    double sum = 0.0;
    for (const auto& [d, y] : pairs) {
        if (y != 0 && y != 1)
            throw std::invalid_argument("loss_standard: label must be 0 or 1, got " +
                                        std::to_string(y));
        sum += pair_term(d, y, c).term;
    }
    return sum / (2.0 * static_cast<double>(pairs.size()));
}

double loss_modified(const std::vector<std::pair<double, int>>& pairs,
                     const LossConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("loss_modified: empty batch");
    LossConfig c = cfg;
    c.kind = LossKind::modified;
    double sum = 0.0;
    for (const auto& [d, y] : pairs) {
        if (y < 0 || y > 3)
            throw std::invalid_argument("loss_modified: grade out of range 0..3, got " +
                                        std::to_string(y));
        sum += pair_term(d, y, c).term;
    }
    return sum / (2.0 * static_cast<double>(pairs.size()));
}

namespace {

void check_batch(const SiameseModel& m, const PairBatch& batch) {
    if (batch.a.rows() == 0) throw std::invalid_argument("empty batch");
    if (batch.a.rows() != batch.b.rows() ||
        static_cast<std::size_t>(batch.a.rows()) != batch.y.size())
        throw std::invalid_argument("batch: a, b and y sizes disagree");
    if (static_cast<std::size_t>(batch.a.cols()) != m.input_dim ||
        static_cast<std::size_t>(batch.b.cols()) != m.input_dim)
        throw std::invalid_argument("batch: input dim mismatch");
    for (int y : batch.y)
        if (y < 0 || y > 3)
            throw std::invalid_argument("batch: grade out of range 0..3");
}

}  // namespace

double batch_loss(const SiameseModel& m, const PairBatch& batch, const LossConfig& cfg) {
    check_batch(m, batch);
    const Eigen::Index n = batch.a.rows();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd ea = forward(m, batch.a.row(i).transpose());
        const Eigen::VectorXd eb = forward(m, batch.b.row(i).transpose());
        const double d = embedding_distance(ea, eb);
        sum += pair_term(d, batch.y[static_cast<std::size_t>(i)], cfg).term;
    }
    return sum / (2.0 * static_cast<double>(n));
}

std::pair<double, Gradients> batch_grad(const SiameseModel& m, const PairBatch& batch,
                                        const LossConfig& cfg) {
    check_batch(m, batch);
    const Eigen::Index n = batch.a.rows();
    const std::size_t L = m.num_layers();

    // Both wings share parameters, so the two sides are stacked into one
    // 2n-row pass and their gradient contributions accumulate naturally.
    Eigen::MatrixXd stacked(2 * n, batch.a.cols());
    stacked.topRows(n) = batch.a;
    stacked.bottomRows(n) = batch.b;
    const WingCache cache = wing_forward(m, stacked);
    const Eigen::MatrixXd& emb = cache.embeddings;

    const double inv = 1.0 / (2.0 * static_cast<double>(n));
    double loss_sum = 0.0;
    Eigen::MatrixXd g_emb = Eigen::MatrixXd::Zero(2 * n, emb.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd diff = emb.row(i) - emb.row(n + i);
        const double d = diff.norm();
        const TermSlope ts = pair_term(d, batch.y[static_cast<std::size_t>(i)], cfg);
        loss_sum += ts.term;
        if (d > 0.0 && ts.slope != 0.0) {
            const Eigen::RowVectorXd g = (inv * ts.slope / d) * diff;
            g_emb.row(i) = g;
            g_emb.row(n + i) = -g;
        }
    }

    // Through the normalization e = u/|u|:  g_u = (g_e - (g_e . e) e) / |u|.
    const Eigen::VectorXd dots = (g_emb.array() * emb.array()).rowwise().sum();
    Eigen::MatrixXd g = g_emb - (emb.array().colwise() * dots.array()).matrix();
    g.array().colwise() /= cache.norms.array();

    Gradients grads;
    grads.weights.resize(L);
    grads.biases.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd& a_prev = (l == 0) ? stacked : cache.hidden[l - 1];
        // One term per wing, added as a commutative two-operand sum: swapping
        // a pair's sides permutes the two terms and nothing else, so the
        // tied-weight symmetry holds bit-exactly.
        grads.weights[l] = (g.topRows(n).transpose() * a_prev.topRows(n)).eval() +
                           (g.bottomRows(n).transpose() * a_prev.bottomRows(n)).eval();
        grads.biases[l] = g.topRows(n).colwise().sum().transpose().eval() +
                          g.bottomRows(n).colwise().sum().transpose().eval();
        if (l > 0) {
            Eigen::MatrixXd g_act = g * m.weights[l];
            // Rectifier gate: active where the stored activation is positive.
            g = g_act.cwiseProduct(
                (cache.hidden[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return {loss_sum * inv, std::move(grads)};
}

void sgd_step(SiameseModel& m, const Gradients& grads, const TrainConfig& cfg,
              Gradients& velocity) {
    if (grads.weights.size() != m.num_layers() || velocity.weights.size() != m.num_layers())
        throw std::invalid_argument("sgd_step: gradient/velocity layer count mismatch");
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        if (grads.weights[l].rows() != m.weights[l].rows() ||
            grads.weights[l].cols() != m.weights[l].cols() ||
            grads.biases[l].size() != m.biases[l].size())
            throw std::invalid_argument("sgd_step: shape mismatch at layer " +
                                        std::to_string(l));
        velocity.weights[l] = cfg.momentum * velocity.weights[l] -
                              cfg.learning_rate * grads.weights[l];
        velocity.biases[l] = cfg.momentum * velocity.biases[l] -
                             cfg.learning_rate * grads.biases[l];
        m.weights[l] += velocity.weights[l];
        m.biases[l] += velocity.biases[l];
    }
}

TrainHistory train(SiameseModel& m, const std::vector<Pair>& pairs,
                   const FeatureLookup& lookup, const LossConfig& loss_cfg,
                   const TrainConfig& train_cfg) {
    TrainHistory history;
    if (train_cfg.epochs == 0) return history;
    if (pairs.empty()) throw std::invalid_argument("train: no training pairs");
    if (loss_cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");

    // Resolve each distinct id once and keep inputs in one matrix.
    std::unordered_map<std::string, Eigen::Index> row_of;
    std::vector<const Vec*> resolved;
    auto resolve = [&](const std::string& id) {
        auto it = row_of.find(id);
        if (it != row_of.end()) return it->second;
        const Vec* v = lookup(id);
        if (!v) throw std::runtime_error("train: unresolvable id '" + id + "'");
        if (v->size() != m.input_dim)
            throw std::invalid_argument("train: input dim mismatch for id '" + id + "'");
        const Eigen::Index row = static_cast<Eigen::Index>(resolved.size());
        resolved.push_back(v);
        row_of.emplace(id, row);
        return row;
    };

    struct IndexPair {
        Eigen::Index a, b;
        int y;
    };
    std::vector<IndexPair> ipairs;
    ipairs.reserve(pairs.size());
    for (const Pair& p : pairs)
        ipairs.push_back({resolve(p.id_a), resolve(p.id_b), p.y});

    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(resolved.size()),
                           static_cast<Eigen::Index>(m.input_dim));
    for (std::size_t r = 0; r < resolved.size(); ++r)
        for (std::size_t c = 0; c < m.input_dim; ++c)
            inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                (*resolved[r])[c];

    std::mt19937_64 shuffle_rng(train_cfg.seed);
    std::vector<std::size_t> order(ipairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    Gradients velocity = Gradients::zeros_like(m);
    history.epoch_mean_loss.reserve(train_cfg.epochs);

    for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        if (train_cfg.shuffle_each_epoch) shuffle_deterministic(order, shuffle_rng);

        double loss_weighted = 0.0;
        for (std::size_t start = 0; start < order.size(); start += loss_cfg.batch_size) {
            const std::size_t bn = std::min(loss_cfg.batch_size, order.size() - start);
            PairBatch batch;
            batch.a.resize(static_cast<Eigen::Index>(bn), inputs.cols());
            batch.b.resize(static_cast<Eigen::Index>(bn), inputs.cols());
            batch.y.resize(bn);
            for (std::size_t i = 0; i < bn; ++i) {
                const IndexPair& p = ipairs[order[start + i]];
                batch.a.row(static_cast<Eigen::Index>(i)) = inputs.row(p.a);
                batch.b.row(static_cast<Eigen::Index>(i)) = inputs.row(p.b);
                batch.y[i] = p.y;
            }
            auto [loss, grads] = batch_grad(m, batch, loss_cfg);
            if (!std::isfinite(loss))
                throw std::runtime_error(
                    "train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                    ", batch offset " + std::to_string(start) +
                    " (diverged; lower the learning rate)");
            sgd_step(m, grads, train_cfg, velocity);
            loss_weighted += loss * static_cast<double>(bn);
        }
        history.epoch_mean_loss.push_back(loss_weighted /
                                          static_cast<double>(order.size()));
    }
    return history;
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TokenCursor {
    const char* p;
    const char* end;
    const std::string& path;

    void skip_ws() {
        while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    }
    bool at_end() {
        skip_ws();
        return p == end;
    }
    std::string word(const char* what) {
        skip_ws();
        if (p == end)
            throw std::runtime_error(path + ": truncated checkpoint, expected " +
                                     std::string(what));
        const char* s = p;
        while (p < end && !std::isspace(static_cast<unsigned char>(*p))) ++p;
        return std::string(s, p);
    }
    std::size_t size_value(const char* what) {
        const std::string tok = word(what);
        char* e = nullptr;
        const long long v = std::strtoll(tok.c_str(), &e, 10);
        if (e != tok.c_str() + tok.size() || v < 0)
            throw std::runtime_error(path + ": bad " + std::string(what) + " '" + tok + "'");
        return static_cast<std::size_t>(v);
    }
    double real_value(const char* what) {
        skip_ws();
        if (p == end)
            throw std::runtime_error(path + ": truncated checkpoint, expected " +
                                     std::string(what));
        char* e = nullptr;
        const double v = std::strtod(p, &e);
        if (e == p)
            throw std::runtime_error(path + ": bad " + std::string(what));
        if (!std::isfinite(v))
            throw std::runtime_error(path + ": non-finite parameter value");
        p = e;
        return v;
    }
};

}  // namespace

void save_model(const SiameseModel& m, const std::string& path,
                const std::map<std::string, std::string>& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

    out << "SIAMESE v1\n";
    for (const auto& [k, v] : meta) out << "# " << k << ' ' << v << "\n";
    out << "input_dim " << m.input_dim << "\n";
    out << "layers " << m.num_layers();
    for (std::size_t d : m.layer_dims) out << ' ' << d;
    out << "\n";
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        const Eigen::MatrixXd& w = m.weights[l];
        out << "W " << l << ' ' << w.rows() << ' ' << w.cols() << "\n";
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                if (c) out << ' ';
                out << fmt17(w(r, c));
            }
            out << "\n";
        }
        const Eigen::VectorXd& b = m.biases[l];
        out << "b " << l << ' ' << b.size() << "\n";
        for (Eigen::Index r = 0; r < b.size(); ++r) {
            if (r) out << ' ';
            out << fmt17(b(r));
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();

    // Line 1 is the version magic; '#' lines anywhere after it carry metadata.
    std::istringstream lines(content);
    std::string line;
    if (!std::getline(lines, line))
        throw std::runtime_error(path + ": empty checkpoint");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "SIAMESE v1")
        throw std::runtime_error(path + ": checkpoint version mismatch (got '" + line +
                                 "', expected 'SIAMESE v1')");

    LoadedModel out;
    std::string body;
    body.reserve(content.size());
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string key;
            if (meta >> key) {
                std::string value;
                std::getline(meta, value);
                const auto start = value.find_first_not_of(' ');
                out.meta[key] = start == std::string::npos ? "" : value.substr(start);
            }
            continue;
        }
        body += line;
        body += '\n';
    }

    TokenCursor cur{body.data(), body.data() + body.size(), path};
    if (cur.word("'input_dim'") != "input_dim")
        throw std::runtime_error(path + ": expected 'input_dim'");
    SiameseModel& m = out.model;
    m.input_dim = cur.size_value("input_dim");
    if (cur.word("'layers'") != "layers")
        throw std::runtime_error(path + ": expected 'layers'");
    const std::size_t L = cur.size_value("layer count");
    if (L == 0) throw std::runtime_error(path + ": layer count must be positive");
    m.layer_dims.resize(L);
    for (std::size_t l = 0; l < L; ++l) m.layer_dims[l] = cur.size_value("layer dim");
    check_architecture(m.input_dim, m.layer_dims);

    std::size_t fan_in = m.input_dim;
    for (std::size_t l = 0; l < L; ++l) {
        if (cur.word("'W'") != "W")
            throw std::runtime_error(path + ": layer " + std::to_string(l) + ": expected 'W'");
        if (cur.size_value("layer index") != l)
            throw std::runtime_error(path + ": layer " + std::to_string(l) +
                                     ": weight header index mismatch");
        const std::size_t rows = cur.size_value("rows");
        const std::size_t cols = cur.size_value("cols");
        if (rows != m.layer_dims[l] || cols != fan_in)
            throw std::runtime_error(path + ": layer " + std::to_string(l) +
                                     ": weight matrix size mismatch (declared " +
                                     std::to_string(rows) + "x" + std::to_string(cols) +
                                     ", expected " + std::to_string(m.layer_dims[l]) + "x" +
                                     std::to_string(fan_in) + ")");
        Eigen::MatrixXd w(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    cur.real_value("weight value");
        m.weights.push_back(std::move(w));

        if (cur.word("'b'") != "b")
            throw std::runtime_error(path + ": layer " + std::to_string(l) + ": expected 'b'");
        if (cur.size_value("layer index") != l)
            throw std::runtime_error(path + ": layer " + std::to_string(l) +
                                     ": bias header index mismatch");
        const std::size_t bn = cur.size_value("bias size");
        if (bn != m.layer_dims[l])
            throw std::runtime_error(path + ": layer " + std::to_string(l) +
                                     ": bias size mismatch (declared " + std::to_string(bn) +
                                     ", expected " + std::to_string(m.layer_dims[l]) + ")");
        Eigen::VectorXd b(bn);
        for (std::size_t r = 0; r < bn; ++r)
            b(static_cast<Eigen::Index>(r)) = cur.real_value("bias value");
        m.biases.push_back(std::move(b));
        fan_in = m.layer_dims[l];
    }
    if (!cur.at_end())
        throw std::runtime_error(path + ": trailing data after last layer");
    return out;
}

}  // namespace siamret
