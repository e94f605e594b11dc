#include "granur/router.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "granur/error.hpp"
#include "granur/io.hpp"

namespace granur {

using nlohmann::json;

namespace {

void check_dims(const std::vector<int>& dims) {
    if (dims.size() < 2) throw Error(ErrorCode::InvalidArgument, "router needs at least input and output layers");
    for (int d : dims)
        if (d < 1) throw Error(ErrorCode::InvalidArgument, "layer dimensions must be >= 1");
}

double sigmoid(double z) noexcept {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp_weight(double w) noexcept { return std::clamp(w, kWeightClamp, 1.0 - kWeightClamp); }

double clamped_bce(std::span<const double> w, std::span<const double> sl) noexcept {
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double wc = clamp_weight(w[i]);
        total -= sl[i] * std::log(wc) + (1.0 - sl[i]) * std::log(1.0 - wc);
    }
    return total;
}

// Pre-activations and activations of every layer for one input.
struct Trace {
    std::vector<Eigen::VectorXd> z;
    std::vector<Eigen::VectorXd> a;  // a[0] is the input
};

Trace run(const RouterModel& model, std::span<const double> e_q) {
    if (static_cast<int>(e_q.size()) != model.input_dim())
        throw Error(ErrorCode::DimMismatch, "embedding length " + std::to_string(e_q.size()) + " != router input " +
                                                std::to_string(model.input_dim()));
    Trace t;
    t.a.emplace_back(Eigen::Map<const Eigen::VectorXd>(e_q.data(), static_cast<Eigen::Index>(e_q.size())));
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        t.z.push_back(model.weights[l] * t.a.back() + model.biases[l]);
        if (l + 1 < model.n_layers())
            t.a.push_back(t.z.back().cwiseMax(0.0));
        else
            t.a.push_back(t.z.back().unaryExpr([](double v) { return sigmoid(v); }));
    }
    return t;
}

RouterGradients gradients_from_trace(const RouterModel& model, const Trace& t, std::span<const double> sl) {
    const auto& w = t.a.back();
    if (static_cast<Eigen::Index>(sl.size()) != w.size())
        throw Error(ErrorCode::DimMismatch, "soft label length differs from router output");
    RouterGradients g;
    g.weights.resize(model.n_layers());
    g.biases.resize(model.n_layers());

    // Saturated outputs (sigmoid rounding to exactly 0 or 1) are clamped here
    // rather than rejected.
    g.loss = clamped_bce(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), sl);

    // Sigmoid followed by BCE: d loss / d z_out = w - sl.
    Eigen::VectorXd delta(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) delta[i] = clamp_weight(w[i]) - sl[static_cast<std::size_t>(i)];

    for (std::size_t l = model.n_layers(); l-- > 0;) {
        g.weights[l] = delta * t.a[l].transpose();
        g.biases[l] = delta;
        if (l == 0) break;
        Eigen::VectorXd back = model.weights[l].transpose() * delta;
        const auto& z_prev = t.z[l - 1];
        for (Eigen::Index i = 0; i < back.size(); ++i)
            if (z_prev[i] <= 0.0) back[i] = 0.0;
        delta = std::move(back);
    }
    return g;
}

}  // namespace

RouterModel RouterModel::zeros(std::vector<int> layer_dims) {
    check_dims(layer_dims);
    RouterModel m;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        m.weights.push_back(Eigen::MatrixXd::Zero(layer_dims[l + 1], layer_dims[l]));
        m.biases.push_back(Eigen::VectorXd::Zero(layer_dims[l + 1]));
    }
    m.layer_dims = std::move(layer_dims);
    return m;
}

RouterModel RouterModel::initialize(std::vector<int> layer_dims, std::uint64_t seed) {
    RouterModel m = zeros(std::move(layer_dims));
    m.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        const double fan_in = m.layer_dims[l];
        const double fan_out = m.layer_dims[l + 1];
        const bool output = l + 1 == m.n_layers();
        const double limit = output ? std::sqrt(6.0 / (fan_in + fan_out)) : std::sqrt(6.0 / fan_in);
        auto& W = m.weights[l];
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-limit, limit);
    }
    return m;
}

bool operator==(const RouterModel& a, const RouterModel& b) {
    if (a.layer_dims != b.layer_dims || a.seed != b.seed || a.n_layers() != b.n_layers()) return false;
    for (std::size_t l = 0; l < a.n_layers(); ++l)
        if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    return true;
}

std::vector<int> default_layer_dims(int input_dim, int n_gra) { return {input_dim, 256, 64, n_gra}; }

std::vector<double> forward(const RouterModel& model, std::span<const double> e_q) {
    const auto t = run(model, e_q);
    const auto& w = t.a.back();
    return {w.data(), w.data() + w.size()};
}

double bce_loss(std::span<const double> w, std::span<const double> sl) {
    if (w.size() != sl.size()) throw Error(ErrorCode::DimMismatch, "weight and label lengths differ");
    for (double x : w)
        if (!(x > 0.0 && x < 1.0)) throw Error(ErrorCode::DomainError, "router weight outside (0, 1)");
    return clamped_bce(w, sl);
}

RouterGradients backward(const RouterModel& model, std::span<const double> e_q, std::span<const double> sl) {
    return gradients_from_trace(model, run(model, e_q), sl);
}

TrainResult train(RouterModel model, std::span<const TrainExample> examples, const TrainConfig& cfg) {
    if (examples.empty()) throw Error(ErrorCode::InvalidArgument, "no training examples");
    if (!(cfg.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be > 0");
    if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.early_stop_patience < 1)
        throw Error(ErrorCode::InvalidArgument, "batch_size, max_epochs and patience must be >= 1");
    for (const auto& ex : examples) {
        if (static_cast<int>(ex.embedding.size()) != model.input_dim())
            throw Error(ErrorCode::DimMismatch, "training embedding length differs from router input");
        if (static_cast<int>(ex.soft_label.size()) != model.n_gra())
            throw Error(ErrorCode::DimMismatch, "soft label length differs from router output");
    }

    const std::size_t L = model.n_layers();
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    for (std::size_t l = 0; l < L; ++l) {
        mW.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        vW.push_back(mW.back());
        mb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
        vb.push_back(mb.back());
    }

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(cfg.seed);

    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    long long step = 0;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            const std::size_t end = std::min(order.size(), begin + batch);
            const double scale = 1.0 / static_cast<double>(end - begin);
            std::vector<Eigen::MatrixXd> gW;
            std::vector<Eigen::VectorXd> gb;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& ex = examples[order[i]];
                auto g = backward(model, ex.embedding, ex.soft_label);
                epoch_loss += g.loss;
                if (gW.empty()) {
                    gW = std::move(g.weights);
                    gb = std::move(g.biases);
                } else {
                    for (std::size_t l = 0; l < L; ++l) {
                        gW[l] += g.weights[l];
                        gb[l] += g.biases[l];
                    }
                }
            }

            ++step;
            const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            const double lr = cfg.learning_rate;
            const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2, eps = cfg.adam_eps;
            auto adam = [&](auto& param, auto& m, auto& v, const auto& grad_sum) {
                const auto g = (grad_sum * scale).eval();
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
                param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
            };
            for (std::size_t l = 0; l < L; ++l) {
                adam(model.weights[l], mW[l], vW[l], gW[l]);
                adam(model.biases[l], mb[l], vb[l], gb[l]);
            }
        }

        epoch_loss /= static_cast<double>(examples.size());
        result.loss_history.push_back(epoch_loss);
        if (epoch_loss < best - cfg.min_improvement) {
            best = epoch_loss;
            stall = 0;
        } else if (++stall >= cfg.early_stop_patience) {
            result.early_stopped = true;
            break;
        }
    }
    result.model = std::move(model);
    return result;
}

std::string model_to_json(const RouterModel& model) {
    json weights = json::array();
    json biases = json::array();
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        json rows = json::array();
        const auto& W = model.weights[l];
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < W.cols(); ++c) row.push_back(W(r, c));
            rows.push_back(std::move(row));
        }
        weights.push_back(std::move(rows));
        const auto& b = model.biases[l];
        biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
    }
    json j = {{"layer_dims", model.layer_dims},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)},
              {"seed", model.seed},
              {"n_gra", model.n_gra()}};
    return j.dump() + "\n";
}

RouterModel model_from_json(std::string_view text, const std::string& where) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, where + ": " + e.what());
    }
    try {
        auto dims = j.at("layer_dims").get<std::vector<int>>();
        check_dims(dims);
        if (j.at("n_gra").get<int>() != dims.back()) throw Error(ErrorCode::MalformedFile, where + ": n_gra mismatch");
        RouterModel m = RouterModel::zeros(dims);
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto& weights = j.at("weights");
        const auto& biases = j.at("biases");
        if (weights.size() != m.n_layers() || biases.size() != m.n_layers())
            throw Error(ErrorCode::MalformedFile, where + ": layer count mismatch");
        for (std::size_t l = 0; l < m.n_layers(); ++l) {
            auto& W = m.weights[l];
            const auto& rows = weights[l];
            if (static_cast<Eigen::Index>(rows.size()) != W.rows())
                throw Error(ErrorCode::MalformedFile, where + ": weight rows mismatch at layer " + std::to_string(l));
            for (Eigen::Index r = 0; r < W.rows(); ++r) {
                const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
                if (static_cast<Eigen::Index>(row.size()) != W.cols())
                    throw Error(ErrorCode::MalformedFile, where + ": weight cols mismatch at layer " + std::to_string(l));
                for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = row[static_cast<std::size_t>(c)];
            }
            const auto b = biases[l].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(b.size()) != m.biases[l].size())
                throw Error(ErrorCode::MalformedFile, where + ": bias length mismatch at layer " + std::to_string(l));
            for (std::size_t i = 0; i < b.size(); ++i) m.biases[l][static_cast<Eigen::Index>(i)] = b[i];
        }
        for (const auto& W : m.weights)
            if (!W.allFinite()) throw Error(ErrorCode::MalformedFile, where + ": non-finite weight");
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, where + ": " + e.what());
    }
}

void save_model(const RouterModel& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, model_to_json(model));
}

RouterModel load_model(const std::filesystem::path& path) { return model_from_json(io::read_file(path), path.string()); }

}  // namespace granur
