#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "granur/embed.hpp"

namespace granur {

/// MLP mapping a query embedding to one weight per granularity level:
/// ReLU hidden layers, sigmoid output, so every weight lies in (0, 1).
struct RouterModel {
    std::vector<int> layer_dims;           // input d, hidden..., n_gra
    std::vector<Eigen::MatrixXd> weights;  // layer l: layer_dims[l+1] x layer_dims[l]
    std::vector<Eigen::VectorXd> biases;
    std::uint64_t seed = 0;

    int input_dim() const noexcept { return layer_dims.front(); }
    int n_gra() const noexcept { return layer_dims.back(); }
    std::size_t n_layers() const noexcept { return weights.size(); }

    /// All parameters zero: forward yields 0.5 everywhere.
    static RouterModel zeros(std::vector<int> layer_dims);

    /// He-uniform ReLU layers, Xavier-uniform output layer, zero biases.
    static RouterModel initialize(std::vector<int> layer_dims, std::uint64_t seed);

    friend bool operator==(const RouterModel& a, const RouterModel& b);
};

/// d -> 256 -> 64 -> n_gra.
std::vector<int> default_layer_dims(int input_dim, int n_gra);

struct RouterGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    double loss = 0.0;
};

/// Loss and gradient guard: w is clamped into [kWeightClamp, 1 - kWeightClamp].
inline constexpr double kWeightClamp = 1e-7;

/// Throws DimMismatch when e_q's length differs from the input dimension.
std::vector<double> forward(const RouterModel& model, std::span<const double> e_q);

/// Sum over levels of -[sl log w + (1 - sl) log(1 - w)].
/// Throws DomainError if some w_i is exactly 0 or 1 (or outside [0, 1]).
double bce_loss(std::span<const double> w, std::span<const double> sl);

/// Analytic gradient of bce_loss(forward(e_q), sl) for every parameter.
RouterGradients backward(const RouterModel& model, std::span<const double> e_q, std::span<const double> sl);

struct TrainConfig {
    double learning_rate = 0.001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int max_epochs = 1000;
    int batch_size = 32;
    std::uint64_t seed = 0;
    int early_stop_patience = 20;
    double min_improvement = 1e-5;
};

struct TrainExample {
    Embedding embedding;
    std::vector<double> soft_label;
};

struct TrainResult {
    RouterModel model;
    std::vector<double> loss_history;  // mean per-example loss of each epoch
    bool early_stopped = false;
};

/// Mini-batch Adam on the mean batch gradient. The example order is reshuffled
/// each epoch from cfg.seed, so a run is reproducible bit for bit. Stops when
/// the best epoch loss has not improved by min_improvement for
/// early_stop_patience epochs, or after max_epochs.
TrainResult train(RouterModel model, std::span<const TrainExample> examples, const TrainConfig& cfg);

/// JSON checkpoint {"layer_dims", "weights", "biases", "seed", "n_gra"};
/// parameters round-trip bit-exactly.
void save_model(const RouterModel& model, const std::filesystem::path& path);
RouterModel load_model(const std::filesystem::path& path);

std::string model_to_json(const RouterModel& model);
RouterModel model_from_json(std::string_view text, const std::string& where = "model");

/// mt19937_64 with draws computed from raw bits, so sequences do not depend on
/// the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

private:
    std::mt19937_64 engine_;
};

}  // namespace granur
