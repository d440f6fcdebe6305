#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pinnopf/dcopf.hpp"
#include "pinnopf/sampling.hpp"

namespace pinnopf::pinn {

struct Layer {
    Eigen::MatrixXd weights; // out x in
    Eigen::VectorXd biases;
};

/// Dense ReLU stack; the last layer is affine.
struct Head {
    std::vector<Layer> layers;

    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weights.cols(); }
    Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weights.rows(); }
};

/// physical = offset + scale .* normalized
struct AffineScaler {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;

    static AffineScaler identity(Eigen::Index n);
    Eigen::MatrixXd to_physical(const Eigen::MatrixXd& normalized) const;
    Eigen::MatrixXd to_normalized(const Eigen::MatrixXd& physical) const;
};

struct Architecture {
    Eigen::Index input_dim = 0;
    Eigen::Index n_gen = 0;
    Eigen::Index n_line = 0;
    std::vector<int> pg_hidden{20, 20, 20};
    std::vector<int> dual_hidden{30, 30, 30};

    Eigen::Index dual_dim() const { return 1 + 2 * n_gen + 2 * n_line; }
    static Architecture for_network(const opf::Network& net, std::vector<int> pg_hidden = {20, 20, 20},
                                    std::vector<int> dual_hidden = {30, 30, 30});
};

/// Two independent heads sharing only the input.
struct NetworkParams {
    Head pg_head;
    Head dual_head;
    AffineScaler input_scaler; // pd = offset + scale .* x
    AffineScaler pg_scaler;
    AffineScaler dual_scaler;
    Eigen::Index n_gen = 0;
    Eigen::Index n_line = 0;

    Architecture architecture() const;
    Eigen::Index input_dim() const { return pg_head.input_dim(); }
    Eigen::Index dual_dim() const { return dual_head.output_dim(); }
    /// Throws DimensionError when layers or scalers do not chain.
    void validate() const;
};

/// Uniform fan-in initialisation, zero biases, identity scalers.
NetworkParams init_params(const Architecture& arch, std::uint64_t seed);

/// Input map from the demand box to [0,1]; pg map from [p_min, p_max] to [0,1];
/// dual map from per-dimension max |dual| over `labeled` (cost scale when zero).
void fit_scalers(NetworkParams& params, const opf::Network& net, const sampling::InputDomain& domain,
                 const std::vector<sampling::LabeledRecord>& labeled);

/// Raw head evaluation on normalized inputs (columns are samples).
Eigen::MatrixXd head_forward(const Head& head, const Eigen::MatrixXd& x);

/// Batched forward passes; pd columns are samples, outputs in physical units.
Eigen::MatrixXd forward_pg(const NetworkParams& params, const Eigen::MatrixXd& pd);
Eigen::MatrixXd forward_duals(const NetworkParams& params, const Eigen::MatrixXd& pd);

struct Prediction {
    Eigen::VectorXd pg;
    opf::DualVariables duals;
};
Prediction forward(const NetworkParams& params, const Eigen::VectorXd& pd);

/// All weights and biases, pg head first, each layer weights (column-major) then biases.
Eigen::VectorXd flatten(const NetworkParams& params);
void unflatten(NetworkParams& params, const Eigen::VectorXd& flat);
Eigen::Index parameter_count(const NetworkParams& params);

enum class Variant { Plain, PgAbs, PgSqr, PgExp, Kkt };
const char* to_string(Variant v);
/// Accepts plain/nn, pgabs, pgsqr, pgexp, kkt in any case, ignoring '_' and '-'.
Variant parse_variant(std::string_view text);

struct LossWeights {
    Variant variant = Variant::Kkt;
    double lambda_p = 1.0;
    double lambda_l = 0.1;
    double lambda_eps = 0.1;
};

/// Columns are samples.
struct Batch {
    Eigen::MatrixXd pd_labeled;
    Eigen::MatrixXd pg_labeled;
    Eigen::MatrixXd duals_labeled;
    Eigen::MatrixXd pd_collocation;

    Eigen::Index n_labeled() const { return pd_labeled.cols(); }
    Eigen::Index n_collocation() const { return pd_collocation.cols(); }
};

Batch make_batch(const std::vector<sampling::LabeledRecord>& labeled,
                 const std::vector<Eigen::VectorXd>& collocation);

/// mae_p: |pg error| / generator range, averaged over generators and labeled points.
/// mae_l: |dual error| / dual scale, averaged over dual entries and labeled points.
/// mae_eps: mean over all points of the variant's penalty in normalised units.
struct LossBreakdown {
    double total = 0.0;
    double mae_p = 0.0;
    double mae_l = 0.0;
    double mae_eps = 0.0;
};

LossBreakdown loss(const NetworkParams& params, const Batch& batch, const opf::Network& net,
                   const LossWeights& weights);

/// Same value as loss(); writes d total / d parameter into grad (same shapes as params).
LossBreakdown loss_and_gradient(const NetworkParams& params, const Batch& batch, const opf::Network& net,
                                const LossWeights& weights, NetworkParams& grad);

struct TrainConfig {
    LossWeights weights;
    std::vector<int> pg_hidden{20, 20, 20};
    std::vector<int> dual_hidden{30, 30, 30};
    int epochs = 5000;
    int batches = 2;
    double learning_rate = 1e-3;
    double validation_frac = 0.2;
    std::uint64_t seed = 7;
};

struct EpochRecord {
    LossBreakdown train;
    LossBreakdown validation;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    std::size_t n_collocation = 0;
};

struct TrainResult {
    NetworkParams params;
    TrainHistory history;
};

/// Initialises params from the config and fits scalers on the dataset.
TrainResult train(const sampling::Dataset& dataset, const opf::Network& net, const TrainConfig& config);
/// Continues from `initial` (scalers taken as given).
TrainResult train(const sampling::Dataset& dataset, const opf::Network& net, const TrainConfig& config,
                  NetworkParams initial);

struct Evaluation {
    std::size_t samples = 0;
    double mae_pct = 0.0;
    double v_g = 0.0;    // mean MW
    double v_line = 0.0; // mean MW
    double v_dist = 0.0; // mean %
    double v_opt = 0.0;  // mean %
    double max_v_g = 0.0;
    double max_v_line = 0.0;
    double share_gen_violated = 0.0;  // fraction of samples with v_g > 1e-6
    double share_line_violated = 0.0; // fraction of samples with v_line > 1e-6
};

Evaluation evaluate(const NetworkParams& params, const std::vector<sampling::LabeledRecord>& pool,
                    const opf::Network& net);
/// Same statistics for arbitrary predictions (columns aligned with pool).
Evaluation evaluate_predictions(const Eigen::MatrixXd& pg_hat, const std::vector<sampling::LabeledRecord>& pool,
                                const opf::Network& net);

inline constexpr int kModelSchemaVersion = 1;

void save_model(const NetworkParams& params, std::ostream& sink);
NetworkParams load_model(std::istream& source);
void save_model_file(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_model_file(const std::filesystem::path& path);

void save_history(const TrainHistory& history, std::ostream& sink);

} // namespace pinnopf::pinn
