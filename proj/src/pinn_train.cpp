#include <cmath>
#include <numeric>

#include "pinnopf/errors.hpp"
#include "pinnopf/pinn.hpp"
#include "pinnopf/random.hpp"

namespace pinnopf::pinn {

namespace {

struct Adam {
    Eigen::VectorXd m, v;
    long t = 0;
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    Adam(Eigen::Index n, double learning_rate)
        : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), lr(learning_rate)
    {
    }

    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& g)
    {
        ++t;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
};

Batch slice(const Batch& full, const std::vector<Eigen::Index>& lab, const std::vector<Eigen::Index>& col)
{
    Batch b;
    b.pd_labeled = full.pd_labeled(Eigen::all, lab);
    b.pg_labeled = full.pg_labeled(Eigen::all, lab);
    b.duals_labeled = full.duals_labeled(Eigen::all, lab);
    b.pd_collocation = full.pd_collocation(Eigen::all, col);
    return b;
}

template <class T>
std::vector<T> chunk(const std::vector<T>& v, int k, int parts)
{
    const std::size_t n = v.size();
    const std::size_t lo = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(parts);
    const std::size_t hi = n * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(parts);
    return std::vector<T>(v.begin() + static_cast<std::ptrdiff_t>(lo), v.begin() + static_cast<std::ptrdiff_t>(hi));
}

void check_finite(const LossBreakdown& l, int epoch)
{
    if (!std::isfinite(l.total))
        throw NumericalError("train: loss became non-finite at epoch " + std::to_string(epoch));
}

} // namespace

TrainResult train(const sampling::Dataset& dataset, const opf::Network& net, const TrainConfig& config)
{
    auto arch = Architecture::for_network(net, config.pg_hidden, config.dual_hidden);
    NetworkParams params = init_params(arch, config.seed);
    // Scalers from the same training split train() will use.
    std::vector<std::size_t> order(dataset.labeled.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(config.seed, 1));
    split_rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(std::llround(config.validation_frac * static_cast<double>(order.size())));
    if (n_val >= order.size())
        n_val = order.size() > 1 ? order.size() - 1 : 0;
    std::vector<sampling::LabeledRecord> fit_pool;
    for (std::size_t i = n_val; i < order.size(); ++i)
        fit_pool.push_back(dataset.labeled[order[i]]);
    fit_scalers(params, net, dataset.input_domain, fit_pool);
    return train(dataset, net, config, std::move(params));
}

TrainResult train(const sampling::Dataset& dataset, const opf::Network& net, const TrainConfig& config,
                  NetworkParams initial)
{
    if (config.epochs < 0 || config.batches < 1)
        throw ValidationError("train: epochs must be >= 0 and batches >= 1");
    if (!(config.learning_rate >= 0.0))
        throw ValidationError("train: learning rate must be nonnegative");
    if (!(config.validation_frac >= 0.0 && config.validation_frac < 1.0))
        throw ValidationError("train: validation fraction must lie in [0, 1)");
    initial.validate();
    if (initial.input_dim() != net.n_load() || initial.n_gen != net.n_gen() || initial.n_line != net.n_line())
        throw DimensionError("train: model and case dimensions differ");
    if (dataset.labeled.empty())
        throw ValidationError("train: dataset has no labeled records");

    std::vector<std::size_t> order(dataset.labeled.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(config.seed, 1));
    split_rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(std::llround(config.validation_frac * static_cast<double>(order.size())));
    if (n_val >= order.size())
        n_val = order.size() > 1 ? order.size() - 1 : 0;
    std::vector<sampling::LabeledRecord> val_pool, train_pool;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val_pool : train_pool).push_back(dataset.labeled[order[i]]);

    const bool plain = config.weights.variant == Variant::Plain;
    const std::vector<Eigen::VectorXd> none;
    const Batch full = make_batch(train_pool, plain ? none : dataset.collocation);
    const Batch val = make_batch(val_pool, none);

    TrainResult out;
    out.params = std::move(initial);
    out.history.n_train = train_pool.size();
    out.history.n_validation = val_pool.size();
    out.history.n_collocation = static_cast<std::size_t>(full.n_collocation());
    if (config.epochs == 0)
        return out;

    Eigen::VectorXd theta = flatten(out.params);
    Eigen::VectorXd best_theta = theta;
    double best = std::numeric_limits<double>::infinity();
    Adam adam(theta.size(), config.learning_rate);
    Rng rng(derive_seed(config.seed, 2));
    NetworkParams work = out.params;
    NetworkParams grad;

    std::vector<Eigen::Index> lab_idx(static_cast<std::size_t>(full.n_labeled()));
    std::vector<Eigen::Index> col_idx(static_cast<std::size_t>(full.n_collocation()));
    std::iota(lab_idx.begin(), lab_idx.end(), 0);
    std::iota(col_idx.begin(), col_idx.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(lab_idx);
        rng.shuffle(col_idx);
        EpochRecord rec;
        int used = 0;
        for (int k = 0; k < config.batches; ++k) {
            Batch b = slice(full, chunk(lab_idx, k, config.batches), chunk(col_idx, k, config.batches));
            if (b.n_labeled() == 0 && b.n_collocation() == 0)
                continue;
            unflatten(work, theta);
            LossBreakdown l = loss_and_gradient(work, b, net, config.weights, grad);
            check_finite(l, epoch);
            adam.step(theta, flatten(grad));
            rec.train.total += l.total;
            rec.train.mae_p += l.mae_p;
            rec.train.mae_l += l.mae_l;
            rec.train.mae_eps += l.mae_eps;
            ++used;
        }
        if (used > 0) {
            rec.train.total /= used;
            rec.train.mae_p /= used;
            rec.train.mae_l /= used;
            rec.train.mae_eps /= used;
        }
        unflatten(work, theta);
        if (val.n_labeled() > 0) {
            rec.validation = loss(work, val, net, config.weights);
            check_finite(rec.validation, epoch);
        }
        const double score = val.n_labeled() > 0 ? rec.validation.total : loss(work, full, net, config.weights).total;
        if (score < best) {
            best = score;
            best_theta = theta;
            out.history.best_epoch = epoch;
        }
        out.history.epochs.push_back(rec);
    }
    unflatten(out.params, best_theta);
    return out;
}

Evaluation evaluate_predictions(const Eigen::MatrixXd& pg_hat, const std::vector<sampling::LabeledRecord>& pool,
                                const opf::Network& net)
{
    if (pg_hat.cols() != static_cast<Eigen::Index>(pool.size()) || pg_hat.rows() != net.n_gen())
        throw DimensionError("evaluate: prediction matrix does not match the pool");
    Evaluation e;
    e.samples = pool.size();
    if (pool.empty())
        return e;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        auto m = opf::prediction_metrics(net, pool[i].pd, pg_hat.col(static_cast<Eigen::Index>(i)), pool[i].pg_star);
        e.mae_pct += m.mae_pct;
        e.v_g += m.v_g;
        e.v_line += m.v_line;
        e.v_dist += m.v_dist;
        e.v_opt += m.v_opt;
        e.max_v_g = std::max(e.max_v_g, m.v_g);
        e.max_v_line = std::max(e.max_v_line, m.v_line);
        e.share_gen_violated += m.v_g > 1e-6 ? 1.0 : 0.0;
        e.share_line_violated += m.v_line > 1e-6 ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(pool.size());
    e.mae_pct /= n;
    e.v_g /= n;
    e.v_line /= n;
    e.v_dist /= n;
    e.v_opt /= n;
    e.share_gen_violated /= n;
    e.share_line_violated /= n;
    return e;
}

Evaluation evaluate(const NetworkParams& params, const std::vector<sampling::LabeledRecord>& pool,
                    const opf::Network& net)
{
    if (params.input_dim() != net.n_load() || params.n_gen != net.n_gen() || params.n_line != net.n_line())
        throw DimensionError("evaluate: model and case dimensions differ");
    Eigen::MatrixXd pd(net.n_load(), static_cast<Eigen::Index>(pool.size()));
    for (std::size_t i = 0; i < pool.size(); ++i)
        pd.col(static_cast<Eigen::Index>(i)) = pool[i].pd;
    return evaluate_predictions(forward_pg(params, pd), pool, net);
}

} // namespace pinnopf::pinn
