#include <cmath>

#include "pinnopf/errors.hpp"
#include "pinnopf/pinn.hpp"

namespace pinnopf::pinn {

namespace {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Trace {
    std::vector<MatrixXd> inputs; // input to each layer
    std::vector<MatrixXd> pre;    // pre-activation of each layer
};

MatrixXd run(const Head& head, const MatrixXd& x, Trace& trace)
{
    trace.inputs.clear();
    trace.pre.clear();
    MatrixXd a = x;
    for (std::size_t i = 0; i < head.layers.size(); ++i) {
        const auto& l = head.layers[i];
        MatrixXd z = l.weights * a;
        z.colwise() += l.biases;
        trace.inputs.push_back(std::move(a));
        if (i + 1 < head.layers.size()) {
            a = z.cwiseMax(0.0);
            trace.pre.push_back(std::move(z));
        } else {
            a = z;
            trace.pre.push_back(std::move(z));
        }
    }
    return a;
}

void backprop(const Head& head, const Trace& trace, MatrixXd delta, Head& grad)
{
    for (std::size_t k = head.layers.size(); k-- > 0;) {
        grad.layers[k].weights.noalias() += delta * trace.inputs[k].transpose();
        grad.layers[k].biases += delta.rowwise().sum();
        if (k == 0)
            break;
        MatrixXd up = head.layers[k].weights.transpose() * delta;
        // ReLU derivative is taken as 0 at exactly 0.
        delta = (trace.pre[k - 1].array() > 0.0).select(up.array(), 0.0).matrix();
    }
}

Head zero_like(const Head& h)
{
    Head z;
    for (const auto& l : h.layers)
        z.layers.push_back({MatrixXd::Zero(l.weights.rows(), l.weights.cols()), VectorXd::Zero(l.biases.size())});
    return z;
}

ArrayXXd sign(const ArrayXXd& a) { return (a > 0.0).cast<double>() - (a < 0.0).cast<double>(); }

ArrayXXd relu(const ArrayXXd& a) { return a.max(0.0); }

ArrayXXd step(const ArrayXXd& a) { return (a > 0.0).cast<double>(); }

MatrixXd hcat(const MatrixXd& a, const MatrixXd& b)
{
    MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

/// Penalty on the predicted dispatch (and duals for Kkt) summed over points.
/// Fills dp (d/dP_hat) and dl (d/d dual_hat) scaled by w.
double penalty(Variant variant, const opf::Network& net, const MatrixXd& pd, const MatrixXd& p, const MatrixXd* l,
               double w, MatrixXd* dp, MatrixXd* dl)
{
    const Eigen::Index ng = net.n_gen();
    const Eigen::Index nl = net.n_line();
    const Eigen::Index n = p.cols();
    const ArrayXXd range = net.gen_scale().replicate(1, n).array();
    const ArrayXXd pmax = net.p_max.replicate(1, n).array();
    const ArrayXXd pmin = net.p_min.replicate(1, n).array();
    const ArrayXXd P = p.array();
    const ArrayXXd over = P - pmax;
    const ArrayXXd under = pmin - P;

    if (variant != Variant::Kkt) {
        const ArrayXXd v = (relu(over) + relu(under)) / range;
        const ArrayXXd dv = (step(over) - step(under)) / range;
        double value = 0.0;
        ArrayXXd d;
        switch (variant) {
        case Variant::PgAbs:
            value = v.sum();
            d = dv;
            break;
        case Variant::PgSqr:
            value = v.square().sum();
            d = 2.0 * v * dv;
            break;
        case Variant::PgExp:
            value = (v.exp() - 1.0).sum();
            d = v.exp() * dv;
            break;
        default:
            return 0.0;
        }
        if (dp)
            *dp += (w * d).matrix();
        return value;
    }

    const double C = net.cost_scale();
    VectorXd lim_scale = net.flow_limit;
    for (Eigen::Index i = 0; i < nl; ++i)
        if (!(lim_scale(i) > 0.0))
            lim_scale(i) = 1.0;
    const ArrayXXd lim = net.flow_limit.replicate(1, n).array();
    const ArrayXXd lscale = lim_scale.replicate(1, n).array();
    const double range_sum = net.gen_scale().sum();

    const MatrixXd& L = *l;
    const ArrayXXd lambda = L.row(0).array();
    const ArrayXXd mgu = L.middleRows(1, ng).array();
    const ArrayXXd mgl = L.middleRows(1 + ng, ng).array();
    const ArrayXXd mlu = L.middleRows(1 + 2 * ng, nl).array();
    const ArrayXXd mll = L.middleRows(1 + 2 * ng + nl, nl).array();
    const ArrayXXd F = (net.ptdf_gen * p - net.ptdf_load * pd).array();

    // Stationarity.
    ArrayXXd stat = (net.ptdf_gen.transpose() * (mlu - mll).matrix()).array();
    stat += mgu - mgl;
    stat.colwise() += net.cost.array();
    stat.rowwise() += lambda.row(0);
    double value = stat.abs().sum() / C;

    // Complementary slackness.
    const ArrayXXd A = mgu * (pmax - P);
    const ArrayXXd B = mgl * (P - pmin);
    const ArrayXXd E = mlu * (F - lim);
    const ArrayXXd H = mll * (-F - lim);
    value += (A.abs() / (C * range)).sum() + (B.abs() / (C * range)).sum();
    value += (E.abs() / (C * lscale)).sum() + (H.abs() / (C * lscale)).sum();

    // Dual feasibility.
    value += (relu(-mgu).sum() + relu(-mgl).sum() + relu(-mlu).sum() + relu(-mll).sum()) / C;

    // Primal feasibility.
    const ArrayXXd bal = p.colwise().sum().array() - pd.colwise().sum().array();
    value += ((relu(over) + relu(under)) / range).sum();
    value += bal.abs().sum() / range_sum;
    value += ((relu(F - lim) + relu(-F - lim)) / lscale).sum();

    if (dp && dl) {
        const ArrayXXd S = sign(stat);
        const ArrayXXd sA = sign(A), sB = sign(B), sE = sign(E), sH = sign(H);

        ArrayXXd d_lambda = S.colwise().sum() / C;
        ArrayXXd d_mgu = S / C + sA * (pmax - P) / (C * range) - step(-mgu) / C;
        ArrayXXd d_mgl = -S / C + sB * (P - pmin) / (C * range) - step(-mgl) / C;
        ArrayXXd GS = (net.ptdf_gen * S.matrix()).array();
        ArrayXXd d_mlu = GS / C + sE * (F - lim) / (C * lscale) - step(-mlu) / C;
        ArrayXXd d_mll = -GS / C + sH * (-F - lim) / (C * lscale) - step(-mll) / C;

        ArrayXXd d_p = -sA * mgu / (C * range) + sB * mgl / (C * range);
        d_p += (step(over) - step(under)) / range;
        d_p.rowwise() += (sign(bal) / range_sum).row(0);
        ArrayXXd d_f = sE * mlu / (C * lscale) - sH * mll / (C * lscale);
        d_f += (step(F - lim) - step(-F - lim)) / lscale;
        d_p += (net.ptdf_gen.transpose() * d_f.matrix()).array();

        *dp += (w * d_p).matrix();
        dl->row(0) += (w * d_lambda).matrix();
        dl->middleRows(1, ng) += (w * d_mgu).matrix();
        dl->middleRows(1 + ng, ng) += (w * d_mgl).matrix();
        dl->middleRows(1 + 2 * ng, nl) += (w * d_mlu).matrix();
        dl->middleRows(1 + 2 * ng + nl, nl) += (w * d_mll).matrix();
    }
    return value;
}

LossBreakdown evaluate_loss(const NetworkParams& params, const Batch& batch, const opf::Network& net,
                            const LossWeights& weights, NetworkParams* grad)
{
    const Eigen::Index nd = params.input_dim();
    const Eigen::Index ng = params.n_gen;
    const Eigen::Index nm = params.dual_dim();
    const Eigen::Index bt = batch.n_labeled();
    const Eigen::Index bc = weights.variant == Variant::Plain ? 0 : batch.n_collocation();
    if (net.n_gen() != ng || net.n_line() != params.n_line || net.n_load() != nd)
        throw DimensionError("loss: network and case dimensions differ");
    if (bt && (batch.pd_labeled.rows() != nd || (batch.pg_labeled.cols() != bt || batch.pg_labeled.rows() != ng ||
                                                 batch.duals_labeled.cols() != bt || batch.duals_labeled.rows() != nm)))
        throw DimensionError("loss: labeled batch has inconsistent shapes");
    if (bc && batch.pd_collocation.rows() != nd)
        throw DimensionError("loss: collocation batch has the wrong input length");
    if (weights.lambda_p < 0 || weights.lambda_l < 0 || weights.lambda_eps < 0)
        throw ValidationError("loss: weights must be nonnegative");

    const bool kkt = weights.variant == Variant::Kkt;
    const bool use_pen = weights.variant != Variant::Plain;
    const MatrixXd pd_all = !bc ? MatrixXd(batch.pd_labeled) : bt ? hcat(batch.pd_labeled, batch.pd_collocation) : MatrixXd(batch.pd_collocation);
    const Eigen::Index n_all = pd_all.cols();
    if (n_all == 0) {
        if (grad) {
            *grad = params;
            grad->pg_head = zero_like(params.pg_head);
            grad->dual_head = zero_like(params.dual_head);
        }
        return {};
    }
    const MatrixXd x_all = params.input_scaler.to_normalized(pd_all);

    // Generator head over every point that needs it.
    Trace pg_trace;
    const MatrixXd y = run(params.pg_head, use_pen ? x_all : x_all.leftCols(bt), pg_trace);
    const MatrixXd p_hat = params.pg_scaler.to_physical(y);
    MatrixXd dp = MatrixXd::Zero(p_hat.rows(), p_hat.cols());

    // Dual head: labeled points, or every point for Kkt.
    Trace dual_trace;
    const Eigen::Index n_dual_cols = kkt ? n_all : bt;
    MatrixXd z;
    MatrixXd l_hat;
    if (n_dual_cols > 0) {
        z = run(params.dual_head, x_all.leftCols(n_dual_cols), dual_trace);
        l_hat = params.dual_scaler.to_physical(z);
    }
    MatrixXd dl = MatrixXd::Zero(nm, n_dual_cols);

    LossBreakdown out;
    const VectorXd range = net.gen_scale();
    if (bt > 0) {
        const ArrayXXd err = (p_hat.leftCols(bt) - batch.pg_labeled).array();
        const ArrayXXd r = range.replicate(1, bt).array();
        out.mae_p = (err.abs() / r).sum() / static_cast<double>(bt * ng);
        dp.leftCols(bt) += (weights.lambda_p / static_cast<double>(bt * ng) * sign(err) / r).matrix();

        const ArrayXXd derr = z.leftCols(bt).array() -
                              params.dual_scaler.to_normalized(batch.duals_labeled).array();
        out.mae_l = derr.abs().sum() / static_cast<double>(bt * nm);
        // d mae_l / d l_hat = sign / (scale * bt * nm); converted back to z below.
        ArrayXXd dz_l = weights.lambda_l / static_cast<double>(bt * nm) * sign(derr);
        dl.leftCols(bt) += (dz_l / params.dual_scaler.scale.replicate(1, bt).array()).matrix();
    }

    if (use_pen && n_all > 0) {
        const double w = weights.lambda_eps / static_cast<double>(n_all);
        double sum = penalty(weights.variant, net, pd_all, p_hat, kkt ? &l_hat : nullptr, w, &dp, kkt ? &dl : nullptr);
        out.mae_eps = sum / static_cast<double>(n_all);
    }
    out.total = weights.lambda_p * out.mae_p + weights.lambda_l * out.mae_l + weights.lambda_eps * out.mae_eps;

    if (grad) {
        grad->n_gen = params.n_gen;
        grad->n_line = params.n_line;
        grad->input_scaler = params.input_scaler;
        grad->pg_scaler = params.pg_scaler;
        grad->dual_scaler = params.dual_scaler;
        grad->pg_head = zero_like(params.pg_head);
        grad->dual_head = zero_like(params.dual_head);
        if (p_hat.cols() > 0)
            backprop(params.pg_head, pg_trace, params.pg_scaler.scale.asDiagonal() * dp, grad->pg_head);
        if (n_dual_cols > 0 && (weights.lambda_l > 0.0 || kkt))
            backprop(params.dual_head, dual_trace, params.dual_scaler.scale.asDiagonal() * dl, grad->dual_head);
    }
    return out;
}

} // namespace

Batch make_batch(const std::vector<sampling::LabeledRecord>& labeled, const std::vector<Eigen::VectorXd>& collocation)
{
    Batch b;
    const Eigen::Index nd = !labeled.empty() ? labeled[0].pd.size() : (!collocation.empty() ? collocation[0].size() : 0);
    const Eigen::Index ng = labeled.empty() ? 0 : labeled[0].pg_star.size();
    const Eigen::Index nm = labeled.empty() ? 0 : labeled[0].duals_star.size();
    const auto bt = static_cast<Eigen::Index>(labeled.size());
    b.pd_labeled.resize(nd, bt);
    b.pg_labeled.resize(ng, bt);
    b.duals_labeled.resize(nm, bt);
    for (Eigen::Index i = 0; i < bt; ++i) {
        const auto& r = labeled[static_cast<std::size_t>(i)];
        if (r.pd.size() != nd || r.pg_star.size() != ng || r.duals_star.size() != nm)
            throw DimensionError("make_batch: inconsistent record lengths");
        b.pd_labeled.col(i) = r.pd;
        b.pg_labeled.col(i) = r.pg_star;
        b.duals_labeled.col(i) = r.duals_star;
    }
    b.pd_collocation.resize(nd, static_cast<Eigen::Index>(collocation.size()));
    for (std::size_t i = 0; i < collocation.size(); ++i) {
        if (collocation[i].size() != nd)
            throw DimensionError("make_batch: inconsistent collocation length");
        b.pd_collocation.col(static_cast<Eigen::Index>(i)) = collocation[i];
    }
    return b;
}

LossBreakdown loss(const NetworkParams& params, const Batch& batch, const opf::Network& net,
                   const LossWeights& weights)
{
    return evaluate_loss(params, batch, net, weights, nullptr);
}

LossBreakdown loss_and_gradient(const NetworkParams& params, const Batch& batch, const opf::Network& net,
                                const LossWeights& weights, NetworkParams& grad)
{
    return evaluate_loss(params, batch, net, weights, &grad);
}

} // namespace pinnopf::pinn
