#include "pinnopf/pinn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pinnopf/errors.hpp"
#include "pinnopf/random.hpp"

namespace pinnopf::pinn {

AffineScaler AffineScaler::identity(Eigen::Index n)
{
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
}

Eigen::MatrixXd AffineScaler::to_physical(const Eigen::MatrixXd& normalized) const
{
    return (scale.asDiagonal() * normalized).colwise() + offset;
}

Eigen::MatrixXd AffineScaler::to_normalized(const Eigen::MatrixXd& physical) const
{
    return scale.cwiseInverse().asDiagonal() * (physical.colwise() - offset);
}

Architecture Architecture::for_network(const opf::Network& net, std::vector<int> pg_hidden,
                                       std::vector<int> dual_hidden)
{
    Architecture a;
    a.input_dim = net.n_load();
    a.n_gen = net.n_gen();
    a.n_line = net.n_line();
    a.pg_hidden = std::move(pg_hidden);
    a.dual_hidden = std::move(dual_hidden);
    return a;
}

Architecture NetworkParams::architecture() const
{
    Architecture a;
    a.input_dim = input_dim();
    a.n_gen = n_gen;
    a.n_line = n_line;
    a.pg_hidden.clear();
    a.dual_hidden.clear();
    for (std::size_t i = 0; i + 1 < pg_head.layers.size(); ++i)
        a.pg_hidden.push_back(static_cast<int>(pg_head.layers[i].weights.rows()));
    for (std::size_t i = 0; i + 1 < dual_head.layers.size(); ++i)
        a.dual_hidden.push_back(static_cast<int>(dual_head.layers[i].weights.rows()));
    return a;
}

namespace {

void validate_head(const Head& head, Eigen::Index in, Eigen::Index out, const char* name)
{
    if (head.layers.empty())
        throw DimensionError(std::string(name) + ": no layers");
    Eigen::Index prev = in;
    for (const auto& l : head.layers) {
        if (l.weights.cols() != prev || l.biases.size() != l.weights.rows())
            throw DimensionError(std::string(name) + ": layer dimensions do not chain");
        prev = l.weights.rows();
    }
    if (prev != out)
        throw DimensionError(std::string(name) + ": output dimension " + std::to_string(prev) + ", expected " +
                             std::to_string(out));
}

Head make_head(Eigen::Index in, const std::vector<int>& hidden, Eigen::Index out, Rng& rng)
{
    Head h;
    Eigen::Index prev = in;
    std::vector<Eigen::Index> dims;
    for (int w : hidden) {
        if (w < 1)
            throw ValidationError("architecture: hidden width must be positive");
        dims.push_back(w);
    }
    dims.push_back(out);
    for (Eigen::Index d : dims) {
        Layer l{Eigen::MatrixXd(d, prev), Eigen::VectorXd::Zero(d)};
        const double a = std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(prev, 1)));
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < prev; ++c)
                l.weights(r, c) = rng.uniform(-a, a);
        h.layers.push_back(std::move(l));
        prev = d;
    }
    return h;
}

} // namespace

void NetworkParams::validate() const
{
    const Eigen::Index in = input_dim();
    validate_head(pg_head, in, n_gen, "pg head");
    validate_head(dual_head, in, 1 + 2 * n_gen + 2 * n_line, "dual head");
    auto check = [](const AffineScaler& s, Eigen::Index n, const char* name) {
        if (s.offset.size() != n || s.scale.size() != n)
            throw DimensionError(std::string(name) + " scaler has the wrong length");
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(s.scale(i) != 0.0) || !std::isfinite(s.scale(i)) || !std::isfinite(s.offset(i)))
                throw ValidationError(std::string(name) + " scaler has a zero or non-finite entry");
    };
    check(input_scaler, in, "input");
    check(pg_scaler, n_gen, "pg");
    check(dual_scaler, dual_dim(), "dual");
}

NetworkParams init_params(const Architecture& arch, std::uint64_t seed)
{
    if (arch.input_dim < 1 || arch.n_gen < 1)
        throw ValidationError("architecture: input and generator counts must be positive");
    Rng rng(seed);
    NetworkParams p;
    p.n_gen = arch.n_gen;
    p.n_line = arch.n_line;
    p.pg_head = make_head(arch.input_dim, arch.pg_hidden, arch.n_gen, rng);
    p.dual_head = make_head(arch.input_dim, arch.dual_hidden, arch.dual_dim(), rng);
    p.input_scaler = AffineScaler::identity(arch.input_dim);
    p.pg_scaler = AffineScaler::identity(arch.n_gen);
    p.dual_scaler = AffineScaler::identity(arch.dual_dim());
    return p;
}

void fit_scalers(NetworkParams& params, const opf::Network& net, const sampling::InputDomain& domain,
                 const std::vector<sampling::LabeledRecord>& labeled)
{
    if (domain.dims() != params.input_dim() || net.n_gen() != params.n_gen || net.n_line() != params.n_line)
        throw DimensionError("fit_scalers: network and case dimensions differ");
    params.input_scaler.offset = domain.lo;
    params.input_scaler.scale = domain.hi - domain.lo;
    for (Eigen::Index i = 0; i < domain.dims(); ++i)
        if (!(params.input_scaler.scale(i) > 0.0))
            params.input_scaler.scale(i) = 1.0;
    params.pg_scaler.offset = net.p_min;
    params.pg_scaler.scale = net.gen_scale();

    const Eigen::Index nm = params.dual_dim();
    Eigen::VectorXd peak = Eigen::VectorXd::Zero(nm);
    for (const auto& r : labeled) {
        if (r.duals_star.size() != nm)
            throw DimensionError("fit_scalers: dual label has the wrong length");
        peak = peak.cwiseMax(r.duals_star.cwiseAbs());
    }
    const double fallback = net.cost_scale();
    params.dual_scaler.offset = Eigen::VectorXd::Zero(nm);
    params.dual_scaler.scale.resize(nm);
    for (Eigen::Index i = 0; i < nm; ++i)
        params.dual_scaler.scale(i) = peak(i) > 1e-9 * fallback ? peak(i) : fallback;
}

Eigen::MatrixXd head_forward(const Head& head, const Eigen::MatrixXd& x)
{
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i < head.layers.size(); ++i) {
        const auto& l = head.layers[i];
        Eigen::MatrixXd z = l.weights * a;
        z.colwise() += l.biases;
        if (i + 1 < head.layers.size())
            z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

Eigen::MatrixXd forward_pg(const NetworkParams& params, const Eigen::MatrixXd& pd)
{
    if (pd.rows() != params.input_dim())
        throw DimensionError("forward: input has " + std::to_string(pd.rows()) + " entries, network expects " +
                             std::to_string(params.input_dim()));
    return params.pg_scaler.to_physical(head_forward(params.pg_head, params.input_scaler.to_normalized(pd)));
}

Eigen::MatrixXd forward_duals(const NetworkParams& params, const Eigen::MatrixXd& pd)
{
    if (pd.rows() != params.input_dim())
        throw DimensionError("forward: input has " + std::to_string(pd.rows()) + " entries, network expects " +
                             std::to_string(params.input_dim()));
    return params.dual_scaler.to_physical(head_forward(params.dual_head, params.input_scaler.to_normalized(pd)));
}

Prediction forward(const NetworkParams& params, const Eigen::VectorXd& pd)
{
    Prediction out;
    out.pg = forward_pg(params, pd).col(0);
    out.duals = opf::DualVariables::unpack(forward_duals(params, pd).col(0), params.n_gen, params.n_line);
    return out;
}

Eigen::Index parameter_count(const NetworkParams& params)
{
    Eigen::Index n = 0;
    for (const Head* h : {&params.pg_head, &params.dual_head})
        for (const auto& l : h->layers)
            n += l.weights.size() + l.biases.size();
    return n;
}

Eigen::VectorXd flatten(const NetworkParams& params)
{
    Eigen::VectorXd flat(parameter_count(params));
    Eigen::Index k = 0;
    for (const Head* h : {&params.pg_head, &params.dual_head}) {
        for (const auto& l : h->layers) {
            flat.segment(k, l.weights.size()) = l.weights.reshaped();
            k += l.weights.size();
            flat.segment(k, l.biases.size()) = l.biases;
            k += l.biases.size();
        }
    }
    return flat;
}

void unflatten(NetworkParams& params, const Eigen::VectorXd& flat)
{
    if (flat.size() != parameter_count(params))
        throw DimensionError("unflatten: parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (Head* h : {&params.pg_head, &params.dual_head}) {
        for (auto& l : h->layers) {
            l.weights.reshaped() = flat.segment(k, l.weights.size());
            k += l.weights.size();
            l.biases = flat.segment(k, l.biases.size());
            k += l.biases.size();
        }
    }
}

const char* to_string(Variant v)
{
    switch (v) {
    case Variant::Plain: return "Plain";
    case Variant::PgAbs: return "PgAbs";
    case Variant::PgSqr: return "PgSqr";
    case Variant::PgExp: return "PgExp";
    case Variant::Kkt: return "Kkt";
    }
    return "?";
}

Variant parse_variant(std::string_view text)
{
    std::string key;
    for (char c : text)
        if (c != '_' && c != '-')
            key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (key == "plain" || key == "nn")
        return Variant::Plain;
    if (key == "pgabs")
        return Variant::PgAbs;
    if (key == "pgsqr")
        return Variant::PgSqr;
    if (key == "pgexp")
        return Variant::PgExp;
    if (key == "kkt")
        return Variant::Kkt;
    throw ValidationError("unknown loss variant '" + std::string(text) +
                          "' (expected plain, pgabs, pgsqr, pgexp or kkt)");
}

} // namespace pinnopf::pinn
