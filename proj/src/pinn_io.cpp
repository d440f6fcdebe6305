#include <fstream>
#include <ostream>
#include <sstream>

#include "pinnopf/blockfile.hpp"
#include "pinnopf/errors.hpp"
#include "pinnopf/pinn.hpp"

namespace pinnopf::pinn {

namespace {

std::string dims_of(const Head& h)
{
    std::string s = std::to_string(h.input_dim());
    for (const auto& l : h.layers)
        s += "," + std::to_string(l.weights.rows());
    return s;
}

Eigen::MatrixXd as_row(const Eigen::VectorXd& v) { return v.transpose(); }

Eigen::VectorXd row_block(const io::BlockDocument& doc, const std::string& name)
{
    const auto& m = doc.block(name);
    if (m.rows() != 1)
        throw ParseError("model: block '" + name + "' must be a single row");
    return m.row(0).transpose();
}

void add_head(io::BlockDocument& doc, const Head& h, const std::string& prefix)
{
    for (std::size_t i = 0; i < h.layers.size(); ++i) {
        doc.add_block(prefix + "_w" + std::to_string(i), h.layers[i].weights);
        doc.add_block(prefix + "_b" + std::to_string(i), as_row(h.layers[i].biases));
    }
}

Head read_head(const io::BlockDocument& doc, const std::string& prefix, std::size_t n_layers)
{
    Head h;
    for (std::size_t i = 0; i < n_layers; ++i)
        h.layers.push_back({doc.block(prefix + "_w" + std::to_string(i)), row_block(doc, prefix + "_b" + std::to_string(i))});
    return h;
}

std::size_t count_layers(const std::string& dims)
{
    return static_cast<std::size_t>(std::count(dims.begin(), dims.end(), ','));
}

} // namespace

void save_model(const NetworkParams& params, std::ostream& sink)
{
    params.validate();
    io::BlockDocument doc;
    doc.kind = "pinnopf-model";
    doc.schema_version = kModelSchemaVersion;
    doc.set("n_gen", std::to_string(params.n_gen));
    doc.set("n_line", std::to_string(params.n_line));
    doc.set("pg_head", dims_of(params.pg_head));
    doc.set("dual_head", dims_of(params.dual_head));
    doc.add_block("input_offset", as_row(params.input_scaler.offset));
    doc.add_block("input_scale", as_row(params.input_scaler.scale));
    doc.add_block("pg_offset", as_row(params.pg_scaler.offset));
    doc.add_block("pg_scale", as_row(params.pg_scaler.scale));
    doc.add_block("dual_offset", as_row(params.dual_scaler.offset));
    doc.add_block("dual_scale", as_row(params.dual_scaler.scale));
    add_head(doc, params.pg_head, "pg");
    add_head(doc, params.dual_head, "dual");
    io::write_document(doc, sink);
}

NetworkParams load_model(std::istream& source)
{
    auto doc = io::read_document(source, "pinnopf-model", kModelSchemaVersion);
    NetworkParams p;
    try {
        p.n_gen = std::stol(doc.get("n_gen"));
        p.n_line = std::stol(doc.get("n_line"));
    } catch (const std::logic_error&) {
        throw ParseError("model: bad integer header field");
    }
    p.input_scaler = {row_block(doc, "input_offset"), row_block(doc, "input_scale")};
    p.pg_scaler = {row_block(doc, "pg_offset"), row_block(doc, "pg_scale")};
    p.dual_scaler = {row_block(doc, "dual_offset"), row_block(doc, "dual_scale")};
    p.pg_head = read_head(doc, "pg", count_layers(doc.get("pg_head")));
    p.dual_head = read_head(doc, "dual", count_layers(doc.get("dual_head")));
    if (dims_of(p.pg_head) != doc.get("pg_head") || dims_of(p.dual_head) != doc.get("dual_head"))
        throw ParseError("model: layer blocks disagree with the declared architecture");
    try {
        p.validate();
    } catch (const Error& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    return p;
}

void save_model_file(const NetworkParams& params, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    save_model(params, out);
}

NetworkParams load_model_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    return load_model(in);
}

void save_history(const TrainHistory& history, std::ostream& sink)
{
    sink << "# best_epoch " << history.best_epoch << " n_train " << history.n_train << " n_validation "
         << history.n_validation << " n_collocation " << history.n_collocation << "\n";
    sink << "epoch,train_total,train_mae_p,train_mae_l,train_mae_eps,val_total,val_mae_p,val_mae_l,val_mae_eps\n";
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        const auto& e = history.epochs[i];
        sink << i;
        for (double v : {e.train.total, e.train.mae_p, e.train.mae_l, e.train.mae_eps, e.validation.total,
                         e.validation.mae_p, e.validation.mae_l, e.validation.mae_eps})
            sink << ',' << io::format_double(v);
        sink << '\n';
    }
}

} // namespace pinnopf::pinn
