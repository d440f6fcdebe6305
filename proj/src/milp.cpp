#include "pinnopf/milp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <set>

#include "pinnopf/errors.hpp"

namespace pinnopf::milp {

double LinearExpr::evaluate(const std::vector<double>& x) const
{
    double v = constant;
    for (const auto& t : terms)
        v += t.coef * x[static_cast<std::size_t>(t.var)];
    return v;
}

LinearExpr& LinearExpr::add(int var, double coef)
{
    if (coef != 0.0)
        terms.push_back({var, coef});
    return *this;
}

int MilpModel::add_continuous(double lo, double hi, std::string name)
{
    lower.push_back(lo);
    upper.push_back(hi);
    binary.push_back(false);
    names.push_back(std::move(name));
    objective.push_back(0.0);
    return static_cast<int>(lower.size() - 1);
}

int MilpModel::add_binary(std::string name)
{
    int v = add_continuous(0.0, 1.0, std::move(name));
    binary[static_cast<std::size_t>(v)] = true;
    return v;
}

std::size_t MilpModel::add_row(std::vector<Term> terms, lp::Relation relation, double rhs, std::string name)
{
    rows.push_back({std::move(terms), relation, rhs, std::move(name)});
    return rows.size() - 1;
}

std::size_t MilpModel::add_row(const LinearExpr& expr, lp::Relation relation, double rhs, std::string name)
{
    return add_row(expr.terms, relation, rhs - expr.constant, std::move(name));
}

void MilpModel::set_objective(const LinearExpr& expr)
{
    std::fill(objective.begin(), objective.end(), 0.0);
    for (const auto& t : expr.terms) {
        if (t.var < 0 || static_cast<std::size_t>(t.var) >= n_vars())
            throw DimensionError("milp: objective references an undeclared variable");
        objective[static_cast<std::size_t>(t.var)] += t.coef;
    }
    objective_constant = expr.constant;
}

std::size_t MilpModel::n_binaries() const
{
    return static_cast<std::size_t>(std::count(binary.begin(), binary.end(), true));
}

void MilpModel::validate() const
{
    const std::size_t n = n_vars();
    if (upper.size() != n || binary.size() != n || names.size() != n || objective.size() != n)
        throw DimensionError("milp: variable arrays differ in length");
    for (std::size_t j = 0; j < n; ++j)
        if (lower[j] > upper[j])
            throw ValidationError("milp: variable " + names[j] + " has lower > upper");
    for (const auto& r : rows)
        for (const auto& t : r.terms)
            if (t.var < 0 || static_cast<std::size_t>(t.var) >= n)
                throw DimensionError("milp: row '" + r.name + "' references an undeclared variable");
}

lp::LinearProgram MilpModel::to_lp() const
{
    validate();
    lp::LinearProgram p(n_vars());
    for (std::size_t j = 0; j < n_vars(); ++j)
        p.objective[j] = -objective[j];
    p.lower = lower;
    p.upper = upper;
    p.constraints.reserve(rows.size());
    for (const auto& r : rows) {
        std::vector<double> dense(n_vars(), 0.0);
        for (const auto& t : r.terms)
            dense[static_cast<std::size_t>(t.var)] += t.coef;
        p.constraints.push_back({std::move(dense), r.relation, r.rhs});
    }
    return p;
}

const char* to_string(MilpStatus status)
{
    switch (status) {
    case MilpStatus::Optimal: return "optimal";
    case MilpStatus::Infeasible: return "infeasible";
    case MilpStatus::NodeLimit: return "node_limit";
    case MilpStatus::Unbounded: return "unbounded";
    case MilpStatus::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

namespace {

struct Node {
    double bound;
    std::size_t id;
    std::vector<std::pair<int, double>> fixings; // binary var -> 0 or 1
    std::shared_ptr<const lp::Basis> basis;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const
    {
        if (a.bound != b.bound)
            return a.bound < b.bound; // max-heap on bound
        return a.id > b.id;           // then lowest id first
    }
};

class BranchAndBound {
public:
    BranchAndBound(const MilpModel& model, const MilpOptions& options)
        : model_(model), options_(options), program_(model.to_lp())
    {
        for (std::size_t j = 0; j < model.n_vars(); ++j)
            if (model.binary[j])
                binaries_.push_back(static_cast<int>(j));
    }

    MilpSolution run()
    {
        MilpSolution out;
        incumbent_value_ = options_.cutoff;

        std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
        open.push({std::numeric_limits<double>::infinity(), 0, {}, nullptr});
        std::size_t next_id = 1;
        bool numerical_trouble = false;
        bool root_infeasible = false;

        while (!open.empty()) {
            if (out.nodes >= options_.node_limit)
                break;
            Node node = open.top();
            open.pop();
            if (node.bound <= incumbent_value_ + options_.abs_gap_target)
                continue;
            ++out.nodes;

            std::vector<double> lo = model_.lower, hi = model_.upper;
            for (auto [v, val] : node.fixings)
                lo[static_cast<std::size_t>(v)] = hi[static_cast<std::size_t>(v)] = val;
            auto sol = solve(lo, hi, node.basis.get(), out);
            if (sol.status == lp::Status::Infeasible) {
                if (node.id == 0)
                    root_infeasible = true;
                continue;
            }
            if (sol.status == lp::Status::Unbounded) {
                out.status = MilpStatus::Unbounded;
                return finish(out, open);
            }
            if (sol.status != lp::Status::Optimal) {
                numerical_trouble = true;
                continue;
            }
            const double value = -sol.objective_value + model_.objective_constant;
            const double bound = std::min(value, node.bound);
            if (bound <= incumbent_value_ + options_.abs_gap_target)
                continue;

            if (options_.heuristic && (out.nodes == 1 || out.nodes % options_.heuristic_period == 0))
                try_heuristic(sol.x, out);

            int branch = most_fractional(sol.x);
            if (branch < 0) {
                accept(sol.x, value, lo, hi, sol.basis, out);
                continue;
            }
            if (bound <= incumbent_value_ + options_.abs_gap_target)
                continue;
            auto basis = std::make_shared<const lp::Basis>(std::move(sol.basis));
            for (double side : {0.0, 1.0}) {
                Node child{bound, next_id++, node.fixings, basis};
                child.fixings.emplace_back(branch, side);
                open.push(std::move(child));
            }
        }
        if (open.empty())
            out.status = root_infeasible                              ? MilpStatus::Infeasible
                         : numerical_trouble && !has_incumbent_       ? MilpStatus::NumericalFailure
                         : has_incumbent_ || std::isfinite(options_.cutoff) ? MilpStatus::Optimal
                                                                            : MilpStatus::Infeasible;
        else
            out.status = MilpStatus::NodeLimit;
        return finish(out, open);
    }

private:
    lp::LpSolution solve(const std::vector<double>& lo, const std::vector<double>& hi, const lp::Basis* warm,
                         MilpSolution& out)
    {
        lp::SolveOptions so;
        so.lower = lo;
        so.upper = hi;
        so.warm_start = warm;
        auto sol = lp::solve_lp(program_, so);
        if (sol.status == lp::Status::NumericalFailure && warm) {
            so.warm_start = nullptr;
            sol = lp::solve_lp(program_, so);
        }
        out.lp_iterations += sol.iterations;
        return sol;
    }

    int most_fractional(const std::vector<double>& x) const
    {
        int best = -1;
        double best_frac = options_.integrality_tol;
        for (int v : binaries_) {
            double f = std::abs(x[static_cast<std::size_t>(v)] - std::round(x[static_cast<std::size_t>(v)]));
            if (f > best_frac) {
                best_frac = f;
                best = v;
            }
        }
        return best;
    }

    /// Snaps binaries to 0/1 and re-solves so the stored point is exact.
    void accept(const std::vector<double>& x, double value, std::vector<double> lo, std::vector<double> hi,
                const lp::Basis& basis, MilpSolution& out)
    {
        for (int v : binaries_) {
            double r = std::round(x[static_cast<std::size_t>(v)]);
            lo[static_cast<std::size_t>(v)] = hi[static_cast<std::size_t>(v)] = r;
        }
        auto clean = solve(lo, hi, &basis, out);
        if (clean.status == lp::Status::Optimal) {
            double cv = -clean.objective_value + model_.objective_constant;
            record(clean.x, cv);
        } else {
            record(x, value);
        }
    }

    void record(const std::vector<double>& x, double value)
    {
        if (value > incumbent_value_) {
            incumbent_value_ = value;
            incumbent_ = x;
            has_incumbent_ = true;
        }
    }

    void try_heuristic(const std::vector<double>& lp_x, MilpSolution& out)
    {
        auto proposal = options_.heuristic(lp_x);
        if (!proposal || proposal->size() != model_.n_vars())
            return;
        std::string key;
        key.reserve(binaries_.size());
        std::vector<double> lo = model_.lower, hi = model_.upper;
        for (int v : binaries_) {
            double r = (*proposal)[static_cast<std::size_t>(v)] > 0.5 ? 1.0 : 0.0;
            key += r > 0.5 ? '1' : '0';
            lo[static_cast<std::size_t>(v)] = hi[static_cast<std::size_t>(v)] = r;
        }
        if (!tried_.insert(key).second)
            return;
        auto sol = solve(lo, hi, nullptr, out);
        if (sol.status == lp::Status::Optimal)
            record(sol.x, -sol.objective_value + model_.objective_constant);
    }

    MilpSolution& finish(MilpSolution& out, std::priority_queue<Node, std::vector<Node>, NodeOrder>& open)
    {
        out.has_incumbent = has_incumbent_;
        if (has_incumbent_) {
            out.x = incumbent_;
            out.objective = incumbent_value_;
        }
        double bound = has_incumbent_ ? incumbent_value_ : options_.cutoff;
        if (out.status == MilpStatus::NodeLimit) {
            // Remaining nodes carry their parents' bounds.
            while (!open.empty()) {
                bound = std::max(bound, open.top().bound);
                open.pop();
            }
        }
        if (out.status == MilpStatus::Infeasible)
            bound = -std::numeric_limits<double>::infinity();
        out.best_bound = bound;
        out.gap = has_incumbent_ ? std::max(0.0, bound - incumbent_value_) : std::numeric_limits<double>::infinity();
        if (out.status == MilpStatus::Optimal && !has_incumbent_)
            out.gap = 0.0;
        return out;
    }

    const MilpModel& model_;
    const MilpOptions& options_;
    lp::LinearProgram program_;
    std::vector<int> binaries_;
    std::vector<double> incumbent_;
    double incumbent_value_ = -std::numeric_limits<double>::infinity();
    bool has_incumbent_ = false;
    std::set<std::string> tried_;
};

} // namespace

MilpSolution solve_milp(const MilpModel& model, const MilpOptions& options)
{
    BranchAndBound bb(model, options);
    return bb.run();
}

} // namespace pinnopf::milp
