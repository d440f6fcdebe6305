#include "pinnopf/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "pinnopf/errors.hpp"

namespace pinnopf::lp {

LinearProgram::LinearProgram(std::size_t n)
    : n_vars(n), objective(n, 0.0), lower(n, 0.0), upper(n, kInf)
{
}

std::size_t LinearProgram::add_constraint(std::vector<double> coeffs, Relation relation, double rhs)
{
    if (coeffs.size() != n_vars)
        throw DimensionError("lp: constraint has " + std::to_string(coeffs.size()) +
                             " coefficients, expected " + std::to_string(n_vars));
    constraints.push_back({std::move(coeffs), relation, rhs});
    return constraints.size() - 1;
}

void LinearProgram::validate() const
{
    if (objective.size() != n_vars || lower.size() != n_vars || upper.size() != n_vars)
        throw DimensionError("lp: objective/bounds length differs from n_vars");
    for (const auto& c : constraints)
        if (c.coeffs.size() != n_vars)
            throw DimensionError("lp: constraint length differs from n_vars");
    for (std::size_t j = 0; j < n_vars; ++j)
        if (lower[j] > upper[j])
            throw ValidationError("lp: lower bound exceeds upper bound for variable " +
                                  std::to_string(j));
}

const char* to_string(Status status)
{
    switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::NumericalFailure: return "numerical-failure";
    }
    return "unknown";
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kOptTol = 1e-9;
constexpr double kFeasTol = 1e-9;
constexpr int kRefactorEvery = 64;
constexpr int kDegenerateRunForBland = 30;

using State = Basis::State;

inline double feas_tol(double bound) { return kFeasTol * (1.0 + std::abs(bound)); }

class Simplex {
public:
    Simplex(const LinearProgram& program, std::span<const double> lower,
            std::span<const double> upper)
        : program_(program)
    {
        n_ = static_cast<Eigen::Index>(program.n_vars);
        for (std::size_t i = 0; i < program.constraints.size(); ++i) {
            const auto& c = program.constraints[i];
            bool empty = std::all_of(c.coeffs.begin(), c.coeffs.end(),
                                     [](double v) { return v == 0.0; });
            if (empty) {
                empty_rows_.push_back(i);
            } else {
                rows_.push_back(i);
            }
        }
        m_ = static_cast<Eigen::Index>(rows_.size());
        total_ = n_ + m_;

        a_.resize(m_, n_);
        b_.resize(m_);
        lo_.resize(total_);
        hi_.resize(total_);
        cost_ = Eigen::VectorXd::Zero(total_);
        for (Eigen::Index r = 0; r < m_; ++r) {
            const auto& c = program.constraints[rows_[static_cast<std::size_t>(r)]];
            for (Eigen::Index j = 0; j < n_; ++j)
                a_(r, j) = c.coeffs[static_cast<std::size_t>(j)];
            b_(r) = c.rhs;
            // a x + s = b
            switch (c.relation) {
            case Relation::LessEqual: lo_(n_ + r) = 0.0; hi_(n_ + r) = kInf; break;
            case Relation::GreaterEqual: lo_(n_ + r) = -kInf; hi_(n_ + r) = 0.0; break;
            case Relation::Equal: lo_(n_ + r) = 0.0; hi_(n_ + r) = 0.0; break;
            }
        }
        for (Eigen::Index j = 0; j < n_; ++j) {
            std::size_t sj = static_cast<std::size_t>(j);
            lo_(j) = lower.empty() ? program.lower[sj] : lower[sj];
            hi_(j) = upper.empty() ? program.upper[sj] : upper[sj];
            cost_(j) = program.objective[sj];
        }
        state_.assign(static_cast<std::size_t>(total_), State::AtLower);
        basic_.assign(static_cast<std::size_t>(m_), 0);
        x_ = Eigen::VectorXd::Zero(total_);
    }

    LpSolution run(const Basis* warm)
    {
        LpSolution sol;
        for (std::size_t i : empty_rows_) {
            const auto& c = program_.constraints[i];
            bool ok = (c.relation == Relation::LessEqual && 0.0 <= c.rhs + feas_tol(c.rhs)) ||
                      (c.relation == Relation::GreaterEqual && 0.0 >= c.rhs - feas_tol(c.rhs)) ||
                      (c.relation == Relation::Equal && std::abs(c.rhs) <= feas_tol(c.rhs));
            if (!ok) {
                sol.status = Status::Infeasible;
                return sol;
            }
        }
        for (Eigen::Index j = 0; j < n_; ++j)
            if (lo_(j) > hi_(j)) {
                sol.status = Status::Infeasible;
                return sol;
            }

        if (!(warm && start_from(*warm)))
            cold_start();

        const std::size_t cap = 50 * (program_.n_vars + program_.constraints.size()) + 50;
        int since_refactor = 0;
        int degenerate_run = 0;
        bool bland = false;
        Eigen::VectorXd cb(m_), y(m_), alpha(m_);
        Eigen::VectorXd reduced(n_);

        for (std::size_t iter = 0;; ++iter) {
            if (iter >= cap) {
                sol.status = Status::NumericalFailure;
                sol.iterations = iter;
                return sol;
            }
            if (since_refactor >= kRefactorEvery) {
                if (!refactor()) {
                    sol.status = Status::NumericalFailure;
                    sol.iterations = iter;
                    return sol;
                }
                since_refactor = 0;
            }

            bool phase1 = false;
            for (Eigen::Index i = 0; i < m_; ++i) {
                Eigen::Index v = basic_[static_cast<std::size_t>(i)];
                if (x_(v) < lo_(v) - feas_tol(lo_(v))) {
                    cb(i) = -1.0;
                    phase1 = true;
                } else if (x_(v) > hi_(v) + feas_tol(hi_(v))) {
                    cb(i) = 1.0;
                    phase1 = true;
                } else {
                    cb(i) = 0.0;
                }
            }
            if (!phase1)
                for (Eigen::Index i = 0; i < m_; ++i)
                    cb(i) = cost_(basic_[static_cast<std::size_t>(i)]);

            y.noalias() = binv_.transpose() * cb;
            reduced.noalias() = a_.transpose() * y;

            // Pricing.
            Eigen::Index entering = -1;
            double entering_score = 0.0;
            int direction = 0;
            for (Eigen::Index j = 0; j < total_; ++j) {
                State s = state_[static_cast<std::size_t>(j)];
                if (s == State::Basic || lo_(j) == hi_(j))
                    continue;
                double d = (phase1 ? 0.0 : cost_(j)) - (j < n_ ? reduced(j) : y(j - n_));
                int dir = 0;
                if (s == State::AtLower && d < -kOptTol)
                    dir = 1;
                else if (s == State::AtUpper && d > kOptTol)
                    dir = -1;
                else if (s == State::Free && std::abs(d) > kOptTol)
                    dir = d < 0 ? 1 : -1;
                if (dir == 0)
                    continue;
                if (bland) {
                    entering = j;
                    direction = dir;
                    break;
                }
                if (std::abs(d) > entering_score) {
                    entering_score = std::abs(d);
                    entering = j;
                    direction = dir;
                }
            }

            if (entering < 0) {
                if (since_refactor != 0) {
                    // Confirm with fresh factors before declaring a result.
                    if (!refactor()) {
                        sol.status = Status::NumericalFailure;
                        sol.iterations = iter;
                        return sol;
                    }
                    since_refactor = 0;
                    continue;
                }
                sol.iterations = iter;
                if (phase1) {
                    sol.status = Status::Infeasible;
                    return sol;
                }
                finish(sol, y);
                return sol;
            }

            column(entering, alpha);

            // Two-pass (Harris) ratio test. x_B(t) = x_B - t * direction * alpha.
            double relaxed_min = kInf;
            for (Eigen::Index i = 0; i < m_; ++i) {
                double rate = -direction * alpha(i);
                if (std::abs(alpha(i)) <= kPivotTol)
                    continue;
                double limit = ratio_limit(i, rate, true).first;
                relaxed_min = std::min(relaxed_min, limit);
            }
            Eigen::Index leave = -1;
            double step = kInf;
            double leave_bound = 0.0;
            double best_pivot = 0.0;
            if (relaxed_min < kInf) {
                double exact_min = kInf;
                if (bland)
                    for (Eigen::Index i = 0; i < m_; ++i) {
                        if (std::abs(alpha(i)) <= kPivotTol)
                            continue;
                        exact_min = std::min(exact_min, ratio_limit(i, -direction * alpha(i), false).first);
                    }
                for (Eigen::Index i = 0; i < m_; ++i) {
                    if (std::abs(alpha(i)) <= kPivotTol)
                        continue;
                    auto [limit, bound] = ratio_limit(i, -direction * alpha(i), false);
                    if (limit == kInf)
                        continue;
                    if (bland) {
                        if (limit <= exact_min + 1e-12 &&
                            (leave < 0 || basic_[static_cast<std::size_t>(i)] <
                                              basic_[static_cast<std::size_t>(leave)])) {
                            leave = i;
                            step = limit;
                            leave_bound = bound;
                        }
                    } else if (limit <= relaxed_min && std::abs(alpha(i)) > best_pivot) {
                        best_pivot = std::abs(alpha(i));
                        leave = i;
                        step = limit;
                        leave_bound = bound;
                    }
                }
                step = std::max(step, 0.0);
            }

            double flip = (std::isfinite(lo_(entering)) && std::isfinite(hi_(entering)))
                              ? hi_(entering) - lo_(entering)
                              : kInf;
            if (leave < 0 && flip == kInf) {
                sol.iterations = iter;
                sol.status = phase1 ? Status::NumericalFailure : Status::Unbounded;
                return sol;
            }

            if (flip <= step) {
                for (Eigen::Index i = 0; i < m_; ++i)
                    x_(basic_[static_cast<std::size_t>(i)]) -= flip * direction * alpha(i);
                if (direction > 0) {
                    x_(entering) = hi_(entering);
                    state_[static_cast<std::size_t>(entering)] = State::AtUpper;
                } else {
                    x_(entering) = lo_(entering);
                    state_[static_cast<std::size_t>(entering)] = State::AtLower;
                }
                degenerate_run = 0;
                bland = false;
                continue;
            }

            for (Eigen::Index i = 0; i < m_; ++i)
                x_(basic_[static_cast<std::size_t>(i)]) -= step * direction * alpha(i);
            x_(entering) += step * direction;

            Eigen::Index leaving_var = basic_[static_cast<std::size_t>(leave)];
            x_(leaving_var) = leave_bound;
            state_[static_cast<std::size_t>(leaving_var)] =
                (leave_bound == lo_(leaving_var)) ? State::AtLower : State::AtUpper;
            basic_[static_cast<std::size_t>(leave)] = static_cast<int>(entering);
            state_[static_cast<std::size_t>(entering)] = State::Basic;

            Eigen::RowVectorXd pivot_row = binv_.row(leave) / alpha(leave);
            binv_.noalias() -= alpha * pivot_row;
            binv_.row(leave) = pivot_row;
            ++since_refactor;

            if (step <= 1e-12) {
                if (++degenerate_run >= kDegenerateRunForBland)
                    bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

private:
    // Returns (limit, bound value the basic variable stops at).
    std::pair<double, double> ratio_limit(Eigen::Index i, double rate, bool relaxed) const
    {
        Eigen::Index v = basic_[static_cast<std::size_t>(i)];
        double value = x_(v);
        double lo = lo_(v);
        double hi = hi_(v);
        if (rate < 0) {
            if (value > hi + feas_tol(hi))
                return {(value - hi) / -rate, hi};
            if (value < lo - feas_tol(lo) || lo == -kInf)
                return {kInf, 0.0};
            double slack = value - lo + (relaxed ? feas_tol(lo) : 0.0);
            return {std::max(slack, 0.0) / -rate, lo};
        }
        if (value < lo - feas_tol(lo))
            return {(lo - value) / rate, lo};
        if (value > hi + feas_tol(hi) || hi == kInf)
            return {kInf, 0.0};
        double slack = hi - value + (relaxed ? feas_tol(hi) : 0.0);
        return {std::max(slack, 0.0) / rate, hi};
    }

    void column(Eigen::Index j, Eigen::VectorXd& out) const
    {
        if (j < n_)
            out.noalias() = binv_ * a_.col(j);
        else
            out = binv_.col(j - n_);
    }

    void place_nonbasic(Eigen::Index j, State preferred)
    {
        bool lo_ok = std::isfinite(lo_(j));
        bool hi_ok = std::isfinite(hi_(j));
        State s = preferred;
        if (s == State::AtUpper && !hi_ok)
            s = lo_ok ? State::AtLower : State::Free;
        if ((s == State::AtLower || s == State::Basic) && !lo_ok)
            s = hi_ok ? State::AtUpper : State::Free;
        if (s == State::Free && lo_ok)
            s = State::AtLower;
        if (s == State::Free && hi_ok)
            s = State::AtUpper;
        state_[static_cast<std::size_t>(j)] = s;
        x_(j) = s == State::AtLower ? lo_(j) : s == State::AtUpper ? hi_(j) : 0.0;
    }

    void cold_start()
    {
        for (Eigen::Index j = 0; j < n_; ++j)
            place_nonbasic(j, State::AtLower);
        for (Eigen::Index r = 0; r < m_; ++r) {
            basic_[static_cast<std::size_t>(r)] = static_cast<int>(n_ + r);
            state_[static_cast<std::size_t>(n_ + r)] = State::Basic;
        }
        binv_ = Eigen::MatrixXd::Identity(m_, m_);
        compute_basic_values();
    }

    bool start_from(const Basis& warm)
    {
        if (warm.states.size() != static_cast<std::size_t>(total_) ||
            warm.basic.size() != static_cast<std::size_t>(m_))
            return false;
        std::size_t count = 0;
        for (auto s : warm.states)
            count += s == State::Basic;
        if (count != static_cast<std::size_t>(m_))
            return false;
        for (Eigen::Index r = 0; r < m_; ++r) {
            int v = warm.basic[static_cast<std::size_t>(r)];
            if (v < 0 || v >= total_ || warm.states[static_cast<std::size_t>(v)] != State::Basic)
                return false;
            basic_[static_cast<std::size_t>(r)] = v;
        }
        for (Eigen::Index j = 0; j < total_; ++j) {
            State s = warm.states[static_cast<std::size_t>(j)];
            if (s == State::Basic)
                state_[static_cast<std::size_t>(j)] = State::Basic;
            else
                place_nonbasic(j, s);
        }
        return refactor();
    }

    bool refactor()
    {
        if (m_ == 0) {
            binv_.resize(0, 0);
            return true;
        }
        Eigen::MatrixXd basis(m_, m_);
        for (Eigen::Index r = 0; r < m_; ++r) {
            Eigen::Index v = basic_[static_cast<std::size_t>(r)];
            if (v < n_)
                basis.col(r) = a_.col(v);
            else
                basis.col(r) = Eigen::VectorXd::Unit(m_, v - n_);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
        if (!(lu.rcond() > 1e-13))
            return false;
        binv_ = lu.inverse();
        if (!binv_.allFinite())
            return false;
        compute_basic_values();
        return true;
    }

    void compute_basic_values()
    {
        Eigen::VectorXd rhs = b_;
        for (Eigen::Index j = 0; j < n_; ++j)
            if (state_[static_cast<std::size_t>(j)] != State::Basic && x_(j) != 0.0)
                rhs.noalias() -= a_.col(j) * x_(j);
        for (Eigen::Index r = 0; r < m_; ++r) {
            Eigen::Index j = n_ + r;
            if (state_[static_cast<std::size_t>(j)] != State::Basic)
                rhs(r) -= x_(j);
        }
        Eigen::VectorXd xb = binv_ * rhs;
        for (Eigen::Index r = 0; r < m_; ++r)
            x_(basic_[static_cast<std::size_t>(r)]) = xb(r);
    }

    void finish(LpSolution& sol, const Eigen::VectorXd& y) const
    {
        sol.status = Status::Optimal;
        sol.x.assign(static_cast<std::size_t>(n_), 0.0);
        for (Eigen::Index j = 0; j < n_; ++j)
            sol.x[static_cast<std::size_t>(j)] = x_(j);
        sol.duals.assign(program_.constraints.size(), 0.0);
        for (Eigen::Index r = 0; r < m_; ++r)
            sol.duals[rows_[static_cast<std::size_t>(r)]] = y(r);
        Eigen::VectorXd ay = a_.transpose() * y;
        sol.reduced_costs.assign(static_cast<std::size_t>(n_), 0.0);
        double obj = 0.0;
        for (Eigen::Index j = 0; j < n_; ++j) {
            sol.reduced_costs[static_cast<std::size_t>(j)] = cost_(j) - ay(j);
            obj += cost_(j) * x_(j);
        }
        sol.objective_value = obj;
        sol.basis.states = state_;
        sol.basis.basic = basic_;
    }

    const LinearProgram& program_;
    Eigen::Index n_ = 0;
    Eigen::Index m_ = 0;
    Eigen::Index total_ = 0;
    std::vector<std::size_t> rows_;
    std::vector<std::size_t> empty_rows_;
    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
    Eigen::VectorXd lo_;
    Eigen::VectorXd hi_;
    Eigen::VectorXd cost_;
    std::vector<State> state_;
    std::vector<int> basic_;
    Eigen::VectorXd x_;
    Eigen::MatrixXd binv_;
};

} // namespace

LpSolution solve_lp(const LinearProgram& program, const SolveOptions& options)
{
    program.validate();
    if ((!options.lower.empty() && options.lower.size() != program.n_vars) ||
        (!options.upper.empty() && options.upper.size() != program.n_vars))
        throw DimensionError("lp: bound override length differs from n_vars");
    Simplex simplex(program, options.lower, options.upper);
    return simplex.run(options.warm_start);
}

void write_lp(std::ostream& out, const LinearProgram& program)
{
    out << "minimize";
    for (std::size_t j = 0; j < program.n_vars; ++j)
        if (program.objective[j] != 0.0)
            out << ' ' << (program.objective[j] >= 0 ? "+" : "") << program.objective[j] << " x"
                << j;
    out << "\nsubject to\n";
    for (std::size_t i = 0; i < program.constraints.size(); ++i) {
        const auto& c = program.constraints[i];
        out << "  c" << i << ':';
        for (std::size_t j = 0; j < program.n_vars; ++j)
            if (c.coeffs[j] != 0.0)
                out << ' ' << (c.coeffs[j] >= 0 ? "+" : "") << c.coeffs[j] << " x" << j;
        out << (c.relation == Relation::LessEqual      ? " <= "
                : c.relation == Relation::GreaterEqual ? " >= "
                                                       : " = ")
            << c.rhs << '\n';
    }
    out << "bounds\n";
    for (std::size_t j = 0; j < program.n_vars; ++j)
        out << "  " << program.lower[j] << " <= x" << j << " <= " << program.upper[j] << '\n';
}

} // namespace pinnopf::lp
