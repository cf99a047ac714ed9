#pragma once

#include "cmpcc/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cmpcc
{

    using Eigen::VectorXd;
    using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
    using Triplet = Eigen::Triplet<double, int>;

    // Bounds at or beyond this magnitude are treated as infinite.
    constexpr double kQpInfinity = 1e30;

    inline bool is_upper_infinite(double u) { return u >= 1e20; }
    inline bool is_lower_infinite(double l) { return l <= -1e20; }

    // min 1/2 x'Qx + q'x + constant  s.t.  l <= Ax <= u.
    // Q holds the upper triangle of a symmetric PSD matrix; equalities use l == u.
    struct QpProblem
    {
        SparseMatrix Q;
        VectorXd q;
        SparseMatrix A;
        VectorXd l;
        VectorXd u;
        double constant = 0.0;

        Eigen::Index num_variables() const { return q.size(); }
        Eigen::Index num_constraints() const { return l.size(); }

        void validate() const
        {
            const auto n = q.size();
            const auto m = l.size();
            auto fail = [](const std::string &msg)
            { throw QpError(QpError::Kind::DimensionMismatch, msg); };
            if (Q.rows() != n || Q.cols() != n)
            {
                fail("Q must be n x n");
            }
            if (A.cols() != n || A.rows() != m || u.size() != m)
            {
                fail("A, l, u dimensions are inconsistent");
            }
            for (Eigen::Index i = 0; i < m; ++i)
            {
                if (!(l(i) <= u(i)))
                {
                    fail("l > u in row " + std::to_string(i));
                }
            }
        }

        SparseMatrix full_Q() const
        {
            SparseMatrix upper = Q.triangularView<Eigen::Upper>();
            SparseMatrix full = upper.selfadjointView<Eigen::Upper>();
            return full;
        }

        double objective(const VectorXd &x) const
        {
            return 0.5 * x.dot(full_Q() * x) + q.dot(x) + constant;
        }
    };

    enum class QpStatus
    {
        Solved,
        MaxIterations,
        PrimalInfeasible,
        DualInfeasible
    };

    inline const char *to_string(QpStatus s)
    {
        switch (s)
        {
        case QpStatus::Solved:
            return "solved";
        case QpStatus::MaxIterations:
            return "max_iterations";
        case QpStatus::PrimalInfeasible:
            return "primal_infeasible";
        case QpStatus::DualInfeasible:
            return "dual_infeasible";
        }
        return "unknown";
    }

    // Dual sign convention: Qx + q + A'y = 0, y > 0 on active upper bounds,
    // y < 0 on active lower bounds.
    struct QpSolution
    {
        VectorXd primal;
        VectorXd dual;
        QpStatus status = QpStatus::MaxIterations;
        int iterations = 0;
        double primal_residual = 0.0;
        double dual_residual = 0.0;
        bool polished = false;
        double objective = 0.0;
    };

    struct QpWarmStart
    {
        VectorXd primal;
        VectorXd dual;
    };

    struct QpSettings
    {
        double rho = 0.1;
        double sigma = 1e-6;
        double alpha = 1.6;
        double eps_abs = 1e-5;
        double eps_rel = 1e-5;
        double eps_prim_inf = 1e-4;
        double eps_dual_inf = 1e-4;
        int max_iterations = 4000;
        int scaling_iterations = 10;
        double equality_rho_scale = 1e3;
        bool adaptive_rho = true;
        int adaptive_rho_interval = 25;
        double adaptive_rho_tolerance = 5.0;
        bool polish = true;
        double polish_delta = 1e-6;
        int polish_refine_iterations = 5;
        // Attempt an active-set polish every this many iterations once the
        // residuals are within polish_trigger times their tolerances; 0 disables.
        int polish_interval = 25;
        int polish_passes = 3;
        double polish_trigger = 1e3;
    };

    struct KktResiduals
    {
        double primal = 0.0;
        double dual = 0.0;
        double complementarity = 0.0;
    };

    inline KktResiduals kkt_residuals(const QpProblem &problem, const VectorXd &x, const VectorXd &y)
    {
        if (x.size() != problem.num_variables() || y.size() != problem.num_constraints())
        {
            throw QpError(QpError::Kind::DimensionMismatch, "kkt_residuals: dimension mismatch");
        }
        KktResiduals r;
        const VectorXd Ax = problem.A * x;
        for (Eigen::Index i = 0; i < Ax.size(); ++i)
        {
            const double lo = is_lower_infinite(problem.l(i)) ? 0.0 : problem.l(i) - Ax(i);
            const double hi = is_upper_infinite(problem.u(i)) ? 0.0 : Ax(i) - problem.u(i);
            r.primal = std::max({r.primal, lo, hi});

            double comp = 0.0;
            if (y(i) > 0.0)
            {
                comp = is_upper_infinite(problem.u(i)) ? std::numeric_limits<double>::infinity()
                                                       : y(i) * std::abs(problem.u(i) - Ax(i));
            }
            else if (y(i) < 0.0)
            {
                comp = is_lower_infinite(problem.l(i)) ? std::numeric_limits<double>::infinity()
                                                       : -y(i) * std::abs(Ax(i) - problem.l(i));
            }
            r.complementarity = std::max(r.complementarity, comp);
        }
        const VectorXd grad = problem.full_Q() * x + problem.q + problem.A.transpose() * y;
        r.dual = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
        return r;
    }

    // Plain-text sparse dump: dimensions, then Q (upper) and A as triplets,
    // then q, l, u one value per line. Infinite bounds print as +/-inf.
    inline void dump(const QpProblem &p, std::ostream &os)
    {
        auto write_sparse = [&](const char *name, const SparseMatrix &M)
        {
            os << name << ' ' << M.rows() << ' ' << M.cols() << ' ' << M.nonZeros() << '\n';
            for (int k = 0; k < M.outerSize(); ++k)
            {
                for (SparseMatrix::InnerIterator it(M, k); it; ++it)
                {
                    os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
                }
            }
        };
        auto write_bound = [&](double v)
        {
            if (is_upper_infinite(v))
            {
                os << "inf\n";
            }
            else if (is_lower_infinite(v))
            {
                os << "-inf\n";
            }
            else
            {
                os << v << '\n';
            }
        };
        os << std::setprecision(17);
        os << "qp " << p.num_variables() << ' ' << p.num_constraints() << '\n';
        os << "constant " << p.constant << '\n';
        write_sparse("Q", SparseMatrix(p.Q.triangularView<Eigen::Upper>()));
        write_sparse("A", p.A);
        os << "q " << p.q.size() << '\n';
        for (Eigen::Index i = 0; i < p.q.size(); ++i)
        {
            os << p.q(i) << '\n';
        }
        os << "l " << p.l.size() << '\n';
        for (Eigen::Index i = 0; i < p.l.size(); ++i)
        {
            write_bound(p.l(i));
        }
        os << "u " << p.u.size() << '\n';
        for (Eigen::Index i = 0; i < p.u.size(); ++i)
        {
            write_bound(p.u(i));
        }
    }

    // Operator-splitting (ADMM) solver. Setup scales the problem and factors
    // the quasi-definite KKT matrix once; solve() iterates with optional warm start.
    class QpSolver
    {
    public:
        QpSolver(const QpProblem &problem, const QpSettings &settings = {})
            : settings_(settings)
        {
            problem.validate();
            n_ = problem.num_variables();
            m_ = problem.num_constraints();
            P_ = problem.full_Q();
            q_ = problem.q;
            A_ = problem.A;
            l_ = problem.l.cwiseMax(-kQpInfinity);
            u_ = problem.u.cwiseMin(kQpInfinity);
            constant_ = problem.constant;
            scale();
            setup_rho(settings_.rho);
            build_kkt();
            factor();
        }

        QpSolution solve(const QpWarmStart *warm = nullptr)
        {
            VectorXd x = VectorXd::Zero(n_);
            VectorXd z = VectorXd::Zero(m_);
            VectorXd y = VectorXd::Zero(m_);
            if (warm != nullptr)
            {
                if (warm->primal.size() == n_)
                {
                    x = D_.cwiseInverse().cwiseProduct(warm->primal);
                    z = As_ * x;
                }
                if (warm->dual.size() == m_)
                {
                    y = c_ * E_.cwiseInverse().cwiseProduct(warm->dual);
                }
            }

            VectorXd xt(n_), zt(m_), rhs(n_ + m_), sol(n_ + m_);
            VectorXd x_prev(n_), y_prev(m_);
            QpSolution best;
            double best_score = std::numeric_limits<double>::infinity();
            VectorXd best_x = x, best_y = y;

            QpSolution out;
            out.status = QpStatus::MaxIterations;
            int iter = 0;
            for (iter = 1; iter <= settings_.max_iterations; ++iter)
            {
                x_prev = x;
                y_prev = y;

                rhs.head(n_) = settings_.sigma * x - qs_;
                rhs.tail(m_) = z - rho_inv_.cwiseProduct(y);
                sol = ldlt_.solve(rhs);
                xt = sol.head(n_);
                zt = z + rho_inv_.cwiseProduct(sol.tail(m_) - y);

                x = settings_.alpha * xt + (1.0 - settings_.alpha) * x_prev;
                const VectorXd z_relaxed = settings_.alpha * zt + (1.0 - settings_.alpha) * z;
                const VectorXd z_new = (z_relaxed + rho_inv_.cwiseProduct(y)).cwiseMax(ls_).cwiseMin(us_);
                y = y + rho_.cwiseProduct(z_relaxed - z_new);
                z = z_new;

                const Residuals res = residuals(x, z, y);
                const double score = std::max(res.prim / res.eps_prim, res.dual / res.eps_dual);
                if (score < best_score)
                {
                    best_score = score;
                    best_x = x;
                    best_y = y;
                    best.primal_residual = res.prim;
                    best.dual_residual = res.dual;
                }
                if (res.prim <= res.eps_prim && res.dual <= res.eps_dual)
                {
                    out.status = QpStatus::Solved;
                    out.primal_residual = res.prim;
                    out.dual_residual = res.dual;
                    break;
                }
                if (primal_infeasible(y - y_prev))
                {
                    out.status = QpStatus::PrimalInfeasible;
                    out.primal_residual = res.prim;
                    out.dual_residual = res.dual;
                    break;
                }
                if (dual_infeasible(x - x_prev))
                {
                    out.status = QpStatus::DualInfeasible;
                    out.primal_residual = res.prim;
                    out.dual_residual = res.dual;
                    break;
                }
                if (settings_.polish_interval > 0 && iter % settings_.polish_interval == 0 &&
                    score < settings_.polish_trigger)
                {
                    if (auto p = polish_candidate(z, y))
                    {
                        if (p->res.prim <= p->res.eps_prim && p->res.dual <= p->res.eps_dual)
                        {
                            x = p->x;
                            y = p->y;
                            out.status = QpStatus::Solved;
                            out.primal_residual = p->res.prim;
                            out.dual_residual = p->res.dual;
                            out.polished = true;
                            break;
                        }
                    }
                }
                if (settings_.adaptive_rho && iter % settings_.adaptive_rho_interval == 0)
                {
                    adapt_rho(x, z, y);
                }
            }

            out.iterations = std::min(iter, settings_.max_iterations);
            if (out.status == QpStatus::MaxIterations)
            {
                x = best_x;
                y = best_y;
                out.primal_residual = best.primal_residual;
                out.dual_residual = best.dual_residual;
            }
            if (out.status == QpStatus::Solved && settings_.polish && !out.polished)
            {
                polish(x, z, y, out);
            }
            out.primal = D_.cwiseProduct(x);
            out.dual = E_.cwiseProduct(y) / c_;
            out.objective = 0.5 * out.primal.dot(P_ * out.primal) + q_.dot(out.primal) + constant_;
            return out;
        }

        double rho() const { return rho_scalar_; }

    private:
        struct Residuals
        {
            double prim, dual, eps_prim, eps_dual;
        };

        static double inf_norm(const VectorXd &v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

        // Modified Ruiz equilibration of the KKT matrix plus cost scaling.
        void scale()
        {
            D_ = VectorXd::Ones(n_);
            E_ = VectorXd::Ones(m_);
            c_ = 1.0;
            Ps_ = P_;
            As_ = A_;
            qs_ = q_;

            auto clip = [](double v)
            {
                if (v < 1e-4)
                {
                    return 1.0;
                }
                return std::min(v, 1e4);
            };

            for (int it = 0; it < settings_.scaling_iterations; ++it)
            {
                VectorXd dcol = VectorXd::Zero(n_);
                VectorXd erow = VectorXd::Zero(m_);
                for (int k = 0; k < Ps_.outerSize(); ++k)
                {
                    for (SparseMatrix::InnerIterator p(Ps_, k); p; ++p)
                    {
                        dcol(k) = std::max(dcol(k), std::abs(p.value()));
                    }
                }
                for (int k = 0; k < As_.outerSize(); ++k)
                {
                    for (SparseMatrix::InnerIterator a(As_, k); a; ++a)
                    {
                        dcol(k) = std::max(dcol(k), std::abs(a.value()));
                        erow(a.row()) = std::max(erow(a.row()), std::abs(a.value()));
                    }
                }
                for (Eigen::Index j = 0; j < n_; ++j)
                {
                    dcol(j) = 1.0 / std::sqrt(clip(dcol(j)));
                }
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    erow(i) = 1.0 / std::sqrt(clip(erow(i)));
                }
                Ps_ = dcol.asDiagonal() * Ps_ * dcol.asDiagonal();
                As_ = erow.asDiagonal() * As_ * dcol.asDiagonal();
                qs_ = dcol.cwiseProduct(qs_);
                D_ = D_.cwiseProduct(dcol);
                E_ = E_.cwiseProduct(erow);

                double mean_col = 0.0;
                for (int k = 0; k < Ps_.outerSize(); ++k)
                {
                    double mx = 0.0;
                    for (SparseMatrix::InnerIterator p(Ps_, k); p; ++p)
                    {
                        mx = std::max(mx, std::abs(p.value()));
                    }
                    mean_col += mx;
                }
                mean_col = n_ > 0 ? mean_col / static_cast<double>(n_) : 0.0;
                const double cost = 1.0 / clip(std::max(mean_col, inf_norm(qs_)));
                Ps_ *= cost;
                qs_ *= cost;
                c_ *= cost;
            }
            Ps_.makeCompressed();
            As_.makeCompressed();

            ls_ = VectorXd(m_);
            us_ = VectorXd(m_);
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                ls_(i) = is_lower_infinite(l_(i)) ? -kQpInfinity : E_(i) * l_(i);
                us_(i) = is_upper_infinite(u_(i)) ? kQpInfinity : E_(i) * u_(i);
            }
            AsT_ = As_.transpose();
        }

        void setup_rho(double rho)
        {
            rho_scalar_ = std::clamp(rho, 1e-6, 1e6);
            rho_ = VectorXd(m_);
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                const bool lo_inf = is_lower_infinite(l_(i));
                const bool hi_inf = is_upper_infinite(u_(i));
                if (lo_inf && hi_inf)
                {
                    rho_(i) = 1e-6;
                }
                else if (!lo_inf && !hi_inf && u_(i) - l_(i) < 1e-4)
                {
                    rho_(i) = settings_.equality_rho_scale * rho_scalar_;
                }
                else
                {
                    rho_(i) = rho_scalar_;
                }
            }
            rho_inv_ = rho_.cwiseInverse();
        }

        void build_kkt()
        {
            std::vector<Triplet> trip;
            trip.reserve(static_cast<std::size_t>(Ps_.nonZeros() + As_.nonZeros() + n_ + m_));
            for (int k = 0; k < Ps_.outerSize(); ++k)
            {
                for (SparseMatrix::InnerIterator p(Ps_, k); p; ++p)
                {
                    if (p.row() < p.col())
                    {
                        trip.emplace_back(p.row(), p.col(), p.value());
                    }
                }
            }
            for (Eigen::Index j = 0; j < n_; ++j)
            {
                trip.emplace_back(j, j, Ps_.coeff(j, j) + settings_.sigma);
            }
            for (int k = 0; k < As_.outerSize(); ++k)
            {
                for (SparseMatrix::InnerIterator a(As_, k); a; ++a)
                {
                    // A' sits in the upper-right block: row = variable, col = n + constraint.
                    trip.emplace_back(static_cast<int>(k), static_cast<int>(n_ + a.row()), a.value());
                }
            }
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                trip.emplace_back(n_ + i, n_ + i, -rho_inv_(i));
            }
            kkt_.resize(n_ + m_, n_ + m_);
            kkt_.setFromTriplets(trip.begin(), trip.end());
            kkt_.makeCompressed();
            diag_ptr_.resize(static_cast<std::size_t>(m_));
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                diag_ptr_[static_cast<std::size_t>(i)] = &kkt_.coeffRef(n_ + i, n_ + i);
            }
            ldlt_.analyzePattern(kkt_);
        }

        void factor()
        {
            ldlt_.factorize(kkt_);
            bool ok = ldlt_.info() == Eigen::Success;
            if (ok)
            {
                const VectorXd d = ldlt_.vectorD();
                const auto positive = (d.array() > 0.0).count();
                ok = positive == n_ && d.allFinite();
            }
            if (!ok)
            {
                throw QpError(QpError::Kind::NonConvex, "KKT factorization failed: Q is not positive semidefinite");
            }
        }

        Residuals residuals(const VectorXd &x, const VectorXd &z, const VectorXd &y) const
        {
            const VectorXd Ax = As_ * x;
            const VectorXd Px = Ps_ * x;
            const VectorXd Aty = AsT_ * y;
            const VectorXd Einv = E_.cwiseInverse();
            const VectorXd Dinv = D_.cwiseInverse();
            Residuals r;
            r.prim = inf_norm(Einv.cwiseProduct(Ax - z));
            r.eps_prim = settings_.eps_abs +
                         settings_.eps_rel * std::max(inf_norm(Einv.cwiseProduct(Ax)), inf_norm(Einv.cwiseProduct(z)));
            r.dual = inf_norm(Dinv.cwiseProduct(Px + qs_ + Aty)) / c_;
            r.eps_dual = settings_.eps_abs +
                         settings_.eps_rel / c_ *
                             std::max({inf_norm(Dinv.cwiseProduct(Px)), inf_norm(Dinv.cwiseProduct(Aty)),
                                       inf_norm(Dinv.cwiseProduct(qs_))});
            return r;
        }

        bool primal_infeasible(VectorXd dy) const
        {
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                if (is_upper_infinite(u_(i)))
                {
                    dy(i) = std::min(dy(i), 0.0);
                }
                if (is_lower_infinite(l_(i)))
                {
                    dy(i) = std::max(dy(i), 0.0);
                }
            }
            const VectorXd dy_unscaled = E_.cwiseProduct(dy);
            const double norm = inf_norm(dy_unscaled);
            if (norm < 1e-30)
            {
                return false;
            }
            double support = 0.0;
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                const double v = dy_unscaled(i);
                if (v > 0.0)
                {
                    support += u_(i) * v;
                }
                else if (v < 0.0)
                {
                    support += l_(i) * v;
                }
            }
            if (!(support < -settings_.eps_prim_inf * norm))
            {
                return false;
            }
            const VectorXd Aty = D_.cwiseInverse().cwiseProduct(AsT_ * dy);
            return inf_norm(Aty) < settings_.eps_prim_inf * norm;
        }

        bool dual_infeasible(const VectorXd &dx) const
        {
            const VectorXd dx_unscaled = D_.cwiseProduct(dx);
            const double norm = inf_norm(dx_unscaled);
            if (norm < 1e-30)
            {
                return false;
            }
            const double eps = settings_.eps_dual_inf * norm;
            if (!(qs_.dot(dx) / c_ < -eps))
            {
                return false;
            }
            const VectorXd Pdx = D_.cwiseInverse().cwiseProduct(Ps_ * dx) / c_;
            if (inf_norm(Pdx) > eps)
            {
                return false;
            }
            const VectorXd Adx = E_.cwiseInverse().cwiseProduct(As_ * dx);
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                if (!is_upper_infinite(u_(i)) && Adx(i) > eps)
                {
                    return false;
                }
                if (!is_lower_infinite(l_(i)) && Adx(i) < -eps)
                {
                    return false;
                }
            }
            return true;
        }

        void adapt_rho(const VectorXd &x, const VectorXd &z, const VectorXd &y)
        {
            const VectorXd Ax = As_ * x;
            const VectorXd Px = Ps_ * x;
            const VectorXd Aty = AsT_ * y;
            const double prim = inf_norm(Ax - z) / std::max(std::max(inf_norm(Ax), inf_norm(z)), 1e-10);
            const double dual = inf_norm(Px + qs_ + Aty) /
                                std::max({inf_norm(Px), inf_norm(Aty), inf_norm(qs_), 1e-10});
            const double candidate = std::clamp(rho_scalar_ * std::sqrt(prim / std::max(dual, 1e-10)), 1e-6, 1e6);
            if (candidate > settings_.adaptive_rho_tolerance * rho_scalar_ ||
                candidate < rho_scalar_ / settings_.adaptive_rho_tolerance)
            {
                setup_rho(candidate);
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    *diag_ptr_[static_cast<std::size_t>(i)] = -rho_inv_(i);
                }
                factor();
            }
        }

        // Solve the equality-constrained problem on the guessed active set and
        // keep it when it improves both residuals without flipping any multiplier sign.
        struct Polished
        {
            VectorXd x, y;
            Residuals res;
        };

        void polish(VectorXd &x, const VectorXd &z, VectorXd &y, QpSolution &out) const
        {
            const auto p = polish_candidate(z, y);
            if (!p)
            {
                return;
            }
            const bool prim_ok = p->res.prim < out.primal_residual || p->res.prim < 1e-10;
            const bool dual_ok = p->res.dual < out.dual_residual || p->res.dual < 1e-10;
            if (prim_ok && dual_ok)
            {
                x = p->x;
                y = p->y;
                out.primal_residual = p->res.prim;
                out.dual_residual = p->res.dual;
                out.polished = true;
            }
        }

        std::optional<Polished> polish_candidate(const VectorXd &z, const VectorXd &y) const
        {
            std::vector<Eigen::Index> active;
            std::vector<int> side; // -1 lower, +1 upper, 0 equality
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                const bool eq = !is_lower_infinite(l_(i)) && !is_upper_infinite(u_(i)) && u_(i) - l_(i) < 1e-10;
                if (eq)
                {
                    active.push_back(i);
                    side.push_back(0);
                }
                else if (!is_lower_infinite(l_(i)) && z(i) - ls_(i) < -y(i))
                {
                    active.push_back(i);
                    side.push_back(-1);
                }
                else if (!is_upper_infinite(u_(i)) && us_(i) - z(i) < y(i))
                {
                    active.push_back(i);
                    side.push_back(1);
                }
            }

            // Exact P and its regularized upper triangle are shared by every pass.
            std::vector<Triplet> p_upper, p_exact;
            for (int col = 0; col < Ps_.outerSize(); ++col)
            {
                for (SparseMatrix::InnerIterator p(Ps_, col); p; ++p)
                {
                    p_exact.emplace_back(p.row(), p.col(), p.value());
                    if (p.row() <= p.col())
                    {
                        p_upper.emplace_back(p.row(), p.col(), p.value());
                    }
                }
            }
            for (Eigen::Index j = 0; j < n_; ++j)
            {
                p_upper.emplace_back(j, j, settings_.polish_delta);
            }

            // Primal-dual active-set passes: re-guess the active set from the
            // complementarity function until it repeats.
            std::vector<int> state(static_cast<std::size_t>(m_), 0);
            for (std::size_t r = 0; r < active.size(); ++r)
            {
                state[static_cast<std::size_t>(active[r])] = side[r] == 0 ? 2 : side[r];
            }
            for (int pass = 0; pass < settings_.polish_passes; ++pass)
            {
                active.clear();
                side.clear();
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    const int st = state[static_cast<std::size_t>(i)];
                    if (st != 0)
                    {
                        active.push_back(i);
                        side.push_back(st == 2 ? 0 : st);
                    }
                }
                const auto k = static_cast<Eigen::Index>(active.size());
                std::vector<Eigen::Index> position(static_cast<std::size_t>(m_), -1);
                for (Eigen::Index r = 0; r < k; ++r)
                {
                    position[static_cast<std::size_t>(active[static_cast<std::size_t>(r)])] = r;
                }
                std::vector<Triplet> trip = p_upper, exact = p_exact;
                for (int col = 0; col < As_.outerSize(); ++col)
                {
                    for (SparseMatrix::InnerIterator a(As_, col); a; ++a)
                    {
                        const Eigen::Index r = position[static_cast<std::size_t>(a.row())];
                        if (r >= 0)
                        {
                            trip.emplace_back(col, static_cast<int>(n_ + r), a.value());
                            exact.emplace_back(col, static_cast<int>(n_ + r), a.value());
                            exact.emplace_back(static_cast<int>(n_ + r), col, a.value());
                        }
                    }
                }
                for (Eigen::Index r = 0; r < k; ++r)
                {
                    trip.emplace_back(n_ + r, n_ + r, -settings_.polish_delta);
                }
                SparseMatrix K(n_ + k, n_ + k), Kexact(n_ + k, n_ + k);
                K.setFromTriplets(trip.begin(), trip.end());
                Kexact.setFromTriplets(exact.begin(), exact.end());
                Eigen::SimplicialLDLT<SparseMatrix, Eigen::Upper, Eigen::AMDOrdering<int>> solver(K);
                if (solver.info() != Eigen::Success)
                {
                    return std::nullopt;
                }
                VectorXd rhs(n_ + k);
                rhs.head(n_) = -qs_;
                for (Eigen::Index r = 0; r < k; ++r)
                {
                    const auto s = static_cast<std::size_t>(r);
                    rhs(n_ + r) = side[s] < 0 ? ls_(active[s]) : us_(active[s]);
                }
                VectorXd sol = solver.solve(rhs);
                for (int it = 0; it < settings_.polish_refine_iterations; ++it)
                {
                    sol += solver.solve(rhs - Kexact * sol);
                }
                if (!sol.allFinite())
                {
                    return std::nullopt;
                }

                VectorXd yp = VectorXd::Zero(m_);
                for (Eigen::Index r = 0; r < k; ++r)
                {
                    yp(active[static_cast<std::size_t>(r)]) = sol(n_ + r);
                }
                const VectorXd xp = sol.head(n_);
                const VectorXd Axp = As_ * xp;
                const VectorXd zp = Axp.cwiseMax(ls_).cwiseMin(us_);
                bool changed = false;
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    int &st = state[static_cast<std::size_t>(i)];
                    if (st == 2)
                    {
                        continue;
                    }
                    int next = 0;
                    if (!is_upper_infinite(u_(i)) && yp(i) + (Axp(i) - us_(i)) > 0.0)
                    {
                        next = 1;
                    }
                    else if (!is_lower_infinite(l_(i)) && yp(i) + (Axp(i) - ls_(i)) < 0.0)
                    {
                        next = -1;
                    }
                    changed = changed || next != st;
                    st = next;
                }
                // A repeated active set has consistent multiplier signs.
                if (!changed)
                {
                    return Polished{xp, yp, residuals(xp, zp, yp)};
                }
            }
            return std::nullopt;
        }

        QpSettings settings_;
        Eigen::Index n_ = 0;
        Eigen::Index m_ = 0;

        // Original data (P full symmetric).
        SparseMatrix P_;
        VectorXd q_;
        SparseMatrix A_;
        VectorXd l_, u_;
        double constant_ = 0.0;

        // Scaled data.
        SparseMatrix Ps_, As_, AsT_;
        VectorXd qs_, ls_, us_;
        VectorXd D_, E_;
        double c_ = 1.0;

        double rho_scalar_ = 0.1;
        VectorXd rho_, rho_inv_;
        SparseMatrix kkt_;
        std::vector<double *> diag_ptr_;
        Eigen::SimplicialLDLT<SparseMatrix, Eigen::Upper, Eigen::AMDOrdering<int>> ldlt_;
    };

    inline QpSolution solve(const QpProblem &problem, const std::optional<QpWarmStart> &warm = std::nullopt,
                            const QpSettings &settings = {})
    {
        QpSolver solver(problem, settings);
        return solver.solve(warm ? &*warm : nullptr);
    }

} // namespace cmpcc
