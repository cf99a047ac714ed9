#pragma once

#include "cmpcc/qp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cmpcc
{

    struct InteriorPointSettings
    {
        int max_iterations = 60;
        double eps = 1e-8;
        double regularization = 1e-9;
        int refine_iterations = 1;
        double step_fraction = 0.99;
    };

    // Infeasible-start primal-dual interior point (Mehrotra predictor-corrector)
    // on the same quasi-definite KKT pattern as the ADMM solver. Reports solved
    // or max_iterations only; it never certifies infeasibility.
    class InteriorPointSolver
    {
    public:
        explicit InteriorPointSolver(const QpProblem &problem, const InteriorPointSettings &settings = {})
            : settings_(settings), problem_(problem)
        {
            problem.validate();
            n_ = problem.num_variables();
            m_ = problem.num_constraints();
            P_ = problem.full_Q();
            AT_ = problem.A.transpose();
            // Normalize the cost so multipliers start and stay near unit scale.
            double cost_max = problem.q.size() ? problem.q.cwiseAbs().maxCoeff() : 0.0;
            for (int k = 0; k < P_.outerSize(); ++k)
            {
                for (SparseMatrix::InnerIterator p(P_, k); p; ++p)
                {
                    cost_max = std::max(cost_max, std::abs(p.value()));
                }
            }
            cost_scale_ = 1.0 / std::max(1.0, cost_max);
            P_ *= cost_scale_;
            q_ = problem.q * cost_scale_;

            kind_.resize(static_cast<std::size_t>(m_));
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                const bool lo = !is_lower_infinite(problem.l(i));
                const bool hi = !is_upper_infinite(problem.u(i));
                Row &r = kind_[static_cast<std::size_t>(i)];
                r.equality = lo && hi && problem.u(i) - problem.l(i) < 1e-12;
                r.lower = lo && !r.equality;
                r.upper = hi && !r.equality;
            }
            build_pattern();
        }

        QpSolution solve()
        {
            const auto &A = problem_.A;
            const VectorXd &l = problem_.l;
            const VectorXd &u = problem_.u;
            const VectorXd &q = q_;

            VectorXd x(n_);
            VectorXd y = VectorXd::Zero(m_); // equality multipliers; inequality rows use zu - zl
            VectorXd su = VectorXd::Zero(m_), zu = VectorXd::Zero(m_);
            VectorXd sl = VectorXd::Zero(m_), zl = VectorXd::Zero(m_);
            Eigen::Index sides = 0;
            {
                // Start from min 1/2 x'Px + q'x + 1/2 sum (a_i x - target_i)^2 subject to
                // the equalities, then shift slacks and multipliers into the interior.
                VectorXd rhs0(n_ + m_);
                rhs0.head(n_) = -q;
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    const Row &r = kind_[static_cast<std::size_t>(i)];
                    double w = 1.0;
                    double target = 0.0;
                    if (r.equality)
                    {
                        w = settings_.regularization;
                        target = u(i);
                    }
                    else if (r.upper && r.lower)
                    {
                        target = 0.5 * (l(i) + u(i));
                    }
                    else if (r.upper)
                    {
                        target = u(i);
                    }
                    else if (r.lower)
                    {
                        target = l(i);
                    }
                    else
                    {
                        w = 1.0 / settings_.regularization;
                    }
                    *w_ptr_[static_cast<std::size_t>(i)] = -w;
                    rhs0(n_ + i) = target;
                }
                ldlt_.factorize(kkt_);
                x = ldlt_.info() == Eigen::Success ? VectorXd(ldlt_.solve(rhs0).head(n_)) : VectorXd::Zero(n_);
                if (!x.allFinite())
                {
                    x.setZero();
                }

                const VectorXd Ax = A * x;
                double min_s = std::numeric_limits<double>::infinity();
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    const Row &r = kind_[static_cast<std::size_t>(i)];
                    if (r.upper)
                    {
                        su(i) = u(i) - Ax(i);
                        zu(i) = 1.0;
                        min_s = std::min(min_s, su(i));
                        ++sides;
                    }
                    if (r.lower)
                    {
                        sl(i) = Ax(i) - l(i);
                        zl(i) = 1.0;
                        min_s = std::min(min_s, sl(i));
                        ++sides;
                    }
                }
                if (sides > 0)
                {
                    const double shift = std::max(-1.5 * min_s, 0.0);
                    double sz = 0.0, s_sum = 0.0;
                    for (Eigen::Index i = 0; i < m_; ++i)
                    {
                        const Row &r = kind_[static_cast<std::size_t>(i)];
                        if (r.upper)
                        {
                            su(i) += shift;
                            sz += su(i);
                            s_sum += su(i);
                        }
                        if (r.lower)
                        {
                            sl(i) += shift;
                            sz += sl(i);
                            s_sum += sl(i);
                        }
                    }
                    const double ds = std::max(0.5 * sz / static_cast<double>(sides), 1e-2);
                    const double dz = std::max(0.5 * sz / std::max(s_sum, 1e-12), 1e-2);
                    for (Eigen::Index i = 0; i < m_; ++i)
                    {
                        const Row &r = kind_[static_cast<std::size_t>(i)];
                        if (r.upper)
                        {
                            su(i) += ds;
                            zu(i) += dz;
                        }
                        if (r.lower)
                        {
                            sl(i) += ds;
                            zl(i) += dz;
                        }
                    }
                }
            }

            QpSolution out;
            out.status = QpStatus::MaxIterations;
            VectorXd d(m_), rhs(n_ + m_), step(n_ + m_);
            VectorXd ru(m_), rl(m_), rE(m_);
            VectorXd dsu(m_), dzu(m_), dsl(m_), dzl(m_);
            VectorXd dsu_a(m_), dzu_a(m_), dsl_a(m_), dzl_a(m_);

            int iter = 0;
            for (iter = 0; iter < settings_.max_iterations; ++iter)
            {
                const VectorXd Ax = A * x;
                VectorXd yfull = y;
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    const Row &r = kind_[static_cast<std::size_t>(i)];
                    if (!r.equality)
                    {
                        yfull(i) = zu(i) - zl(i);
                    }
                }
                const VectorXd Px = P_ * x;
                const VectorXd ATy = AT_ * yfull;
                const VectorXd rd = Px + q + ATy;
                double prim = 0.0;
                double mu = 0.0;
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    const Row &r = kind_[static_cast<std::size_t>(i)];
                    ru(i) = r.upper ? Ax(i) + su(i) - u(i) : 0.0;
                    rl(i) = r.lower ? Ax(i) - sl(i) - l(i) : 0.0;
                    rE(i) = r.equality ? Ax(i) - u(i) : 0.0;
                    prim = std::max({prim, std::abs(ru(i)), std::abs(rl(i)), std::abs(rE(i))});
                    mu += (r.upper ? su(i) * zu(i) : 0.0) + (r.lower ? sl(i) * zl(i) : 0.0);
                }
                mu = sides > 0 ? mu / static_cast<double>(sides) : 0.0;
                const double dual = inf_norm(rd);
                const double prim_scale = 1.0 + inf_norm(Ax);
                const double dual_scale = 1.0 + std::max({inf_norm(Px), inf_norm(q), inf_norm(ATy)});
                if (prim <= settings_.eps * prim_scale && dual <= settings_.eps * dual_scale && mu <= settings_.eps)
                {
                    out.status = QpStatus::Solved;
                    y = yfull;
                    break;
                }
                if (!x.allFinite() || mu > 1e30)
                {
                    break;
                }

                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    const Row &r = kind_[static_cast<std::size_t>(i)];
                    double di = 0.0;
                    if (r.upper)
                    {
                        di += zu(i) / su(i);
                    }
                    if (r.lower)
                    {
                        di += zl(i) / sl(i);
                    }
                    d(i) = di;
                    double w;
                    if (r.equality)
                    {
                        w = settings_.regularization;
                    }
                    else if (di > 0.0)
                    {
                        w = 1.0 / di;
                    }
                    else
                    {
                        w = 1.0 / settings_.regularization; // free row: keeps its multiplier at zero
                    }
                    *w_ptr_[static_cast<std::size_t>(i)] = -w;
                    w_exact_(i) = r.equality ? 0.0 : w;
                }
                ldlt_.factorize(kkt_);
                if (ldlt_.info() != Eigen::Success)
                {
                    break;
                }

                // Newton direction for a given complementarity target rc.
                auto solve_direction = [&](const VectorXd &rcu, const VectorXd &rcl, VectorXd &out_dsu,
                                           VectorXd &out_dzu, VectorXd &out_dsl, VectorXd &out_dzl,
                                           VectorXd &dx, VectorXd &dyE)
                {
                    rhs.head(n_) = -rd;
                    for (Eigen::Index i = 0; i < m_; ++i)
                    {
                        const Row &r = kind_[static_cast<std::size_t>(i)];
                        if (r.equality)
                        {
                            rhs(n_ + i) = -rE(i);
                            continue;
                        }
                        double g = 0.0;
                        if (r.upper)
                        {
                            g += (rcu(i) + zu(i) * ru(i)) / su(i);
                        }
                        if (r.lower)
                        {
                            g -= (rcl(i) - zl(i) * rl(i)) / sl(i);
                        }
                        rhs(n_ + i) = d(i) > 0.0 ? -g / d(i) : 0.0;
                    }
                    step = ldlt_.solve(rhs);
                    for (int it = 0; it < settings_.refine_iterations; ++it)
                    {
                        step += ldlt_.solve(rhs - exact_product(step));
                    }
                    dx = step.head(n_);
                    dyE = step.tail(m_);
                    const VectorXd Adx = A * dx;
                    for (Eigen::Index i = 0; i < m_; ++i)
                    {
                        const Row &r = kind_[static_cast<std::size_t>(i)];
                        out_dsu(i) = out_dzu(i) = out_dsl(i) = out_dzl(i) = 0.0;
                        if (r.upper)
                        {
                            out_dsu(i) = -ru(i) - Adx(i);
                            out_dzu(i) = (rcu(i) - zu(i) * out_dsu(i)) / su(i);
                        }
                        if (r.lower)
                        {
                            out_dsl(i) = rl(i) + Adx(i);
                            out_dzl(i) = (rcl(i) - zl(i) * out_dsl(i)) / sl(i);
                        }
                    }
                };

                // Predictor aims at zero complementarity; the corrector re-centres.
                const VectorXd rcu_aff = -su.cwiseProduct(zu);
                const VectorXd rcl_aff = -sl.cwiseProduct(zl);
                VectorXd dx_a, dy_a;
                solve_direction(rcu_aff, rcl_aff, dsu_a, dzu_a, dsl_a, dzl_a, dx_a, dy_a);
                const double alpha_aff = max_step(su, zu, sl, zl, dsu_a, dzu_a, dsl_a, dzl_a);

                double sigma = 0.0;
                if (sides > 0)
                {
                    double mu_aff = 0.0;
                    for (Eigen::Index i = 0; i < m_; ++i)
                    {
                        const Row &r = kind_[static_cast<std::size_t>(i)];
                        if (r.upper)
                        {
                            mu_aff += (su(i) + alpha_aff * dsu_a(i)) * (zu(i) + alpha_aff * dzu_a(i));
                        }
                        if (r.lower)
                        {
                            mu_aff += (sl(i) + alpha_aff * dsl_a(i)) * (zl(i) + alpha_aff * dzl_a(i));
                        }
                    }
                    mu_aff /= static_cast<double>(sides);
                    sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
                }

                const VectorXd rcu = VectorXd::Constant(m_, sigma * mu) - su.cwiseProduct(zu) -
                                     dsu_a.cwiseProduct(dzu_a);
                const VectorXd rcl = VectorXd::Constant(m_, sigma * mu) - sl.cwiseProduct(zl) -
                                     dsl_a.cwiseProduct(dzl_a);
                VectorXd dx, dy;
                solve_direction(rcu, rcl, dsu, dzu, dsl, dzl, dx, dy);
                const double alpha =
                    std::min(1.0, settings_.step_fraction * max_step(su, zu, sl, zl, dsu, dzu, dsl, dzl, false));

                x += alpha * dx;
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    const Row &r = kind_[static_cast<std::size_t>(i)];
                    if (r.equality)
                    {
                        y(i) += alpha * dy(i);
                    }
                    if (r.upper)
                    {
                        su(i) += alpha * dsu(i);
                        zu(i) += alpha * dzu(i);
                    }
                    if (r.lower)
                    {
                        sl(i) += alpha * dsl(i);
                        zl(i) += alpha * dzl(i);
                    }
                }
            }
            if (out.status != QpStatus::Solved)
            {
                for (Eigen::Index i = 0; i < m_; ++i)
                {
                    if (!kind_[static_cast<std::size_t>(i)].equality)
                    {
                        y(i) = zu(i) - zl(i);
                    }
                }
            }
            out.iterations = iter;
            out.primal = x;
            out.dual = y / cost_scale_;
            const KktResiduals res = kkt_residuals(problem_, out.primal, out.dual);
            out.primal_residual = res.primal;
            out.dual_residual = res.dual;
            out.objective = problem_.objective(x);
            return out;
        }

    private:
        struct Row
        {
            bool equality = false;
            bool lower = false;
            bool upper = false;
        };

        static double inf_norm(const VectorXd &v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

        // Largest step in (0, 1] keeping every slack and multiplier non-negative.
        double max_step(const VectorXd &su, const VectorXd &zu, const VectorXd &sl, const VectorXd &zl,
                        const VectorXd &dsu, const VectorXd &dzu, const VectorXd &dsl, const VectorXd &dzl,
                        bool cap = true) const
        {
            double alpha = cap ? 1.0 : std::numeric_limits<double>::infinity();
            auto limit = [&](double v, double dv)
            {
                if (dv < 0.0)
                {
                    alpha = std::min(alpha, -v / dv);
                }
            };
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                const Row &r = kind_[static_cast<std::size_t>(i)];
                if (r.upper)
                {
                    limit(su(i), dsu(i));
                    limit(zu(i), dzu(i));
                }
                if (r.lower)
                {
                    limit(sl(i), dsl(i));
                    limit(zl(i), dzl(i));
                }
            }
            return std::isfinite(alpha) ? alpha : 1.0 / settings_.step_fraction;
        }

        void build_pattern()
        {
            std::vector<Triplet> trip;
            for (int k = 0; k < P_.outerSize(); ++k)
            {
                for (SparseMatrix::InnerIterator p(P_, k); p; ++p)
                {
                    if (p.row() < p.col())
                    {
                        trip.emplace_back(p.row(), p.col(), p.value());
                    }
                }
            }
            for (Eigen::Index j = 0; j < n_; ++j)
            {
                trip.emplace_back(j, j, P_.coeff(j, j) + settings_.regularization);
            }
            for (int k = 0; k < problem_.A.outerSize(); ++k)
            {
                for (SparseMatrix::InnerIterator a(problem_.A, k); a; ++a)
                {
                    trip.emplace_back(static_cast<int>(k), static_cast<int>(n_ + a.row()), a.value());
                }
            }
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                trip.emplace_back(n_ + i, n_ + i, -1.0);
            }
            kkt_.resize(n_ + m_, n_ + m_);
            kkt_.setFromTriplets(trip.begin(), trip.end());
            kkt_.makeCompressed();
            w_ptr_.resize(static_cast<std::size_t>(m_));
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                w_ptr_[static_cast<std::size_t>(i)] = &kkt_.coeffRef(n_ + i, n_ + i);
            }
            w_exact_ = VectorXd::Zero(m_);
            ldlt_.analyzePattern(kkt_);
        }

        // Unregularized KKT product used for iterative refinement.
        VectorXd exact_product(const VectorXd &v) const
        {
            VectorXd out(n_ + m_);
            out.head(n_) = P_ * v.head(n_) + AT_ * v.tail(m_);
            out.tail(m_) = problem_.A * v.head(n_) - w_exact_.cwiseProduct(v.tail(m_));
            return out;
        }

        InteriorPointSettings settings_;
        const QpProblem &problem_;
        Eigen::Index n_ = 0;
        Eigen::Index m_ = 0;
        SparseMatrix P_, AT_; // P_ carries the cost scale
        VectorXd q_;
        double cost_scale_ = 1.0;
        std::vector<Row> kind_;
        SparseMatrix kkt_;
        std::vector<double *> w_ptr_;
        VectorXd w_exact_;
        Eigen::SimplicialLDLT<SparseMatrix, Eigen::Upper, Eigen::AMDOrdering<int>> ldlt_;
    };

    inline QpSolution solve_interior_point(const QpProblem &problem, const InteriorPointSettings &settings = {})
    {
        InteriorPointSolver solver(problem, settings);
        return solver.solve();
    }

} // namespace cmpcc
