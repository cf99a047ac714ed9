#pragma once

#include "cmpcc/qp.hpp"
#include "oracles/qp_oracle.hpp"

#include <random>

namespace testing_support
{

    struct RandomQp
    {
        cmpcc::QpProblem sparse;
        oracle::DenseQp dense;
    };

    // Strictly convex QP with a known feasible point; rows are a mix of
    // upper-only, lower-only, two-sided and equality constraints.
    inline RandomQp make_random_qp(std::mt19937_64 &rng, int n, int m)
    {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        Eigen::MatrixXd M(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                M(i, j) = gauss(rng);
        Eigen::MatrixXd P = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd q(n);
        for (int i = 0; i < n; ++i)
            q(i) = 3.0 * gauss(rng);

        Eigen::MatrixXd A(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                A(i, j) = unit(rng) < 0.6 ? gauss(rng) : 0.0;
        Eigen::VectorXd x0(n);
        for (int i = 0; i < n; ++i)
            x0(i) = gauss(rng);
        const Eigen::VectorXd Ax0 = A * x0;

        Eigen::VectorXd l(m), u(m);
        int equalities = 0;
        for (int i = 0; i < m; ++i)
        {
            const double kind = unit(rng);
            if (kind < 0.1 && equalities < n / 3)
            {
                l(i) = u(i) = Ax0(i);
                ++equalities;
            }
            else if (kind < 0.5)
            {
                l(i) = -cmpcc::kQpInfinity;
                u(i) = Ax0(i) + unit(rng);
            }
            else if (kind < 0.75)
            {
                l(i) = Ax0(i) - unit(rng);
                u(i) = cmpcc::kQpInfinity;
            }
            else
            {
                l(i) = Ax0(i) - unit(rng);
                u(i) = Ax0(i) + unit(rng);
            }
        }

        RandomQp out;
        out.dense = {P, q, A, l, u};
        out.sparse.Q = Eigen::MatrixXd(P.triangularView<Eigen::Upper>()).sparseView();
        out.sparse.q = q;
        out.sparse.A = A.sparseView();
        out.sparse.l = l;
        out.sparse.u = u;
        return out;
    }

} // namespace testing_support
