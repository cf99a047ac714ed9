#include "cmpcc/qp.hpp"
#include "cmpcc/qp_interior_point.hpp"
#include "random_qp.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace cmpcc;

namespace
{

    SparseMatrix sparse(const Eigen::MatrixXd &M) { return M.sparseView(); }

    QpProblem projection_onto_line()
    {
        // min x^2 + y^2 s.t. x + y = 1
        QpProblem p;
        p.Q = sparse(2.0 * Eigen::Matrix2d::Identity());
        p.q = Eigen::Vector2d::Zero();
        p.A = sparse(Eigen::RowVector2d(1.0, 1.0));
        p.l = Eigen::VectorXd::Constant(1, 1.0);
        p.u = Eigen::VectorXd::Constant(1, 1.0);
        return p;
    }

    QpProblem clipped_parabola()
    {
        // min (x - 2)^2 s.t. x <= 1, written as x^2 - 4x (+4)
        QpProblem p;
        p.Q = sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
        p.q = Eigen::VectorXd::Constant(1, -4.0);
        p.A = sparse(Eigen::MatrixXd::Constant(1, 1, 1.0));
        p.l = Eigen::VectorXd::Constant(1, -kQpInfinity);
        p.u = Eigen::VectorXd::Constant(1, 1.0);
        p.constant = 4.0;
        return p;
    }

} // namespace

TEST(Qp, ProjectionOntoLine)
{
    const auto p = projection_onto_line();
    const auto sol = solve(p);
    ASSERT_EQ(sol.status, QpStatus::Solved);
    EXPECT_NEAR(sol.primal(0), 0.5, 1e-6);
    EXPECT_NEAR(sol.primal(1), 0.5, 1e-6);
    EXPECT_NEAR(sol.dual(0), -1.0, 1e-6);

    const auto r = kkt_residuals(p, sol.primal, sol.dual);
    EXPECT_LE(r.primal, 1e-6);
    EXPECT_LE(r.dual, 1e-6);
    EXPECT_LE(r.complementarity, 1e-6);
}

TEST(Qp, ClippedUnconstrainedOptimum)
{
    const auto p = clipped_parabola();
    const auto sol = solve(p);
    ASSERT_EQ(sol.status, QpStatus::Solved);
    EXPECT_NEAR(sol.primal(0), 1.0, 1e-6);
    EXPECT_GT(sol.dual(0), 0.0); // upper bound active
    EXPECT_NEAR(sol.objective, 1.0, 1e-6);
}

TEST(Qp, KktResidualsAtOrigin)
{
    const auto p = clipped_parabola();
    const auto r = kkt_residuals(p, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
    EXPECT_DOUBLE_EQ(r.dual, 4.0);
    EXPECT_DOUBLE_EQ(r.primal, 0.0);
    EXPECT_DOUBLE_EQ(r.complementarity, 0.0);
}

TEST(Qp, KktResidualsFeasiblePointZeroDual)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial)
    {
        auto qp = testing_support::make_random_qp(rng, 6, 10);
        // Any point strictly inside every inequality; equality rows pin x0, so
        // evaluate at the generator's feasible point via the oracle optimum.
        auto x = oracle::solve_by_enumeration(qp.dense);
        ASSERT_TRUE(x.has_value());
        const auto r = kkt_residuals(qp.sparse, *x, Eigen::VectorXd::Zero(10));
        EXPECT_LE(r.primal, 1e-8);
        EXPECT_EQ(r.complementarity, 0.0);
    }
}

TEST(Qp, MatchesActiveSetOracle)
{
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> nd(2, 12), md(1, 20);
    for (int trial = 0; trial < 100; ++trial)
    {
        const int n = nd(rng);
        const int m = md(rng);
        auto qp = testing_support::make_random_qp(rng, n, m);
        const auto expected = oracle::solve_by_enumeration(qp.dense);
        ASSERT_TRUE(expected.has_value()) << "trial " << trial;
        const auto sol = solve(qp.sparse);
        ASSERT_EQ(sol.status, QpStatus::Solved) << "trial " << trial;
        EXPECT_LE((sol.primal - *expected).cwiseAbs().maxCoeff(), 1e-4) << "trial " << trial;
    }
}

TEST(Qp, DetectsPrimalInfeasibility)
{
    // x <= 0 and x >= 1
    QpProblem p;
    p.Q = sparse(Eigen::MatrixXd::Constant(1, 1, 1.0));
    p.q = Eigen::VectorXd::Zero(1);
    p.A = sparse(Eigen::Vector2d(1.0, 1.0));
    p.l = Eigen::Vector2d(-kQpInfinity, 1.0);
    p.u = Eigen::Vector2d(0.0, kQpInfinity);
    EXPECT_EQ(solve(p).status, QpStatus::PrimalInfeasible);
}

TEST(Qp, DetectsDualInfeasibility)
{
    // min -x s.t. x >= 0
    QpProblem p;
    p.Q = SparseMatrix(1, 1);
    p.q = Eigen::VectorXd::Constant(1, -1.0);
    p.A = sparse(Eigen::MatrixXd::Constant(1, 1, 1.0));
    p.l = Eigen::VectorXd::Zero(1);
    p.u = Eigen::VectorXd::Constant(1, kQpInfinity);
    EXPECT_EQ(solve(p).status, QpStatus::DualInfeasible);
}

TEST(Qp, RejectsNonConvexObjective)
{
    QpProblem p = projection_onto_line();
    Eigen::Matrix2d Q;
    Q << 1.0, 0.0, 0.0, -1.0;
    p.Q = sparse(Q);
    try
    {
        solve(p);
        FAIL() << "expected QpError";
    }
    catch (const QpError &e)
    {
        EXPECT_EQ(e.kind(), QpError::Kind::NonConvex);
    }
}

TEST(Qp, RejectsDimensionMismatch)
{
    QpProblem p = projection_onto_line();
    p.l = Eigen::Vector2d(0.0, 0.0);
    try
    {
        solve(p);
        FAIL() << "expected QpError";
    }
    catch (const QpError &e)
    {
        EXPECT_EQ(e.kind(), QpError::Kind::DimensionMismatch);
    }
}

TEST(Qp, WarmStartAtSolutionConvergesImmediately)
{
    std::mt19937_64 rng(5);
    auto qp = testing_support::make_random_qp(rng, 10, 15);
    QpSettings settings;
    settings.polish = false;
    const auto cold = solve(qp.sparse, std::nullopt, settings);
    ASSERT_EQ(cold.status, QpStatus::Solved);
    const auto warm = solve(qp.sparse, QpWarmStart{cold.primal, cold.dual}, settings);
    ASSERT_EQ(warm.status, QpStatus::Solved);
    EXPECT_LE(warm.iterations, cold.iterations);
    EXPECT_LE((warm.primal - cold.primal).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Qp, Deterministic)
{
    std::mt19937_64 rng(99);
    auto qp = testing_support::make_random_qp(rng, 12, 20);
    const auto a = solve(qp.sparse);
    const auto b = solve(qp.sparse);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_TRUE(a.primal == b.primal);
    EXPECT_TRUE(a.dual == b.dual);
}

TEST(Qp, SolvedResidualsWithinTolerance)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial)
    {
        auto qp = testing_support::make_random_qp(rng, 8, 12);
        const auto sol = solve(qp.sparse);
        ASSERT_EQ(sol.status, QpStatus::Solved);
        const auto r = kkt_residuals(qp.sparse, sol.primal, sol.dual);
        EXPECT_LE(r.primal, 1e-4);
        EXPECT_LE(r.dual, 1e-4);
    }
}

TEST(Qp, DumpFormat)
{
    std::ostringstream os;
    dump(clipped_parabola(), os);
    EXPECT_EQ(os.str(), "qp 1 1\nconstant 4\nQ 1 1 1\n0 0 2\nA 1 1 1\n0 0 1\nq 1\n-4\nl 1\n-inf\nu 1\n1\n");
}

TEST(InteriorPoint, MatchesActiveSetOracle)
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> nd(2, 10), md(1, 16);
    for (int trial = 0; trial < 60; ++trial)
    {
        const int n = nd(rng);
        const int m = md(rng);
        auto qp = testing_support::make_random_qp(rng, n, m);
        const auto expected = oracle::solve_by_enumeration(qp.dense);
        ASSERT_TRUE(expected.has_value()) << "trial " << trial;
        const auto sol = solve_interior_point(qp.sparse);
        ASSERT_EQ(sol.status, QpStatus::Solved) << "trial " << trial;
        EXPECT_LE((sol.primal - *expected).cwiseAbs().maxCoeff(), 1e-4) << "trial " << trial;
        const auto r = kkt_residuals(qp.sparse, sol.primal, sol.dual);
        EXPECT_LE(r.primal, 1e-7);
        EXPECT_LE(r.dual, 1e-6);
        EXPECT_LE(r.complementarity, 1e-6);
    }
}

TEST(InteriorPoint, LinearCostOnBox)
{
    // min -x - 2y on the unit box: vertex (1, 1), no curvature at all.
    QpProblem p;
    p.Q = SparseMatrix(2, 2);
    p.q = Eigen::Vector2d(-1.0, -2.0);
    p.A = sparse(Eigen::Matrix2d::Identity());
    p.l = Eigen::Vector2d::Zero();
    p.u = Eigen::Vector2d::Ones();
    const auto sol = solve_interior_point(p);
    ASSERT_EQ(sol.status, QpStatus::Solved);
    EXPECT_NEAR(sol.primal(0), 1.0, 1e-7);
    EXPECT_NEAR(sol.primal(1), 1.0, 1e-7);
    EXPECT_NEAR(sol.dual(0), 1.0, 1e-6);
    EXPECT_NEAR(sol.dual(1), 2.0, 1e-6);
}

TEST(InteriorPoint, ReportsNonConvergenceOnInfeasibleProblem)
{
    QpProblem p;
    p.Q = sparse(Eigen::MatrixXd::Constant(1, 1, 1.0));
    p.q = Eigen::VectorXd::Zero(1);
    p.A = sparse(Eigen::Vector2d(1.0, 1.0));
    p.l = Eigen::Vector2d(-kQpInfinity, 1.0);
    p.u = Eigen::Vector2d(0.0, kQpInfinity);
    EXPECT_NE(solve_interior_point(p).status, QpStatus::Solved);
}
