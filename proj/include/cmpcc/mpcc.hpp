#pragma once

#include "cmpcc/corridor.hpp"
#include "cmpcc/error.hpp"
#include "cmpcc/qp.hpp"
#include "cmpcc/qp_interior_point.hpp"
#include "cmpcc/trajectory.hpp"
#include "cmpcc/tube.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

namespace cmpcc
{

    constexpr int kStateDim = 12;
    constexpr int kInputDim = 4;
    constexpr int kStepDim = kStateDim + kInputDim;

    // [x, v_x, a_x, y, v_y, a_y, z, v_z, a_z, t, v_t, a_t]
    using AugmentedState = Eigen::Matrix<double, kStateDim, 1>;
    // [j_x, j_y, j_z, j_t]
    using ControlInput = Eigen::Matrix<double, kInputDim, 1>;

    namespace idx
    {
        constexpr int pos(int axis) { return 3 * axis; }
        constexpr int vel(int axis) { return 3 * axis + 1; }
        constexpr int acc(int axis) { return 3 * axis + 2; }
        constexpr int t = 9;
        constexpr int v_t = 10;
        constexpr int a_t = 11;
    } // namespace idx

    inline Vec3 position_of(const AugmentedState &s) { return {s(idx::pos(0)), s(idx::pos(1)), s(idx::pos(2))}; }
    inline Vec3 velocity_of(const AugmentedState &s) { return {s(idx::vel(0)), s(idx::vel(1)), s(idx::vel(2))}; }
    inline Vec3 acceleration_of(const AugmentedState &s) { return {s(idx::acc(0)), s(idx::acc(1)), s(idx::acc(2))}; }

    struct Limits
    {
        Vec3 v_max = Vec3::Constant(3.0);
        Vec3 a_max = Vec3::Constant(6.0);
        Vec3 j_max = Vec3::Constant(30.0);
        double v_t_max = 3.0;
        double a_t_max = 5.0;
        double j_t_max = 50.0;

        void validate() const
        {
            if (!(v_max.minCoeff() > 0.0 && a_max.minCoeff() > 0.0 && j_max.minCoeff() > 0.0 && v_t_max > 0.0 &&
                  a_t_max > 0.0 && j_t_max > 0.0))
            {
                throw InputError("limits: all maxima must be positive");
            }
        }
    };

    // How a horizon QP is solved. Hybrid runs warm-started ADMM for a short
    // budget, finishes with the interior-point method when ADMM has not
    // converged, and falls back to full ADMM only to classify infeasibility.
    enum class QpStrategy
    {
        Hybrid,
        Admm,
        InteriorPoint
    };

    struct MpccConfig
    {
        int N = 20;
        double dt = 0.05;
        double rho = 1.0;
        Limits limits;
        double terminal_eps = 0.1;
        bool recovery = true;
        double slack_weight = 1e4;
        QpSettings qp;
        QpStrategy strategy = QpStrategy::Hybrid;
        int admm_budget = 25;
        InteriorPointSettings interior_point;

        void validate() const
        {
            if (N < 2)
            {
                throw InputError("mpcc: N must be at least 2");
            }
            if (!(dt > 0.0))
            {
                throw InputError("mpcc: dt must be positive");
            }
            if (!(rho >= 0.0))
            {
                throw InputError("mpcc: rho must be non-negative");
            }
            if (admm_budget < 1)
            {
                throw InputError("mpcc: admm_budget must be positive");
            }
            if (!(terminal_eps >= 0.0))
            {
                throw InputError("mpcc: terminal_eps must be non-negative");
            }
            limits.validate();
        }
    };

    struct DynamicsMatrices
    {
        Eigen::Matrix<double, kStateDim, kStateDim> A;
        Eigen::Matrix<double, kStateDim, kInputDim> B;
    };

    // Four decoupled integrator chains. Jerk enters the acceleration only.
    inline DynamicsMatrices dynamics_matrices(double dt)
    {
        if (!(dt > 0.0))
        {
            throw std::invalid_argument("dynamics_matrices: dt must be positive");
        }
        DynamicsMatrices m;
        m.A.setZero();
        m.B.setZero();
        Eigen::Matrix3d block;
        block << 1.0, dt, 0.5 * dt * dt,
            0.0, 1.0, dt,
            0.0, 0.0, 1.0;
        for (int i = 0; i < 4; ++i)
        {
            m.A.block<3, 3>(3 * i, 3 * i) = block;
            m.B(3 * i + 2, i) = dt;
        }
        return m;
    }

    // Linearized contouring cost of one step, in the form
    // s1' Q s1 + q' s2 + constant with s1 = (x, y, z, t), s2 = (x, y, z, t, v_t).
    struct CostBlock
    {
        Eigen::Matrix4d Q;
        Eigen::Matrix<double, 5, 1> q;
        double constant = 0.0;
    };

    inline CostBlock cost_blocks(const ReferenceTrajectory &traj, double theta, double rho)
    {
        theta = traj.clamp(theta);
        const Vec3 p = traj.eval(theta, 0);
        const Vec3 dp = traj.eval(theta, 1);
        const Vec3 c = dp * theta - p;

        CostBlock out;
        out.Q.setIdentity();
        out.Q.block<3, 1>(0, 3) = -dp;
        out.Q.block<1, 3>(3, 0) = -dp.transpose();
        out.Q(3, 3) = dp.squaredNorm();
        out.q << 2.0 * c.x(), 2.0 * c.y(), 2.0 * c.z(), -2.0 * dp.dot(c), -rho;
        out.constant = c.squaredNorm();
        return out;
    }

    // Per-step row bookkeeping of an assembled horizon.
    struct StepRows
    {
        Eigen::Index begin = 0;      // first dynamics row
        Eigen::Index box_begin = 0;  // 13 box rows
        Eigen::Index tube_begin = 0; // tube (or relaxed safety) rows
        Eigen::Index tube_count = 0;
        Eigen::Index terminal_begin = -1;
    };

    struct AssembledHorizon
    {
        QpProblem problem;
        std::vector<TubeConstraints> tubes;
        std::vector<StepRows> steps;
        std::vector<double> thetas;
        bool recovery = false;
        Eigen::Index num_slack = 0;
        Eigen::Index num_box_rows_per_step = 13;
    };

    inline Eigen::Index state_var(int k, int j) { return static_cast<Eigen::Index>(kStepDim) * k + j; }
    inline Eigen::Index input_var(int k, int i) { return static_cast<Eigen::Index>(kStepDim) * k + kStateDim + i; }

    namespace detail
    {

        // Polyhedron for relaxed safety rows at one step: the annotated one or a
        // neighbour, whichever the position violates least relative to its size.
        inline int recovery_polyhedron(const Corridor &corridor, int annotated, const Vec3 &position)
        {
            int best = annotated;
            double best_score = std::numeric_limits<double>::infinity();
            for (int cand = annotated - 1; cand <= annotated + 1; ++cand)
            {
                if (cand < 0 || static_cast<std::size_t>(cand) >= corridor.size())
                {
                    continue;
                }
                const double radius = std::max(corridor.radius(static_cast<std::size_t>(cand)), 1e-6);
                const double score = corridor[static_cast<std::size_t>(cand)].max_violation(position) / radius;
                if (score < best_score)
                {
                    best_score = score;
                    best = cand;
                }
            }
            return best;
        }

    } // namespace detail

    struct AssemblyOptions
    {
        bool recovery = false;
    };

    // Stacked QP over [x1; u1; ...; xN; uN] (plus slacks in recovery mode).
    // Step k is driven by u^(k): x^(1) = A current + B u^(1), x^(k) = A x^(k-1) + B u^(k).
    inline AssembledHorizon assemble(const MpccConfig &config, const ReferenceTrajectory &traj,
                                     const Corridor &corridor, const AugmentedState &current,
                                     std::span<const double> thetas, AssemblyOptions options = {})
    {
        config.validate();
        const int N = config.N;
        if (static_cast<int>(thetas.size()) != N)
        {
            throw std::invalid_argument("assemble: need exactly N thetas");
        }
        for (int k = 0; k < N; ++k)
        {
            if (thetas[k] < traj.t0() - 1e-9 || thetas[k] > traj.tm() + 1e-9 ||
                (k > 0 && thetas[k] < thetas[k - 1] - 1e-9))
            {
                throw std::invalid_argument("assemble: thetas must be nondecreasing within [t0, tm]");
            }
        }

        const auto dyn = dynamics_matrices(config.dt);
        const Limits &lim = config.limits;

        AssembledHorizon out;
        out.recovery = options.recovery;
        out.thetas.assign(thetas.begin(), thetas.end());
        out.tubes.reserve(static_cast<std::size_t>(N));
        const Vec3 current_pos = position_of(current);
        for (int k = 0; k < N; ++k)
        {
            if (options.recovery)
            {
                const int annotated = traj.corridor_index_at(thetas[k]);
                const int chosen = detail::recovery_polyhedron(corridor, annotated, current_pos);
                TubeConstraints tube = polyhedron_rows(corridor[static_cast<std::size_t>(chosen)]);
                tube.polyhedron = chosen;
                tube.plane_point = traj.eval(thetas[k], 0);
                out.tubes.push_back(std::move(tube));
            }
            else
            {
                out.tubes.push_back(tube_at(corridor, traj, thetas[k]));
            }
        }

        const Eigen::Index n_core = static_cast<Eigen::Index>(kStepDim) * N;
        Eigen::Index n_slack = 0;
        if (options.recovery)
        {
            for (const auto &t : out.tubes)
            {
                n_slack += static_cast<Eigen::Index>(t.rows.size());
            }
        }
        const Eigen::Index n = n_core + n_slack;
        out.num_slack = n_slack;

        std::vector<Triplet> a_trip;
        std::vector<double> lo, hi;
        auto add_row = [&](double l, double u)
        {
            lo.push_back(l);
            hi.push_back(u);
            return static_cast<int>(lo.size() - 1);
        };

        Eigen::Index slack_cursor = n_core;
        const Eigen::Matrix<double, kStateDim, 1> free_response = dyn.A * current;
        out.steps.resize(static_cast<std::size_t>(N));
        for (int k = 0; k < N; ++k)
        {
            StepRows &rows = out.steps[static_cast<std::size_t>(k)];
            rows.begin = static_cast<Eigen::Index>(lo.size());

            // (a) dynamics
            for (int r = 0; r < kStateDim; ++r)
            {
                const double rhs = (k == 0) ? free_response(r) : 0.0;
                const int row = add_row(rhs, rhs);
                a_trip.emplace_back(row, static_cast<int>(state_var(k, r)), 1.0);
                if (k > 0)
                {
                    for (int c = 0; c < kStateDim; ++c)
                    {
                        if (dyn.A(r, c) != 0.0)
                        {
                            a_trip.emplace_back(row, static_cast<int>(state_var(k - 1, c)), -dyn.A(r, c));
                        }
                    }
                }
                for (int i = 0; i < kInputDim; ++i)
                {
                    if (dyn.B(r, i) != 0.0)
                    {
                        a_trip.emplace_back(row, static_cast<int>(input_var(k, i)), -dyn.B(r, i));
                    }
                }
            }

            // (d), (e) box limits
            rows.box_begin = static_cast<Eigen::Index>(lo.size());
            auto box = [&](Eigen::Index var, double l, double u)
            {
                const int row = add_row(l, u);
                a_trip.emplace_back(row, static_cast<int>(var), 1.0);
            };
            for (int ax = 0; ax < 3; ++ax)
            {
                // The first-step velocity is fixed by the current state; widen its
                // bound to contain that value so plant overshoot stays feasible.
                double v_lo = -lim.v_max(ax);
                double v_hi = lim.v_max(ax);
                if (k == 0)
                {
                    v_lo = std::min(v_lo, free_response(idx::vel(ax)));
                    v_hi = std::max(v_hi, free_response(idx::vel(ax)));
                }
                box(state_var(k, idx::vel(ax)), v_lo, v_hi);
                box(state_var(k, idx::acc(ax)), -lim.a_max(ax), lim.a_max(ax));
            }
            box(state_var(k, idx::t), traj.t0(), kQpInfinity);
            box(state_var(k, idx::v_t), 0.0, lim.v_t_max);
            box(state_var(k, idx::a_t), -lim.a_t_max, lim.a_t_max);
            for (int ax = 0; ax < 3; ++ax)
            {
                box(input_var(k, ax), -lim.j_max(ax), lim.j_max(ax));
            }
            box(input_var(k, 3), -lim.j_t_max, lim.j_t_max);

            // (c) safety rows on (x, y, z)
            rows.tube_begin = static_cast<Eigen::Index>(lo.size());
            const auto &tube = out.tubes[static_cast<std::size_t>(k)];
            rows.tube_count = static_cast<Eigen::Index>(tube.rows.size());
            for (const auto &tr : tube.rows)
            {
                const int row = add_row(-kQpInfinity, tr.offset);
                for (int ax = 0; ax < 3; ++ax)
                {
                    if (tr.normal(ax) != 0.0)
                    {
                        a_trip.emplace_back(row, static_cast<int>(state_var(k, idx::pos(ax))), tr.normal(ax));
                    }
                }
                if (options.recovery)
                {
                    a_trip.emplace_back(row, static_cast<int>(slack_cursor), -tr.normal.norm());
                    ++slack_cursor;
                }
            }

            // (f) terminal velocity
            if (k == N - 1)
            {
                rows.terminal_begin = static_cast<Eigen::Index>(lo.size());
                const Vec3 dp = traj.eval(thetas[k], 1);
                for (int ax = 0; ax < 3; ++ax)
                {
                    const double bound = std::abs(dp(ax)) + config.terminal_eps;
                    box(state_var(k, idx::vel(ax)), -bound, bound);
                }
            }
        }
        for (Eigen::Index s = n_core; s < n; ++s)
        {
            const int row = add_row(0.0, kQpInfinity);
            a_trip.emplace_back(row, static_cast<int>(s), 1.0);
        }

        // (b) linearized contouring cost
        std::vector<Triplet> q_trip;
        VectorXd q = VectorXd::Zero(n);
        double constant = 0.0;
        for (int k = 0; k < N; ++k)
        {
            const CostBlock cb = cost_blocks(traj, thetas[k], config.rho);
            const Eigen::Index s1[4] = {state_var(k, idx::pos(0)), state_var(k, idx::pos(1)),
                                        state_var(k, idx::pos(2)), state_var(k, idx::t)};
            for (int a = 0; a < 4; ++a)
            {
                for (int b = a; b < 4; ++b)
                {
                    if (cb.Q(a, b) != 0.0)
                    {
                        q_trip.emplace_back(static_cast<int>(s1[a]), static_cast<int>(s1[b]), 2.0 * cb.Q(a, b));
                    }
                }
                q(s1[a]) += cb.q(a);
            }
            q(state_var(k, idx::v_t)) += cb.q(4);
            constant += cb.constant;
        }
        for (Eigen::Index s = n_core; s < n; ++s)
        {
            q(s) = config.slack_weight;
        }

        const auto m = static_cast<Eigen::Index>(lo.size());
        out.problem.Q.resize(n, n);
        out.problem.Q.setFromTriplets(q_trip.begin(), q_trip.end());
        out.problem.A.resize(m, n);
        out.problem.A.setFromTriplets(a_trip.begin(), a_trip.end());
        out.problem.q = std::move(q);
        out.problem.l = Eigen::Map<const VectorXd>(lo.data(), m);
        out.problem.u = Eigen::Map<const VectorXd>(hi.data(), m);
        out.problem.constant = constant;
        return out;
    }

    // Contouring objective sum_k ||mu^(k) - mu_p(t^(k))||^2 - rho v_t^(k)
    // evaluated on the stacked variable without linearization.
    inline double nonlinear_objective(const ReferenceTrajectory &traj, int N, double rho, const VectorXd &stacked)
    {
        double J = 0.0;
        for (int k = 0; k < N; ++k)
        {
            const Vec3 pos(stacked(state_var(k, idx::pos(0))), stacked(state_var(k, idx::pos(1))),
                           stacked(state_var(k, idx::pos(2))));
            J += (pos - traj.eval(stacked(state_var(k, idx::t)), 0)).squaredNorm() -
                 rho * stacked(state_var(k, idx::v_t));
        }
        return J;
    }

    struct HorizonSolve
    {
        QpSolution solution;
        int admm_iterations = 0;
        int interior_point_iterations = 0;
    };

    inline HorizonSolve solve_horizon(const QpProblem &problem, const std::optional<QpWarmStart> &warm,
                                      const MpccConfig &config)
    {
        HorizonSolve out;
        if (config.strategy == QpStrategy::Admm)
        {
            out.solution = solve(problem, warm, config.qp);
            out.admm_iterations = out.solution.iterations;
            return out;
        }
        if (config.strategy == QpStrategy::Hybrid)
        {
            QpSettings brief = config.qp;
            brief.max_iterations = std::min(config.admm_budget, config.qp.max_iterations);
            out.solution = solve(problem, warm, brief);
            out.admm_iterations = out.solution.iterations;
            if (out.solution.status != QpStatus::MaxIterations)
            {
                return out;
            }
        }
        QpSolution ip = solve_interior_point(problem, config.interior_point);
        out.interior_point_iterations = ip.iterations;
        if (ip.status == QpStatus::Solved)
        {
            out.solution = std::move(ip);
            return out;
        }
        out.solution = solve(problem, warm, config.qp);
        out.admm_iterations += out.solution.iterations;
        return out;
    }

    struct HorizonPlan
    {
        std::vector<AugmentedState> states;
        std::vector<ControlInput> inputs;
        std::vector<double> thetas;      // t^(k) of the solution
        std::vector<double> linearization; // theta sequence the horizon was built on
        std::vector<TubeConstraints> tubes;
        double terminal_speed_reference = 0.0;
        Vec3 terminal_velocity_bound = Vec3::Zero();
        double solve_time = 0.0;
        QpStatus status = QpStatus::MaxIterations;
        int iterations = 0; // ADMM plus interior-point iterations
        int admm_iterations = 0;
        int interior_point_iterations = 0;
        bool recovery = false;
        bool warning = false;
    };

    struct StepResult
    {
        ControlInput apply = ControlInput::Zero();
        HorizonPlan plan;
    };

    // Receding-horizon controller. Owns the theta sequence and warm-start memory;
    // drive it from one thread.
    class Controller
    {
    public:
        Controller(MpccConfig config, ReferenceTrajectory traj, Corridor corridor, const AugmentedState &current)
            : config_(std::move(config)), traj_(std::move(traj)), corridor_(std::move(corridor))
        {
            config_.validate();
            const Vec3 pos = position_of(current);
            bool inside = false;
            std::size_t nearest = 0;
            double nearest_violation = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < corridor_.size(); ++i)
            {
                const double v = corridor_[i].max_violation(pos);
                if (v <= 1e-3)
                {
                    inside = true;
                }
                if (v < nearest_violation)
                {
                    nearest_violation = v;
                    nearest = i;
                }
            }
            if (!inside)
            {
                std::ostringstream os;
                os << "start position outside corridor: polyhedron " << nearest << " face "
                   << corridor_[nearest].most_violated_face(pos) << " violated by " << nearest_violation << " m";
                throw InputError(os.str());
            }

            const double t_star = traj_.project(pos, traj_.t0(), std::max(traj_.duration(), 1e-9));
            thetas_.resize(static_cast<std::size_t>(config_.N));
            for (int k = 0; k < config_.N; ++k)
            {
                thetas_[static_cast<std::size_t>(k)] = traj_.clamp(t_star + k * config_.dt);
            }
            initial_time_ = t_star;
            const Vec3 dp = traj_.eval(t_star, 1);
            initial_rate_ = dp.norm() > 1e-3
                                ? std::clamp(velocity_of(current).dot(dp) / dp.squaredNorm(), 0.0, config_.limits.v_t_max)
                                : 1.0;
        }

        const MpccConfig &config() const { return config_; }
        const ReferenceTrajectory &trajectory() const { return traj_; }
        const Corridor &corridor() const { return corridor_; }
        const std::vector<double> &thetas() const { return thetas_; }

        // Virtual-time seed (t, v_t, a_t) matching the theta seeding.
        Eigen::Vector3d initial_time_state() const { return {initial_time_, std::min(initial_rate_, config_.limits.v_t_max), 0.0}; }

        AssembledHorizon assemble_current(const AugmentedState &current, bool recovery = false) const
        {
            return assemble(config_, traj_, corridor_, current, thetas_, {recovery});
        }

        StepResult step(const AugmentedState &current)
        {
            const auto start = std::chrono::steady_clock::now();
            AssembledHorizon horizon = assemble_current(current, false);
            std::optional<QpWarmStart> warm = shifted_warm_start(horizon);
            HorizonSolve hs = solve_horizon(horizon.problem, warm, config_);

            if (hs.solution.status == QpStatus::PrimalInfeasible && config_.recovery)
            {
                AssembledHorizon relaxed = assemble_current(current, true);
                std::optional<QpWarmStart> relaxed_warm;
                if (warm)
                {
                    QpWarmStart w;
                    w.primal = VectorXd::Zero(relaxed.problem.num_variables());
                    w.primal.head(warm->primal.size()) = warm->primal;
                    relaxed_warm = w;
                }
                HorizonSolve relaxed_solve = solve_horizon(relaxed.problem, relaxed_warm, config_);
                relaxed_solve.admm_iterations += hs.admm_iterations;
                relaxed_solve.interior_point_iterations += hs.interior_point_iterations;
                horizon = std::move(relaxed);
                hs = std::move(relaxed_solve);
            }
            const QpSolution &sol = hs.solution;
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            StepResult out;
            HorizonPlan &plan = out.plan;
            plan.status = sol.status;
            plan.admm_iterations = hs.admm_iterations;
            plan.interior_point_iterations = hs.interior_point_iterations;
            plan.iterations = hs.admm_iterations + hs.interior_point_iterations;
            plan.recovery = horizon.recovery;
            plan.warning = sol.status != QpStatus::Solved;
            plan.solve_time = elapsed;
            plan.linearization = thetas_;
            plan.tubes = horizon.tubes;
            const Vec3 dpN = traj_.eval(thetas_.back(), 1);
            plan.terminal_speed_reference = dpN.norm();
            plan.terminal_velocity_bound = dpN.cwiseAbs() + Vec3::Constant(config_.terminal_eps);

            const int N = config_.N;
            plan.states.resize(static_cast<std::size_t>(N));
            plan.inputs.resize(static_cast<std::size_t>(N));
            plan.thetas.resize(static_cast<std::size_t>(N));
            for (int k = 0; k < N; ++k)
            {
                plan.states[static_cast<std::size_t>(k)] = sol.primal.segment<kStateDim>(state_var(k, 0));
                plan.inputs[static_cast<std::size_t>(k)] = sol.primal.segment<kInputDim>(input_var(k, 0));
                plan.thetas[static_cast<std::size_t>(k)] = plan.states[static_cast<std::size_t>(k)](idx::t);
            }

            const Limits &lim = config_.limits;
            out.apply = plan.inputs.front();
            for (int ax = 0; ax < 3; ++ax)
            {
                out.apply(ax) = std::clamp(out.apply(ax), -lim.j_max(ax), lim.j_max(ax));
            }
            out.apply(3) = std::clamp(out.apply(3), -lim.j_t_max, lim.j_t_max);

            if (plan.states.front().allFinite())
            {
                update_thetas(plan);
                remember(horizon, sol);
            }
            else
            {
                last_.reset();
            }
            return out;
        }

    private:
        void update_thetas(const HorizonPlan &plan)
        {
            const int N = config_.N;
            std::vector<double> next(static_cast<std::size_t>(N));
            for (int k = 0; k + 1 < N; ++k)
            {
                next[static_cast<std::size_t>(k)] = plan.states[static_cast<std::size_t>(k + 1)](idx::t);
            }
            const AugmentedState &last = plan.states.back();
            next.back() = last(idx::t) + config_.dt * last(idx::v_t);
            double floor = traj_.t0();
            for (auto &th : next)
            {
                th = traj_.clamp(std::max(th, floor));
                floor = th;
            }
            thetas_ = std::move(next);
        }

        struct Memory
        {
            VectorXd primal; // core variables only
            VectorXd dual;   // empty unless the layout was the nominal one
            std::vector<StepRows> steps;
        };

        void remember(const AssembledHorizon &horizon, const QpSolution &sol)
        {
            Memory mem;
            const Eigen::Index n_core = static_cast<Eigen::Index>(kStepDim) * config_.N;
            mem.primal = sol.primal.head(n_core);
            if (!horizon.recovery)
            {
                mem.dual = sol.dual;
                mem.steps = horizon.steps;
            }
            last_ = std::move(mem);
        }

        // Previous solution shifted one step forward, last step duplicated.
        std::optional<QpWarmStart> shifted_warm_start(const AssembledHorizon &horizon) const
        {
            if (!last_)
            {
                return std::nullopt;
            }
            const int N = config_.N;
            QpWarmStart w;
            w.primal = VectorXd(static_cast<Eigen::Index>(kStepDim) * N);
            for (int k = 0; k < N; ++k)
            {
                const int src = std::min(k + 1, N - 1);
                w.primal.segment<kStepDim>(kStepDim * k) = last_->primal.segment<kStepDim>(kStepDim * src);
            }
            if (last_->dual.size() > 0)
            {
                w.dual = VectorXd::Zero(horizon.problem.num_constraints());
                for (int k = 0; k < N; ++k)
                {
                    const int src = std::min(k + 1, N - 1);
                    const StepRows &to = horizon.steps[static_cast<std::size_t>(k)];
                    const StepRows &from = last_->steps[static_cast<std::size_t>(src)];
                    const Eigen::Index fixed = to.tube_begin - to.begin;
                    w.dual.segment(to.begin, fixed) = last_->dual.segment(from.begin, fixed);
                    if (to.tube_count == from.tube_count)
                    {
                        w.dual.segment(to.tube_begin, to.tube_count) =
                            last_->dual.segment(from.tube_begin, from.tube_count);
                    }
                }
                const StepRows &to = horizon.steps.back();
                const StepRows &from = last_->steps.back();
                if (to.terminal_begin >= 0 && from.terminal_begin >= 0)
                {
                    w.dual.segment(to.terminal_begin, 3) = last_->dual.segment(from.terminal_begin, 3);
                }
            }
            return w;
        }

        MpccConfig config_;
        ReferenceTrajectory traj_;
        Corridor corridor_;
        std::vector<double> thetas_;
        double initial_time_ = 0.0;
        double initial_rate_ = 1.0;
        std::optional<Memory> last_;
    };

} // namespace cmpcc
