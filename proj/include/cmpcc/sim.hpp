#pragma once

#include "cmpcc/corridor.hpp"
#include "cmpcc/error.hpp"
#include "cmpcc/mpcc.hpp"
#include "cmpcc/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cmpcc
{

    struct PlantState
    {
        Vec3 position = Vec3::Zero();
        Vec3 velocity = Vec3::Zero();
        Vec3 acceleration = Vec3::Zero();
    };

    // Exact constant-jerk step; the disturbance acts as extra constant acceleration.
    inline PlantState plant_step(const PlantState &s, const Vec3 &jerk, const Vec3 &disturbance, double dt)
    {
        if (!(dt > 0.0))
        {
            throw InputError("plant_step: dt must be positive");
        }
        const Vec3 a = s.acceleration + disturbance;
        PlantState n;
        n.acceleration = s.acceleration + jerk * dt;
        n.velocity = s.velocity + a * dt + 0.5 * jerk * dt * dt;
        n.position = s.position + s.velocity * dt + 0.5 * a * dt * dt + jerk * dt * dt * dt / 6.0;
        return n;
    }

    enum class DisturbanceKind
    {
        Impulse,
        Wind
    };

    struct Disturbance
    {
        DisturbanceKind kind = DisturbanceKind::Impulse;
        double start = 0.0;
        double duration = 0.05;
        Vec3 accel = Vec3::Zero();

        void validate() const
        {
            if (!(duration > 0.0) || !std::isfinite(start) || !accel.allFinite())
            {
                throw InputError("disturbance: duration must be positive and all fields finite");
            }
        }

        // Mean acceleration over [t, t + dt]: the overlap fraction of the active window.
        Vec3 mean_over(double t, double dt) const
        {
            const double overlap = std::min(t + dt, start + duration) - std::max(t, start);
            return overlap > 0.0 ? Vec3(accel * (overlap / dt)) : Vec3(Vec3::Zero());
        }
    };

    struct Scenario
    {
        std::string name = "scenario";
        ReferenceTrajectory trajectory;
        Corridor corridor;
        MpccConfig config;
        Vec3 start_position = Vec3::Zero();
        Vec3 start_velocity = Vec3::Zero();
        std::vector<Disturbance> disturbances;
        double duration = 10.0;
        std::uint64_t seed = 0;
        double gust_std = 0.0; // per-tick random acceleration, m/s², drawn from seed
        bool stop_at_goal = true;
    };

    struct TickRecord
    {
        int wall_step = 0;
        double sim_time = 0.0;
        PlantState plant;
        ControlInput input = ControlInput::Zero();
        double t = 0.0;
        double v_t = 0.0;
        double tracking_error = 0.0;
        double margin = 0.0;
        int iterations = 0;
        double solve_time = 0.0;
        bool recovery = false;
        QpStatus status = QpStatus::Solved;
    };

    enum class RunOutcome
    {
        GoalReached,
        DurationElapsed,
        Aborted
    };

    inline const char *to_string(RunOutcome o)
    {
        switch (o)
        {
        case RunOutcome::GoalReached:
            return "goal_reached";
        case RunOutcome::DurationElapsed:
            return "duration_elapsed";
        case RunOutcome::Aborted:
            return "aborted";
        }
        return "unknown";
    }

    struct ScenarioLog
    {
        std::string name;
        std::vector<TickRecord> records;
        std::vector<HorizonPlan> plans; // filled when requested
        RunOutcome outcome = RunOutcome::DurationElapsed;
        std::string diagnostic;
    };

    struct RunOptions
    {
        bool keep_plans = false;
        int max_recovery_streak = 10;
    };

    inline bool at_goal(const ReferenceTrajectory &traj, const PlantState &s)
    {
        return (s.position - traj.eval(traj.tm(), 0)).norm() < 0.1 && s.velocity.norm() < 0.1;
    }

    namespace detail
    {
        // Sum of scheduled disturbances plus the seeded gust for one tick.
        class DisturbanceSource
        {
        public:
            explicit DisturbanceSource(const Scenario &sc) : sc_(sc), rng_(sc.seed) {}

            Vec3 next(double t, double dt)
            {
                Vec3 d = Vec3::Zero();
                for (const auto &dist : sc_.disturbances)
                {
                    d += dist.mean_over(t, dt);
                }
                if (sc_.gust_std > 0.0)
                {
                    std::normal_distribution<double> n(0.0, sc_.gust_std);
                    for (int ax = 0; ax < 3; ++ax)
                    {
                        d(ax) += n(rng_);
                    }
                }
                return d;
            }

        private:
            const Scenario &sc_;
            std::mt19937_64 rng_;
        };

        inline void check_scenario(const Scenario &sc)
        {
            sc.config.validate();
            if (!(sc.duration > 0.0) || !std::isfinite(sc.duration))
            {
                throw InputError("scenario: duration_s must be positive");
            }
            if (!(sc.gust_std >= 0.0))
            {
                throw InputError("scenario: gust_std must be non-negative");
            }
            if (!sc.start_position.allFinite() || !sc.start_velocity.allFinite())
            {
                throw InputError("scenario: start state must be finite");
            }
            for (const auto &d : sc.disturbances)
            {
                d.validate();
            }
        }

        inline int tick_count(const Scenario &sc)
        {
            return static_cast<int>(std::ceil(sc.duration / sc.config.dt - 1e-9));
        }
    } // namespace detail

    inline ScenarioLog run_scenario(const Scenario &sc, const RunOptions &options = {})
    {
        detail::check_scenario(sc);
        const double dt = sc.config.dt;
        const ReferenceTrajectory &traj = sc.trajectory;

        PlantState plant;
        plant.position = sc.start_position;
        plant.velocity = sc.start_velocity;

        AugmentedState current = AugmentedState::Zero();
        for (int ax = 0; ax < 3; ++ax)
        {
            current(idx::pos(ax)) = plant.position(ax);
            current(idx::vel(ax)) = plant.velocity(ax);
        }
        Controller controller(sc.config, sc.trajectory, sc.corridor, current);
        Eigen::Vector3d time_state = controller.initial_time_state();
        const DynamicsMatrices dyn = dynamics_matrices(dt);
        const Eigen::Matrix3d At = dyn.A.block<3, 3>(idx::t, idx::t);
        const Eigen::Vector3d Bt = dyn.B.block<3, 1>(idx::t, 3);

        detail::DisturbanceSource source(sc);
        ScenarioLog log;
        log.name = sc.name;
        const int ticks = detail::tick_count(sc);
        int recovery_streak = 0;

        for (int k = 0; k < ticks; ++k)
        {
            const double sim_time = k * dt;
            for (int ax = 0; ax < 3; ++ax)
            {
                current(idx::pos(ax)) = plant.position(ax);
                current(idx::vel(ax)) = plant.velocity(ax);
                current(idx::acc(ax)) = plant.acceleration(ax);
            }
            current.segment<3>(idx::t) = time_state;

            const Vec3 disturbance = source.next(sim_time, dt);
            StepResult r = controller.step(current);

            TickRecord rec;
            rec.wall_step = k;
            rec.sim_time = sim_time;
            rec.plant = plant;
            rec.input = r.apply;
            rec.t = time_state(0);
            rec.v_t = time_state(1);
            rec.tracking_error = (plant.position - traj.eval(time_state(0), 0)).norm();
            rec.margin = sc.corridor.margin(plant.position);
            rec.iterations = r.plan.iterations;
            rec.solve_time = r.plan.solve_time;
            rec.recovery = r.plan.recovery;
            rec.status = r.plan.status;
            log.records.push_back(rec);
            if (options.keep_plans)
            {
                log.plans.push_back(std::move(r.plan));
            }

            recovery_streak = rec.recovery ? recovery_streak + 1 : 0;
            if (recovery_streak > options.max_recovery_streak)
            {
                log.outcome = RunOutcome::Aborted;
                std::ostringstream os;
                os << "persistent infeasibility: " << recovery_streak << " consecutive recovery ticks ending at t = "
                   << sim_time << " s, position (" << plant.position.transpose() << "), corridor margin "
                   << rec.margin << " m";
                log.diagnostic = os.str();
                return log;
            }
            if (!r.apply.allFinite())
            {
                log.outcome = RunOutcome::Aborted;
                log.diagnostic = "solver returned a non-finite input at t = " + std::to_string(sim_time) + " s";
                return log;
            }

            plant = plant_step(plant, r.apply.head<3>(), disturbance, dt);
            time_state = At * time_state + Bt * r.apply(3);
            time_state(0) = std::min(time_state(0), traj.tm());

            if (sc.stop_at_goal && at_goal(traj, plant))
            {
                log.outcome = RunOutcome::GoalReached;
                return log;
            }
        }
        log.outcome = RunOutcome::DurationElapsed;
        return log;
    }

    struct FeedbackGains
    {
        double kp = 4.0;
        double kv = 3.0;
    };

    // Position-velocity feedback on the global reference at t = t0 + sim_time,
    // with the commanded acceleration differenced into jerk.
    inline ScenarioLog run_feedback_baseline(const Scenario &sc, const FeedbackGains &gains = {})
    {
        detail::check_scenario(sc);
        const double dt = sc.config.dt;
        const ReferenceTrajectory &traj = sc.trajectory;

        PlantState plant;
        plant.position = sc.start_position;
        plant.velocity = sc.start_velocity;

        detail::DisturbanceSource source(sc);
        ScenarioLog log;
        log.name = sc.name + "_baseline";
        const int ticks = detail::tick_count(sc);

        for (int k = 0; k < ticks; ++k)
        {
            const double sim_time = k * dt;
            const double t = traj.clamp(traj.t0() + sim_time);
            const Vec3 a_cmd = traj.eval(t, 2) + gains.kp * (traj.eval(t, 0) - plant.position) +
                               gains.kv * (traj.eval(t, 1) - plant.velocity);
            const Vec3 jerk = (a_cmd - plant.acceleration) / dt;
            const Vec3 disturbance = source.next(sim_time, dt);

            TickRecord rec;
            rec.wall_step = k;
            rec.sim_time = sim_time;
            rec.plant = plant;
            rec.input.head<3>() = jerk;
            rec.t = t;
            rec.v_t = 1.0;
            rec.tracking_error = (plant.position - traj.eval(t, 0)).norm();
            rec.margin = sc.corridor.margin(plant.position);
            log.records.push_back(rec);

            plant = plant_step(plant, jerk, disturbance, dt);
            if (sc.stop_at_goal && at_goal(traj, plant) && t >= traj.tm())
            {
                log.outcome = RunOutcome::GoalReached;
                return log;
            }
        }
        log.outcome = RunOutcome::DurationElapsed;
        return log;
    }

    inline constexpr const char *kLogHeader =
        "wall_step,sim_time,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz,jt,t,v_t,tracking_error,min_margin,iterations,"
        "solve_time,recovery,status";

    inline void write_csv(const ScenarioLog &log, std::ostream &os)
    {
        os << kLogHeader << '\n';
        os << std::setprecision(10);
        for (const auto &r : log.records)
        {
            os << r.wall_step << ',' << r.sim_time;
            for (const Vec3 *v : {&r.plant.position, &r.plant.velocity, &r.plant.acceleration})
            {
                os << ',' << (*v)(0) << ',' << (*v)(1) << ',' << (*v)(2);
            }
            for (int i = 0; i < kInputDim; ++i)
            {
                os << ',' << r.input(i);
            }
            os << ',' << r.t << ',' << r.v_t << ',' << r.tracking_error << ',' << r.margin << ',' << r.iterations
               << ',' << r.solve_time << ',' << (r.recovery ? 1 : 0) << ',' << to_string(r.status) << '\n';
        }
    }

} // namespace cmpcc
