#pragma once

#include "cmpcc/corridor.hpp"
#include "cmpcc/error.hpp"
#include "cmpcc/io.hpp"
#include "cmpcc/mpcc.hpp"
#include "cmpcc/sim.hpp"
#include "cmpcc/trajectory.hpp"
#include "cmpcc/tube.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace cmpcc::cli
{

    enum ExitCode : int
    {
        kExitOk = 0,
        kExitInputError = 1,
        kExitAborted = 2,
        kExitGoalMissed = 3,
    };

    struct RunSummary
    {
        std::string scenario;
        int ticks = 0;
        bool goal_reached = false;
        double max_tracking_error = 0.0;
        double min_margin = 0.0;
        double mean_solve_time = 0.0;
        double max_solve_time = 0.0;
        int recovery_ticks = 0;
        RunOutcome outcome = RunOutcome::DurationElapsed;
    };

    inline RunSummary summarize(const ScenarioLog &log)
    {
        RunSummary s;
        s.scenario = log.name;
        s.ticks = static_cast<int>(log.records.size());
        s.goal_reached = log.outcome == RunOutcome::GoalReached;
        s.outcome = log.outcome;
        s.min_margin = std::numeric_limits<double>::infinity();
        double total = 0.0;
        for (const auto &r : log.records)
        {
            s.max_tracking_error = std::max(s.max_tracking_error, r.tracking_error);
            s.min_margin = std::min(s.min_margin, r.margin);
            s.max_solve_time = std::max(s.max_solve_time, r.solve_time);
            total += r.solve_time;
            s.recovery_ticks += r.recovery ? 1 : 0;
        }
        s.mean_solve_time = s.ticks > 0 ? total / s.ticks : 0.0;
        if (s.ticks == 0)
        {
            s.min_margin = 0.0;
        }
        return s;
    }

    inline std::string format_summary(const RunSummary &s)
    {
        std::ostringstream os;
        os << std::setprecision(6);
        os << "scenario=" << s.scenario << " ticks=" << s.ticks << " goal_reached=" << (s.goal_reached ? "true" : "false")
           << " max_tracking_error=" << s.max_tracking_error << " min_margin=" << s.min_margin
           << " mean_solve_ms=" << s.mean_solve_time * 1e3 << " max_solve_ms=" << s.max_solve_time * 1e3
           << " recovery_ticks=" << s.recovery_ticks << " outcome=" << to_string(s.outcome);
        return os.str();
    }

    struct RunFlags
    {
        std::optional<std::filesystem::path> out;
        std::optional<std::uint64_t> seed;
        std::optional<double> rho;
        bool no_recovery = false;
    };

    inline void apply_flags(Scenario &sc, const RunFlags &flags)
    {
        if (flags.seed)
        {
            sc.seed = *flags.seed;
        }
        if (flags.rho)
        {
            sc.config.rho = *flags.rho;
        }
        if (flags.no_recovery)
        {
            sc.config.recovery = false;
        }
    }

    inline void write_file(const std::filesystem::path &path, const std::string &content)
    {
        std::ofstream f(path);
        if (!f)
        {
            throw InputError(path.string() + ": cannot write file");
        }
        f << content;
    }

    inline int cmd_run(const std::filesystem::path &scenario_path, const RunFlags &flags, std::ostream &out,
                       std::ostream &err)
    {
        ScenarioLog log;
        try
        {
            Scenario sc = load_scenario(scenario_path);
            apply_flags(sc, flags);
            log = run_scenario(sc);
            if (flags.out)
            {
                std::ostringstream csv;
                write_csv(log, csv);
                write_file(*flags.out, csv.str());
            }
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << '\n';
            return kExitInputError;
        }
        out << format_summary(summarize(log)) << '\n';
        switch (log.outcome)
        {
        case RunOutcome::GoalReached:
            return kExitOk;
        case RunOutcome::Aborted:
            err << "aborted: " << log.diagnostic << '\n';
            return kExitAborted;
        case RunOutcome::DurationElapsed:
            break;
        }
        return kExitGoalMissed;
    }

    struct CheckResult
    {
        std::string name;
        bool pass = true;
        std::string detail;
    };

    inline std::vector<CheckResult> validate_inputs(const std::filesystem::path &trajectory_path,
                                                    const std::filesystem::path &corridor_path)
    {
        std::vector<CheckResult> checks;
        std::optional<ReferenceTrajectory> traj;
        std::optional<Corridor> corr;
        try
        {
            traj = load_trajectory(trajectory_path, ReferenceTrajectory::Validation::StructuralOnly);
            checks.push_back({"trajectory_schema", true, ""});
        }
        catch (const InputError &e)
        {
            checks.push_back({"trajectory_schema", false, e.what()});
        }
        try
        {
            corr = load_corridor(corridor_path, Corridor::Validation::None);
            checks.push_back({"corridor_schema", true, ""});
        }
        catch (const InputError &e)
        {
            checks.push_back({"corridor_schema", false, e.what()});
        }

        if (traj)
        {
            CheckResult c{"continuity", true, ""};
            std::ostringstream os;
            for (const auto &g : traj->joint_gaps())
            {
                if (g.position > ReferenceTrajectory::kPositionJointTol ||
                    g.velocity > ReferenceTrajectory::kDerivativeJointTol ||
                    g.acceleration > ReferenceTrajectory::kDerivativeJointTol)
                {
                    c.pass = false;
                    os << (os.tellp() > 0 ? "; " : "") << "joint " << g.joint << " (segments " << g.joint << " and "
                       << g.joint + 1 << "): position gap " << g.position << " m, velocity gap " << g.velocity
                       << " m/s, acceleration gap " << g.acceleration << " m/s^2";
                }
            }
            c.detail = os.str();
            checks.push_back(c);
        }

        if (corr)
        {
            CheckResult c{"polyhedra", true, ""};
            std::ostringstream os;
            for (std::size_t i = 0; i < corr->size(); ++i)
            {
                try
                {
                    const ChebyshevBall ball = chebyshev_center((*corr)[i]);
                    if (!(ball.radius > Corridor::kMinRadius))
                    {
                        c.pass = false;
                        os << (os.tellp() > 0 ? "; " : "") << "polyhedron " << i << ": empty interior";
                    }
                }
                catch (const GeometryError &e)
                {
                    c.pass = false;
                    os << (os.tellp() > 0 ? "; " : "") << "polyhedron " << i << ": " << e.what();
                }
            }
            c.detail = os.str();
            checks.push_back(c);

            CheckResult o{"overlap", true, ""};
            std::ostringstream oo;
            for (std::size_t i = 0; i + 1 < corr->size(); ++i)
            {
                double r = -1.0;
                try
                {
                    r = corr->overlap_radius(i);
                }
                catch (const GeometryError &)
                {
                }
                if (!(r > Corridor::kMinRadius))
                {
                    o.pass = false;
                    oo << (oo.tellp() > 0 ? "; " : "") << "polyhedra " << i << " and " << i + 1 << " do not overlap";
                }
            }
            o.detail = oo.str();
            checks.push_back(o);
        }

        if (traj && corr)
        {
            CheckResult idx{"corridor_index", true, ""};
            std::ostringstream oi;
            for (std::size_t s = 0; s < traj->segments().size(); ++s)
            {
                const int ci = traj->segments()[s].corridor_index;
                if (ci < 0 || static_cast<std::size_t>(ci) >= corr->size())
                {
                    idx.pass = false;
                    oi << (oi.tellp() > 0 ? "; " : "") << "segment " << s << ": corridor_index " << ci
                       << " out of range";
                }
            }
            idx.detail = oi.str();
            checks.push_back(idx);

            CheckResult inside{"reference_inside_corridor", true, ""};
            if (idx.pass)
            {
                constexpr int kSamples = 200;
                int failures = 0;
                double worst = 0.0;
                double worst_t = 0.0;
                for (int i = 0; i < kSamples; ++i)
                {
                    const double t = traj->t0() + traj->duration() * i / (kSamples - 1);
                    const auto poly = static_cast<std::size_t>(traj->corridor_index_at(t));
                    const double v = (*corr)[poly].max_violation(traj->eval(t, 0));
                    if (v > 1e-6)
                    {
                        ++failures;
                        if (v > worst)
                        {
                            worst = v;
                            worst_t = t;
                        }
                    }
                }
                if (failures > 0)
                {
                    std::ostringstream os;
                    os << failures << " of " << kSamples << " samples outside their polyhedron, worst "
                       << worst << " m at t = " << worst_t;
                    inside.pass = false;
                    inside.detail = os.str();
                }
            }
            else
            {
                inside.pass = false;
                inside.detail = "skipped: corridor indices out of range";
            }
            checks.push_back(inside);
        }
        return checks;
    }

    inline int cmd_validate(const std::filesystem::path &trajectory_path, const std::filesystem::path &corridor_path,
                            std::ostream &out)
    {
        bool ok = true;
        for (const auto &c : validate_inputs(trajectory_path, corridor_path))
        {
            out << (c.pass ? "PASS " : "FAIL ") << c.name;
            if (!c.detail.empty())
            {
                out << ": " << c.detail;
            }
            out << '\n';
            ok = ok && c.pass;
        }
        return ok ? kExitOk : kExitInputError;
    }

    inline constexpr const char *kTubeHeader = "theta,row,nx,ny,nz,offset,fallback";
    inline constexpr const char *kVertexHeader = "theta,vertex,x,y,z,fallback";

    // Tube rows per theta, plus the section (or fallback polyhedron) vertices.
    inline void write_tubes(const ReferenceTrajectory &traj, const Corridor &corridor,
                            const std::vector<double> &thetas, std::ostream &rows, std::ostream &verts)
    {
        rows << kTubeHeader << '\n' << std::setprecision(12);
        verts << kVertexHeader << '\n' << std::setprecision(12);
        for (double theta : thetas)
        {
            const TubeConstraints tube = tube_at(corridor, traj, theta);
            for (std::size_t i = 0; i < tube.rows.size(); ++i)
            {
                const TubeRow &r = tube.rows[i];
                // Adding 0.0 prints negative zero as 0.
                rows << theta << ',' << i << ',' << r.normal.x() + 0.0 << ',' << r.normal.y() + 0.0 << ','
                     << r.normal.z() + 0.0 << ',' << r.offset + 0.0 << ',' << (tube.fallback ? 1 : 0) << '\n';
            }
            const Polyhedron &poly = corridor[static_cast<std::size_t>(tube.polyhedron)];
            std::vector<Vec3> pts;
            if (tube.fallback)
            {
                pts = vertices(poly);
            }
            else
            {
                const CrossSection sec = cross_section(poly, traj.eval(theta, 0), traj.eval(theta, 1));
                for (const auto &v : sec.vertices2d)
                {
                    pts.push_back(sec.lift(v));
                }
            }
            for (std::size_t i = 0; i < pts.size(); ++i)
            {
                verts << theta << ',' << i << ',' << pts[i].x() + 0.0 << ',' << pts[i].y() + 0.0 << ',' << pts[i].z() + 0.0 << ','
                      << (tube.fallback ? 1 : 0) << '\n';
            }
        }
    }

    inline int cmd_tube(const std::filesystem::path &trajectory_path, const std::filesystem::path &corridor_path,
                        const std::vector<double> &thetas, const std::optional<std::filesystem::path> &out_rows,
                        const std::optional<std::filesystem::path> &out_vertices, std::ostream &out,
                        std::ostream &err)
    {
        try
        {
            const ReferenceTrajectory traj = load_trajectory(trajectory_path);
            const Corridor corridor = load_corridor(corridor_path);
            for (double th : thetas)
            {
                if (!(th >= traj.t0() && th <= traj.tm()))
                {
                    throw InputError("theta " + std::to_string(th) + " outside [t0, tm]");
                }
            }
            std::ostringstream rows, verts;
            write_tubes(traj, corridor, thetas, rows, verts);
            if (out_rows)
            {
                write_file(*out_rows, rows.str());
            }
            else
            {
                out << rows.str();
            }
            if (out_vertices)
            {
                write_file(*out_vertices, verts.str());
            }
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << '\n';
            return kExitInputError;
        }
        return kExitOk;
    }

    // Dumps the first horizon QP of a scenario, assembled at the start state.
    inline int cmd_solve_dump(const std::filesystem::path &scenario_path, const RunFlags &flags, std::ostream &out,
                              std::ostream &err)
    {
        try
        {
            Scenario sc = load_scenario(scenario_path);
            apply_flags(sc, flags);
            AugmentedState current = AugmentedState::Zero();
            for (int ax = 0; ax < 3; ++ax)
            {
                current(idx::pos(ax)) = sc.start_position(ax);
                current(idx::vel(ax)) = sc.start_velocity(ax);
            }
            const Controller controller(sc.config, sc.trajectory, sc.corridor, current);
            current.segment<3>(idx::t) = controller.initial_time_state();
            const AssembledHorizon h = controller.assemble_current(current);
            std::ostringstream os;
            dump(h.problem, os);
            if (flags.out)
            {
                write_file(*flags.out, os.str());
                out << "variables=" << h.problem.num_variables() << " constraints=" << h.problem.num_constraints()
                    << " nonzeros=" << h.problem.A.nonZeros() << '\n';
            }
            else
            {
                out << os.str();
            }
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << '\n';
            return kExitInputError;
        }
        return kExitOk;
    }

} // namespace cmpcc::cli
