#include "cmpcc/io.hpp"
#include "cmpcc/sim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <string>

using namespace cmpcc;

namespace
{

    Scenario demo(const std::string &name)
    {
        return load_scenario(std::string(CMPCC_DATA_DIR) + "/scenarios/" + name + ".json");
    }

    double max_error(const ScenarioLog &log, double from = 0.0)
    {
        double worst = 0.0;
        for (const auto &r : log.records)
        {
            if (r.sim_time >= from)
            {
                worst = std::max(worst, r.tracking_error);
            }
        }
        return worst;
    }

    double min_margin(const ScenarioLog &log)
    {
        double m = 1e300;
        for (const auto &r : log.records)
        {
            m = std::min(m, r.margin);
        }
        return m;
    }

    double impulse_end(const Scenario &sc)
    {
        return sc.disturbances.at(0).start + sc.disturbances.at(0).duration;
    }

} // namespace

TEST(Sim, PlantFixedPointAtRest)
{
    const PlantState s = plant_step(PlantState{}, Vec3::Zero(), Vec3::Zero(), 0.05);
    EXPECT_EQ(s.position, Vec3::Zero());
    EXPECT_EQ(s.velocity, Vec3::Zero());
    EXPECT_EQ(s.acceleration, Vec3::Zero());
}

TEST(Sim, PlantConstantJerk)
{
    const PlantState s = plant_step(PlantState{}, Vec3(6, 0, 0), Vec3::Zero(), 1.0);
    EXPECT_NEAR(s.acceleration.x(), 6.0, 1e-12);
    EXPECT_NEAR(s.velocity.x(), 3.0, 1e-12);
    EXPECT_NEAR(s.position.x(), 1.0, 1e-12);
}

TEST(Sim, PlantDisturbanceIsConstantAcceleration)
{
    const PlantState s = plant_step(PlantState{}, Vec3::Zero(), Vec3(0, 2, 0), 0.5);
    EXPECT_NEAR(s.velocity.y(), 1.0, 1e-12);
    EXPECT_NEAR(s.position.y(), 0.25, 1e-12);
    EXPECT_EQ(s.acceleration, Vec3::Zero());
    EXPECT_THROW(plant_step(PlantState{}, Vec3::Zero(), Vec3::Zero(), 0.0), InputError);
}

TEST(Sim, DriftKeepsAccelerationAndLinearVelocity)
{
    PlantState s;
    s.velocity = Vec3(1, -2, 0.5);
    s.acceleration = Vec3(0.3, 0.1, -0.2);
    const PlantState start = s;
    const double dt = 0.05;
    for (int k = 1; k <= 200; ++k)
    {
        s = plant_step(s, Vec3::Zero(), Vec3::Zero(), dt);
        const double t = k * dt;
        EXPECT_EQ(s.acceleration, start.acceleration);
        EXPECT_LE((s.velocity - (start.velocity + start.acceleration * t)).norm(), 1e-12);
        EXPECT_LE((s.position - (start.velocity * t + 0.5 * start.acceleration * t * t)).norm(), 1e-10);
    }
}

TEST(Sim, DisturbanceMeanOverTick)
{
    Disturbance d;
    d.start = 1.02;
    d.duration = 0.05;
    d.accel = Vec3(0, -10, 0);
    EXPECT_EQ(d.mean_over(0.95, 0.05), Vec3::Zero());
    EXPECT_NEAR(d.mean_over(1.0, 0.05).y(), -10.0 * 0.03 / 0.05, 1e-12);
    EXPECT_NEAR(d.mean_over(1.05, 0.05).y(), -10.0 * 0.02 / 0.05, 1e-12);
    EXPECT_EQ(d.mean_over(1.1, 0.05), Vec3::Zero());
    // Total velocity change equals accel times duration whatever the alignment.
    double dv = 0.0;
    for (int k = 0; k < 100; ++k)
    {
        dv += d.mean_over(k * 0.05, 0.05).y() * 0.05;
    }
    EXPECT_NEAR(dv, -0.5, 1e-12);
    d.duration = 0.0;
    EXPECT_THROW(d.validate(), InputError);
}

TEST(Sim, NominalReachesGoalAccurately)
{
    const Scenario sc = demo("nominal");
    const ScenarioLog log = run_scenario(sc);
    EXPECT_EQ(log.outcome, RunOutcome::GoalReached);
    EXPECT_LE(max_error(log), 1e-2);
    EXPECT_GE(min_margin(log), -1e-3);
    for (std::size_t i = 0; i < log.records.size(); ++i)
    {
        EXPECT_EQ(log.records[i].wall_step, static_cast<int>(i));
        if (i > 0)
        {
            EXPECT_GT(log.records[i].sim_time, log.records[i - 1].sim_time);
        }
    }
}

TEST(Sim, ImpulseRecoversWithinThreeSeconds)
{
    const Scenario sc = demo("impulse");
    const ScenarioLog log = run_scenario(sc);
    EXPECT_EQ(log.outcome, RunOutcome::GoalReached);
    EXPECT_GE(min_margin(log), -1e-3);
    const double end = impulse_end(sc);
    EXPECT_GT(max_error(log, end), 0.05);
    EXPECT_LT(max_error(log, end + 3.0), 0.05);
    EXPECT_FALSE(log.records.back().recovery);
}

TEST(Sim, ImpulseDelaysVirtualTime)
{
    const Scenario sc = demo("impulse");
    Scenario calm = sc;
    calm.disturbances.clear();
    const ScenarioLog hit = run_scenario(sc);
    const ScenarioLog base = run_scenario(calm);
    const double end = impulse_end(sc);
    const std::size_t n = std::min(hit.records.size(), base.records.size());

    double run = 0.0;
    double longest = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        if (hit.records[i].sim_time <= end)
        {
            continue;
        }
        run = hit.records[i].t < base.records[i].t ? run + sc.config.dt : 0.0;
        longest = std::max(longest, run);
    }
    EXPECT_GE(longest, 2.0);
}

TEST(Sim, WindKeepsCorridorWhileBaselineLeaves)
{
    const Scenario sc = demo("wind");
    const ScenarioLog log = run_scenario(sc);
    EXPECT_EQ(log.outcome, RunOutcome::GoalReached);
    EXPECT_GE(min_margin(log), -1e-3);

    const ScenarioLog baseline = run_feedback_baseline(sc);
    EXPECT_EQ(baseline.name, "wind_baseline");
    EXPECT_LT(min_margin(baseline), -1e-3);
}

TEST(Sim, BaselineTracksCalmReference)
{
    const Scenario sc = demo("nominal");
    const ScenarioLog log = run_feedback_baseline(sc);
    EXPECT_GE(min_margin(log), -1e-3);
}

TEST(Sim, BlockingWindAborts)
{
    const ScenarioLog log = run_scenario(demo("blocking_wind"));
    EXPECT_EQ(log.outcome, RunOutcome::Aborted);
    EXPECT_NE(log.diagnostic.find("persistent infeasibility"), std::string::npos) << log.diagnostic;
    int streak = 0;
    for (auto it = log.records.rbegin(); it != log.records.rend() && it->recovery; ++it)
    {
        ++streak;
    }
    EXPECT_EQ(streak, 11);
}

TEST(Sim, StartOutsideCorridorIsInputError)
{
    EXPECT_THROW(run_scenario(demo("start_outside")), InputError);
}

TEST(Sim, SeededRunsAreReproducible)
{
    Scenario sc = demo("nominal");
    sc.gust_std = 0.3;
    sc.duration = 3.0;
    const ScenarioLog a = run_scenario(sc);
    const ScenarioLog b = run_scenario(sc);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i)
    {
        const TickRecord &x = a.records[i];
        const TickRecord &y = b.records[i];
        EXPECT_EQ(x.plant.position, y.plant.position);
        EXPECT_EQ(x.plant.velocity, y.plant.velocity);
        EXPECT_EQ(x.plant.acceleration, y.plant.acceleration);
        EXPECT_EQ(x.input, y.input);
        EXPECT_EQ(x.t, y.t);
        EXPECT_EQ(x.v_t, y.v_t);
        EXPECT_EQ(x.iterations, y.iterations);
    }

    sc.seed += 1;
    const ScenarioLog c = run_scenario(sc);
    EXPECT_NE(a.records.back().plant.position, c.records.back().plant.position);
}

TEST(Sim, CsvHasFixedHeaderAndOneRowPerTick)
{
    Scenario sc = demo("nominal");
    sc.duration = 0.5;
    const ScenarioLog log = run_scenario(sc);
    std::ostringstream os;
    write_csv(log, os);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "wall_step,sim_time,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz,jt,t,v_t,tracking_error,min_margin,"
                    "iterations,solve_time,recovery,status");
    int rows = 0;
    while (std::getline(in, line))
    {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 22);
        ++rows;
    }
    EXPECT_EQ(rows, 10);
    EXPECT_EQ(log.outcome, RunOutcome::DurationElapsed);
}
