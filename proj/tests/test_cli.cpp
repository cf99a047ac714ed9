#include "cmpcc/cli.hpp"
#include "cmpcc/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace cmpcc;
using namespace cmpcc::cli;
namespace fs = std::filesystem;

namespace
{

    const fs::path kData = CMPCC_DATA_DIR;
    const fs::path kGolden = CMPCC_GOLDEN_DIR;

    std::string slurp(const fs::path &p)
    {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path scratch(const std::string &name)
    {
        const fs::path dir = fs::temp_directory_path() / "cmpcc_test_cli";
        fs::create_directories(dir);
        return dir / name;
    }

    // Writes a document and returns its path.
    fs::path write_json(const std::string &name, const Json &doc)
    {
        const fs::path p = scratch(name);
        std::ofstream(p) << doc.dump(2);
        return p;
    }

    std::string input_error(const std::function<void()> &f)
    {
        try
        {
            f();
        }
        catch (const InputError &e)
        {
            return e.what();
        }
        return "";
    }

    struct Invocation
    {
        int code;
        std::string out;
        std::string err;
    };

    Invocation invoke(const std::string &args)
    {
        const fs::path out = scratch("stdout.txt");
        const fs::path err = scratch("stderr.txt");
        const std::string cmd =
            std::string(CMPCC_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    Json demo_scenario() { return Json::parse(slurp(kData / "scenarios" / "nominal.json")); }

} // namespace

TEST(Io, TrajectoryErrorsCarryJsonPointer)
{
    Json doc = Json::parse(slurp(kData / "demo_trajectory.json"));
    doc["segments"][1]["duration"] = "long";
    EXPECT_NE(input_error([&] { trajectory_from_json(doc); }).find("/segments/1/duration: expected a number"),
              std::string::npos);

    doc = Json::parse(slurp(kData / "demo_trajectory.json"));
    doc["segments"][0]["coeffs"].erase("z");
    EXPECT_NE(input_error([&] { trajectory_from_json(doc); }).find("/segments/0/coeffs: missing field \"z\""),
              std::string::npos);

    doc = Json::parse(slurp(kData / "demo_trajectory.json"));
    doc["segments"][2]["speed"] = 1;
    EXPECT_NE(input_error([&] { trajectory_from_json(doc); }).find("/segments/2/speed: unknown field"),
              std::string::npos);
}

TEST(Io, CorridorErrorsCarryJsonPointer)
{
    Json doc = Json::parse(slurp(kData / "demo_corridor.json"));
    doc["polyhedra"][2]["faces"][3]["normal"] = {1, 2};
    EXPECT_NE(input_error([&] { corridor_from_json(doc); }).find("/polyhedra/2/faces/3/normal: expected 3 numbers"),
              std::string::npos);

    doc = Json::parse(slurp(kData / "demo_corridor.json"));
    doc["polyhedra"][1]["faces"] = Json::array({doc["polyhedra"][1]["faces"][0]});
    EXPECT_NE(input_error([&] { corridor_from_json(doc); }).find("/polyhedra/1: polyhedron needs at least 4 faces"),
              std::string::npos);
}

TEST(Io, ScenarioResolvesRelativePathsAndReportsFile)
{
    const Scenario sc = load_scenario(kData / "scenarios" / "wind.json");
    EXPECT_EQ(sc.name, "wind");
    EXPECT_EQ(sc.corridor.size(), 3U);
    ASSERT_EQ(sc.disturbances.size(), 1U);
    EXPECT_EQ(sc.disturbances[0].kind, DisturbanceKind::Wind);
    EXPECT_NEAR(sc.config.rho, 1e-3, 1e-15);

    Json doc = demo_scenario();
    doc["trajectory"] = (kData / "demo_trajectory.json").string();
    doc["corridor"] = (kData / "demo_corridor.json").string();
    doc["mpcc"]["limits"]["v_max"] = {3, 3, -1};
    const fs::path bad = write_json("bad_limits.json", doc);
    const std::string what = input_error([&] { load_scenario(bad); });
    EXPECT_EQ(what.rfind(bad.string() + ": /mpcc", 0), 0U) << what;

    doc = demo_scenario();
    doc["trajectory"] = "missing.json";
    const std::string missing = input_error([&] { load_scenario(write_json("missing_traj.json", doc)); });
    EXPECT_NE(missing.find("missing.json: cannot open file"), std::string::npos) << missing;
}

TEST(Cli, SummaryMatchesLog)
{
    ScenarioLog log;
    log.name = "s";
    log.outcome = RunOutcome::GoalReached;
    for (int i = 0; i < 4; ++i)
    {
        TickRecord r;
        r.wall_step = i;
        r.tracking_error = 0.1 * i;
        r.margin = 0.5 - 0.1 * i;
        r.solve_time = 1e-3 * (i + 1);
        r.recovery = i == 2;
        log.records.push_back(r);
    }
    const RunSummary s = summarize(log);
    EXPECT_EQ(s.ticks, 4);
    EXPECT_TRUE(s.goal_reached);
    EXPECT_NEAR(s.max_tracking_error, 0.3, 1e-12);
    EXPECT_NEAR(s.min_margin, 0.2, 1e-12);
    EXPECT_NEAR(s.mean_solve_time, 2.5e-3, 1e-12);
    EXPECT_NEAR(s.max_solve_time, 4e-3, 1e-12);
    EXPECT_EQ(s.recovery_ticks, 1);
    EXPECT_EQ(format_summary(s), "scenario=s ticks=4 goal_reached=true max_tracking_error=0.3 min_margin=0.2 "
                                 "mean_solve_ms=2.5 max_solve_ms=4 recovery_ticks=1 outcome=goal_reached");
}

TEST(Cli, ValidateDemoPairPasses)
{
    std::ostringstream out;
    EXPECT_EQ(cmd_validate(kData / "demo_trajectory.json", kData / "demo_corridor.json", out), kExitOk);
    EXPECT_EQ(out.str().find("FAIL"), std::string::npos) << out.str();
    for (const char *name : {"trajectory_schema", "corridor_schema", "continuity", "polyhedra", "overlap",
                             "corridor_index", "reference_inside_corridor"})
    {
        EXPECT_NE(out.str().find(std::string("PASS ") + name), std::string::npos) << name;
    }
}

TEST(Cli, ValidateNamesNonOverlappingPair)
{
    std::ostringstream out;
    EXPECT_EQ(cmd_validate(kData / "demo_trajectory.json", kData / "invalid" / "corridor_gap.json", out),
              kExitInputError);
    EXPECT_NE(out.str().find("FAIL overlap: polyhedra 1 and 2 do not overlap"), std::string::npos) << out.str();
}

TEST(Cli, ValidateReportsJointGap)
{
    std::ostringstream out;
    EXPECT_EQ(cmd_validate(kData / "invalid" / "trajectory_jump.json", kData / "demo_corridor.json", out),
              kExitInputError);
    EXPECT_NE(out.str().find("FAIL continuity: joint 1 (segments 1 and 2): position gap 0.5"), std::string::npos)
        << out.str();
}

TEST(Cli, TubeCsvMatchesGolden)
{
    const fs::path rows = scratch("rows.csv");
    const fs::path verts = scratch("verts.csv");
    std::ostringstream out, err;
    ASSERT_EQ(cmd_tube(kData / "demo_trajectory.json", kData / "demo_corridor.json", {10.0, 26.0}, rows, verts, out,
                       err),
              kExitOk)
        << err.str();
    EXPECT_EQ(slurp(rows), slurp(kGolden / "tube_rows.csv"));
    EXPECT_EQ(slurp(verts), slurp(kGolden / "tube_vertices.csv"));
}

TEST(Cli, TubeRowsAreOrthogonalMidTrajectory)
{
    const ReferenceTrajectory traj = load_trajectory(kData / "demo_trajectory.json");
    const Corridor corr = load_corridor(kData / "demo_corridor.json");
    const double theta = 0.5 * (traj.t0() + traj.tm());
    std::ostringstream rows, verts;
    write_tubes(traj, corr, {theta}, rows, verts);
    std::istringstream in(rows.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, kTubeHeader);
    const Vec3 v = traj.eval(theta, 1).normalized();
    int count = 0;
    while (std::getline(in, line))
    {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double th, row, nx, ny, nz, offset, fallback;
        fields >> th >> row >> nx >> ny >> nz >> offset >> fallback;
        EXPECT_EQ(fallback, 0.0);
        EXPECT_LE(std::abs(Vec3(nx, ny, nz).normalized().dot(v)), 1e-9);
        ++count;
    }
    EXPECT_GE(count, 3);
}

TEST(Cli, TubeEmptyThetaListIsHeaderOnly)
{
    std::ostringstream out, err;
    const fs::path verts = scratch("empty_verts.csv");
    EXPECT_EQ(cmd_tube(kData / "demo_trajectory.json", kData / "demo_corridor.json", {}, std::nullopt, verts, out, err),
              kExitOk);
    EXPECT_EQ(out.str(), std::string(kTubeHeader) + "\n");
    EXPECT_EQ(slurp(verts), std::string(kVertexHeader) + "\n");

    EXPECT_EQ(cmd_tube(kData / "demo_trajectory.json", kData / "demo_corridor.json", {-1.0}, std::nullopt,
                       std::nullopt, out, err),
              kExitInputError);
}

TEST(Cli, SolveDumpDimensions)
{
    const fs::path dump_path = scratch("dump.txt");
    RunFlags flags;
    flags.out = dump_path;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_solve_dump(kData / "scenarios" / "nominal.json", flags, out, err), kExitOk) << err.str();
    EXPECT_NE(out.str().find("variables=320 "), std::string::npos) << out.str();
    std::istringstream dump(slurp(dump_path));
    std::string tag;
    long rows = 0, cols = 0; // variables, constraints
    dump >> tag >> rows >> cols;
    EXPECT_EQ(tag, "qp");
    EXPECT_EQ(rows, 320);
    EXPECT_EQ(cols, 585);
}

TEST(Cli, RunWritesCsvAndSummary)
{
    const fs::path csv = scratch("nominal.csv");
    RunFlags flags;
    flags.out = csv;
    std::ostringstream out, err;
    EXPECT_EQ(cmd_run(kData / "scenarios" / "nominal.json", flags, out, err), kExitOk) << err.str();
    EXPECT_EQ(out.str().rfind("scenario=nominal ", 0), 0U) << out.str();
    EXPECT_NE(out.str().find("goal_reached=true"), std::string::npos);
    EXPECT_EQ(slurp(csv).rfind(std::string(kLogHeader) + "\n", 0), 0U);
}

TEST(CliBinary, ExitCodes)
{
    const std::string scen = (kData / "scenarios").string();
    const Invocation nominal = invoke("run " + scen + "/nominal.json");
    EXPECT_EQ(nominal.code, 0) << nominal.err;
    EXPECT_NE(nominal.out.find("goal_reached=true"), std::string::npos);

    const Invocation outside = invoke("run " + scen + "/start_outside.json");
    EXPECT_EQ(outside.code, 1);
    EXPECT_NE(outside.err.find("face 2"), std::string::npos) << outside.err;

    const Invocation blocked = invoke("run " + scen + "/blocking_wind.json");
    EXPECT_EQ(blocked.code, 2);
    EXPECT_NE(blocked.err.find("persistent infeasibility"), std::string::npos) << blocked.err;

    const Invocation invalid = invoke("validate " + (kData / "demo_trajectory.json").string() + " " +
                                      (kData / "invalid" / "corridor_gap.json").string());
    EXPECT_EQ(invalid.code, 1);

    EXPECT_EQ(invoke("run").code, 1);
    EXPECT_EQ(invoke("bogus").code, 1);
}

TEST(CliBinary, DurationElapsedExitsThree)
{
    Json doc = demo_scenario();
    doc["trajectory"] = (kData / "demo_trajectory.json").string();
    doc["corridor"] = (kData / "demo_corridor.json").string();
    doc["duration_s"] = 1.0;
    const Invocation r = invoke("run " + write_json("short.json", doc).string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.out.find("outcome=duration_elapsed"), std::string::npos) << r.out;
}
