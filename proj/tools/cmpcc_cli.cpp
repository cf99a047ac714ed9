#include "cmpcc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv)
{
    using namespace cmpcc::cli;

    CLI::App app{"Corridor-constrained contouring MPC toolkit"};
    app.require_subcommand(1);

    RunFlags flags;
    std::string scenario;
    std::string out;
    std::uint64_t seed = 0;
    double rho = 0.0;

    auto *run = app.add_subcommand("run", "Run a closed-loop scenario and print a summary");
    run->add_option("scenario", scenario, "Scenario JSON file")->required();
    run->add_option("--out", out, "CSV log path");
    auto *seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
    auto *rho_opt = run->add_option("--rho", rho, "Override the progress weight")->check(CLI::NonNegativeNumber);
    run->add_flag("--no-recovery", flags.no_recovery, "Disable the infeasibility relaxation");

    std::string trajectory;
    std::string corridor;
    auto *validate = app.add_subcommand("validate", "Check a trajectory and corridor pair");
    validate->add_option("trajectory", trajectory, "Trajectory JSON file")->required();
    validate->add_option("corridor", corridor, "Corridor JSON file")->required();

    std::vector<double> thetas;
    std::string vertices;
    auto *tube = app.add_subcommand("tube", "Write tube rows and section vertices as CSV");
    tube->add_option("trajectory", trajectory, "Trajectory JSON file")->required();
    tube->add_option("corridor", corridor, "Corridor JSON file")->required();
    tube->add_option("--theta", thetas, "Reference times (repeatable)");
    tube->add_option("--out", out, "Rows CSV path (default stdout)");
    tube->add_option("--vertices", vertices, "Vertices CSV path");

    auto *dump = app.add_subcommand("solve-dump", "Dump the first horizon QP of a scenario");
    dump->add_option("scenario", scenario, "Scenario JSON file")->required();
    dump->add_option("--out", out, "Dump path (default stdout)");
    auto *dump_rho = dump->add_option("--rho", rho, "Override the progress weight")->check(CLI::NonNegativeNumber);
    dump->add_flag("--no-recovery", flags.no_recovery, "Disable the infeasibility relaxation");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInputError;
    }

    if (!out.empty())
    {
        flags.out = out;
    }
    if (*run)
    {
        if (*seed_opt)
        {
            flags.seed = seed;
        }
        if (*rho_opt)
        {
            flags.rho = rho;
        }
        return cmd_run(scenario, flags, std::cout, std::cerr);
    }
    if (*validate)
    {
        return cmd_validate(trajectory, corridor, std::cout);
    }
    if (*tube)
    {
        std::optional<std::filesystem::path> rows_path;
        std::optional<std::filesystem::path> verts_path;
        if (!out.empty())
        {
            rows_path = out;
        }
        if (!vertices.empty())
        {
            verts_path = vertices;
        }
        return cmd_tube(trajectory, corridor, thetas, rows_path, verts_path, std::cout, std::cerr);
    }
    if (*dump_rho)
    {
        flags.rho = rho;
    }
    return cmd_solve_dump(scenario, flags, std::cout, std::cerr);
}
