#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fal/commands.hpp"

namespace {

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
    app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated adversarial learning simulator"};
    app.require_subcommand(1);

    fal::RunOptions run_opt;
    auto add_run = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", run_opt.config_path, "JSON config file");
        sub->add_option("--preset", run_opt.preset, "theory | experiment6");
        sub->add_option("--set", run_opt.overrides, "key=value override (dotted keys for nested objects)");
        sub->add_option("-o,--out", run_opt.out, "output directory");
        return sub;
    };
    CLI::App* run_cmd = add_run("run", "train with FAL and write metrics.csv, resolved_config.json, curves.svg");
    CLI::App* fedavg_cmd = add_run("fedavg", "same loop without the adversary");

    fal::VerifyOptions ver;
    CLI::App* verify_cmd = app.add_subcommand("verify", "run a verification study");
    verify_cmd->add_option("study", ver.study, "uniform-approx | coupling | fl-gap | finite-diff | convergence")
        ->required();
    verify_cmd->add_option("-o,--out", ver.out, "output directory")->required();
    optional_flag(verify_cmd, "--seed", ver.seed, "base seed");
    optional_flag(verify_cmd, "--m-grid", ver.m_grid, "comma-separated widths");
    verify_cmd->get_option("--m-grid")->delimiter(',');
    optional_flag(verify_cmd, "--K", ver.local_steps, "local steps");
    optional_flag(verify_cmd, "--seeds", ver.seeds, "number of seeds");
    optional_flag(verify_cmd, "--rounds", ver.rounds, "communication rounds");
    optional_flag(verify_cmd, "--m", ver.width, "network width");
    optional_flag(verify_cmd, "--samples", ver.samples, "test inputs per seed (uniform-approx)");
    optional_flag(verify_cmd, "--rho", ver.rho, "adversary radius");
    optional_flag(verify_cmd, "--delta", ver.delta, "data separation");

    fal::GenDataOptions gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "write a dataset as CSV and print its separability");
    gen_cmd->add_option("kind", gen.kind, "sphere | clusters")->required();
    gen_cmd->add_option("-o,--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "data seed");
    gen_cmd->add_option("--N", gen.n_clients, "clients (sphere)");
    gen_cmd->add_option("--J", gen.per_client, "points per client (sphere)");
    gen_cmd->add_option("--d", gen.d, "input dimension (sphere)");
    gen_cmd->add_option("--delta", gen.delta, "minimum pairwise distance (sphere)");
    gen_cmd->add_option("--rho", gen.rho, "adversary radius for gamma_bound (sphere)");
    gen_cmd->add_option("--scale", gen.scale, "separability scale (clusters)");
    gen_cmd->add_option("--clients", gen.clusters_clients, "clients (clusters)");
    gen_cmd->add_option("--flip-rate", gen.flip_rate, "training label flip probability (clusters)");
    gen_cmd->add_flag("--shard-by-cluster", gen.shard_by_cluster, "give each client contiguous clusters");
    gen_cmd->add_option("--scaling", gen.scaling, "means | features (clusters)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fal::kExitConfig;
    }

    if (run_cmd->parsed()) return fal::cmd_run(run_opt, fal::Algorithm::Fal, std::cout, std::cerr);
    if (fedavg_cmd->parsed()) return fal::cmd_run(run_opt, fal::Algorithm::FedAvg, std::cout, std::cerr);
    if (verify_cmd->parsed()) return fal::cmd_verify(ver, std::cout, std::cerr);
    if (gen_cmd->parsed()) return fal::cmd_gen_data(gen, std::cout, std::cerr);
    return fal::kExitConfig;
}
